// Copyright 2026 The MyoCtl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "myoctl/net.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "myoctl/kernels.h"

namespace myoctl {
namespace {

double Sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double NegativePartNorm(const Eigen::VectorXd& x) {
  return x.cwiseMin(0.0).norm();
}

std::string FormatRow(const double* data, std::size_t n) {
  std::string line;
  char buf[32];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", data[i]);
    if (i > 0) line += ' ';
    line += buf;
  }
  return line;
}

std::vector<double> ParseRow(std::istream& in, std::size_t expected,
                             const std::string& what) {
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("weight file truncated at " + what);
  }
  std::istringstream row(line);
  std::vector<double> values;
  std::string token;
  while (row >> token) {
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(token, &used);
    } catch (const std::exception&) {
      throw std::runtime_error("weight file: bad number '" + token + "' in " +
                               what);
    }
    if (used != token.size() || !std::isfinite(value)) {
      throw std::runtime_error("weight file: non-finite or malformed '" +
                               token + "' in " + what);
    }
    values.push_back(value);
  }
  if (values.size() != expected) {
    throw std::runtime_error("weight file: " + what + " has " +
                             std::to_string(values.size()) +
                             " values, expected " + std::to_string(expected));
  }
  return values;
}

Eigen::VectorXd ToVector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

}  // namespace

LossKind ParseLossKind(const std::string& name) {
  if (name == "L0") return LossKind::kL0;
  if (name == "L1") return LossKind::kL1;
  if (name == "L2") return LossKind::kL2;
  throw std::invalid_argument("unknown loss kind: " + name);
}

std::string LossKindName(LossKind kind) {
  switch (kind) {
    case LossKind::kL0:
      return "L0";
    case LossKind::kL1:
      return "L1";
    case LossKind::kL2:
      return "L2";
  }
  return "?";
}

double ControlLoss(const LossSpec& loss, const Eigen::VectorXd& prediction,
                   const Eigen::VectorXd& target,
                   const Eigen::VectorXd& penalized) {
  double value = loss.error_scale * (prediction - target).norm();
  if (loss.kind == LossKind::kL1) value += loss.alpha * penalized.norm();
  if (loss.kind == LossKind::kL2) {
    value += loss.alpha * NegativePartNorm(penalized);
  }
  return value;
}

Normalization Normalization::Identity(int dim) {
  return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

Normalization Normalization::Fit(const Eigen::MatrixXd& rows) {
  if (rows.rows() == 0) {
    throw std::invalid_argument("cannot fit normalization on zero samples");
  }
  Normalization n;
  n.shift = rows.colwise().mean().transpose();
  n.scale.resize(rows.cols());
  for (Eigen::Index c = 0; c < rows.cols(); ++c) {
    const double var = (rows.col(c).array() - n.shift(c)).square().mean();
    const double sd = std::sqrt(var);
    n.scale(c) = sd > 1e-12 ? sd : 1.0;
  }
  return n;
}

Eigen::VectorXd Normalization::Normalize(const Eigen::VectorXd& x) const {
  return (x - shift).cwiseQuotient(scale);
}

Eigen::VectorXd Normalization::Denormalize(const Eigen::VectorXd& x) const {
  return x.cwiseProduct(scale) + shift;
}

struct Network::Workspace {
  // a[0] is the normalized input; a[l] the output of layer l.
  std::vector<std::vector<double>> a;
  std::vector<std::vector<double>> delta;
  std::vector<double> input_grad;

  explicit Workspace(const std::vector<int>& dims) {
    a.resize(dims.size());
    delta.resize(dims.size());
    for (std::size_t i = 0; i < dims.size(); ++i) {
      a[i].assign(dims[i], 0.0);
      delta[i].assign(dims[i], 0.0);
    }
    input_grad.assign(dims.front(), 0.0);
  }
};

Network::Network(std::vector<int> layer_dims, std::uint64_t seed)
    : dims_(std::move(layer_dims)) {
  Allocate();
  std::mt19937_64 rng(seed);
  for (int l = 0; l < num_layers(); ++l) {
    const double fan_in = dims_[l];
    const double fan_out = dims_[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : weights(l)) w = dist(rng);
  }
}

void Network::Allocate() {
  if (dims_.size() < 2) {
    throw std::invalid_argument("network needs at least two layer sizes");
  }
  for (int d : dims_) {
    if (d <= 0) throw std::invalid_argument("layer sizes must be positive");
  }
  w_offset_.clear();
  b_offset_.clear();
  std::size_t total = 0;
  for (int l = 0; l < num_layers(); ++l) {
    w_offset_.push_back(total);
    total += static_cast<std::size_t>(dims_[l]) * dims_[l + 1];
    b_offset_.push_back(total);
    total += dims_[l + 1];
  }
  params_.assign(total, 0.0);
  in_norm_ = Normalization::Identity(input_dim());
  out_norm_ = Normalization::Identity(output_dim());
  ResetOptimizer();
}

std::span<double> Network::weights(int layer) {
  return {params_.data() + w_offset_.at(layer),
          static_cast<std::size_t>(dims_[layer]) * dims_[layer + 1]};
}
std::span<const double> Network::weights(int layer) const {
  return {params_.data() + w_offset_.at(layer),
          static_cast<std::size_t>(dims_[layer]) * dims_[layer + 1]};
}
std::span<double> Network::bias(int layer) {
  return {params_.data() + b_offset_.at(layer),
          static_cast<std::size_t>(dims_[layer + 1])};
}
std::span<const double> Network::bias(int layer) const {
  return {params_.data() + b_offset_.at(layer),
          static_cast<std::size_t>(dims_[layer + 1])};
}

void Network::SetNormalization(Normalization input, Normalization output) {
  if (frozen_) throw std::logic_error("normalization is frozen");
  if (input.shift.size() != input_dim() || input.scale.size() != input_dim() ||
      output.shift.size() != output_dim() ||
      output.scale.size() != output_dim()) {
    throw std::invalid_argument("normalization size mismatch");
  }
  if ((input.scale.array() <= 0).any() || (output.scale.array() <= 0).any()) {
    throw std::invalid_argument("normalization scales must be positive");
  }
  in_norm_ = std::move(input);
  out_norm_ = std::move(output);
}

void Network::FitNormalization(const Eigen::MatrixXd& inputs,
                               const Eigen::MatrixXd& targets) {
  SetNormalization(Normalization::Fit(inputs), Normalization::Fit(targets));
}

void Network::ResetOptimizer() {
  adam_m_.assign(params_.size(), 0.0);
  adam_v_.assign(params_.size(), 0.0);
  adam_t_ = 0;
}

void Network::CheckInput(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim()) {
    throw std::invalid_argument("network input has size " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(input_dim()));
  }
}

void Network::ForwardNormalized(const double* x_n, Workspace& ws) const {
  const kernels::KernelTable& k = kernels::Active();
  std::copy(x_n, x_n + dims_[0], ws.a[0].begin());
  for (int l = 0; l < num_layers(); ++l) {
    k.affine(params_.data() + w_offset_[l], params_.data() + b_offset_[l],
             ws.a[l].data(), dims_[l + 1], dims_[l], ws.a[l + 1].data());
    if (l + 1 < num_layers()) {
      for (double& v : ws.a[l + 1]) v = Sigmoid(v);
    }
  }
}

void Network::Backward(Workspace& ws, double* grad) const {
  const kernels::KernelTable& k = kernels::Active();
  for (int l = num_layers() - 1; l >= 0; --l) {
    const std::vector<double>& d = ws.delta[l + 1];
    if (grad != nullptr) {
      k.add_outer(d.data(), ws.a[l].data(), dims_[l + 1], dims_[l],
                  grad + w_offset_[l]);
      double* gb = grad + b_offset_[l];
      for (int r = 0; r < dims_[l + 1]; ++r) gb[r] += d[r];
    }
    double* below = l > 0 ? ws.delta[l].data() : ws.input_grad.data();
    k.affine_transpose(params_.data() + w_offset_[l], d.data(), dims_[l + 1],
                       dims_[l], below);
    if (l > 0) {
      for (int c = 0; c < dims_[l]; ++c) {
        const double a = ws.a[l][c];
        below[c] *= a * (1.0 - a);
      }
    }
  }
}

Eigen::VectorXd Network::Forward(const Eigen::VectorXd& x) const {
  CheckInput(x);
  Workspace ws(dims_);
  const Eigen::VectorXd x_n = in_norm_.Normalize(x);
  ForwardNormalized(x_n.data(), ws);
  return out_norm_.Denormalize(ToVector(ws.a.back()));
}

Eigen::MatrixXd Network::ForwardRows(const Eigen::MatrixXd& inputs) const {
  Eigen::MatrixXd out(inputs.rows(), output_dim());
  for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
    out.row(r) = Forward(inputs.row(r).transpose()).transpose();
  }
  return out;
}

// Error in normalized output units, taken in the denormalized space so that a
// target copied from Forward gives exactly zero.
Eigen::VectorXd Network::NormalizedError(const Workspace& ws,
                                         const Eigen::VectorXd& target) const {
  const Eigen::VectorXd y = out_norm_.Denormalize(ToVector(ws.a.back()));
  return (y - target).cwiseQuotient(out_norm_.scale);
}

double Network::Mse(const Eigen::MatrixXd& inputs,
                    const Eigen::MatrixXd& targets) const {
  if (inputs.rows() != targets.rows() || targets.cols() != output_dim() ||
      inputs.cols() != input_dim() || inputs.rows() == 0) {
    throw std::invalid_argument("Mse: batch shape mismatch");
  }
  Workspace ws(dims_);
  double sum = 0.0;
  for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
    const Eigen::VectorXd x_n = in_norm_.Normalize(inputs.row(r).transpose());
    ForwardNormalized(x_n.data(), ws);
    const Eigen::VectorXd e = NormalizedError(ws, targets.row(r).transpose());
    sum += e.squaredNorm();
  }
  return sum / (static_cast<double>(inputs.rows()) * output_dim());
}

std::vector<double> Network::MseGradient(const Eigen::MatrixXd& inputs,
                                         const Eigen::MatrixXd& targets,
                                         double* mse) const {
  if (inputs.rows() != targets.rows() || targets.cols() != output_dim() ||
      inputs.cols() != input_dim() || inputs.rows() == 0) {
    throw std::invalid_argument("training batch shape mismatch");
  }
  Workspace ws(dims_);
  std::vector<double> grad(params_.size(), 0.0);
  const double norm = 2.0 / (static_cast<double>(inputs.rows()) * output_dim());
  double sum = 0.0;
  for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
    const Eigen::VectorXd x_n = in_norm_.Normalize(inputs.row(r).transpose());
    ForwardNormalized(x_n.data(), ws);
    const Eigen::VectorXd e = NormalizedError(ws, targets.row(r).transpose());
    sum += e.squaredNorm();
    for (int o = 0; o < output_dim(); ++o) ws.delta.back()[o] = norm * e(o);
    Backward(ws, grad.data());
  }
  if (mse != nullptr) {
    *mse = sum / (static_cast<double>(inputs.rows()) * output_dim());
  }
  return grad;
}

double Network::AdamStep(const Eigen::MatrixXd& inputs,
                         const Eigen::MatrixXd& targets) {
  double mse = 0.0;
  const std::vector<double> grad = MseGradient(inputs, targets, &mse);
  if (!std::isfinite(mse)) throw DivergedError("training loss is not finite");

  ++adam_t_;
  const kernels::AdamStepParams p{
      adam_.learning_rate,
      adam_.beta1,
      adam_.beta2,
      adam_.epsilon,
      1.0 - std::pow(adam_.beta1, static_cast<double>(adam_t_)),
      1.0 - std::pow(adam_.beta2, static_cast<double>(adam_t_))};
  kernels::Active().adam(p, grad.data(), params_.data(), adam_m_.data(),
                         adam_v_.data(), params_.size());
  return mse;
}

double Network::TrainBatch(const Eigen::MatrixXd& inputs,
                           const Eigen::MatrixXd& targets, int epochs) {
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  for (int e = 0; e < epochs; ++e) AdamStep(inputs, targets);
  const double mse = Mse(inputs, targets);
  if (!std::isfinite(mse)) throw DivergedError("training loss is not finite");
  return mse;
}

Eigen::VectorXd Network::InputGradient(const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& target,
                                       const LossSpec& loss,
                                       IndexRange slice) const {
  CheckInput(x);
  if (target.size() != output_dim()) {
    throw std::invalid_argument("InputGradient: target size mismatch");
  }
  if (slice.begin < 0 || slice.end > input_dim() || slice.size() <= 0) {
    throw std::invalid_argument("InputGradient: bad slice");
  }
  Workspace ws(dims_);
  const Eigen::VectorXd x_n = in_norm_.Normalize(x);
  ForwardNormalized(x_n.data(), ws);
  const Eigen::VectorXd y = out_norm_.Denormalize(ToVector(ws.a.back()));
  const Eigen::VectorXd err = y - target;
  const double err_norm = err.norm();
  for (int o = 0; o < output_dim(); ++o) {
    // dL/dy_n = dL/dy * scale.
    ws.delta.back()[o] = err_norm > 0.0 ? loss.error_scale * err(o) / err_norm *
                                              out_norm_.scale(o)
                                        : 0.0;
  }
  Backward(ws, nullptr);
  Eigen::VectorXd g(slice.size());
  for (int i = 0; i < slice.size(); ++i) {
    const int j = slice.begin + i;
    g(i) = ws.input_grad[j] / in_norm_.scale(j);
  }
  const Eigen::VectorXd xs = x.segment(slice.begin, slice.size());
  if (loss.kind == LossKind::kL1) {
    const double n = xs.norm();
    if (n > 0.0) g += loss.alpha * xs / n;
  } else if (loss.kind == LossKind::kL2) {
    const Eigen::VectorXd neg = xs.cwiseMin(0.0);
    const double n = neg.norm();
    if (n > 0.0) g += loss.alpha * neg / n;
  }
  return g;
}

// Layout, one record per line:
//   MYOCTL-NET v1 <role>
//   <d0> <d1> ... <dL>
//   per layer: weights (row-major, out x in), then biases
//   norm frozen|open
//   input shift, input scale, output shift, output scale
//   adam <t> <lr> <beta1> <beta2> <eps>
//   adam m, adam v
void Network::Write(std::ostream& out, const std::string& role) const {
  out << kMagic;
  if (!role.empty()) out << ' ' << role;
  out << '\n';
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    out << (i ? " " : "") << dims_[i];
  }
  out << '\n';
  for (int l = 0; l < num_layers(); ++l) {
    const auto w = weights(l);
    const auto b = bias(l);
    out << FormatRow(w.data(), w.size()) << '\n';
    out << FormatRow(b.data(), b.size()) << '\n';
  }
  out << "norm " << (frozen_ ? "frozen" : "open") << '\n';
  out << FormatRow(in_norm_.shift.data(), in_norm_.shift.size()) << '\n';
  out << FormatRow(in_norm_.scale.data(), in_norm_.scale.size()) << '\n';
  out << FormatRow(out_norm_.shift.data(), out_norm_.shift.size()) << '\n';
  out << FormatRow(out_norm_.scale.data(), out_norm_.scale.size()) << '\n';
  const double hyper[] = {adam_.learning_rate, adam_.beta1, adam_.beta2,
                          adam_.epsilon};
  out << "adam " << adam_t_ << ' ' << FormatRow(hyper, 4) << '\n';
  out << FormatRow(adam_m_.data(), adam_m_.size()) << '\n';
  out << FormatRow(adam_v_.data(), adam_v_.size()) << '\n';
}

Network Network::Read(std::istream& in, std::string* role) {
  std::string line;
  if (!std::getline(in, line) || line.rfind(kMagic, 0) != 0) {
    throw std::runtime_error("not a MYOCTL-NET v1 weight file");
  }
  if (role != nullptr) {
    std::string rest = line.substr(std::string(kMagic).size());
    const auto first = rest.find_first_not_of(' ');
    *role = first == std::string::npos ? "" : rest.substr(first);
  }
  if (!std::getline(in, line)) {
    throw std::runtime_error("weight file truncated at layer sizes");
  }
  Network net;
  {
    std::istringstream dims(line);
    int d = 0;
    while (dims >> d) net.dims_.push_back(d);
    if (!dims.eof()) throw std::runtime_error("weight file: bad layer sizes");
  }
  net.Allocate();
  for (int l = 0; l < net.num_layers(); ++l) {
    const std::string tag = "layer " + std::to_string(l);
    auto w = ParseRow(in, net.weights(l).size(), tag + " weights");
    std::copy(w.begin(), w.end(), net.weights(l).begin());
    auto b = ParseRow(in, net.bias(l).size(), tag + " biases");
    std::copy(b.begin(), b.end(), net.bias(l).begin());
  }
  if (!std::getline(in, line) ||
      (line != "norm frozen" && line != "norm open")) {
    throw std::runtime_error("weight file: missing normalization header");
  }
  const bool frozen = line == "norm frozen";
  const std::size_t ni = net.input_dim();
  const std::size_t no = net.output_dim();
  Normalization input{ToVector(ParseRow(in, ni, "input shift")),
                      ToVector(ParseRow(in, ni, "input scale"))};
  Normalization output{ToVector(ParseRow(in, no, "output shift")),
                       ToVector(ParseRow(in, no, "output scale"))};
  net.SetNormalization(std::move(input), std::move(output));
  net.frozen_ = frozen;
  // The optimizer block is optional.
  if (std::getline(in, line) && line.rfind("adam ", 0) == 0) {
    std::istringstream head(line.substr(5));
    long t = 0;
    if (!(head >> t) || t < 0) {
      throw std::runtime_error("weight file: bad adam header");
    }
    std::string rest;
    std::getline(head, rest);
    std::istringstream hyper_in(rest + "\n");
    auto hyper = ParseRow(hyper_in, 4, "adam hyperparameters");
    net.adam_ = {hyper[0], hyper[1], hyper[2], hyper[3]};
    net.adam_m_ = ParseRow(in, net.params_.size(), "adam m");
    net.adam_v_ = ParseRow(in, net.params_.size(), "adam v");
    net.adam_t_ = t;
  }
  return net;
}

void Network::Save(const std::filesystem::path& path,
                   const std::string& role) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  Write(out, role);
  if (!out) throw std::runtime_error("error writing " + path.string());
}

Network Network::Load(const std::filesystem::path& path, std::string* role) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return Read(in, role);
}

void TrainMiniBatches(Network& net, const Eigen::MatrixXd& inputs,
                      const Eigen::MatrixXd& targets, int epochs,
                      int batch_size, double learning_rate,
                      double final_learning_rate, std::mt19937_64& rng) {
  if (batch_size < 1 || epochs < 0 || !(learning_rate > 0.0) ||
      !(final_learning_rate > 0.0)) {
    throw std::invalid_argument("bad mini-batch training options");
  }
  std::vector<int> order(inputs.rows());
  std::iota(order.begin(), order.end(), 0);
  const double decay =
      epochs > 1
          ? std::pow(final_learning_rate / learning_rate, 1.0 / (epochs - 1))
          : 1.0;
  for (int e = 0; e < epochs; ++e) {
    net.adam().learning_rate = learning_rate * std::pow(decay, e);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(batch_size));
      const std::vector<int> rows(order.begin() + start, order.begin() + end);
      net.AdamStep(inputs(rows, Eigen::all), targets(rows, Eigen::all));
    }
  }
}

}  // namespace myoctl
