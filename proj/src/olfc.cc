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

#include "myoctl/olfc.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace myoctl {
namespace {

constexpr const char* kNetworkFile = "network.txt";
constexpr const char* kBufferFile = "buffer.csv";
constexpr const char* kConstantsFile = "constants.txt";

Eigen::VectorXd Concat(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd x(a.size() + b.size());
  x << a, b;
  return x;
}

std::string Format(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Uniform in the ball of radius `radius`.
MuscleVector SampleBall(Rng& rng, int dim, double radius) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  MuscleVector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = normal(rng);
  const double n = v.norm();
  if (n == 0.0) return MuscleVector::Zero(dim);
  return v * (radius * std::pow(unit(rng), 1.0 / dim) / n);
}

}  // namespace

NetworkKind ParseNetworkKind(const std::string& name) {
  if (name == "typeA" || name == "A") return NetworkKind::kTypeA;
  if (name == "typeB" || name == "B") return NetworkKind::kTypeB;
  throw std::invalid_argument("unknown network kind: " + name);
}

std::string NetworkKindName(NetworkKind kind) {
  return kind == NetworkKind::kTypeA ? "typeA" : "typeB";
}

std::string OlfcRole(NetworkKind kind) {
  return "olfc-" + NetworkKindName(kind);
}

void OlfcConstants::Validate() const {
  if (!(c_length > 0.0) || n_thre < 1 || n_data < 1 || n_limit < 0 ||
      n_const < 0 || n_epoch < 1 || !(gamma_max >= 0.0) || n_batch < 1 ||
      n_update < 0 || !(alpha >= 0.0) || buffer_capacity < 1 ||
      !(s_dtheta > 0.0) || !(loss_error_scale > 0.0)) {
    throw std::invalid_argument("invalid OLFC constants");
  }
}

std::vector<TransitionSample> GenPretrainData(const ArmModel& model, int n,
                                              double s_dtheta, Rng& rng) {
  if (n < 1) throw std::invalid_argument("need at least one sample");
  if (!(s_dtheta > 0.0)) throw std::invalid_argument("s_dtheta must be > 0");
  std::normal_distribution<double> step(0.0, s_dtheta);
  std::vector<TransitionSample> data;
  data.reserve(n);
  for (int i = 0; i < n; ++i) {
    TransitionSample s;
    s.theta_from = SamplePose(rng, model);
    JointVector to = s.theta_from;
    for (int j = 0; j < to.size(); ++j) to[j] += step(rng);
    s.theta_to = model.Clamp(to);
    s.delta_l =
        MuscleLengths(model, s.theta_to) - MuscleLengths(model, s.theta_from);
    data.push_back(std::move(s));
  }
  return data;
}

double EvaluateLoss(LossKind kind, const JointVector& theta_pred,
                    const JointVector& theta_ref, const MuscleVector& delta_l,
                    double alpha, double error_scale) {
  return ControlLoss({kind, alpha, error_scale}, theta_pred, theta_ref,
                     delta_l);
}

OlfcController::OlfcController(NetworkKind kind, Network network,
                               OlfcConstants constants, std::uint64_t seed)
    : kind_(kind), net_(std::move(network)), constants_(constants), rng_(seed) {
  constants_.Validate();
  const bool shape_ok = kind_ == NetworkKind::kTypeA
                            ? net_.input_dim() % 2 == 0
                            : net_.input_dim() > net_.output_dim();
  if (!shape_ok) {
    throw std::invalid_argument("network shape does not fit " +
                                NetworkKindName(kind_));
  }
}

int OlfcController::num_joints() const {
  return kind_ == NetworkKind::kTypeA ? net_.input_dim() / 2
                                      : net_.output_dim();
}

int OlfcController::num_muscles() const {
  return kind_ == NetworkKind::kTypeA ? net_.output_dim()
                                      : net_.input_dim() - net_.output_dim();
}

Eigen::VectorXd OlfcController::TypeBInput(const JointVector& theta_cur,
                                           const MuscleVector& delta_l) const {
  return Concat(theta_cur, delta_l);
}

MuscleVector OlfcController::PredictDeltaL(const JointVector& theta_cur,
                                           const JointVector& theta_ref) const {
  if (kind_ != NetworkKind::kTypeA) {
    throw std::logic_error("PredictDeltaL needs a Type A network");
  }
  return net_.Forward(Concat(theta_cur, theta_ref));
}

JointVector OlfcController::PredictTheta(const JointVector& theta_cur,
                                         const MuscleVector& delta_l) const {
  if (kind_ != NetworkKind::kTypeB) {
    throw std::logic_error("PredictTheta needs a Type B network");
  }
  return net_.Forward(TypeBInput(theta_cur, delta_l));
}

bool OlfcController::RecordTransition(const JointVector& theta_from,
                                      const JointVector& theta_to,
                                      const MuscleVector& l_ref_from,
                                      const MuscleVector& l_ref_to) {
  if (!theta_from.allFinite() || !theta_to.allFinite() ||
      !l_ref_from.allFinite() || !l_ref_to.allFinite()) {
    throw std::invalid_argument("transition contains non-finite values");
  }
  const MuscleVector delta = l_ref_to - l_ref_from;
  if (!(delta.norm() < constants_.c_length)) return false;
  buffer_.push_back({theta_from, theta_to, delta});
  while (static_cast<int>(buffer_.size()) > constants_.buffer_capacity) {
    buffer_.pop_front();
  }
  return true;
}

bool OlfcController::ReadyToLearn() const {
  return static_cast<int>(buffer_.size()) >= constants_.n_thre;
}

void OlfcController::AppendRow(Batch& batch, int row, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& y) const {
  batch.inputs.row(row) = x.transpose();
  batch.targets.row(row) = y.transpose();
}

OlfcController::Batch OlfcController::BuildOnlineBatch(const ArmModel& model) {
  if (!ReadyToLearn()) {
    throw std::logic_error("online batch needs at least N_thre samples");
  }
  const int rows = constants_.n_data + constants_.n_limit + constants_.n_const;
  Batch batch{Eigen::MatrixXd(rows, net_.input_dim()),
              Eigen::MatrixXd(rows, net_.output_dim())};
  auto add_transition = [&](int row, const JointVector& from,
                            const JointVector& to, const MuscleVector& dl) {
    if (kind_ == NetworkKind::kTypeA) {
      AppendRow(batch, row, Concat(from, to), dl);
    } else {
      AppendRow(batch, row, TypeBInput(from, dl), to);
    }
  };

  int row = 0;
  const int size = static_cast<int>(buffer_.size());
  if (size >= constants_.n_data) {
    std::vector<int> index(size);
    std::iota(index.begin(), index.end(), 0);
    // Partial Fisher-Yates: the first n_data entries are a uniform draw
    // without replacement.
    for (int i = 0; i < constants_.n_data; ++i) {
      std::uniform_int_distribution<int> pick(i, size - 1);
      std::swap(index[i], index[pick(rng_)]);
      const TransitionSample& s = buffer_[index[i]];
      add_transition(row++, s.theta_from, s.theta_to, s.delta_l);
    }
  } else {
    std::uniform_int_distribution<int> pick(0, size - 1);
    for (int i = 0; i < constants_.n_data; ++i) {
      const TransitionSample& s = buffer_[pick(rng_)];
      add_transition(row++, s.theta_from, s.theta_to, s.delta_l);
    }
  }
  const int nm = num_muscles();
  for (int i = 0; i < constants_.n_limit; ++i) {
    const JointVector theta = SamplePose(rng_, model);
    add_transition(row++, theta, theta, MuscleVector::Zero(nm));
  }
  std::normal_distribution<double> step(0.0, constants_.s_dtheta);
  for (int i = 0; i < constants_.n_const; ++i) {
    const JointVector theta = SamplePose(rng_, model);
    if (kind_ == NetworkKind::kTypeA) {
      JointVector to = theta;
      for (int j = 0; j < to.size(); ++j) to[j] += step(rng_);
      to = model.Clamp(to);
      const Eigen::VectorXd x = Concat(theta, to);
      AppendRow(batch, row++, x, net_.Forward(x));
    } else {
      const Eigen::VectorXd x =
          TypeBInput(theta, SampleBall(rng_, nm, constants_.c_length));
      AppendRow(batch, row++, x, net_.Forward(x));
    }
  }
  return batch;
}

double OlfcController::OnlineUpdate(const ArmModel& model) {
  const Batch batch = BuildOnlineBatch(model);
  return net_.TrainBatch(batch.inputs, batch.targets, constants_.n_epoch);
}

double OlfcController::Loss(const JointVector& theta_cur,
                            const JointVector& theta_ref,
                            const MuscleVector& delta_l, LossKind kind) const {
  return EvaluateLoss(kind, PredictTheta(theta_cur, delta_l), theta_ref,
                      delta_l, constants_.alpha, constants_.loss_error_scale);
}

MuscleVector OlfcController::ComputeDeltaL(const JointVector& theta_cur,
                                           const JointVector& theta_ref,
                                           LossKind kind, const ArmModel& model,
                                           DeltaLTrace* trace) const {
  if (kind_ == NetworkKind::kTypeA) return PredictDeltaL(theta_cur, theta_ref);

  const int nj = num_joints();
  const int nm = num_muscles();
  const LossSpec spec{kind, constants_.alpha, constants_.loss_error_scale};
  MuscleVector dl =
      MuscleLengths(model, theta_ref) - MuscleLengths(model, theta_cur);
  double best = Loss(theta_cur, theta_ref, dl, kind);
  if (trace != nullptr) {
    trace->losses = {best};
    trace->step_sizes.clear();
  }
  for (int it = 0; it < constants_.n_update; ++it) {
    const Eigen::VectorXd g = net_.InputGradient(
        TypeBInput(theta_cur, dl), theta_ref, spec, {nj, nj + nm});
    if (!g.allFinite()) {
      throw std::runtime_error("non-finite loss gradient in dl search");
    }
    MuscleVector best_dl = dl;
    double best_gamma = 0.0;
    for (int k = 1; k <= constants_.n_batch; ++k) {
      const double gamma = constants_.gamma_max * k / constants_.n_batch;
      const MuscleVector candidate = dl - gamma * g;
      const double loss = Loss(theta_cur, theta_ref, candidate, kind);
      if (loss < best) {
        best = loss;
        best_dl = candidate;
        best_gamma = gamma;
      }
    }
    dl = best_dl;
    if (trace != nullptr) {
      trace->losses.push_back(best);
      trace->step_sizes.push_back(best_gamma);
    }
  }
  return dl;
}

void OlfcController::SaveCheckpoint(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  net_.Save(dir / kNetworkFile, OlfcRole(kind_));

  std::ofstream buffer(dir / kBufferFile);
  if (!buffer)
    throw std::runtime_error("cannot write " + (dir / kBufferFile).string());
  const int nj = num_joints();
  const int nm = num_muscles();
  std::string header;
  for (int j = 1; j <= nj; ++j)
    header += "theta_from_" + std::to_string(j) + ",";
  for (int j = 1; j <= nj; ++j) header += "theta_to_" + std::to_string(j) + ",";
  for (int i = 1; i <= nm; ++i) {
    header += "dl_" + std::to_string(i) + (i < nm ? "," : "");
  }
  buffer << header << '\n';
  for (const TransitionSample& s : buffer_) {
    const Eigen::VectorXd row =
        Concat(Concat(s.theta_from, s.theta_to), s.delta_l);
    for (int c = 0; c < row.size(); ++c) {
      buffer << (c ? "," : "") << Format(row[c]);
    }
    buffer << '\n';
  }
  if (!buffer) throw std::runtime_error("error writing checkpoint buffer");

  std::ofstream out(dir / kConstantsFile);
  const OlfcConstants& c = constants_;
  out << "kind = " << NetworkKindName(kind_) << '\n'
      << "c_length = " << Format(c.c_length) << '\n'
      << "n_thre = " << c.n_thre << '\n'
      << "n_data = " << c.n_data << '\n'
      << "n_limit = " << c.n_limit << '\n'
      << "n_const = " << c.n_const << '\n'
      << "n_epoch = " << c.n_epoch << '\n'
      << "gamma_max = " << Format(c.gamma_max) << '\n'
      << "n_batch = " << c.n_batch << '\n'
      << "n_update = " << c.n_update << '\n'
      << "alpha = " << Format(c.alpha) << '\n'
      << "buffer_capacity = " << c.buffer_capacity << '\n'
      << "s_dtheta = " << Format(c.s_dtheta) << '\n'
      << "loss_error_scale = " << Format(c.loss_error_scale) << '\n'
      << "rng = " << rng_ << '\n';
  if (!out) throw std::runtime_error("error writing checkpoint constants");
}

OlfcController OlfcController::LoadCheckpoint(
    const std::filesystem::path& dir) {
  std::ifstream in(dir / kConstantsFile);
  if (!in) {
    throw std::runtime_error("cannot open " + (dir / kConstantsFile).string());
  }
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) {
      throw std::runtime_error("malformed constants line: " + line);
    }
    kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error("checkpoint lacks " + key);
    return it->second;
  };
  OlfcConstants c;
  c.c_length = std::stod(get("c_length"));
  c.n_thre = std::stoi(get("n_thre"));
  c.n_data = std::stoi(get("n_data"));
  c.n_limit = std::stoi(get("n_limit"));
  c.n_const = std::stoi(get("n_const"));
  c.n_epoch = std::stoi(get("n_epoch"));
  c.gamma_max = std::stod(get("gamma_max"));
  c.n_batch = std::stoi(get("n_batch"));
  c.n_update = std::stoi(get("n_update"));
  c.alpha = std::stod(get("alpha"));
  c.buffer_capacity = std::stoi(get("buffer_capacity"));
  c.s_dtheta = std::stod(get("s_dtheta"));
  c.loss_error_scale = std::stod(get("loss_error_scale"));
  const NetworkKind kind = ParseNetworkKind(get("kind"));

  std::string role;
  Network net = Network::Load(dir / kNetworkFile, &role);
  if (role != OlfcRole(kind)) {
    throw std::runtime_error("checkpoint network role '" + role +
                             "' does not match kind " + NetworkKindName(kind));
  }
  OlfcController ctrl(kind, std::move(net), c, 0);
  std::istringstream rng_state(get("rng"));
  rng_state >> ctrl.rng_;
  if (!rng_state) throw std::runtime_error("bad rng state in checkpoint");

  std::ifstream buffer(dir / kBufferFile);
  if (!buffer) {
    throw std::runtime_error("cannot open " + (dir / kBufferFile).string());
  }
  const int nj = ctrl.num_joints();
  const int nm = ctrl.num_muscles();
  std::getline(buffer, line);
  while (std::getline(buffer, line)) {
    std::vector<double> v;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) v.push_back(std::stod(cell));
    if (static_cast<int>(v.size()) != 2 * nj + nm) {
      throw std::runtime_error("bad buffer row in checkpoint");
    }
    const Eigen::Map<const Eigen::VectorXd> all(v.data(), v.size());
    ctrl.buffer_.push_back(
        {all.segment(0, nj), all.segment(nj, nj), all.segment(2 * nj, nm)});
  }
  return ctrl;
}

OlfcController Pretrain(NetworkKind kind,
                        const std::vector<TransitionSample>& data,
                        const PretrainOptions& options,
                        const OlfcConstants& constants,
                        PretrainReport* report) {
  if (data.empty()) throw std::invalid_argument("pretraining data is empty");
  if (!(options.zero_motion_fraction >= 0.0)) {
    throw std::invalid_argument("zero_motion_fraction must be >= 0");
  }
  const int nj = static_cast<int>(data.front().theta_from.size());
  const int nm = static_cast<int>(data.front().delta_l.size());
  const int n = static_cast<int>(data.size());
  int held_out = static_cast<int>(std::round(n * options.held_out_fraction));
  held_out = std::clamp(held_out, n > 1 ? 1 : 0, n - 1);
  const int train = n - held_out;

  const int in_dim = kind == NetworkKind::kTypeA ? 2 * nj : nj + nm;
  const int out_dim = kind == NetworkKind::kTypeA ? nm : nj;
  Eigen::MatrixXd x(n, in_dim), y(n, out_dim);
  for (int r = 0; r < n; ++r) {
    const TransitionSample& s = data[r];
    if (kind == NetworkKind::kTypeA) {
      x.row(r) = Concat(s.theta_from, s.theta_to).transpose();
      y.row(r) = s.delta_l.transpose();
    } else {
      x.row(r) = Concat(s.theta_from, s.delta_l).transpose();
      y.row(r) = s.theta_to.transpose();
    }
  }
  // Zero-motion rows (theta, 0) -> theta, or (theta, theta) -> 0, join the
  // training split only; poses are reused from the training transitions.
  const int extra =
      static_cast<int>(std::round(train * options.zero_motion_fraction));
  Eigen::MatrixXd x_train(train + extra, in_dim);
  Eigen::MatrixXd y_train(train + extra, out_dim);
  x_train.topRows(train) = x.topRows(train);
  y_train.topRows(train) = y.topRows(train);
  for (int r = 0; r < extra; ++r) {
    const JointVector& theta = data[r % train].theta_from;
    if (kind == NetworkKind::kTypeA) {
      x_train.row(train + r) = Concat(theta, theta).transpose();
      y_train.row(train + r).setZero();
    } else {
      x_train.row(train + r) =
          Concat(theta, MuscleVector::Zero(nm)).transpose();
      y_train.row(train + r) = theta.transpose();
    }
  }

  std::vector<int> dims = {in_dim};
  dims.insert(dims.end(), options.hidden.begin(), options.hidden.end());
  dims.push_back(out_dim);
  Network net(dims, options.seed);
  net.FitNormalization(x_train, y_train);
  net.FreezeNormalization();
  Rng rng(options.seed);
  TrainMiniBatches(net, x_train, y_train, options.epochs, options.batch_size,
                   options.learning_rate, options.final_learning_rate, rng);

  PretrainReport local;
  local.threshold =
      kind == NetworkKind::kTypeA ? kTypeAMaxRmsMm : kTypeBMaxRmsRad;
  const Eigen::MatrixXd x_test = held_out > 0 ? x.bottomRows(held_out) : x;
  const Eigen::MatrixXd y_test = held_out > 0 ? y.bottomRows(held_out) : y;
  const Eigen::MatrixXd pred = net.ForwardRows(x_test);
  local.held_out_rms = std::sqrt((pred - y_test).squaredNorm() /
                                 static_cast<double>(pred.size()));
  if (report != nullptr) *report = local;
  if (!(local.held_out_rms <= local.threshold)) {
    std::ostringstream msg;
    msg << NetworkKindName(kind) << " pretraining missed its threshold: "
        << "held-out RMS " << local.held_out_rms << " > " << local.threshold;
    throw std::runtime_error(msg.str());
  }
  net.ResetOptimizer();
  net.adam() = AdamConfig{};
  return OlfcController(kind, std::move(net), constants, options.seed + 1);
}

}  // namespace myoctl
