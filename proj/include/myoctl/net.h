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

// Fully-connected perceptron with Sigmoid hidden layers and a linear output
// layer, trained by full-batch Adam on mean squared error. Inputs and outputs
// pass through per-dimension affine normalization, so callers work in
// physical units throughout.

#ifndef MYOCTL_NET_H_
#define MYOCTL_NET_H_

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace myoctl {

// Control losses on a prediction y against a target t, with an optional
// penalty on a slice x_s of the network input:
//   L0 = s * ||y - t||
//   L1 = L0 + alpha * ||x_s||
//   L2 = L0 + alpha * ||min(x_s, 0)||
// `error_scale` s converts the prediction error into the unit the loss is
// stated in. Norms are Euclidean and not squared.
enum class LossKind { kL0, kL1, kL2 };

struct LossSpec {
  LossKind kind = LossKind::kL0;
  double alpha = 0.0;
  double error_scale = 1.0;
};

LossKind ParseLossKind(const std::string& name);
std::string LossKindName(LossKind kind);

double ControlLoss(const LossSpec& loss, const Eigen::VectorXd& prediction,
                   const Eigen::VectorXd& target,
                   const Eigen::VectorXd& penalized);

// Half-open [begin, end).
struct IndexRange {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
};

struct Normalization {
  Eigen::VectorXd shift;
  Eigen::VectorXd scale;

  static Normalization Identity(int dim);
  // Column mean and population standard deviation of row samples; constant
  // columns get scale 1.
  static Normalization Fit(const Eigen::MatrixXd& rows);

  Eigen::VectorXd Normalize(const Eigen::VectorXd& x) const;
  Eigen::VectorXd Denormalize(const Eigen::VectorXd& x) const;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class DivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Network {
 public:
  static constexpr const char* kMagic = "MYOCTL-NET v1";

  Network() = default;
  // Glorot-uniform weights, zero biases, identity normalization.
  Network(std::vector<int> layer_dims, std::uint64_t seed);

  const std::vector<int>& layer_dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  int num_layers() const { return static_cast<int>(dims_.size()) - 1; }
  std::size_t num_parameters() const { return params_.size(); }

  std::span<double> weights(int layer);
  std::span<const double> weights(int layer) const;
  std::span<double> bias(int layer);
  std::span<const double> bias(int layer) const;
  std::span<const double> parameters() const { return params_; }

  const Normalization& input_normalization() const { return in_norm_; }
  const Normalization& output_normalization() const { return out_norm_; }
  void SetNormalization(Normalization input, Normalization output);
  void FitNormalization(const Eigen::MatrixXd& inputs,
                        const Eigen::MatrixXd& targets);
  void FreezeNormalization() { frozen_ = true; }
  bool normalization_frozen() const { return frozen_; }

  AdamConfig& adam() { return adam_; }
  const AdamConfig& adam() const { return adam_; }
  long adam_step_count() const { return adam_t_; }
  void ResetOptimizer();

  Eigen::VectorXd Forward(const Eigen::VectorXd& x) const;
  // Rows are samples.
  Eigen::MatrixXd ForwardRows(const Eigen::MatrixXd& inputs) const;

  // Mean squared error over all rows and outputs in normalized output units.
  double Mse(const Eigen::MatrixXd& inputs,
             const Eigen::MatrixXd& targets) const;

  // d(Mse)/d(parameters) in parameters() layout. Sets *mse when non-null.
  std::vector<double> MseGradient(const Eigen::MatrixXd& inputs,
                                  const Eigen::MatrixXd& targets,
                                  double* mse = nullptr) const;

  // One full-batch Adam update; returns the MSE measured before the update.
  double AdamStep(const Eigen::MatrixXd& inputs,
                  const Eigen::MatrixXd& targets);

  // `epochs` full-batch Adam updates; returns the MSE after the last one.
  double TrainBatch(const Eigen::MatrixXd& inputs,
                    const Eigen::MatrixXd& targets, int epochs);

  // dL/dx over `slice` for the control loss of Forward(x) against `target`;
  // the penalty term of L1/L2 acts on x[slice]. A zero-norm term contributes
  // a zero subgradient.
  Eigen::VectorXd InputGradient(const Eigen::VectorXd& x,
                                const Eigen::VectorXd& target,
                                const LossSpec& loss, IndexRange slice) const;

  // Text weight file; see docs in README. `role` is written after the magic.
  void Write(std::ostream& out, const std::string& role) const;
  static Network Read(std::istream& in, std::string* role = nullptr);
  void Save(const std::filesystem::path& path, const std::string& role) const;
  static Network Load(const std::filesystem::path& path,
                      std::string* role = nullptr);

 private:
  struct Workspace;
  void Allocate();
  // Fills ws activations for normalized input x_n.
  void ForwardNormalized(const double* x_n, Workspace& ws) const;
  // Backpropagates output delta stored in ws; accumulates parameter
  // gradients into `grad` when non-null and returns dL/dx_n in ws.
  void Backward(Workspace& ws, double* grad) const;
  Eigen::VectorXd NormalizedError(const Workspace& ws,
                                  const Eigen::VectorXd& target) const;
  void CheckInput(const Eigen::VectorXd& x) const;

  std::vector<int> dims_;
  std::vector<double> params_;
  std::vector<std::size_t> w_offset_;
  std::vector<std::size_t> b_offset_;
  Normalization in_norm_;
  Normalization out_norm_;
  bool frozen_ = false;
  AdamConfig adam_;
  std::vector<double> adam_m_;
  std::vector<double> adam_v_;
  long adam_t_ = 0;
};

// Shuffled mini-batch Adam for `epochs` passes with the learning rate decaying
// geometrically from `learning_rate` to `final_learning_rate`. Batch
// composition lives here; Network::AdamStep stays full-batch.
void TrainMiniBatches(Network& net, const Eigen::MatrixXd& inputs,
                      const Eigen::MatrixXd& targets, int epochs,
                      int batch_size, double learning_rate,
                      double final_learning_rate, std::mt19937_64& rng);

}  // namespace myoctl

#endif  // MYOCTL_NET_H_
