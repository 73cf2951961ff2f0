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

// Online-learning feedback control. Type A maps (theta_cur, theta_ref)
// straight to a muscle-length change; Type B models the transition
// (theta_cur, dl) -> theta and is inverted at control time by descending the
// control loss through its dl input.

#ifndef MYOCTL_OLFC_H_
#define MYOCTL_OLFC_H_

#include <cstdint>
#include <deque>
#include <filesystem>
#include <string>
#include <vector>

#include "myoctl/geometry.h"
#include "myoctl/net.h"

namespace myoctl {

enum class NetworkKind { kTypeA, kTypeB };

NetworkKind ParseNetworkKind(const std::string& name);
std::string NetworkKindName(NetworkKind kind);

struct OlfcConstants {
  double c_length = 100.0;  // mm
  int n_thre = 10;
  int n_data = 10;
  int n_limit = 5;
  int n_const = 5;
  int n_epoch = 3;
  double gamma_max = 10.0;  // mm
  int n_batch = 10;
  int n_update = 10;
  double alpha = 0.0003;
  int buffer_capacity = 1000;
  double s_dtheta = 0.5;  // rad
  // Multiplies joint-angle errors (rad) inside the control loss.
  double loss_error_scale = 1.0;

  void Validate() const;
};

struct TransitionSample {
  JointVector theta_from;
  JointVector theta_to;
  MuscleVector delta_l;  // mm
};

// theta uniform in the joint box, theta' = clamp(theta + N(0, s^2) per joint),
// delta_l = h_geo(theta') - h_geo(theta).
std::vector<TransitionSample> GenPretrainData(const ArmModel& model, int n,
                                              double s_dtheta, Rng& rng);

// Loss of a predicted pose against the target with the dl penalty; angle
// errors are multiplied by `error_scale` first.
double EvaluateLoss(LossKind kind, const JointVector& theta_pred,
                    const JointVector& theta_ref, const MuscleVector& delta_l,
                    double alpha, double error_scale = 1.0);

struct PretrainOptions {
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-2;
  double final_learning_rate = 1e-4;
  double held_out_fraction = 0.1;
  // Extra zero-motion rows, as a fraction of the training split.
  double zero_motion_fraction = 0.0;
  std::vector<int> hidden = {40, 20, 20};
  std::uint64_t seed = 1;
};

struct PretrainReport {
  double held_out_rms = 0.0;  // mm for Type A, rad for Type B
  double threshold = 0.0;
};

inline constexpr double kTypeAMaxRmsMm = 3.0;
inline constexpr double kTypeBMaxRmsRad = 0.05;

struct DeltaLTrace {
  // Loss of the incumbent before the first and after every outer iteration.
  std::vector<double> losses;
  std::vector<double> step_sizes;  // chosen gamma per iteration
};

class OlfcController {
 public:
  struct Batch {
    Eigen::MatrixXd inputs;
    Eigen::MatrixXd targets;
  };

  OlfcController(NetworkKind kind, Network network, OlfcConstants constants,
                 std::uint64_t seed);

  NetworkKind kind() const { return kind_; }
  const Network& network() const { return net_; }
  Network& network() { return net_; }
  const OlfcConstants& constants() const { return constants_; }
  const std::deque<TransitionSample>& buffer() const { return buffer_; }
  int num_joints() const;
  int num_muscles() const;

  // Type A: h_A(theta_cur, theta_ref). Type B: h_B(theta_cur, dl).
  MuscleVector PredictDeltaL(const JointVector& theta_cur,
                             const JointVector& theta_ref) const;
  JointVector PredictTheta(const JointVector& theta_cur,
                           const MuscleVector& delta_l) const;

  // Admits the transition when ||l_ref_to - l_ref_from|| < C_length. The
  // buffer drops its oldest sample beyond capacity.
  bool RecordTransition(const JointVector& theta_from,
                        const JointVector& theta_to,
                        const MuscleVector& l_ref_from,
                        const MuscleVector& l_ref_to);
  bool ReadyToLearn() const;

  // N_data buffer rows, N_limit zero-motion rows, N_const rows labeled by the
  // current network. Throws std::logic_error below N_thre samples.
  Batch BuildOnlineBatch(const ArmModel& model);
  // One batch, N_epoch full-batch Adam epochs; returns the final batch MSE.
  double OnlineUpdate(const ArmModel& model);

  double Loss(const JointVector& theta_cur, const JointVector& theta_ref,
              const MuscleVector& delta_l, LossKind kind) const;

  MuscleVector ComputeDeltaL(const JointVector& theta_cur,
                             const JointVector& theta_ref, LossKind kind,
                             const ArmModel& model,
                             DeltaLTrace* trace = nullptr) const;

  // Directory with network.txt, buffer.csv and constants.txt.
  void SaveCheckpoint(const std::filesystem::path& dir) const;
  static OlfcController LoadCheckpoint(const std::filesystem::path& dir);

 private:
  Eigen::VectorXd TypeBInput(const JointVector& theta_cur,
                             const MuscleVector& delta_l) const;
  void AppendRow(Batch& batch, int row, const Eigen::VectorXd& x,
                 const Eigen::VectorXd& y) const;

  NetworkKind kind_;
  Network net_;
  OlfcConstants constants_;
  std::deque<TransitionSample> buffer_;
  Rng rng_;
};

// Fits the kind's network on geometric transitions, freezes normalization and
// resets the optimizer for the online phase. Throws std::invalid_argument on
// empty data and std::runtime_error when held-out RMS misses the threshold
// (3 mm for Type A, 0.05 rad for Type B).
OlfcController Pretrain(NetworkKind kind,
                        const std::vector<TransitionSample>& data,
                        const PretrainOptions& options,
                        const OlfcConstants& constants = {},
                        PretrainReport* report = nullptr);

// Role tag written into the network weight file.
std::string OlfcRole(NetworkKind kind);

}  // namespace myoctl

#endif  // MYOCTL_OLFC_H_
