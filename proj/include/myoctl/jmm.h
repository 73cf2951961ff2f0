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

// Joint-muscle mapping h(theta, f) -> l and the basic feedback law built on
// it. The learned map is an MLP fit to geometric-model data, optionally
// refined on tuples harvested from plant rollouts.

#ifndef MYOCTL_JMM_H_
#define MYOCTL_JMM_H_

#include <cstdint>
#include <filesystem>
#include <memory>

#include "myoctl/geometry.h"
#include "myoctl/net.h"
#include "myoctl/plant.h"

namespace myoctl {

inline constexpr double kConstantTension = 30.0;  // N
inline constexpr const char* kJmmRole = "jmm";

class JointMuscleMap {
 public:
  virtual ~JointMuscleMap() = default;
  // Muscle lengths (mm) realizing `theta` at tensions `tensions` (N).
  virtual MuscleVector Lengths(const JointVector& theta,
                               const MuscleVector& tensions) const = 0;
};

// h_geo(theta) - f / k: the generating formula used for training data.
class AnalyticJmm : public JointMuscleMap {
 public:
  AnalyticJmm(const ArmModel& model, double stiffness)
      : model_(model), stiffness_(stiffness) {}
  MuscleVector Lengths(const JointVector& theta,
                       const MuscleVector& tensions) const override;

 private:
  const ArmModel& model_;
  double stiffness_;
};

class JmmNetwork : public JointMuscleMap {
 public:
  explicit JmmNetwork(Network net);
  MuscleVector Lengths(const JointVector& theta,
                       const MuscleVector& tensions) const override;
  const Network& network() const { return net_; }
  Network& network() { return net_; }

  void Save(const std::filesystem::path& path) const;
  static JmmNetwork Load(const std::filesystem::path& path);

 private:
  Network net_;
};

struct JmmTrainOptions {
  int samples = 4000;
  int held_out = 500;
  int epochs = 200;
  int batch_size = 50;
  double learning_rate = 1e-3;
  double final_learning_rate = 1e-3;
  double tension_min = 10.0;
  double tension_max = 60.0;
  std::vector<int> hidden = {40, 20, 20};
  std::uint64_t seed = 1;
  // Plant refinement: rollouts x steps harvested tuples, then extra epochs
  // over base data plus harvested data.
  int refine_rollouts = 20;
  int refine_steps = 10;
  int refine_epochs = 50;
};

struct JmmTrainReport {
  double held_out_rms_mm = 0.0;
  double held_out_max_mm = 0.0;
  double base_held_out_rms_mm = 0.0;
  int refine_samples = 0;
};

inline constexpr int kJmmMinSamples = 1000;
inline constexpr double kJmmMaxHeldOutRms = 5.0;  // mm

// Throws std::invalid_argument for samples < 1000 and std::runtime_error when
// the held-out RMS exceeds 5 mm. When `refine_plant` is given, it supplies the
// situation and start pose for the rollouts.
JmmNetwork TrainJmm(const ArmModel& model, const JmmTrainOptions& options,
                    const PlantState* refine_plant = nullptr,
                    JmmTrainReport* report = nullptr);

// h(theta_ref, f_cur) - h(theta_cur, f_cur).
MuscleVector BfcDelta(const JointMuscleMap& h, const JointVector& theta_ref,
                      const JointVector& theta_cur, const MuscleVector& f_cur);

// h(theta_ref, f_const * 1).
MuscleVector InitialRealization(const JointMuscleMap& h,
                                const JointVector& theta_ref, int num_muscles,
                                double f_const = kConstantTension);

}  // namespace myoctl

#endif  // MYOCTL_JMM_H_
