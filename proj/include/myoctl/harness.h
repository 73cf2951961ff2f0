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

// Experiment protocols over the simulated arm: configuration, scenario
// execution and CSV export.

#ifndef MYOCTL_HARNESS_H_
#define MYOCTL_HARNESS_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "myoctl/geometry.h"
#include "myoctl/jmm.h"
#include "myoctl/net.h"
#include "myoctl/olfc.h"
#include "myoctl/plant.h"

namespace myoctl {

inline const std::vector<std::string>& ScenarioNames() {
  static const std::vector<std::string> names = {
      "hysteresis",   "bfc-eval",   "olfc-compare", "noise",
      "loss-compare", "situations", "quant-eval",   "position-task"};
  return names;
}

struct HysteresisConfig {
  std::string joint = "E-p";
  double from_deg = 0.0;
  double to_deg = -90.0;
  int steps = 40;  // per direction
  int loops = 10;
  int warmup_loops = 1;
};

struct PretrainConfig {
  int jmm_samples = 8000;
  int jmm_epochs = 300;
  std::vector<int> jmm_hidden = {64, 64, 32};
  int olfc_samples = 30000;
  int olfc_epochs = 300;
  // Extra zero-motion rows, as a fraction of the training split.
  double olfc_zero_motion = 0.2;
  std::uint64_t seed = 1;
};

struct ExperimentConfig {
  std::string scenario = "olfc-compare";
  std::uint64_t seed = 1;
  std::filesystem::path fixture = "fixtures/arm5dof.json";
  // Pretrained weight files; relative paths resolve against `model_dir`.
  std::filesystem::path model_dir = "models";
  std::string jmm_file = "jmm.txt";
  std::string type_a_file = "typeA.txt";
  std::string type_b_file = "typeB.txt";
  // Use h_geo - f/k instead of the learned JMM.
  bool analytic_jmm = false;

  JointVector target_deg;  // empty: (30, -30, 30, -60, 30)
  int num_targets = 5;     // bfc-eval, quant-eval
  // Random targets come from this central fraction of each joint range.
  double target_span = 0.6;
  int n_max_trial = 5;
  int n_max_rand = 5;
  int learn_rand = 10;  // episodes in learning phases
  std::vector<std::string> controllers = {"typeA", "typeB"};
  std::string loss = "L0";
  std::vector<std::string> losses = {"L0", "L1", "L2"};

  SituationConfig situation;  // friction empty: model defaults
  double payload_kg = 3.6;    // situations scenario
  double trunk_pitch_deg = 45.0;
  double noise_lo_mm = 0.0;
  double noise_hi_mm = 5.0;
  OlfcConstants olfc;
  HysteresisConfig hysteresis;
  PretrainConfig pretrain;
  Eigen::Vector3d position_offset_mm{0.0, 0.0, 50.0};
  double ik_max_residual_mm = 20.0;
  std::filesystem::path out_dir = "out";

  void Validate() const;
};

// JSON text; unknown keys are rejected.
ExperimentConfig ParseConfig(const std::string& json_text);
ExperimentConfig LoadConfig(const std::filesystem::path& path);
JointVector DefaultTarget();  // theta_0 in rad

struct TrialRecord {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string phase;
  int rand_idx = 0;
  int trial_idx = 0;
  double err_deg = 0.0;
  double tension_n = 0.0;
  double dl_norm_mm = 0.0;
  std::optional<double> err_mm;
};

struct SummaryRow {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string phase;
  int trial_idx = 0;
  int count = 0;
  double err_mean = 0.0;
  double err_std = 0.0;
  double tension_mean = 0.0;
  double tension_std = 0.0;
  double dl_mean = 0.0;
  double dl_std = 0.0;
  std::optional<double> err_mm_mean;
  std::optional<double> err_mm_std;
};

struct HysteresisLoop {
  std::vector<double> down_deg;  // settled joint angle per step, loading
  std::vector<double> up_deg;    // unloading, same command order reversed
  double mid_gap_deg = 0.0;
};

struct ScenarioResult {
  std::vector<TrialRecord> records;
  std::vector<HysteresisLoop> loops;
  std::optional<TrajectoryWriter> trajectory;
  bool aborted = false;
  std::string error;
};

// Loaded models shared by scenario runs. Controllers are copied per phase.
struct ExperimentContext {
  const ArmModel* model = nullptr;
  const JointMuscleMap* jmm = nullptr;
  const OlfcController* type_a = nullptr;
  const OlfcController* type_b = nullptr;
};

ScenarioResult RunScenario(const ExperimentConfig& config,
                           const ExperimentContext& context);

// Arm model, JMM and whichever controllers exist under `model_dir`. A missing
// controller file leaves that pointer null; a missing JMM file throws unless
// `analytic_jmm` is set.
struct LoadedModels {
  std::unique_ptr<const ArmModel> model;
  std::unique_ptr<const JointMuscleMap> jmm;
  std::optional<OlfcController> type_a;
  std::optional<OlfcController> type_b;

  ExperimentContext Context() const;
};

LoadedModels LoadModels(const ExperimentConfig& config);

// Pretraining entry points used by the CLI.
JmmNetwork PretrainJmm(const ArmModel& model, const PretrainConfig& config,
                       JmmTrainReport* report = nullptr);
OlfcController PretrainController(const ArmModel& model, NetworkKind kind,
                                  const PretrainConfig& config,
                                  const OlfcConstants& constants,
                                  PretrainReport* report = nullptr);

// Per (phase, trial) mean and population standard deviation over rand
// indices, in first-appearance order of phases.
std::vector<SummaryRow> Summarize(const std::vector<TrialRecord>& records);

std::string RecordsHeader(bool with_err_mm);
std::string SummaryHeader(bool with_err_mm);
void WriteRecords(const std::vector<TrialRecord>& records,
                  const std::filesystem::path& path);
void WriteSummary(const std::vector<SummaryRow>& rows,
                  const std::filesystem::path& path);
std::vector<TrialRecord> ReadRecords(const std::filesystem::path& path);
std::vector<TrialRecord> ParseRecords(const std::string& csv_text);
void WriteHysteresis(const std::vector<HysteresisLoop>& loops,
                     const std::filesystem::path& path);

// Derived statistics used by reports and acceptance checks.
// Mean err_deg (or tension) per trial index for one phase.
std::vector<double> MeanByTrial(const std::vector<TrialRecord>& records,
                                const std::string& phase,
                                double TrialRecord::* field);
// Least-squares slope of y over 0..n-1.
double Slope(const std::vector<double>& y);

// Derives an independent stream seed from a base seed and a label.
std::uint64_t StreamSeed(std::uint64_t seed, const std::string& label);

}  // namespace myoctl

#endif  // MYOCTL_HARNESS_H_
