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

// Quasi-static stand-in for the physical arm. A command fixes the target
// muscle lengths; the arm then slides down the total potential
//   E(theta) = sum_i k/2 * max(0, h_i(theta) - l_ref_i)^2 + U_gravity(theta)
// from where it was, and sticks as soon as every joint's residual generalized
// force fits inside its Coulomb friction band. The stopping rule is what makes
// the reached pose depend on the approach direction.

#ifndef MYOCTL_PLANT_H_
#define MYOCTL_PLANT_H_

#include <filesystem>
#include <stdexcept>
#include <vector>

#include "myoctl/geometry.h"

namespace myoctl {

inline constexpr double kStandardGravity = 9.80665;  // m/s^2

struct SituationConfig {
  double payload_kg = 0.0;   // at the end effector
  double trunk_pitch = 0.0;  // rad, forward bend rotates gravity in the base
  double stiffness = 2.0;    // N/mm per muscle
  // N*m per joint; empty means "use DefaultFriction(model)".
  Eigen::VectorXd friction_nm;
  double min_tension = 2.0;  // N, floor reported for taut muscles
  double gravity = kStandardGravity;

  void Validate(int num_joints) const;
  bool operator==(const SituationConfig& other) const;
};

// 0.5 N*m on shoulder joints ("S-" prefix), 0.3 N*m elsewhere.
Eigen::VectorXd DefaultFriction(const ArmModel& model);
SituationConfig DefaultSituation(const ArmModel& model);

struct SettleStats {
  int steps = 0;       // accepted descent steps
  int rejected = 0;    // step halvings
  bool stuck = false;  // inside the friction band
  bool hit_step_cap = false;
  double energy = 0.0;  // N*mm at the final pose
};

struct PlantState {
  JointVector theta;
  MuscleVector tensions;
  MuscleVector last_command;
  SituationConfig situation;
  SettleStats last_settle;
};

struct SettleOptions {
  double initial_step = 1e-5;  // rad^2 / (N*mm)
  double step_growth = 1.25;
  int max_steps = 2000;
  double fd_step = 1e-5;  // rad
  // Stick threshold floor when a joint has zero friction, N*mm.
  double force_tolerance_nmm = 0.5;
  int max_consecutive_increases = 10;
  // Settled angles are rounded to this grid (rad), like an encoder. Friction
  // equilibria are neutrally stable, so without it rounding noise would keep
  // repeated command cycles from ever repeating bitwise. 0 disables.
  double angle_resolution = 1e-7;
};

class SettleDivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Potential energy in N*mm.
double PlantEnergy(const ArmModel& model, const JointVector& theta,
                   const MuscleVector& l_ref, const SituationConfig& situation);

// dE/dtheta in N*mm/rad by central differences (one-sided at limits).
JointVector PlantEnergyGradient(const ArmModel& model, const JointVector& theta,
                                const MuscleVector& l_ref,
                                const SituationConfig& situation,
                                double fd_step = 1e-5);

MuscleVector PlantTensions(const ArmModel& model, const JointVector& theta,
                           const MuscleVector& l_ref,
                           const SituationConfig& situation);

// Gravity vector in the arm base frame, m/s^2.
Eigen::Vector3d GravityInBase(const SituationConfig& situation);

// Arm at `theta` holding exactly the muscle lengths that put every muscle
// at `pretension` N there; no settling.
PlantState RestingState(const ArmModel& model, const JointVector& theta,
                        const SituationConfig& situation,
                        double pretension = 30.0);

PlantState Command(const ArmModel& model, const PlantState& state,
                   const MuscleVector& l_ref,
                   const SettleOptions& options = {});

PlantState Configure(const ArmModel& model, const PlantState& state,
                     const SituationConfig& situation);

// One row per recorded state:
// step,theta_sr_deg,...,theta_ey_deg,f1..f10 (names follow the model).
class TrajectoryWriter {
 public:
  explicit TrajectoryWriter(const ArmModel& model);
  void Append(const PlantState& state);
  void Write(const std::filesystem::path& path) const;
  std::string Header() const;
  std::size_t size() const { return rows_.size(); }

 private:
  int num_joints_;
  int num_muscles_;
  std::vector<std::string> joint_columns_;
  std::vector<Eigen::VectorXd> rows_;
};

}  // namespace myoctl

#endif  // MYOCTL_PLANT_H_
