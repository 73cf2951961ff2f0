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

#include "myoctl/plant.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace myoctl {
namespace {

constexpr double kNmToNmm = 1000.0;

void ValidateCommand(const ArmModel& model, const MuscleVector& l_ref) {
  if (l_ref.size() != model.num_muscles()) {
    throw std::invalid_argument("command has wrong muscle count");
  }
  for (int i = 0; i < l_ref.size(); ++i) {
    if (!std::isfinite(l_ref[i])) {
      throw std::invalid_argument("command contains a non-finite length");
    }
    const double rest = model.rest_lengths()[i];
    if (l_ref[i] < 0.5 * rest || l_ref[i] > 2.0 * rest) {
      std::ostringstream msg;
      msg << "commanded length " << l_ref[i] << " mm for muscle "
          << model.muscles()[i].name << " outside [50%, 200%] of rest length "
          << rest << " mm";
      throw std::invalid_argument(msg.str());
    }
  }
}

// Joints pressed against a limit by the descent direction carry no residual
// force; the stop holds them.
bool InsideFrictionBand(const ArmModel& model, const JointVector& theta,
                        const JointVector& grad, const Eigen::VectorXd& band) {
  for (int j = 0; j < theta.size(); ++j) {
    double force = grad[j];
    if (theta[j] >= model.upper_limits()[j] && force < 0.0) force = 0.0;
    if (theta[j] <= model.lower_limits()[j] && force > 0.0) force = 0.0;
    if (std::abs(force) > band[j]) return false;
  }
  return true;
}

std::string JointColumn(const std::string& name) {
  std::string out = "theta_";
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  return out + "_deg";
}

}  // namespace

void SituationConfig::Validate(int num_joints) const {
  if (!(stiffness > 0.0)) throw std::invalid_argument("stiffness must be > 0");
  if (!(payload_kg >= 0.0)) throw std::invalid_argument("payload must be >= 0");
  if (!(min_tension >= 0.0)) {
    throw std::invalid_argument("min_tension must be >= 0");
  }
  if (!(gravity >= 0.0)) throw std::invalid_argument("gravity must be >= 0");
  if (friction_nm.size() != num_joints) {
    throw std::invalid_argument("friction vector has wrong dimension");
  }
  if ((friction_nm.array() < 0.0).any()) {
    throw std::invalid_argument("joint friction must be >= 0");
  }
}

bool SituationConfig::operator==(const SituationConfig& o) const {
  return payload_kg == o.payload_kg && trunk_pitch == o.trunk_pitch &&
         stiffness == o.stiffness && min_tension == o.min_tension &&
         gravity == o.gravity && friction_nm.size() == o.friction_nm.size() &&
         friction_nm == o.friction_nm;
}

Eigen::VectorXd DefaultFriction(const ArmModel& model) {
  Eigen::VectorXd f(model.num_joints());
  for (int j = 0; j < model.num_joints(); ++j) {
    f[j] = model.joints()[j].name.starts_with("S-") ? 0.5 : 0.3;
  }
  return f;
}

SituationConfig DefaultSituation(const ArmModel& model) {
  SituationConfig s;
  s.friction_nm = DefaultFriction(model);
  return s;
}

Eigen::Vector3d GravityInBase(const SituationConfig& situation) {
  // Bending the trunk forward by p tilts the base z axis toward +x; seen from
  // the base, gravity gains a forward component g*sin(p).
  const double p = situation.trunk_pitch;
  return {situation.gravity * std::sin(p), 0.0,
          -situation.gravity * std::cos(p)};
}

double PlantEnergy(const ArmModel& model, const JointVector& theta,
                   const MuscleVector& l_ref,
                   const SituationConfig& situation) {
  const auto frames = model.LinkFrames(theta);
  double energy = 0.0;
  for (int i = 0; i < model.num_muscles(); ++i) {
    const auto& route = model.muscles()[i].route;
    double length = 0.0;
    Eigen::Vector3d prev = model.WorldPoint(frames, route[0]);
    for (std::size_t k = 1; k < route.size(); ++k) {
      const Eigen::Vector3d cur = model.WorldPoint(frames, route[k]);
      length += (cur - prev).norm();
      prev = cur;
    }
    const double stretch = std::max(0.0, length - l_ref[i]);
    energy += 0.5 * situation.stiffness * stretch * stretch;
  }
  // kg * m/s^2 * mm = N*mm
  const Eigen::Vector3d g = GravityInBase(situation);
  for (const MassPoint& m : model.masses()) {
    energy -= m.kg * g.dot(model.WorldPoint(frames, {m.link, m.point}));
  }
  if (situation.payload_kg > 0.0) {
    energy -= situation.payload_kg *
              g.dot(model.WorldPoint(frames, model.end_effector()));
  }
  return energy;
}

JointVector PlantEnergyGradient(const ArmModel& model, const JointVector& theta,
                                const MuscleVector& l_ref,
                                const SituationConfig& situation,
                                double fd_step) {
  JointVector grad(theta.size());
  for (int k = 0; k < theta.size(); ++k) {
    JointVector plus = theta;
    JointVector minus = theta;
    plus[k] = std::min(theta[k] + fd_step, model.upper_limits()[k]);
    minus[k] = std::max(theta[k] - fd_step, model.lower_limits()[k]);
    const double h = plus[k] - minus[k];
    grad[k] = h > 0.0 ? (PlantEnergy(model, plus, l_ref, situation) -
                         PlantEnergy(model, minus, l_ref, situation)) /
                            h
                      : 0.0;
  }
  return grad;
}

MuscleVector PlantTensions(const ArmModel& model, const JointVector& theta,
                           const MuscleVector& l_ref,
                           const SituationConfig& situation) {
  const MuscleVector lengths = MuscleLengthsUnclamped(model, theta);
  MuscleVector f(model.num_muscles());
  for (int i = 0; i < f.size(); ++i) {
    const double stretch = lengths[i] - l_ref[i];
    f[i] = stretch > 0.0
               ? std::max(situation.stiffness * stretch, situation.min_tension)
               : 0.0;
  }
  return f;
}

PlantState RestingState(const ArmModel& model, const JointVector& theta,
                        const SituationConfig& situation, double pretension) {
  situation.Validate(model.num_joints());
  PlantState state;
  state.theta = model.Clamp(theta);
  state.situation = situation;
  state.last_command = MuscleLengthsUnclamped(model, state.theta).array() -
                       pretension / situation.stiffness;
  state.tensions =
      PlantTensions(model, state.theta, state.last_command, situation);
  state.last_settle.energy =
      PlantEnergy(model, state.theta, state.last_command, situation);
  return state;
}

PlantState Command(const ArmModel& model, const PlantState& state,
                   const MuscleVector& l_ref, const SettleOptions& options) {
  ValidateCommand(model, l_ref);
  const SituationConfig& situation = state.situation;
  situation.Validate(model.num_joints());

  const Eigen::VectorXd band =
      (situation.friction_nm * kNmToNmm).cwiseMax(options.force_tolerance_nmm);

  JointVector theta = model.Clamp(state.theta);
  double energy = PlantEnergy(model, theta, l_ref, situation);
  JointVector grad =
      PlantEnergyGradient(model, theta, l_ref, situation, options.fd_step);

  SettleStats stats;
  double step = options.initial_step;
  int consecutive_increases = 0;
  while (true) {
    if (InsideFrictionBand(model, theta, grad, band)) {
      stats.stuck = true;
      break;
    }
    if (stats.steps >= options.max_steps) {
      stats.hit_step_cap = true;
      break;
    }
    const JointVector candidate = model.Clamp(theta - step * grad);
    if (candidate == theta) {
      // Projected step vanished: every moving direction is blocked by a limit.
      stats.stuck = true;
      break;
    }
    const double candidate_energy =
        PlantEnergy(model, candidate, l_ref, situation);
    if (candidate_energy <= energy) {
      theta = candidate;
      energy = candidate_energy;
      grad =
          PlantEnergyGradient(model, theta, l_ref, situation, options.fd_step);
      ++stats.steps;
      consecutive_increases = 0;
      step *= options.step_growth;
    } else {
      ++stats.rejected;
      step *= 0.5;
      if (++consecutive_increases >= options.max_consecutive_increases) {
        throw SettleDivergedError("plant settle diverged: energy rose on " +
                                  std::to_string(consecutive_increases) +
                                  " consecutive steps");
      }
    }
  }
  if (options.angle_resolution > 0.0) {
    for (int j = 0; j < theta.size(); ++j) {
      theta[j] = std::round(theta[j] / options.angle_resolution) *
                 options.angle_resolution;
    }
    theta = model.Clamp(theta);
    energy = PlantEnergy(model, theta, l_ref, situation);
  }
  stats.energy = energy;

  PlantState next;
  next.theta = theta;
  next.situation = situation;
  next.last_command = l_ref;
  next.tensions = PlantTensions(model, theta, l_ref, situation);
  next.last_settle = stats;
  return next;
}

PlantState Configure(const ArmModel& model, const PlantState& state,
                     const SituationConfig& situation) {
  situation.Validate(model.num_joints());
  PlantState next = state;
  next.situation = situation;
  if (state.last_command.size() == model.num_muscles()) {
    next.tensions =
        PlantTensions(model, state.theta, state.last_command, situation);
  }
  return next;
}

TrajectoryWriter::TrajectoryWriter(const ArmModel& model)
    : num_joints_(model.num_joints()), num_muscles_(model.num_muscles()) {
  for (const Joint& j : model.joints()) {
    joint_columns_.push_back(JointColumn(j.name));
  }
}

void TrajectoryWriter::Append(const PlantState& state) {
  Eigen::VectorXd row(num_joints_ + num_muscles_);
  row << RadToDeg(state.theta), state.tensions;
  rows_.push_back(std::move(row));
}

std::string TrajectoryWriter::Header() const {
  std::string header = "step";
  for (const std::string& c : joint_columns_) header += "," + c;
  for (int i = 1; i <= num_muscles_; ++i) header += ",f" + std::to_string(i);
  return header;
}

void TrajectoryWriter::Write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << Header() << '\n';
  char buf[64];
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    out << r;
    for (int c = 0; c < rows_[r].size(); ++c) {
      std::snprintf(buf, sizeof(buf), ",%.17g", rows_[r][c]);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace myoctl
