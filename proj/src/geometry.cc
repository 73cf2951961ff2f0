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

#include "myoctl/geometry.h"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "json.hpp"

namespace myoctl {
namespace {

using nlohmann::json;

void WarnClampedOnce() {
  static std::atomic<bool> warned{false};
  if (!warned.exchange(true)) {
    std::cerr << "warning: joint angles outside limits were clamped\n";
  }
}

Eigen::Vector3d ReadVec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw std::invalid_argument(std::string("expected 3-vector for ") + what);
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

LinkPoint ReadLinkPoint(const json& j) {
  return {j.at("link").get<int>(), ReadVec3(j.at("point_mm"), "point_mm")};
}

// Shared damped least squares loop. `residual_fn` maps theta to a residual
// vector; the Jacobian is taken by finite differences.
template <typename ResidualFn>
DlsResult DampedLeastSquares(const ArmModel& model, ResidualFn residual_fn,
                             const JointVector& theta_init,
                             const DlsOptions& options) {
  DlsResult best;
  best.theta = model.Clamp(theta_init);
  Eigen::VectorXd r = residual_fn(best.theta);
  best.residual_mm = r.norm();
  double lambda = options.damping;
  const int n = model.num_joints();
  constexpr double kStep = 1e-7;
  for (int it = 0; it < options.max_iterations; ++it) {
    best.iterations = it;
    if (best.residual_mm < options.tolerance_mm) {
      best.converged = true;
      return best;
    }
    Eigen::MatrixXd jac(r.size(), n);
    for (int k = 0; k < n; ++k) {
      JointVector plus = best.theta;
      JointVector minus = best.theta;
      plus[k] += kStep;
      minus[k] -= kStep;
      jac.col(k) = (residual_fn(plus) - residual_fn(minus)) / (2.0 * kStep);
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * r;
    bool improved = false;
    for (int attempt = 0; attempt < 12; ++attempt) {
      Eigen::MatrixXd damped = jtj;
      damped.diagonal().array() += lambda;
      const JointVector step = damped.ldlt().solve(jtr);
      const JointVector candidate = model.Clamp(best.theta - step);
      const Eigen::VectorXd rc = residual_fn(candidate);
      if (rc.norm() < best.residual_mm) {
        best.theta = candidate;
        r = rc;
        best.residual_mm = rc.norm();
        lambda = std::max(options.damping, lambda * 0.1);
        improved = true;
        break;
      }
      lambda *= 10.0;
    }
    // Stationary point (possibly on the joint box boundary).
    if (!improved) break;
  }
  best.converged = best.residual_mm < options.tolerance_mm;
  return best;
}

}  // namespace

ArmModel::ArmModel(std::string name, std::vector<Joint> joints,
                   std::vector<Muscle> muscles, std::vector<MassPoint> masses,
                   LinkPoint end_effector)
    : name_(std::move(name)),
      joints_(std::move(joints)),
      muscles_(std::move(muscles)),
      masses_(std::move(masses)),
      end_effector_(end_effector) {
  if (joints_.empty()) throw std::invalid_argument("arm model has no joints");
  if (muscles_.empty()) throw std::invalid_argument("arm model has no muscles");
  const int links = num_links();
  auto check_link = [links](int link, const std::string& where) {
    if (link < 0 || link >= links) {
      throw std::invalid_argument("link index out of range in " + where);
    }
  };
  lower_.resize(num_joints());
  upper_.resize(num_joints());
  for (int j = 0; j < num_joints(); ++j) {
    Joint& joint = joints_[j];
    if (!(joint.lower <= joint.upper)) {
      throw std::invalid_argument("joint " + joint.name +
                                  ": lower limit exceeds upper limit");
    }
    const double norm = joint.axis.norm();
    if (!(norm > 0.0)) {
      throw std::invalid_argument("joint " + joint.name + ": zero axis");
    }
    joint.axis /= norm;
    lower_[j] = joint.lower;
    upper_[j] = joint.upper;
  }
  for (const Muscle& m : muscles_) {
    if (m.route.size() < 2) {
      throw std::invalid_argument("muscle " + m.name +
                                  " needs at least two route points");
    }
    for (const LinkPoint& p : m.route) check_link(p.link, "muscle " + m.name);
  }
  for (const MassPoint& m : masses_) {
    check_link(m.link, "mass point");
    if (m.kg < 0.0) throw std::invalid_argument("negative link mass");
  }
  check_link(end_effector_.link, "end effector");
  rest_lengths_ =
      MuscleLengthsUnclamped(*this, Clamp(JointVector::Zero(num_joints())));
}

ArmModel ArmModel::FromJsonText(const std::string& text) {
  const json doc = json::parse(text);
  std::vector<Joint> joints;
  for (const json& j : doc.at("joints")) {
    Joint joint;
    joint.name = j.at("name").get<std::string>();
    joint.parent_offset =
        ReadVec3(j.at("parent_offset_mm"), "parent_offset_mm");
    joint.axis = ReadVec3(j.at("axis"), "axis");
    const json& lim = j.at("limits_deg");
    joint.lower = DegToRad(lim.at(0).get<double>());
    joint.upper = DegToRad(lim.at(1).get<double>());
    joints.push_back(std::move(joint));
  }
  std::vector<Muscle> muscles;
  for (const json& m : doc.at("muscles")) {
    Muscle muscle;
    muscle.name = m.at("name").get<std::string>();
    for (const json& p : m.at("route"))
      muscle.route.push_back(ReadLinkPoint(p));
    muscles.push_back(std::move(muscle));
  }
  std::vector<MassPoint> masses;
  if (doc.contains("masses")) {
    for (const json& m : doc.at("masses")) {
      masses.push_back({m.at("link").get<int>(), m.at("kg").get<double>(),
                        ReadVec3(m.at("point_mm"), "point_mm")});
    }
  }
  return ArmModel(doc.value("name", std::string("unnamed")), std::move(joints),
                  std::move(muscles), std::move(masses),
                  ReadLinkPoint(doc.at("end_effector")));
}

ArmModel ArmModel::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open arm fixture: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return FromJsonText(buffer.str());
  } catch (const std::exception& e) {
    throw std::runtime_error("invalid arm fixture " + path.string() + ": " +
                             e.what());
  }
}

ArmModel ArmModel::OneDofToy() {
  Joint j{"J", Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitX(),
          DegToRad(-45.0), DegToRad(45.0)};
  std::vector<Muscle> muscles = {
      {"pos", {{0, {0, 40, 50}}, {1, {0, 40, -100}}}},
      {"neg", {{0, {0, -40, 50}}, {1, {0, -40, -100}}}},
  };
  return ArmModel("one_dof_toy", {j}, std::move(muscles),
                  {{1, 0.5, {0, 0, -80}}}, {1, {0, 0, -120}});
}

ArmModel ArmModel::TwoDofToy() {
  std::vector<Joint> joints = {
      {"shoulder", Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitY(),
       DegToRad(-45.0), DegToRad(45.0)},
      {"elbow",
       {0, 0, -200},
       Eigen::Vector3d::UnitY(),
       DegToRad(-45.0),
       DegToRad(45.0)},
  };
  std::vector<Muscle> muscles = {
      {"shoulder_front", {{0, {40, 0, 60}}, {1, {40, 0, -120}}}},
      {"shoulder_back", {{0, {-40, 0, 60}}, {1, {-40, 0, -120}}}},
      {"elbow_front", {{1, {40, 0, -140}}, {2, {30, 0, -80}}}},
      {"elbow_back", {{1, {-40, 0, -140}}, {2, {-30, 0, -80}}}},
  };
  return ArmModel("two_dof_toy", std::move(joints), std::move(muscles),
                  {{1, 1.0, {0, 0, -100}}, {2, 0.8, {0, 0, -80}}},
                  {2, {0, 0, -150}});
}

bool ArmModel::WithinLimits(const JointVector& theta) const {
  if (theta.size() != num_joints()) return false;
  return (theta.array() >= lower_.array()).all() &&
         (theta.array() <= upper_.array()).all();
}

JointVector ArmModel::Clamp(const JointVector& theta) const {
  if (theta.size() != num_joints()) {
    throw std::invalid_argument("joint vector has wrong dimension");
  }
  return theta.cwiseMax(lower_).cwiseMin(upper_);
}

std::vector<Eigen::Isometry3d> ArmModel::LinkFrames(
    const JointVector& theta) const {
  if (theta.size() != num_joints()) {
    throw std::invalid_argument("joint vector has wrong dimension");
  }
  std::vector<Eigen::Isometry3d> frames;
  frames.reserve(num_links());
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  frames.push_back(t);
  for (int j = 0; j < num_joints(); ++j) {
    t.translate(joints_[j].parent_offset);
    t.rotate(Eigen::AngleAxisd(theta[j], joints_[j].axis));
    frames.push_back(t);
  }
  return frames;
}

Eigen::Vector3d ArmModel::WorldPoint(
    const std::vector<Eigen::Isometry3d>& frames, const LinkPoint& p) const {
  return frames[p.link] * p.point;
}

MuscleVector MuscleLengthsUnclamped(const ArmModel& model,
                                    const JointVector& theta) {
  const auto frames = model.LinkFrames(theta);
  MuscleVector out(model.num_muscles());
  for (int i = 0; i < model.num_muscles(); ++i) {
    const auto& route = model.muscles()[i].route;
    double total = 0.0;
    Eigen::Vector3d prev = model.WorldPoint(frames, route[0]);
    for (std::size_t k = 1; k < route.size(); ++k) {
      const Eigen::Vector3d cur = model.WorldPoint(frames, route[k]);
      total += (cur - prev).norm();
      prev = cur;
    }
    out[i] = total;
  }
  return out;
}

MuscleVector MuscleLengths(const ArmModel& model, const JointVector& theta) {
  const JointVector clamped = model.Clamp(theta);
  if (clamped != theta) WarnClampedOnce();
  return MuscleLengthsUnclamped(model, clamped);
}

Eigen::Vector3d EndEffector(const ArmModel& model, const JointVector& theta) {
  const JointVector clamped = model.Clamp(theta);
  if (clamped != theta) WarnClampedOnce();
  return model.WorldPoint(model.LinkFrames(clamped), model.end_effector());
}

Eigen::MatrixXd MuscleJacobian(const ArmModel& model, const JointVector& theta,
                               double step) {
  const JointVector base = model.Clamp(theta);
  Eigen::MatrixXd jac(model.num_muscles(), model.num_joints());
  for (int k = 0; k < model.num_joints(); ++k) {
    JointVector plus = base;
    JointVector minus = base;
    plus[k] = std::min(base[k] + step, model.upper_limits()[k]);
    minus[k] = std::max(base[k] - step, model.lower_limits()[k]);
    const double h = plus[k] - minus[k];
    if (h <= 0.0) {
      jac.col(k).setZero();
      continue;
    }
    jac.col(k) = (MuscleLengthsUnclamped(model, plus) -
                  MuscleLengthsUnclamped(model, minus)) /
                 h;
  }
  return jac;
}

DlsResult JointsFromLengths(const ArmModel& model, const MuscleVector& lengths,
                            const JointVector& theta_init,
                            const DlsOptions& options) {
  if (lengths.size() != model.num_muscles()) {
    throw std::invalid_argument("length vector has wrong dimension");
  }
  auto residual = [&](const JointVector& theta) -> Eigen::VectorXd {
    return MuscleLengthsUnclamped(model, theta) - lengths;
  };
  return DampedLeastSquares(model, residual, theta_init, options);
}

DlsResult JointsForEndEffector(const ArmModel& model,
                               const Eigen::Vector3d& target,
                               const JointVector& theta_init,
                               const DlsOptions& options) {
  auto residual = [&](const JointVector& theta) -> Eigen::VectorXd {
    return model.WorldPoint(model.LinkFrames(theta), model.end_effector()) -
           target;
  };
  return DampedLeastSquares(model, residual, theta_init, options);
}

JointVector SamplePose(Rng& rng, const ArmModel& model, double span) {
  if (!(span > 0.0 && span <= 1.0)) {
    throw std::invalid_argument("pose sampling span must be in (0, 1]");
  }
  JointVector theta(model.num_joints());
  for (int j = 0; j < model.num_joints(); ++j) {
    const double mid =
        0.5 * (model.lower_limits()[j] + model.upper_limits()[j]);
    const double half =
        0.5 * span * (model.upper_limits()[j] - model.lower_limits()[j]);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    theta[j] = mid - half + 2.0 * half * dist(rng);
  }
  return theta;
}

double DegToRad(double deg) { return deg * std::numbers::pi / 180.0; }
double RadToDeg(double rad) { return rad * 180.0 / std::numbers::pi; }
JointVector DegToRad(const JointVector& deg) {
  return deg * (std::numbers::pi / 180.0);
}
JointVector RadToDeg(const JointVector& rad) {
  return rad * (180.0 / std::numbers::pi);
}

}  // namespace myoctl
