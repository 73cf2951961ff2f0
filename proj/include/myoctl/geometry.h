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

// Human-designed arm model: serial revolute chain with straight-line muscle
// routes. Angles are radians, lengths are millimetres.

#ifndef MYOCTL_GEOMETRY_H_
#define MYOCTL_GEOMETRY_H_

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace myoctl {

// Joint angles in radians. Default arm order: S-r, S-p, S-y, E-p, E-y.
using JointVector = Eigen::VectorXd;
// One scalar per muscle; lengths/deltas in mm or tensions in N by context.
using MuscleVector = Eigen::VectorXd;

using Rng = std::mt19937_64;

struct Joint {
  std::string name;
  // Joint origin in the parent link frame.
  Eigen::Vector3d parent_offset = Eigen::Vector3d::Zero();
  // Unit rotation axis in the parent link frame.
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  double lower = 0.0;
  double upper = 0.0;
};

// A point fixed to a link. Link 0 is the base; link j + 1 is moved by joint j.
struct LinkPoint {
  int link = 0;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
};

struct Muscle {
  std::string name;
  // Start, relays, end.
  std::vector<LinkPoint> route;
};

struct MassPoint {
  int link = 0;
  double kg = 0.0;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
};

class ArmModel {
 public:
  // Validates structure: at least one joint and one muscle, lower <= upper,
  // unit axes, every route with >= 2 points on existing links.
  ArmModel(std::string name, std::vector<Joint> joints,
           std::vector<Muscle> muscles, std::vector<MassPoint> masses,
           LinkPoint end_effector);

  // Fixture schema documented in fixtures/README.md.
  static ArmModel FromJsonText(const std::string& text);
  static ArmModel Load(const std::filesystem::path& path);

  // One joint about x at the origin; a fixed point at (0,0,50) on the base and
  // a link point at (0,0,-100). The second muscle mirrors the first pulley so
  // the pair is antagonistic.
  static ArmModel OneDofToy();
  // Planar shoulder/elbow pitch chain with one antagonistic pair per joint.
  static ArmModel TwoDofToy();

  const std::string& name() const { return name_; }
  int num_joints() const { return static_cast<int>(joints_.size()); }
  int num_muscles() const { return static_cast<int>(muscles_.size()); }
  int num_links() const { return num_joints() + 1; }
  const std::vector<Joint>& joints() const { return joints_; }
  const std::vector<Muscle>& muscles() const { return muscles_; }
  const std::vector<MassPoint>& masses() const { return masses_; }
  const LinkPoint& end_effector() const { return end_effector_; }

  const JointVector& lower_limits() const { return lower_; }
  const JointVector& upper_limits() const { return upper_; }
  // Muscle lengths at the zero pose (clamped into the limits).
  const MuscleVector& rest_lengths() const { return rest_lengths_; }

  bool WithinLimits(const JointVector& theta) const;
  JointVector Clamp(const JointVector& theta) const;

  // World-frame pose of every link, base first. No clamping.
  std::vector<Eigen::Isometry3d> LinkFrames(const JointVector& theta) const;
  Eigen::Vector3d WorldPoint(const std::vector<Eigen::Isometry3d>& frames,
                             const LinkPoint& p) const;

 private:
  std::string name_;
  std::vector<Joint> joints_;
  std::vector<Muscle> muscles_;
  std::vector<MassPoint> masses_;
  LinkPoint end_effector_;
  JointVector lower_;
  JointVector upper_;
  MuscleVector rest_lengths_;
};

// h_geo: summed straight-segment route length per muscle. Out-of-limit input
// is clamped and a warning is printed once per process.
MuscleVector MuscleLengths(const ArmModel& model, const JointVector& theta);
Eigen::Vector3d EndEffector(const ArmModel& model, const JointVector& theta);

// Same as above without clamping; for finite differences at the limits.
MuscleVector MuscleLengthsUnclamped(const ArmModel& model,
                                    const JointVector& theta);

// d(length)/d(theta), central differences with one-sided fallback at limits.
Eigen::MatrixXd MuscleJacobian(const ArmModel& model, const JointVector& theta,
                               double step = 1e-6);

struct DlsOptions {
  double damping = 1e-3;
  int max_iterations = 200;
  double tolerance_mm = 1e-4;
};

struct DlsResult {
  JointVector theta;
  double residual_mm = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Damped least squares on ||h_geo(theta) - lengths||, projected onto the joint
// box. Returns the best iterate; the caller inspects `residual_mm`.
DlsResult JointsFromLengths(const ArmModel& model, const MuscleVector& lengths,
                            const JointVector& theta_init,
                            const DlsOptions& options = {});

// Damped least squares on ||end_effector(theta) - target||.
DlsResult JointsForEndEffector(const ArmModel& model,
                               const Eigen::Vector3d& target,
                               const JointVector& theta_init,
                               const DlsOptions& options = {});

// Uniform within the joint box shrunk about its center to `span` of each
// range.
JointVector SamplePose(Rng& rng, const ArmModel& model, double span = 1.0);

double DegToRad(double deg);
double RadToDeg(double rad);
JointVector DegToRad(const JointVector& deg);
JointVector RadToDeg(const JointVector& rad);

}  // namespace myoctl

#endif  // MYOCTL_GEOMETRY_H_
