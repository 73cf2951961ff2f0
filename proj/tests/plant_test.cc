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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "myoctl/jmm.h"

namespace myoctl {
namespace {

const std::string kFixture =
    std::string(MYOCTL_SOURCE_DIR) + "/fixtures/arm5dof.json";

JointVector Theta0() {
  JointVector deg(5);
  deg << 30, -30, 30, -60, 30;
  return DegToRad(deg);
}

MuscleVector LengthsFor(const ArmModel& model, const JointVector& theta,
                        double tension, double k = 2.0) {
  return MuscleLengths(model, theta).array() - tension / k;
}

SituationConfig Frictionless(const ArmModel& model, bool gravity) {
  SituationConfig s = DefaultSituation(model);
  s.friction_nm.setZero();
  if (!gravity) s.gravity = 0.0;
  return s;
}

TEST(PlantTest, FrictionlessWeightlessArmSettlesWhereTorquesBalance) {
  const ArmModel model = ArmModel::Load(kFixture);
  const SituationConfig s = Frictionless(model, false);
  const MuscleVector l_ref = LengthsFor(model, Theta0(), 30.0);
  const PlantState end =
      Command(model, RestingState(model, JointVector::Zero(5), s), l_ref);
  // Net joint torque from the tendon forces, in N*mm.
  const Eigen::VectorXd torque =
      MuscleJacobian(model, end.theta).transpose() * end.tensions;
  EXPECT_LT(torque.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_GT(end.tensions.minCoeff(), 2.0);

  // Same equilibrium from a different start.
  JointVector other = Theta0();
  other(1) -= 0.3;
  other(4) += 0.3;
  const PlantState again = Command(model, RestingState(model, other, s), l_ref);
  EXPECT_LT(RadToDeg(end.theta - again.theta).cwiseAbs().maxCoeff(), 0.06);
}

TEST(PlantTest, GradientMatchesEnergyDifferences) {
  const ArmModel model = ArmModel::Load(kFixture);
  const SituationConfig s = DefaultSituation(model);
  const MuscleVector l_ref = LengthsFor(model, Theta0(), 30.0);
  JointVector theta = Theta0();
  theta(0) += 0.1;
  theta(3) -= 0.2;
  const JointVector g = PlantEnergyGradient(model, theta, l_ref, s);
  for (int j = 0; j < 5; ++j) {
    JointVector up = theta, down = theta;
    up(j) += 1e-3;
    down(j) -= 1e-3;
    const double fd = (PlantEnergy(model, up, l_ref, s) -
                       PlantEnergy(model, down, l_ref, s)) /
                      2e-3;
    EXPECT_NEAR(g(j), fd, 1e-3 * (1.0 + std::abs(fd))) << j;
  }
}

TEST(PlantTest, SettleNeverRaisesEnergyAndRespectsLimits) {
  const ArmModel model = ArmModel::Load(kFixture);
  Rng rng(3);
  PlantState state = RestingState(model, Theta0(), DefaultSituation(model));
  for (int n = 0; n < 20; ++n) {
    const MuscleVector l_ref = LengthsFor(model, SamplePose(rng, model), 30.0);
    const double before =
        PlantEnergy(model, state.theta, l_ref, state.situation);
    state = Command(model, state, l_ref);
    EXPECT_LE(state.last_settle.energy, before + 1e-9);
    EXPECT_TRUE(model.WithinLimits(state.theta));
    EXPECT_TRUE(state.last_settle.stuck || state.last_settle.hit_step_cap);
  }
}

TEST(PlantTest, TensionsAreZeroOrAtLeastTheFloor) {
  const ArmModel model = ArmModel::Load(kFixture);
  Rng rng(5);
  PlantState state = RestingState(model, Theta0(), DefaultSituation(model));
  for (int n = 0; n < 10; ++n) {
    MuscleVector l_ref = LengthsFor(model, SamplePose(rng, model), 5.0);
    state = Command(model, state, l_ref);
    for (int i = 0; i < 10; ++i) {
      EXPECT_TRUE(state.tensions(i) == 0.0 || state.tensions(i) >= 2.0);
    }
  }
}

TEST(PlantTest, CommandIsDeterministic) {
  const ArmModel model = ArmModel::Load(kFixture);
  const PlantState start =
      RestingState(model, JointVector::Zero(5), DefaultSituation(model));
  const MuscleVector l_ref = LengthsFor(model, Theta0(), 30.0);
  const PlantState a = Command(model, start, l_ref);
  const PlantState b = Command(model, start, l_ref);
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_EQ(a.tensions, b.tensions);
}

TEST(PlantTest, FrictionMakesTheReachedPoseDependOnTheApproach) {
  const ArmModel model = ArmModel::Load(kFixture);
  const SituationConfig s = DefaultSituation(model);
  JointVector low = Theta0(), high = Theta0();
  low(3) = DegToRad(-90.0);
  high(3) = DegToRad(-30.0);
  const MuscleVector goal = LengthsFor(model, Theta0(), 30.0);
  const PlantState from_low = Command(
      model,
      Command(model, RestingState(model, low, s), LengthsFor(model, low, 30.0)),
      goal);
  const PlantState from_high =
      Command(model,
              Command(model, RestingState(model, high, s),
                      LengthsFor(model, high, 30.0)),
              goal);
  EXPECT_GT(std::abs(RadToDeg(from_low.theta(3) - from_high.theta(3))), 0.5);

  SituationConfig smooth = s;
  smooth.friction_nm.setZero();
  const PlantState a = Command(model, RestingState(model, low, smooth), goal);
  const PlantState b = Command(model, RestingState(model, high, smooth), goal);
  EXPECT_LT(std::abs(RadToDeg(a.theta(3) - b.theta(3))), 0.06);
}

TEST(PlantTest, RejectsOutOfRangeCommands) {
  const ArmModel model = ArmModel::Load(kFixture);
  const PlantState start =
      RestingState(model, Theta0(), DefaultSituation(model));
  MuscleVector l_ref = LengthsFor(model, Theta0(), 30.0);
  l_ref(2) = 0.3 * model.rest_lengths()(2);
  EXPECT_THROW(Command(model, start, l_ref), std::invalid_argument);
  l_ref(2) = std::nan("");
  EXPECT_THROW(Command(model, start, l_ref), std::invalid_argument);
  EXPECT_THROW(Command(model, start, MuscleVector::Zero(3)),
               std::invalid_argument);
}

TEST(PlantTest, PayloadPullsTheHandDown) {
  const ArmModel model = ArmModel::Load(kFixture);
  const SituationConfig normal = DefaultSituation(model);
  SituationConfig loaded = normal;
  loaded.payload_kg = 3.6;
  const MuscleVector l_ref = LengthsFor(model, Theta0(), 30.0);
  const PlantState start = RestingState(model, Theta0(), normal);
  const PlantState a = Command(model, start, l_ref);
  const PlantState b = Command(model, Configure(model, start, loaded), l_ref);
  EXPECT_LT(EndEffector(model, b.theta).z(), EndEffector(model, a.theta).z());
}

TEST(PlantTest, TrunkPitchTiltsGravityForward) {
  SituationConfig s;
  s.trunk_pitch = DegToRad(45.0);
  const Eigen::Vector3d g = GravityInBase(s);
  EXPECT_NEAR(g.norm(), kStandardGravity, 1e-12);
  EXPECT_GT(g.x(), 0.0);
  EXPECT_NEAR(g.x(), -g.z(), 1e-12);
}

TEST(PlantTest, TrajectoryCsvHasTheDocumentedHeader) {
  const ArmModel model = ArmModel::Load(kFixture);
  TrajectoryWriter writer(model);
  EXPECT_EQ(writer.Header(),
            "step,theta_sr_deg,theta_sp_deg,theta_sy_deg,theta_ep_deg,"
            "theta_ey_deg,f1,f2,f3,f4,f5,f6,f7,f8,f9,f10");
  writer.Append(RestingState(model, Theta0(), DefaultSituation(model)));
  const auto path =
      std::filesystem::temp_directory_path() / "myoctl_plant_traj.csv";
  writer.Write(path);
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, writer.Header());
  EXPECT_EQ(row.substr(0, 2), "0,");
  std::filesystem::remove(path);
}

TEST(PlantTest, CoContractionRaisesTensionWithoutMoving) {
  const ArmModel model = ArmModel::Load(kFixture);
  const AnalyticJmm h(model, 2.0);
  // Settle to the frictionless equilibrium first, then engage friction.
  SituationConfig smooth = DefaultSituation(model);
  smooth.friction_nm.setZero();
  const MuscleVector l_ref = InitialRealization(h, Theta0(), 10);
  PlantState state =
      Command(model, RestingState(model, Theta0(), smooth), l_ref);
  state = Configure(model, state, DefaultSituation(model));
  for (int pair = 0; pair < 5; ++pair) {
    MuscleVector tighter = l_ref;
    tighter[2 * pair] -= 5.0;
    tighter[2 * pair + 1] -= 5.0;
    const PlantState next = Command(model, state, tighter);
    EXPECT_GT(next.tensions[2 * pair], state.tensions[2 * pair]) << pair;
    EXPECT_GT(next.tensions[2 * pair + 1], state.tensions[2 * pair + 1])
        << pair;
    EXPECT_LT(RadToDeg(next.theta - state.theta).norm(), 2.0) << pair;
  }
}

double ElbowLoopArea(double friction_nm) {
  const ArmModel model = ArmModel::Load(kFixture);
  const AnalyticJmm h(model, 2.0);
  SituationConfig s = DefaultSituation(model);
  s.friction_nm.setConstant(friction_nm);
  const int steps = 40;
  auto command = [&](int i) {
    JointVector theta = Theta0();
    theta[3] = DegToRad(-90.0 * i / steps);
    return InitialRealization(h, theta, 10);
  };
  JointVector start = Theta0();
  start[3] = 0.0;
  PlantState state = Command(model, RestingState(model, start, s), command(0));
  std::vector<double> down(steps + 1), up(steps + 1);
  for (int loop = 0; loop < 2; ++loop) {
    down[0] = RadToDeg(state.theta[3]);
    for (int i = 1; i <= steps; ++i) {
      state = Command(model, state, command(i));
      down[i] = RadToDeg(state.theta[3]);
    }
    up[steps] = down[steps];
    for (int i = steps - 1; i >= 0; --i) {
      state = Command(model, state, command(i));
      up[i] = RadToDeg(state.theta[3]);
    }
  }
  // Enclosed area in (command index, angle) units.
  double area = 0.0;
  for (int i = 0; i <= steps; ++i) area += std::abs(up[i] - down[i]);
  return area;
}

TEST(PlantTest, LoopAreaGrowsWithFriction) {
  const double a1 = ElbowLoopArea(0.1);
  const double a5 = ElbowLoopArea(0.5);
  const double a10 = ElbowLoopArea(1.0);
  EXPECT_GT(a1, 0.0);
  EXPECT_GT(a5, a1);
  EXPECT_GT(a10, a5);
}

}  // namespace
}  // namespace myoctl
