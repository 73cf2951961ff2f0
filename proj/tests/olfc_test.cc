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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace myoctl {
namespace {

const std::string kFixture =
    std::string(MYOCTL_SOURCE_DIR) + "/fixtures/arm5dof.json";

PretrainOptions ToyOptions() {
  PretrainOptions o;
  o.epochs = 60;
  o.batch_size = 32;
  o.seed = 11;
  return o;
}

// Pretrained once per kind on the two-joint toy.
const OlfcController& ToyController(NetworkKind kind) {
  static const ArmModel toy = ArmModel::TwoDofToy();
  static const std::vector<TransitionSample> data = [] {
    Rng rng(21);
    return GenPretrainData(toy, 4000, 0.5, rng);
  }();
  static const OlfcController a =
      Pretrain(NetworkKind::kTypeA, data, ToyOptions());
  static const OlfcController b =
      Pretrain(NetworkKind::kTypeB, data, ToyOptions());
  return kind == NetworkKind::kTypeA ? a : b;
}

void Fill(OlfcController& ctrl, const ArmModel& model, int n, Rng& rng) {
  const int nm = model.num_muscles();
  for (int i = 0; i < n; ++i) {
    const JointVector from = SamplePose(rng, model);
    const JointVector to = SamplePose(rng, model);
    const MuscleVector l0 = MuscleLengths(model, from);
    const MuscleVector l1 = MuscleLengths(model, to);
    ASSERT_TRUE(ctrl.RecordTransition(from, to, l0, l0 + (l1 - l0) * 0.1))
        << "sample " << i << " of " << nm << " muscles";
  }
}

TEST(OlfcTest, PretrainSamplesFollowTheGeometricModel) {
  const ArmModel model = ArmModel::Load(kFixture);
  Rng rng(1);
  const auto data = GenPretrainData(model, 200, 0.5, rng);
  for (const TransitionSample& s : data) {
    EXPECT_TRUE(model.WithinLimits(s.theta_from));
    EXPECT_TRUE(model.WithinLimits(s.theta_to));
    EXPECT_EQ(s.delta_l, MuscleLengths(model, s.theta_to) -
                             MuscleLengths(model, s.theta_from));
  }
}

TEST(OlfcTest, PretrainStepSpreadMatchesTheRequestedDeviation) {
  // Limits wide enough that clamping never triggers expose the raw steps.
  const ArmModel wide = ArmModel::FromJsonText(R"({
    "name": "wide",
    "joints": [{"name": "J", "parent_offset_mm": [0, 0, 0],
                "axis": [1, 0, 0], "limits_deg": [-3000, 3000]}],
    "masses": [],
    "end_effector": {"link": 1, "point_mm": [0, 0, -100]},
    "muscles": [
      {"name": "a", "route": [{"link": 0, "point_mm": [0, 40, 50]},
                              {"link": 1, "point_mm": [0, 40, -100]}]},
      {"name": "b", "route": [{"link": 0, "point_mm": [0, -40, 50]},
                              {"link": 1, "point_mm": [0, -40, -100]}]}]
  })");
  Rng rng(2);
  const auto data = GenPretrainData(wide, 100000, 0.5, rng);
  double sum = 0.0, sum_sq = 0.0;
  for (const TransitionSample& s : data) {
    const double d = s.theta_to[0] - s.theta_from[0];
    sum += d;
    sum_sq += d * d;
  }
  const double n = static_cast<double>(data.size());
  const double sd = std::sqrt(sum_sq / n - (sum / n) * (sum / n));
  EXPECT_NEAR(sd, 0.5, 0.01);
}

TEST(OlfcTest, PretrainDataIsSeeded) {
  const ArmModel model = ArmModel::Load(kFixture);
  Rng a(3), b(3);
  const auto x = GenPretrainData(model, 50, 0.5, a);
  const auto y = GenPretrainData(model, 50, 0.5, b);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(x[i].theta_from, y[i].theta_from);
    EXPECT_EQ(x[i].theta_to, y[i].theta_to);
  }
}

TEST(OlfcTest, LossVariants) {
  JointVector ref(2);
  ref << 0.1, -0.2;
  MuscleVector dl(4);
  dl << 60, -80, 0, 0;  // norm 100
  EXPECT_EQ(EvaluateLoss(LossKind::kL0, ref, ref, dl, 0.0003), 0.0);
  EXPECT_NEAR(EvaluateLoss(LossKind::kL1, ref, ref, dl, 0.0003), 0.03, 1e-15);
  // Only the contracting entry (-80) is penalized by L2.
  EXPECT_NEAR(EvaluateLoss(LossKind::kL2, ref, ref, dl, 0.0003), 0.024, 1e-15);

  JointVector pred(2);
  pred << 0.4, 0.2;
  const MuscleVector stretch = MuscleVector::Constant(4, 7.0);
  EXPECT_EQ(EvaluateLoss(LossKind::kL2, pred, ref, stretch, 0.0003),
            EvaluateLoss(LossKind::kL0, pred, ref, stretch, 0.0003));
  EXPECT_DOUBLE_EQ(EvaluateLoss(LossKind::kL0, pred, ref, stretch, 0.0003),
                   0.5);
}

TEST(OlfcTest, BufferAdmissionBoundary) {
  OlfcController ctrl = ToyController(NetworkKind::kTypeB);
  const JointVector theta = JointVector::Zero(2);
  const MuscleVector l0 = MuscleVector::Constant(4, 200.0);
  MuscleVector step = MuscleVector::Zero(4);

  step[0] = 99.9;
  EXPECT_TRUE(ctrl.RecordTransition(theta, theta, l0, l0 + step));
  step[0] = 100.0;
  EXPECT_FALSE(ctrl.RecordTransition(theta, theta, l0, l0 + step));
  EXPECT_EQ(ctrl.buffer().size(), 1u);

  EXPECT_TRUE(ctrl.RecordTransition(theta, theta, l0, l0));
  EXPECT_EQ(ctrl.buffer().back().delta_l, MuscleVector::Zero(4));
}

TEST(OlfcTest, BufferIsAFifoRing) {
  OlfcConstants c;
  c.buffer_capacity = 3;
  const OlfcController& base = ToyController(NetworkKind::kTypeB);
  OlfcController ctrl(NetworkKind::kTypeB, base.network(), c, 1);
  const MuscleVector l0 = MuscleVector::Zero(4);
  for (int i = 0; i < 5; ++i) {
    const JointVector theta = JointVector::Constant(2, 0.01 * i);
    ctrl.RecordTransition(theta, theta, l0, l0);
  }
  ASSERT_EQ(ctrl.buffer().size(), 3u);
  EXPECT_EQ(ctrl.buffer().front().theta_from[0], 0.02);
}

TEST(OlfcTest, BatchLayoutAndThreshold) {
  const ArmModel toy = ArmModel::TwoDofToy();
  OlfcController ctrl = ToyController(NetworkKind::kTypeB);
  Rng rng(5);
  Fill(ctrl, toy, 9, rng);
  EXPECT_FALSE(ctrl.ReadyToLearn());
  EXPECT_THROW(ctrl.BuildOnlineBatch(toy), std::logic_error);
  Fill(ctrl, toy, 1, rng);
  ASSERT_TRUE(ctrl.ReadyToLearn());

  const auto batch = ctrl.BuildOnlineBatch(toy);
  ASSERT_EQ(batch.inputs.rows(), 20);
  ASSERT_EQ(batch.targets.rows(), 20);
  // Buffer has exactly N_data samples: all of them, once each.
  std::vector<int> seen(10, 0);
  for (int r = 0; r < 10; ++r) {
    for (int i = 0; i < 10; ++i) {
      const TransitionSample& s = ctrl.buffer()[i];
      if (batch.inputs.row(r).head(2).transpose() == s.theta_from &&
          batch.targets.row(r).transpose() == s.theta_to) {
        ++seen[i];
      }
    }
  }
  for (int count : seen) EXPECT_EQ(count, 1);
  // Constraint rows: zero dl, target equals the input pose.
  for (int r = 10; r < 15; ++r) {
    EXPECT_EQ(batch.inputs.row(r).tail(4).norm(), 0.0);
    EXPECT_EQ(batch.targets.row(r), batch.inputs.row(r).head(2));
  }
  // Anchor rows: dl inside the admission ball, label is the current output.
  for (int r = 15; r < 20; ++r) {
    EXPECT_LE(batch.inputs.row(r).tail(4).norm(), 100.0);
    EXPECT_EQ(batch.targets.row(r).transpose(),
              ctrl.network().Forward(batch.inputs.row(r).transpose()));
  }
}

TEST(OlfcTest, TypeAConstraintRowsTargetZeroChange) {
  const ArmModel toy = ArmModel::TwoDofToy();
  OlfcController ctrl = ToyController(NetworkKind::kTypeA);
  Rng rng(6);
  Fill(ctrl, toy, 10, rng);
  const auto batch = ctrl.BuildOnlineBatch(toy);
  for (int r = 10; r < 15; ++r) {
    EXPECT_EQ(batch.inputs.row(r).head(2), batch.inputs.row(r).tail(2));
    EXPECT_EQ(batch.targets.row(r).norm(), 0.0);
  }
}

TEST(OlfcTest, AnchorRowsAreAFixedPoint) {
  const ArmModel toy = ArmModel::TwoDofToy();
  OlfcController ctrl = ToyController(NetworkKind::kTypeB);
  Rng rng(7);
  Fill(ctrl, toy, 10, rng);
  const auto batch = ctrl.BuildOnlineBatch(toy);
  const Eigen::MatrixXd x = batch.inputs.bottomRows(5);
  const Eigen::MatrixXd y = batch.targets.bottomRows(5);
  Network net = ctrl.network();
  net.TrainBatch(x, y, 3);
  Rng probe(8);
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd in(6);
    in << SamplePose(probe, toy), MuscleVector::Constant(4, 3.0 * i - 30.0);
    EXPECT_LT(
        (net.Forward(in) - ctrl.network().Forward(in)).cwiseAbs().maxCoeff(),
        1e-6);
  }
}

TEST(OlfcTest, OnlineUpdateRunsAtThresholdAndLowersBatchLoss) {
  const ArmModel toy = ArmModel::TwoDofToy();
  OlfcController ctrl = ToyController(NetworkKind::kTypeB);
  Rng rng(9);
  Fill(ctrl, toy, 10, rng);
  OlfcController probe = ctrl;
  const auto batch = probe.BuildOnlineBatch(toy);
  const double before = ctrl.network().Mse(batch.inputs, batch.targets);
  const double after = ctrl.OnlineUpdate(toy);
  EXPECT_TRUE(std::isfinite(after));
  EXPECT_LT(after, before);
}

TEST(OlfcTest, OnlineUpdatesAreSeeded) {
  const ArmModel toy = ArmModel::TwoDofToy();
  OlfcController a = ToyController(NetworkKind::kTypeB);
  Rng rng(10);
  Fill(a, toy, 12, rng);
  OlfcController b = a;
  for (int i = 0; i < 3; ++i) {
    a.OnlineUpdate(toy);
    b.OnlineUpdate(toy);
  }
  const auto pa = a.network().parameters();
  const auto pb = b.network().parameters();
  EXPECT_TRUE(std::equal(pa.begin(), pa.end(), pb.begin(), pb.end()));
}

TEST(OlfcTest, SearchNeverRaisesTheLoss) {
  const ArmModel toy = ArmModel::TwoDofToy();
  const OlfcController& ctrl = ToyController(NetworkKind::kTypeB);
  Rng rng(12);
  for (LossKind kind : {LossKind::kL0, LossKind::kL1, LossKind::kL2}) {
    for (int i = 0; i < 10; ++i) {
      const JointVector cur = SamplePose(rng, toy);
      const JointVector ref = SamplePose(rng, toy);
      DeltaLTrace trace;
      const MuscleVector dl = ctrl.ComputeDeltaL(cur, ref, kind, toy, &trace);
      ASSERT_EQ(trace.losses.size(), 11u);
      for (std::size_t k = 1; k < trace.losses.size(); ++k) {
        EXPECT_LE(trace.losses[k], trace.losses[k - 1]);
      }
      EXPECT_EQ(ctrl.Loss(cur, ref, dl, kind), trace.losses.back());
    }
  }
}

TEST(OlfcTest, SearchStartsFromTheGeometricChange) {
  const ArmModel toy = ArmModel::TwoDofToy();
  OlfcConstants c;
  c.n_update = 0;
  const OlfcController ctrl(NetworkKind::kTypeB,
                            ToyController(NetworkKind::kTypeB).network(), c, 1);
  JointVector cur(2), ref(2);
  cur << 0.1, -0.3;
  ref << -0.2, 0.4;
  EXPECT_EQ(ctrl.ComputeDeltaL(cur, ref, LossKind::kL0, toy),
            MuscleLengths(toy, ref) - MuscleLengths(toy, cur));
}

TEST(OlfcTest, ReachedTargetNeedsAlmostNoChange) {
  const ArmModel toy = ArmModel::TwoDofToy();
  const OlfcController& ctrl = ToyController(NetworkKind::kTypeB);
  Rng rng(13);
  for (int i = 0; i < 20; ++i) {
    const JointVector theta = SamplePose(rng, toy);
    const MuscleVector dl =
        ctrl.ComputeDeltaL(theta, theta, LossKind::kL0, toy);
    EXPECT_LT(dl.cwiseAbs().maxCoeff(), 3.0);
  }
}

TEST(OlfcTest, NonFiniteGradientAborts) {
  const ArmModel toy = ArmModel::TwoDofToy();
  const OlfcController& ctrl = ToyController(NetworkKind::kTypeB);
  JointVector ref(2);
  ref << std::numeric_limits<double>::quiet_NaN(), 0.0;
  EXPECT_THROW(
      ctrl.ComputeDeltaL(JointVector::Zero(2), ref, LossKind::kL0, toy),
      std::runtime_error);
}

TEST(OlfcTest, TypeAReturnsTheNetworkOutput) {
  const ArmModel toy = ArmModel::TwoDofToy();
  const OlfcController& ctrl = ToyController(NetworkKind::kTypeA);
  JointVector cur(2), ref(2);
  cur << 0.2, 0.1;
  ref << -0.1, 0.3;
  EXPECT_EQ(ctrl.ComputeDeltaL(cur, ref, LossKind::kL1, toy),
            ctrl.PredictDeltaL(cur, ref));
}

TEST(OlfcTest, PretrainMeetsThresholdsAndRejectsEmptyData) {
  const ArmModel toy = ArmModel::TwoDofToy();
  Rng rng(14);
  const auto data = GenPretrainData(toy, 3000, 0.5, rng);
  for (NetworkKind kind : {NetworkKind::kTypeA, NetworkKind::kTypeB}) {
    PretrainReport report;
    Pretrain(kind, data, ToyOptions(), {}, &report);
    EXPECT_LE(report.held_out_rms, report.threshold);
  }
  EXPECT_THROW(Pretrain(NetworkKind::kTypeB, {}, ToyOptions()),
               std::invalid_argument);
  PretrainOptions none = ToyOptions();
  none.epochs = 0;
  EXPECT_THROW(Pretrain(NetworkKind::kTypeA, data, none), std::runtime_error);
}

TEST(OlfcTest, CheckpointReloadIsBitwise) {
  const ArmModel toy = ArmModel::TwoDofToy();
  OlfcController ctrl = ToyController(NetworkKind::kTypeB);
  Rng rng(15);
  Fill(ctrl, toy, 15, rng);
  ctrl.OnlineUpdate(toy);
  const auto dir =
      std::filesystem::temp_directory_path() / "myoctl_olfc_checkpoint";
  std::filesystem::remove_all(dir);
  ctrl.SaveCheckpoint(dir);
  OlfcController loaded = OlfcController::LoadCheckpoint(dir);
  std::filesystem::remove_all(dir);

  ASSERT_EQ(loaded.buffer().size(), ctrl.buffer().size());
  for (std::size_t i = 0; i < ctrl.buffer().size(); ++i) {
    EXPECT_EQ(loaded.buffer()[i].delta_l, ctrl.buffer()[i].delta_l);
  }
  JointVector cur(2), ref(2);
  cur << 0.3, -0.1;
  ref << -0.2, 0.2;
  EXPECT_EQ(loaded.ComputeDeltaL(cur, ref, LossKind::kL1, toy),
            ctrl.ComputeDeltaL(cur, ref, LossKind::kL1, toy));
  // Continued learning stays in lockstep: same batches, same Adam state.
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(loaded.OnlineUpdate(toy), ctrl.OnlineUpdate(toy));
  }
  const auto a = loaded.network().parameters();
  const auto b = ctrl.network().parameters();
  EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end()));
}

}  // namespace
}  // namespace myoctl
