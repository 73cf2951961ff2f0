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

#include "myoctl/net.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <string>

namespace myoctl {
namespace {

Eigen::MatrixXd RandomRows(std::mt19937_64& rng, int rows, int cols,
                           double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

Network SmallNet(std::uint64_t seed) {
  Network net({4, 6, 5, 3}, seed);
  Normalization in{Eigen::VectorXd::LinSpaced(4, -0.5, 0.5),
                   Eigen::VectorXd::LinSpaced(4, 0.5, 2.0)};
  Normalization out{Eigen::VectorXd::LinSpaced(3, 1.0, 3.0),
                    Eigen::VectorXd::LinSpaced(3, 0.2, 4.0)};
  net.SetNormalization(in, out);
  return net;
}

TEST(NetTest, GlorotInitStaysInBounds) {
  Network net({15, 40, 20, 20, 10}, 1);
  const double limit0 = std::sqrt(6.0 / (15 + 40));
  for (double w : net.weights(0)) EXPECT_LE(std::abs(w), limit0);
  for (double b : net.bias(2)) EXPECT_EQ(b, 0.0);
  EXPECT_EQ(net.num_parameters(),
            15u * 40 + 40 + 40 * 20 + 20 + 20 * 20 + 20 + 20 * 10 + 10);
}

TEST(NetTest, SameSeedSameWeights) {
  Network a({3, 5, 2}, 9);
  Network b({3, 5, 2}, 9);
  Network c({3, 5, 2}, 10);
  EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().end(),
                         b.parameters().begin()));
  EXPECT_FALSE(std::equal(a.parameters().begin(), a.parameters().end(),
                          c.parameters().begin()));
}

TEST(NetTest, ParameterGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  Network net = SmallNet(4);
  const Eigen::MatrixXd x = RandomRows(rng, 7, 4);
  const Eigen::MatrixXd t = RandomRows(rng, 7, 3, 0.0, 4.0);
  const std::vector<double> grad = net.MseGradient(x, t);
  std::size_t offset = 0;
  for (int l = 0; l < net.num_layers(); ++l) {
    for (auto block : {net.weights(l), net.bias(l)}) {
      for (std::size_t i = 0; i < block.size(); ++i) {
        const double saved = block[i];
        block[i] = saved + 1e-6;
        const double up = net.Mse(x, t);
        block[i] = saved - 1e-6;
        const double down = net.Mse(x, t);
        block[i] = saved;
        const double fd = (up - down) / 2e-6;
        EXPECT_NEAR(grad[offset + i], fd, 1e-7 + 1e-5 * std::abs(fd));
      }
      offset += block.size();
    }
  }
}

double LossAt(const Network& net, const Eigen::VectorXd& x,
              const Eigen::VectorXd& t, const LossSpec& loss,
              IndexRange slice) {
  return ControlLoss(loss, net.Forward(x), t,
                     x.segment(slice.begin, slice.size()));
}

TEST(NetTest, InputGradientMatchesFiniteDifferencesForEveryLoss) {
  std::mt19937_64 rng(8);
  const Network net = SmallNet(8);
  const IndexRange slice{1, 4};
  for (LossKind kind : {LossKind::kL0, LossKind::kL1, LossKind::kL2}) {
    const LossSpec loss{kind, 0.3, 57.0};
    for (int n = 0; n < 20; ++n) {
      Eigen::VectorXd x = RandomRows(rng, 1, 4).row(0).transpose();
      // Keep the penalized entries away from the kink at zero.
      for (int i = 1; i < 4; ++i) {
        if (std::abs(x(i)) < 0.05) x(i) = 0.2;
      }
      const Eigen::VectorXd t = RandomRows(rng, 1, 3, 0.0, 4.0).row(0);
      const Eigen::VectorXd g = net.InputGradient(x, t, loss, slice);
      ASSERT_EQ(g.size(), 3);
      for (int i = 0; i < 3; ++i) {
        Eigen::VectorXd up = x, down = x;
        up(1 + i) += 1e-6;
        down(1 + i) -= 1e-6;
        const double fd = (LossAt(net, up, t, loss, slice) -
                           LossAt(net, down, t, loss, slice)) /
                          2e-6;
        EXPECT_NEAR(g(i), fd, 1e-5 * (1.0 + std::abs(fd)))
            << LossKindName(kind) << " coord " << i;
      }
    }
  }
}

TEST(NetTest, ZeroResidualGivesZeroGradient) {
  const Network net = SmallNet(2);
  Eigen::VectorXd x(4);
  x << 0.1, 0.0, 0.0, 0.0;
  const Eigen::VectorXd t = net.Forward(x);
  for (LossKind kind : {LossKind::kL0, LossKind::kL1, LossKind::kL2}) {
    const Eigen::VectorXd g = net.InputGradient(x, t, {kind, 0.5, 1.0}, {1, 4});
    EXPECT_EQ(g, Eigen::VectorXd::Zero(3)) << LossKindName(kind);
  }
}

TEST(NetTest, L2PenaltyIgnoresPositiveEntries) {
  const Network net = SmallNet(3);
  Eigen::VectorXd x(4);
  x << 0.1, 0.4, 0.2, 0.3;
  const Eigen::VectorXd t = net.Forward(x);
  // All penalized entries positive and residual zero: no gradient at all.
  EXPECT_EQ(net.InputGradient(x, t, {LossKind::kL2, 0.5, 1.0}, {1, 4}),
            Eigen::VectorXd::Zero(3));
  const Eigen::VectorXd g1 =
      net.InputGradient(x, t, {LossKind::kL1, 0.5, 1.0}, {1, 4});
  EXPECT_NEAR(g1.norm(), 0.5, 1e-12);
}

TEST(NetTest, AdamMatchesHandComputedSteps) {
  // One linear layer y = w x + b with identity normalization.
  Network net({1, 1}, 1);
  net.weights(0)[0] = 0.5;
  net.bias(0)[0] = 0.0;
  Eigen::MatrixXd x(1, 1), t(1, 1);
  x << 2.0;
  t << 3.0;
  double w = 0.5, b = 0.0, mw = 0, vw = 0, mb = 0, vb = 0;
  const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int step = 1; step <= 3; ++step) {
    const double e = w * 2.0 + b - 3.0;
    const double gw = 2.0 * e * 2.0;
    const double gb = 2.0 * e;
    mw = b1 * mw + (1 - b1) * gw;
    vw = b2 * vw + (1 - b2) * gw * gw;
    mb = b1 * mb + (1 - b1) * gb;
    vb = b2 * vb + (1 - b2) * gb * gb;
    const double c1 = 1 - std::pow(b1, step);
    const double c2 = 1 - std::pow(b2, step);
    w -= lr * (mw / c1) / (std::sqrt(vw / c2) + eps);
    b -= lr * (mb / c1) / (std::sqrt(vb / c2) + eps);
    const double mse = net.AdamStep(x, t);
    EXPECT_NEAR(mse, e * e, 1e-12);
    EXPECT_NEAR(net.weights(0)[0], w, 1e-14);
    EXPECT_NEAR(net.bias(0)[0], b, 1e-14);
  }
  EXPECT_EQ(net.adam_step_count(), 3);
  net.ResetOptimizer();
  EXPECT_EQ(net.adam_step_count(), 0);
}

TEST(NetTest, TrainingFitsASmoothFunction) {
  std::mt19937_64 rng(12);
  Network net({2, 20, 20, 1}, 12);
  const Eigen::MatrixXd x = RandomRows(rng, 200, 2, -2.0, 2.0);
  Eigen::MatrixXd t(200, 1);
  for (int r = 0; r < 200; ++r) t(r, 0) = std::sin(x(r, 0)) * x(r, 1);
  net.FitNormalization(x, t);
  net.adam().learning_rate = 1e-2;
  const double before = net.Mse(x, t);
  const double after = net.TrainBatch(x, t, 1500);
  EXPECT_LT(after, 0.05 * before);
}

TEST(NetTest, FrozenNormalizationCannotChange) {
  Network net({2, 3, 1}, 1);
  net.FreezeNormalization();
  EXPECT_THROW(net.SetNormalization(Normalization::Identity(2),
                                    Normalization::Identity(1)),
               std::logic_error);
}

TEST(NetTest, WeightFileRoundTripIsExact) {
  std::mt19937_64 rng(21);
  Network net = SmallNet(21);
  net.AdamStep(RandomRows(rng, 5, 4), RandomRows(rng, 5, 3));
  net.FreezeNormalization();
  std::stringstream buffer;
  net.Write(buffer, "jmm");
  EXPECT_EQ(buffer.str().substr(0, 18), "MYOCTL-NET v1 jmm\n");
  std::string role;
  const Network copy = Network::Read(buffer, &role);
  EXPECT_EQ(role, "jmm");
  EXPECT_TRUE(copy.normalization_frozen());
  EXPECT_EQ(copy.adam_step_count(), 1);
  EXPECT_TRUE(std::equal(net.parameters().begin(), net.parameters().end(),
                         copy.parameters().begin()));
  const Eigen::VectorXd x = RandomRows(rng, 1, 4).row(0);
  EXPECT_EQ(net.Forward(x), copy.Forward(x));
  std::stringstream again;
  copy.Write(again, "jmm");
  std::stringstream first;
  net.Write(first, "jmm");
  EXPECT_EQ(first.str(), again.str());
}

TEST(NetTest, LoaderRejectsCorruptFiles) {
  Network net({2, 2, 1}, 1);
  std::stringstream good;
  net.Write(good, "");
  const std::string text = good.str();

  std::stringstream bad_magic("MYOCTL-NET v2\n2 2 1\n");
  EXPECT_THROW(Network::Read(bad_magic), std::runtime_error);

  std::string nan_text = text;
  nan_text.replace(nan_text.find('\n', nan_text.find('\n') + 1) + 1, 1, "nan ");
  std::stringstream with_nan(nan_text);
  EXPECT_THROW(Network::Read(with_nan), std::runtime_error);

  std::string short_text = text;
  short_text.replace(short_text.find("2 2 1"), 5, "2 3 1");
  std::stringstream wrong_dims(short_text);
  EXPECT_THROW(Network::Read(wrong_dims), std::runtime_error);

  std::stringstream truncated(text.substr(0, text.size() / 3));
  EXPECT_THROW(Network::Read(truncated), std::runtime_error);
}

TEST(NetTest, ForwardRejectsWrongInputSize) {
  Network net({3, 2, 1}, 1);
  EXPECT_THROW(net.Forward(Eigen::VectorXd::Zero(2)), std::invalid_argument);
}

}  // namespace
}  // namespace myoctl
