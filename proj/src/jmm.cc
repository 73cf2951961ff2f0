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

#include "myoctl/jmm.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace myoctl {
namespace {

Eigen::VectorXd JmmInput(const JointVector& theta,
                         const MuscleVector& tensions) {
  Eigen::VectorXd x(theta.size() + tensions.size());
  x << theta, tensions;
  return x;
}

double RmsError(const Network& net, const Eigen::MatrixXd& x,
                const Eigen::MatrixXd& y, double* max_abs) {
  double sum = 0.0;
  double worst = 0.0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Eigen::VectorXd e =
        net.Forward(x.row(r).transpose()) - y.row(r).transpose();
    sum += e.squaredNorm();
    worst = std::max(worst, e.cwiseAbs().maxCoeff());
  }
  if (max_abs != nullptr) *max_abs = worst;
  return std::sqrt(sum / (static_cast<double>(x.rows()) * y.cols()));
}

}  // namespace

MuscleVector AnalyticJmm::Lengths(const JointVector& theta,
                                  const MuscleVector& tensions) const {
  return MuscleLengths(model_, theta) - tensions / stiffness_;
}

JmmNetwork::JmmNetwork(Network net) : net_(std::move(net)) {
  if (net_.input_dim() <= net_.output_dim()) {
    throw std::invalid_argument("JMM network input must be (theta, f)");
  }
}

MuscleVector JmmNetwork::Lengths(const JointVector& theta,
                                 const MuscleVector& tensions) const {
  return net_.Forward(JmmInput(theta, tensions));
}

void JmmNetwork::Save(const std::filesystem::path& path) const {
  net_.Save(path, kJmmRole);
}

JmmNetwork JmmNetwork::Load(const std::filesystem::path& path) {
  std::string role;
  Network net = Network::Load(path, &role);
  if (role != kJmmRole) {
    throw std::runtime_error(path.string() + ": expected role '" + kJmmRole +
                             "', found '" + role + "'");
  }
  return JmmNetwork(std::move(net));
}

JmmNetwork TrainJmm(const ArmModel& model, const JmmTrainOptions& options,
                    const PlantState* refine_plant, JmmTrainReport* report) {
  if (options.samples < kJmmMinSamples) {
    throw std::invalid_argument("JMM training needs at least " +
                                std::to_string(kJmmMinSamples) + " samples");
  }
  if (options.held_out < 1 || options.batch_size < 1 || options.epochs < 0) {
    throw std::invalid_argument("bad JMM training options");
  }
  const int nj = model.num_joints();
  const int nm = model.num_muscles();
  const double k = refine_plant != nullptr ? refine_plant->situation.stiffness
                                           : DefaultSituation(model).stiffness;
  Rng rng(options.seed);
  std::uniform_real_distribution<double> tension(options.tension_min,
                                                 options.tension_max);
  auto make_set = [&](int n, Eigen::MatrixXd& x, Eigen::MatrixXd& y) {
    x.resize(n, nj + nm);
    y.resize(n, nm);
    for (int r = 0; r < n; ++r) {
      const JointVector theta = SamplePose(rng, model);
      MuscleVector f(nm);
      for (int i = 0; i < nm; ++i) f[i] = tension(rng);
      x.row(r) = JmmInput(theta, f).transpose();
      y.row(r) = (MuscleLengths(model, theta) - f / k).transpose();
    }
  };
  Eigen::MatrixXd x, y, x_test, y_test;
  make_set(options.samples, x, y);
  make_set(options.held_out, x_test, y_test);

  std::vector<int> dims = {nj + nm};
  dims.insert(dims.end(), options.hidden.begin(), options.hidden.end());
  dims.push_back(nm);
  Network net(dims, options.seed);
  net.FitNormalization(x, y);
  net.FreezeNormalization();
  TrainMiniBatches(net, x, y, options.epochs, options.batch_size,
                   options.learning_rate, options.final_learning_rate, rng);

  JmmTrainReport local;
  local.base_held_out_rms_mm = RmsError(net, x_test, y_test, nullptr);

  if (refine_plant != nullptr && options.refine_rollouts > 0) {
    // Harvest (theta_cur, f_cur, l_ref) from seeded rollouts. Tuples with a
    // slack muscle carry no length information for it and are skipped.
    std::vector<Eigen::VectorXd> xs, ys;
    PlantState state = *refine_plant;
    for (int r = 0; r < options.refine_rollouts; ++r) {
      for (int s = 0; s < options.refine_steps; ++s) {
        const JointVector goal = SamplePose(rng, model);
        MuscleVector f(nm);
        for (int i = 0; i < nm; ++i) f[i] = tension(rng);
        const MuscleVector l_ref = MuscleLengths(model, goal) - f / k;
        state = Command(model, state, l_ref);
        if ((state.tensions.array() > 0.0).all()) {
          xs.push_back(JmmInput(state.theta, state.tensions));
          ys.push_back(l_ref);
        }
      }
    }
    local.refine_samples = static_cast<int>(xs.size());
    if (!xs.empty()) {
      Eigen::MatrixXd xr(x.rows() + xs.size(), x.cols());
      Eigen::MatrixXd yr(y.rows() + ys.size(), y.cols());
      xr.topRows(x.rows()) = x;
      yr.topRows(y.rows()) = y;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        xr.row(x.rows() + i) = xs[i].transpose();
        yr.row(y.rows() + i) = ys[i].transpose();
      }
      TrainMiniBatches(net, xr, yr, options.refine_epochs, options.batch_size,
                       options.final_learning_rate, options.final_learning_rate,
                       rng);
    }
  }

  local.held_out_rms_mm = RmsError(net, x_test, y_test, &local.held_out_max_mm);
  net.ResetOptimizer();
  net.adam() = AdamConfig{};
  if (report != nullptr) *report = local;
  if (!(local.held_out_rms_mm <= kJmmMaxHeldOutRms)) {
    std::ostringstream msg;
    msg << "JMM underfit: held-out RMS " << local.held_out_rms_mm
        << " mm exceeds " << kJmmMaxHeldOutRms << " mm";
    throw std::runtime_error(msg.str());
  }
  return JmmNetwork(std::move(net));
}

MuscleVector BfcDelta(const JointMuscleMap& h, const JointVector& theta_ref,
                      const JointVector& theta_cur, const MuscleVector& f_cur) {
  return h.Lengths(theta_ref, f_cur) - h.Lengths(theta_cur, f_cur);
}

MuscleVector InitialRealization(const JointMuscleMap& h,
                                const JointVector& theta_ref, int num_muscles,
                                double f_const) {
  return h.Lengths(theta_ref, MuscleVector::Constant(num_muscles, f_const));
}

}  // namespace myoctl
