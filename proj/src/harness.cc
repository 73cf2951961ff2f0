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

#include "myoctl/harness.h"

#include <cmath>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace myoctl {
namespace {

using Json = nlohmann::json;

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void RejectUnknownKeys(const Json& j, const std::set<std::string>& known,
                       const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.contains(it.key())) {
      throw std::invalid_argument("unknown config key '" + it.key() + "' in " +
                                  where);
    }
  }
}

Eigen::VectorXd VectorFromJson(const Json& j) {
  const std::vector<double> v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

// Command in the plant's accepted range.
MuscleVector ClipCommand(const ArmModel& model, const MuscleVector& l) {
  return l.cwiseMax(0.5 * model.rest_lengths())
      .cwiseMin(2.0 * model.rest_lengths());
}

using Feedback = std::function<MuscleVector(const PlantState& state,
                                            const JointVector& theta_ref)>;
using TargetFn =
    std::function<JointVector(int rand_idx, const PlantState& state)>;

struct PhaseSpec {
  std::string name;
  int n_rand = 5;
  int n_trial = 5;
  std::uint64_t rand_seed = 0;
  TargetFn target;
  Feedback feedback;
  OlfcController* learner = nullptr;  // online learning when set
  bool noise = false;
  SituationConfig situation;
  // Position task: x_ref for err_mm; empty otherwise.
  std::optional<Eigen::Vector3d> x_ref;
};

class Runner {
 public:
  Runner(const ExperimentConfig& config, const ExperimentContext& context,
         ScenarioResult& result)
      : config_(config),
        model_(*context.model),
        jmm_(*context.jmm),
        result_(result) {}

  void RunPhase(const PhaseSpec& spec) {
    PlantState state = RestingState(
        model_, model_.Clamp(JointVector::Zero(model_.num_joints())),
        spec.situation);
    MuscleVector l_cur = state.last_command;
    Rng rand_rng(spec.rand_seed);
    Rng noise_rng(SplitMix64(spec.rand_seed ^ 0x6e6f697365ULL));
    std::uniform_real_distribution<double> noise(config_.noise_lo_mm,
                                                 config_.noise_hi_mm);
    const int nm = model_.num_muscles();

    auto step = [&](const MuscleVector& l_new) {
      const JointVector before = state.theta;
      state = Command(model_, state, l_new);
      if (spec.learner != nullptr &&
          spec.learner->RecordTransition(before, state.theta, l_cur, l_new) &&
          spec.learner->ReadyToLearn()) {
        spec.learner->OnlineUpdate(model_);
      }
      const double applied = (l_new - l_cur).norm();
      l_cur = l_new;
      return applied;
    };
    auto record = [&](int r, int t, const JointVector& theta_ref,
                      double applied) {
      TrialRecord rec;
      rec.scenario = config_.scenario;
      rec.seed = config_.seed;
      rec.phase = spec.name;
      rec.rand_idx = r;
      rec.trial_idx = t;
      rec.err_deg = RadToDeg(theta_ref - state.theta).norm();
      rec.tension_n = state.tensions.norm();
      rec.dl_norm_mm = applied;
      if (spec.x_ref) {
        rec.err_mm = (*spec.x_ref - EndEffector(model_, state.theta)).norm();
      }
      result_.records.push_back(std::move(rec));
    };

    for (int r = 0; r < spec.n_rand; ++r) {
      const JointVector theta_rand = SamplePose(rand_rng, model_);
      step(ClipCommand(model_, InitialRealization(jmm_, theta_rand, nm)));
      const JointVector theta_ref = spec.target(r, state);
      record(
          r, 0, theta_ref,
          step(ClipCommand(model_, InitialRealization(jmm_, theta_ref, nm))));
      for (int t = 1; t <= spec.n_trial; ++t) {
        MuscleVector dl = spec.feedback(state, theta_ref);
        if (spec.noise) {
          for (int i = 0; i < nm; ++i) dl[i] += noise(noise_rng);
        }
        record(r, t, theta_ref, step(ClipCommand(model_, l_cur + dl)));
      }
    }
  }

  Feedback Bfc() const {
    return [this](const PlantState& s, const JointVector& theta_ref) {
      return BfcDelta(jmm_, theta_ref, s.theta, s.tensions);
    };
  }

  Feedback Olfc(const OlfcController* ctrl, LossKind loss) const {
    return [this, ctrl, loss](const PlantState& s, const JointVector& ref) {
      return ctrl->ComputeDeltaL(s.theta, ref, loss, model_);
    };
  }

 private:
  const ExperimentConfig& config_;
  const ArmModel& model_;
  const JointMuscleMap& jmm_;
  ScenarioResult& result_;
};

TargetFn Fixed(const JointVector& theta) {
  return [theta](int, const PlantState&) { return theta; };
}

// Uniformly random targets drawn from `seed`, one per call index.
std::vector<JointVector> RandomTargets(const ArmModel& model, int n,
                                       double span, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<JointVector> targets;
  for (int i = 0; i < n; ++i) targets.push_back(SamplePose(rng, model, span));
  return targets;
}

TargetFn FromList(std::vector<JointVector> targets) {
  return [targets = std::move(targets)](int r, const PlantState&) {
    return targets.at(r);
  };
}

const OlfcController& RequireController(const ExperimentContext& ctx,
                                        NetworkKind kind) {
  const OlfcController* c =
      kind == NetworkKind::kTypeA ? ctx.type_a : ctx.type_b;
  if (c == nullptr) {
    throw std::invalid_argument("scenario needs a pretrained " +
                                NetworkKindName(kind) + " controller");
  }
  return *c;
}

// Fresh copy of a pretrained controller whose sampling stream follows the
// run seed.
OlfcController CopyController(const OlfcController& base,
                              const ExperimentConfig& config,
                              const std::string& label) {
  Network net = base.network();
  net.ResetOptimizer();
  return OlfcController(base.kind(), std::move(net), config.olfc,
                        StreamSeed(config.seed, "controller/" + label));
}

SituationConfig BaseSituation(const ExperimentConfig& config,
                              const ArmModel& model) {
  SituationConfig s = config.situation;
  if (s.friction_nm.size() == 0) s.friction_nm = DefaultFriction(model);
  s.Validate(model.num_joints());
  return s;
}

JointVector Target(const ExperimentConfig& config) {
  return config.target_deg.size() ? DegToRad(config.target_deg)
                                  : DefaultTarget();
}

void RunHysteresis(const ExperimentConfig& config, const ExperimentContext& ctx,
                   ScenarioResult& result) {
  const ArmModel& model = *ctx.model;
  const HysteresisConfig& h = config.hysteresis;
  int joint = -1;
  for (int j = 0; j < model.num_joints(); ++j) {
    if (model.joints()[j].name == h.joint) joint = j;
  }
  if (joint < 0) throw std::invalid_argument("unknown joint " + h.joint);
  const SituationConfig situation = BaseSituation(config, model);
  const JointVector base = Target(config);
  const int nm = model.num_muscles();
  auto command_for = [&](int i) {
    JointVector theta = base;
    theta[joint] = DegToRad(h.from_deg + (h.to_deg - h.from_deg) * i / h.steps);
    return ClipCommand(model, InitialRealization(*ctx.jmm, theta, nm));
  };

  JointVector start = base;
  start[joint] = DegToRad(h.from_deg);
  PlantState state =
      Command(model, RestingState(model, start, situation), command_for(0));
  result.trajectory.emplace(model);
  for (int loop = 0; loop < h.warmup_loops + h.loops; ++loop) {
    const bool keep = loop >= h.warmup_loops;
    HysteresisLoop out;
    for (int i = 1; i <= h.steps; ++i) {
      state = Command(model, state, command_for(i));
      out.down_deg.push_back(RadToDeg(state.theta[joint]));
      if (keep) result.trajectory->Append(state);
    }
    for (int i = h.steps - 1; i >= 0; --i) {
      state = Command(model, state, command_for(i));
      out.up_deg.push_back(RadToDeg(state.theta[joint]));
      if (keep) result.trajectory->Append(state);
    }
    // Command index steps/2 on both branches.
    const int mid = h.steps / 2;
    out.mid_gap_deg =
        std::abs(out.down_deg[mid - 1] - out.up_deg[h.steps - 1 - mid]);
    if (keep) result.loops.push_back(std::move(out));
  }
}

void RunBfcEval(const ExperimentConfig& config, const ExperimentContext& ctx,
                ScenarioResult& result) {
  Runner runner(config, ctx, result);
  const ArmModel& model = *ctx.model;
  std::vector<JointVector> targets;
  if (config.target_deg.size()) {
    targets.push_back(Target(config));
  } else {
    targets = RandomTargets(model, config.num_targets, config.target_span,
                            StreamSeed(config.seed, "targets"));
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    PhaseSpec p;
    p.name = "bfc/target" + std::to_string(i);
    p.n_rand = config.n_max_rand;
    p.n_trial = config.n_max_trial;
    p.rand_seed = StreamSeed(config.seed, "rand/eval");
    p.target = Fixed(targets[i]);
    p.feedback = runner.Bfc();
    p.situation = BaseSituation(config, model);
    runner.RunPhase(p);
  }
}

// Learning phase on a fixed or per-rand target list.
void Learn(Runner& runner, const ExperimentConfig& config,
           const std::string& name, OlfcController& ctrl, LossKind loss,
           const TargetFn& target, const SituationConfig& situation, int n_rand,
           bool noise = false) {
  PhaseSpec p;
  p.name = name;
  p.n_rand = n_rand;
  p.n_trial = config.n_max_trial;
  p.rand_seed = StreamSeed(config.seed, "rand/learn");
  p.target = target;
  p.feedback = runner.Olfc(&ctrl, loss);
  p.learner = &ctrl;
  p.noise = noise;
  p.situation = situation;
  runner.RunPhase(p);
}

void Evaluate(Runner& runner, const ExperimentConfig& config,
              const std::string& name, const OlfcController& ctrl,
              LossKind loss, const TargetFn& target,
              const SituationConfig& situation) {
  PhaseSpec p;
  p.name = name;
  p.n_rand = config.n_max_rand;
  p.n_trial = config.n_max_trial;
  p.rand_seed = StreamSeed(config.seed, "rand/eval");
  p.target = target;
  p.feedback = runner.Olfc(&ctrl, loss);
  p.situation = situation;
  runner.RunPhase(p);
}

void RunOlfcCompare(const ExperimentConfig& config,
                    const ExperimentContext& ctx, ScenarioResult& result) {
  Runner runner(config, ctx, result);
  const SituationConfig s = BaseSituation(config, *ctx.model);
  const TargetFn target = Fixed(Target(config));
  const LossKind loss = ParseLossKind(config.loss);
  for (const std::string& name : config.controllers) {
    const NetworkKind kind = ParseNetworkKind(name);
    OlfcController ctrl =
        CopyController(RequireController(ctx, kind), config, name);
    Evaluate(runner, config, name + "/pre", ctrl, loss, target, s);
    Learn(runner, config, name + "/learn", ctrl, loss, target, s,
          config.learn_rand);
    Evaluate(runner, config, name + "/post", ctrl, loss, target, s);
  }
}

// Noise perturbs the commands applied while learning; both learned copies
// are then evaluated without noise and with learning frozen.
void RunNoise(const ExperimentConfig& config, const ExperimentContext& ctx,
              ScenarioResult& result) {
  Runner runner(config, ctx, result);
  const SituationConfig s = BaseSituation(config, *ctx.model);
  const TargetFn target = Fixed(Target(config));
  const LossKind loss = ParseLossKind(config.loss);
  for (const std::string& name : config.controllers) {
    const NetworkKind kind = ParseNetworkKind(name);
    for (const bool noisy : {false, true}) {
      const std::string variant = noisy ? "noise" : "clean";
      OlfcController ctrl =
          CopyController(RequireController(ctx, kind), config, name);
      Learn(runner, config, name + "/learn-" + variant, ctrl, loss, target, s,
            config.learn_rand, noisy);
      Evaluate(runner, config, name + "/" + variant, ctrl, loss, target, s);
    }
  }
}

void RunLossCompare(const ExperimentConfig& config,
                    const ExperimentContext& ctx, ScenarioResult& result) {
  Runner runner(config, ctx, result);
  const SituationConfig s = BaseSituation(config, *ctx.model);
  const TargetFn target = Fixed(Target(config));
  const OlfcController& base = RequireController(ctx, NetworkKind::kTypeB);
  for (const std::string& name : config.losses) {
    const LossKind loss = ParseLossKind(name);
    OlfcController ctrl = CopyController(base, config, "typeB");
    Learn(runner, config, name + "/learn", ctrl, loss, target, s,
          config.learn_rand);
    Evaluate(runner, config, name + "/eval", ctrl, loss, target, s);
  }
}

void RunSituations(const ExperimentConfig& config, const ExperimentContext& ctx,
                   ScenarioResult& result) {
  Runner runner(config, ctx, result);
  const SituationConfig normal = BaseSituation(config, *ctx.model);
  SituationConfig payload = normal;
  payload.payload_kg = config.payload_kg;
  SituationConfig pitch = normal;
  pitch.trunk_pitch = DegToRad(config.trunk_pitch_deg);
  const std::vector<std::pair<std::string, SituationConfig>> situations = {
      {"normal", normal}, {"payload", payload}, {"pitch", pitch}};
  const TargetFn target = Fixed(Target(config));
  const LossKind loss = ParseLossKind(config.loss);
  OlfcController ctrl = CopyController(
      RequireController(ctx, NetworkKind::kTypeB), config, "typeB");
  for (const auto& [name, s] : situations) {
    Evaluate(runner, config, "pre/" + name, ctrl, loss, target, s);
  }
  Learn(runner, config, "learn", ctrl, loss, target, normal, config.learn_rand);
  for (const auto& [name, s] : situations) {
    Evaluate(runner, config, "post/" + name, ctrl, loss, target, s);
  }
}

void RunQuantEval(const ExperimentConfig& config, const ExperimentContext& ctx,
                  ScenarioResult& result) {
  Runner runner(config, ctx, result);
  const ArmModel& model = *ctx.model;
  const SituationConfig s = BaseSituation(config, model);
  const LossKind loss = ParseLossKind(config.loss);
  const std::vector<JointVector> held_out =
      RandomTargets(model, config.num_targets, config.target_span,
                    StreamSeed(config.seed, "targets"));
  OlfcController ctrl = CopyController(
      RequireController(ctx, NetworkKind::kTypeB), config, "typeB");
  for (std::size_t i = 0; i < held_out.size(); ++i) {
    Evaluate(runner, config, "pre/target" + std::to_string(i), ctrl, loss,
             Fixed(held_out[i]), s);
  }
  // Learning on random transitions: a fresh random target per episode.
  Learn(runner, config, "learn", ctrl, loss,
        FromList(RandomTargets(model, config.learn_rand, config.target_span,
                               StreamSeed(config.seed, "targets/learn"))),
        s, config.learn_rand);
  for (std::size_t i = 0; i < held_out.size(); ++i) {
    Evaluate(runner, config, "post/target" + std::to_string(i), ctrl, loss,
             Fixed(held_out[i]), s);
  }
}

void RunPositionTask(const ExperimentConfig& config,
                     const ExperimentContext& ctx, ScenarioResult& result) {
  Runner runner(config, ctx, result);
  const ArmModel& model = *ctx.model;
  const SituationConfig s = BaseSituation(config, model);
  const LossKind loss = ParseLossKind(config.loss);
  const Eigen::Vector3d x_ref =
      EndEffector(model, Target(config)) + config.position_offset_mm;
  const double max_residual = config.ik_max_residual_mm;
  const TargetFn ik = [&model, x_ref, max_residual](int,
                                                    const PlantState& state) {
    const DlsResult r = JointsForEndEffector(model, x_ref, state.theta);
    if (r.residual_mm > max_residual) {
      std::ostringstream msg;
      msg << "position target unreachable: IK residual " << r.residual_mm
          << " mm";
      throw std::runtime_error(msg.str());
    }
    return r.theta;
  };
  OlfcController ctrl = CopyController(
      RequireController(ctx, NetworkKind::kTypeB), config, "typeB");
  auto phase = [&](const std::string& name, OlfcController* learner, int n_rand,
                   const std::string& stream) {
    PhaseSpec p;
    p.name = name;
    p.n_rand = n_rand;
    p.n_trial = config.n_max_trial;
    p.rand_seed = StreamSeed(config.seed, stream);
    p.target = ik;
    p.feedback = runner.Olfc(&ctrl, loss);
    p.learner = learner;
    p.situation = s;
    p.x_ref = x_ref;
    runner.RunPhase(p);
  };
  phase("pre", nullptr, config.n_max_rand, "rand/eval");
  phase("learn", &ctrl, config.learn_rand, "rand/learn");
  phase("post", nullptr, config.n_max_rand, "rand/eval");
}

}  // namespace

std::uint64_t StreamSeed(std::uint64_t seed, const std::string& label) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : label) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return SplitMix64(SplitMix64(seed) ^ h);
}

JointVector DefaultTarget() {
  JointVector deg(5);
  deg << 30, -30, 30, -60, 30;
  return DegToRad(deg);
}

void ExperimentConfig::Validate() const {
  bool known = false;
  for (const std::string& s : ScenarioNames()) known = known || s == scenario;
  if (!known) throw std::invalid_argument("unknown scenario: " + scenario);
  if (n_max_trial < 1 || n_max_rand < 1 || learn_rand < 0 || num_targets < 1) {
    throw std::invalid_argument("trial and rand counts must be positive");
  }
  if (!(target_span > 0.0 && target_span <= 1.0)) {
    throw std::invalid_argument("target_span must be in (0, 1]");
  }
  if (!(noise_lo_mm <= noise_hi_mm)) {
    throw std::invalid_argument("noise bounds must satisfy lo <= hi");
  }
  if (hysteresis.steps < 2 || hysteresis.loops < 1 ||
      hysteresis.warmup_loops < 0) {
    throw std::invalid_argument("bad hysteresis sweep settings");
  }
  for (const std::string& c : controllers) ParseNetworkKind(c);
  for (const std::string& l : losses) ParseLossKind(l);
  ParseLossKind(loss);
  olfc.Validate();
}

namespace {

ExperimentConfig ParseConfigObject(const Json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be an object");
  RejectUnknownKeys(j,
                    {"scenario",
                     "seed",
                     "fixture",
                     "model_dir",
                     "jmm_file",
                     "type_a_file",
                     "type_b_file",
                     "analytic_jmm",
                     "target_deg",
                     "num_targets",
                     "target_span",
                     "n_max_trial",
                     "n_max_rand",
                     "learn_rand",
                     "controllers",
                     "loss",
                     "losses",
                     "situation",
                     "payload_kg",
                     "trunk_pitch_deg",
                     "noise_mm",
                     "olfc",
                     "hysteresis",
                     "pretrain",
                     "position_offset_mm",
                     "ik_max_residual_mm",
                     "out_dir"},
                    "config");
  ExperimentConfig c;
  auto opt = [&](const Json& obj, const char* key, auto& field) {
    if (obj.contains(key)) {
      field = obj.at(key).get<std::remove_reference_t<decltype(field)>>();
    }
  };
  opt(j, "scenario", c.scenario);
  opt(j, "seed", c.seed);
  if (j.contains("fixture")) c.fixture = j.at("fixture").get<std::string>();
  if (j.contains("model_dir")) {
    c.model_dir = j.at("model_dir").get<std::string>();
  }
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  opt(j, "jmm_file", c.jmm_file);
  opt(j, "type_a_file", c.type_a_file);
  opt(j, "type_b_file", c.type_b_file);
  opt(j, "analytic_jmm", c.analytic_jmm);
  if (j.contains("target_deg")) c.target_deg = VectorFromJson(j["target_deg"]);
  opt(j, "num_targets", c.num_targets);
  opt(j, "target_span", c.target_span);
  opt(j, "n_max_trial", c.n_max_trial);
  opt(j, "n_max_rand", c.n_max_rand);
  opt(j, "learn_rand", c.learn_rand);
  opt(j, "controllers", c.controllers);
  opt(j, "loss", c.loss);
  opt(j, "losses", c.losses);
  opt(j, "payload_kg", c.payload_kg);
  opt(j, "trunk_pitch_deg", c.trunk_pitch_deg);
  opt(j, "ik_max_residual_mm", c.ik_max_residual_mm);
  if (j.contains("noise_mm")) {
    const auto v = j["noise_mm"].get<std::vector<double>>();
    if (v.size() != 2) throw std::invalid_argument("noise_mm needs [lo, hi]");
    c.noise_lo_mm = v[0];
    c.noise_hi_mm = v[1];
  }
  if (j.contains("position_offset_mm")) {
    const Eigen::VectorXd v = VectorFromJson(j["position_offset_mm"]);
    if (v.size() != 3) {
      throw std::invalid_argument("position_offset_mm needs 3 entries");
    }
    c.position_offset_mm = v;
  }
  if (j.contains("situation")) {
    const Json& s = j["situation"];
    RejectUnknownKeys(s,
                      {"payload_kg", "trunk_pitch_deg", "stiffness",
                       "friction_nm", "min_tension", "gravity"},
                      "situation");
    opt(s, "payload_kg", c.situation.payload_kg);
    if (s.contains("trunk_pitch_deg")) {
      c.situation.trunk_pitch = DegToRad(s["trunk_pitch_deg"].get<double>());
    }
    opt(s, "stiffness", c.situation.stiffness);
    opt(s, "min_tension", c.situation.min_tension);
    opt(s, "gravity", c.situation.gravity);
    if (s.contains("friction_nm")) {
      c.situation.friction_nm = VectorFromJson(s["friction_nm"]);
    }
  }
  if (j.contains("olfc")) {
    const Json& o = j["olfc"];
    RejectUnknownKeys(o,
                      {"c_length", "n_thre", "n_data", "n_limit", "n_const",
                       "n_epoch", "gamma_max", "n_batch", "n_update", "alpha",
                       "buffer_capacity", "s_dtheta", "loss_error_scale"},
                      "olfc");
    OlfcConstants& k = c.olfc;
    opt(o, "c_length", k.c_length);
    opt(o, "n_thre", k.n_thre);
    opt(o, "n_data", k.n_data);
    opt(o, "n_limit", k.n_limit);
    opt(o, "n_const", k.n_const);
    opt(o, "n_epoch", k.n_epoch);
    opt(o, "gamma_max", k.gamma_max);
    opt(o, "n_batch", k.n_batch);
    opt(o, "n_update", k.n_update);
    opt(o, "alpha", k.alpha);
    opt(o, "buffer_capacity", k.buffer_capacity);
    opt(o, "s_dtheta", k.s_dtheta);
    opt(o, "loss_error_scale", k.loss_error_scale);
  }
  if (j.contains("hysteresis")) {
    const Json& h = j["hysteresis"];
    RejectUnknownKeys(
        h, {"joint", "from_deg", "to_deg", "steps", "loops", "warmup_loops"},
        "hysteresis");
    opt(h, "joint", c.hysteresis.joint);
    opt(h, "from_deg", c.hysteresis.from_deg);
    opt(h, "to_deg", c.hysteresis.to_deg);
    opt(h, "steps", c.hysteresis.steps);
    opt(h, "loops", c.hysteresis.loops);
    opt(h, "warmup_loops", c.hysteresis.warmup_loops);
  }
  if (j.contains("pretrain")) {
    const Json& p = j["pretrain"];
    RejectUnknownKeys(
        p,
        {"jmm_samples", "jmm_epochs", "jmm_hidden", "olfc_samples",
         "olfc_epochs", "olfc_zero_motion", "seed"},
        "pretrain");
    opt(p, "jmm_samples", c.pretrain.jmm_samples);
    opt(p, "jmm_epochs", c.pretrain.jmm_epochs);
    opt(p, "jmm_hidden", c.pretrain.jmm_hidden);
    opt(p, "olfc_samples", c.pretrain.olfc_samples);
    opt(p, "olfc_epochs", c.pretrain.olfc_epochs);
    opt(p, "olfc_zero_motion", c.pretrain.olfc_zero_motion);
    opt(p, "seed", c.pretrain.seed);
  }
  c.Validate();
  return c;
}

}  // namespace

ExperimentConfig ParseConfig(const std::string& json_text) {
  try {
    return ParseConfigObject(Json::parse(json_text));
  } catch (const Json::exception& e) {
    throw std::invalid_argument(e.what());
  }
}

ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  ExperimentConfig c;
  try {
    c = ParseConfig(text.str());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("invalid config " + path.string() + ": " +
                                e.what());
  }
  // Relative paths in a config file are relative to that file.
  const std::filesystem::path base = path.parent_path();
  for (std::filesystem::path* p : {&c.fixture, &c.model_dir, &c.out_dir}) {
    if (p->is_relative()) *p = base / *p;
  }
  return c;
}

ScenarioResult RunScenario(const ExperimentConfig& config,
                           const ExperimentContext& context) {
  config.Validate();
  if (context.model == nullptr || context.jmm == nullptr) {
    throw std::invalid_argument("scenario needs an arm model and a JMM");
  }
  ScenarioResult result;
  try {
    const std::string& s = config.scenario;
    if (s == "hysteresis") {
      RunHysteresis(config, context, result);
    } else if (s == "bfc-eval") {
      RunBfcEval(config, context, result);
    } else if (s == "olfc-compare") {
      RunOlfcCompare(config, context, result);
    } else if (s == "noise") {
      RunNoise(config, context, result);
    } else if (s == "loss-compare") {
      RunLossCompare(config, context, result);
    } else if (s == "situations") {
      RunSituations(config, context, result);
    } else if (s == "quant-eval") {
      RunQuantEval(config, context, result);
    } else if (s == "position-task") {
      RunPositionTask(config, context, result);
    }
  } catch (const SettleDivergedError& e) {
    result.aborted = true;
    result.error = e.what();
  }
  return result;
}

ExperimentContext LoadedModels::Context() const {
  return {model.get(), jmm.get(), type_a ? &*type_a : nullptr,
          type_b ? &*type_b : nullptr};
}

LoadedModels LoadModels(const ExperimentConfig& config) {
  auto path_of = [&config](const std::string& file) {
    const std::filesystem::path f(file);
    return f.is_absolute() ? f : config.model_dir / f;
  };
  LoadedModels m;
  m.model = std::make_unique<const ArmModel>(ArmModel::Load(config.fixture));
  if (config.analytic_jmm) {
    m.jmm = std::make_unique<const AnalyticJmm>(*m.model,
                                                config.situation.stiffness);
  } else {
    const std::filesystem::path path = path_of(config.jmm_file);
    if (!std::filesystem::exists(path)) {
      throw std::runtime_error("missing " + path.string() +
                               "; run `myoctl pretrain` first");
    }
    m.jmm = std::make_unique<const JmmNetwork>(JmmNetwork::Load(path));
  }
  for (NetworkKind kind : {NetworkKind::kTypeA, NetworkKind::kTypeB}) {
    const std::filesystem::path path = path_of(
        kind == NetworkKind::kTypeA ? config.type_a_file : config.type_b_file);
    if (!std::filesystem::exists(path)) continue;
    std::string role;
    Network net = Network::Load(path, &role);
    if (role != OlfcRole(kind)) {
      throw std::runtime_error(path.string() + ": expected role " +
                               OlfcRole(kind) + ", found '" + role + "'");
    }
    (kind == NetworkKind::kTypeA ? m.type_a : m.type_b)
        .emplace(kind, std::move(net), config.olfc, config.seed);
  }
  return m;
}

JmmNetwork PretrainJmm(const ArmModel& model, const PretrainConfig& config,
                       JmmTrainReport* report) {
  JmmTrainOptions o;
  o.samples = config.jmm_samples;
  o.epochs = config.jmm_epochs;
  o.hidden = config.jmm_hidden;
  o.batch_size = 32;
  o.learning_rate = 1e-2;
  o.final_learning_rate = 1e-4;
  o.seed = StreamSeed(config.seed, "pretrain/jmm");
  return TrainJmm(model, o, nullptr, report);
}

OlfcController PretrainController(const ArmModel& model, NetworkKind kind,
                                  const PretrainConfig& config,
                                  const OlfcConstants& constants,
                                  PretrainReport* report) {
  Rng rng(StreamSeed(config.seed, "pretrain/data"));
  const std::vector<TransitionSample> data =
      GenPretrainData(model, config.olfc_samples, constants.s_dtheta, rng);
  PretrainOptions o;
  o.epochs = config.olfc_epochs;
  o.zero_motion_fraction = config.olfc_zero_motion;
  o.seed = StreamSeed(config.seed, "pretrain/" + NetworkKindName(kind));
  return Pretrain(kind, data, o, constants, report);
}

}  // namespace myoctl
