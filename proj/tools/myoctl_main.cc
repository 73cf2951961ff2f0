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

// Command-line front end: pretrain, run, report.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "myoctl/geometry.h"
#include "myoctl/harness.h"
#include "myoctl/jmm.h"
#include "myoctl/olfc.h"

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string scenario;
};

myoctl::ExperimentConfig ResolveConfig(const CommonFlags& flags) {
  myoctl::ExperimentConfig c = flags.config.empty()
                                   ? myoctl::ExperimentConfig{}
                                   : myoctl::LoadConfig(flags.config);
  if (flags.seed) c.seed = *flags.seed;
  if (!flags.out.empty()) c.out_dir = flags.out;
  if (!flags.scenario.empty()) c.scenario = flags.scenario;
  c.Validate();
  return c;
}

int Pretrain(const CommonFlags& flags) {
  myoctl::ExperimentConfig c = ResolveConfig(flags);
  if (flags.seed) c.pretrain.seed = *flags.seed;
  const fs::path out = flags.out.empty() ? c.model_dir : fs::path(flags.out);
  fs::create_directories(out);
  const myoctl::ArmModel model = myoctl::ArmModel::Load(c.fixture);

  myoctl::JmmTrainReport jmm_report;
  const myoctl::JmmNetwork jmm =
      myoctl::PretrainJmm(model, c.pretrain, &jmm_report);
  jmm.Save(out / c.jmm_file);
  std::printf("jmm: held-out RMS %.3f mm, max %.3f mm -> %s\n",
              jmm_report.held_out_rms_mm, jmm_report.held_out_max_mm,
              (out / c.jmm_file).c_str());
  for (auto kind : {myoctl::NetworkKind::kTypeA, myoctl::NetworkKind::kTypeB}) {
    myoctl::PretrainReport report;
    const myoctl::OlfcController ctrl =
        myoctl::PretrainController(model, kind, c.pretrain, c.olfc, &report);
    const std::string file =
        kind == myoctl::NetworkKind::kTypeA ? c.type_a_file : c.type_b_file;
    ctrl.network().Save(out / file, myoctl::OlfcRole(kind));
    std::printf("%s: held-out RMS %.4f (threshold %.4f) -> %s\n",
                myoctl::NetworkKindName(kind).c_str(), report.held_out_rms,
                report.threshold, (out / file).c_str());
  }
  return 0;
}

int Run(const CommonFlags& flags) {
  const myoctl::ExperimentConfig c = ResolveConfig(flags);
  const myoctl::LoadedModels models = myoctl::LoadModels(c);
  const myoctl::ScenarioResult result =
      myoctl::RunScenario(c, models.Context());

  fs::create_directories(c.out_dir);
  myoctl::WriteRecords(result.records, c.out_dir / "records.csv");
  myoctl::WriteSummary(myoctl::Summarize(result.records),
                       c.out_dir / "summary.csv");
  if (!result.loops.empty()) {
    myoctl::WriteHysteresis(result.loops, c.out_dir / "hysteresis.csv");
  }
  if (result.trajectory) result.trajectory->Write(c.out_dir / "trajectory.csv");
  if (result.aborted) {
    std::fprintf(stderr, "scenario %s aborted: %s (partial records written)\n",
                 c.scenario.c_str(), result.error.c_str());
    return 2;
  }
  std::printf("%s seed %llu: %zu records -> %s\n", c.scenario.c_str(),
              static_cast<unsigned long long>(c.seed), result.records.size(),
              c.out_dir.c_str());
  return 0;
}

int Report(const std::string& records, const std::string& out) {
  const fs::path in =
      records.empty() ? fs::path(out) / "records.csv" : fs::path(records);
  const fs::path dir = out.empty() ? in.parent_path() : fs::path(out);
  fs::create_directories(dir);
  const auto rows = myoctl::Summarize(myoctl::ReadRecords(in));
  myoctl::WriteSummary(rows, dir / "summary.csv");
  std::printf("%zu summary rows -> %s\n", rows.size(),
              (dir / "summary.csv").c_str());
  return 0;
}

void AddCommon(CLI::App* app, CommonFlags& flags, bool with_scenario) {
  app->add_option("--config", flags.config, "JSON experiment config")
      ->check(CLI::ExistingFile);
  app->add_option("--seed", flags.seed, "override the config seed");
  app->add_option("--out", flags.out, "output directory");
  if (with_scenario) {
    app->add_option("--scenario", flags.scenario, "scenario name")
        ->check(CLI::IsMember(myoctl::ScenarioNames()));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online-learning feedback control for a simulated tendon arm"};
  app.require_subcommand(1);
  CommonFlags pretrain_flags, run_flags;
  std::string report_records, report_out;
  CLI::App* pretrain =
      app.add_subcommand("pretrain", "train JMM, Type A and Type B networks");
  AddCommon(pretrain, pretrain_flags, false);
  CLI::App* run = app.add_subcommand("run", "execute a scenario");
  AddCommon(run, run_flags, true);
  CLI::App* report =
      app.add_subcommand("report", "regenerate summary.csv from records.csv");
  report->add_option("--records", report_records, "records CSV");
  report->add_option("--out", report_out, "output directory");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*pretrain) return Pretrain(pretrain_flags);
    if (*run) return Run(run_flags);
    if (*report) {
      if (report_records.empty() && report_out.empty()) {
        throw std::invalid_argument("report needs --records or --out");
      }
      return Report(report_records, report_out);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
