// Copyright 2026 The cnsc-sim Authors.
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


// Command-line runner: single scenarios, sweeps, presets and config checks.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "cnsc/config.h"
#include "cnsc/engine.h"
#include "cnsc/sweep.h"
#include "json.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::string ReadFile(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw cnsc::ValidationError(fmt::format("cannot read {}", path));
  return std::string(std::istreambuf_iterator<char>(f), {});
}

bool LooksLikeSweep(const std::string& text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  return j.is_object() && j.contains("base") && j.contains("network_sizes");
}

std::string ParentDir(const std::string& path) {
  const std::filesystem::path p = std::filesystem::path(path).parent_path();
  return p.empty() ? "." : p.string();
}

struct Options {
  std::string config;
  std::string preset;
  std::string out = "out";
  int jobs = 1;
  std::optional<uint64_t> seed_override;
};

int Run(const Options& o) {
  cnsc::ScenarioConfig config;
  cnsc::ScenarioInputs inputs;
  if (!o.preset.empty()) {
    cnsc::Preset p = cnsc::GetPreset(o.preset);
    if (p.sweep) {
      throw cnsc::ValidationError(
          fmt::format("preset '{}' is a sweep; use the sweep subcommand", o.preset));
    }
    config = p.config;
    inputs = p.inputs;
  } else if (!o.config.empty()) {
    config = cnsc::ParseScenarioConfig(ReadFile(o.config));
  } else {
    throw cnsc::ValidationError("run needs --config or --preset");
  }
  if (o.seed_override) config.seed = *o.seed_override;
  config.Validate();

  const auto t0 = std::chrono::steady_clock::now();
  if (!inputs.plan) inputs.plan = cnsc::BuildContactPlan(config);
  if (!inputs.tasks) inputs.tasks = cnsc::BuildWorkload(config);
  const cnsc::RunResult r = cnsc::RunScenario(config, inputs);
  cnsc::WriteRunOutputs(o.out, config, r, *inputs.plan, *inputs.tasks);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  fmt::print("{} mode={} sats={} tasks={} wcr={:.4f} delay_s={:.3f} afr={:.4f} audit={} "
             "wall_s={:.2f}\n",
             config.name, cnsc::ToString(config.mode), r.row.network_size, r.row.task_count,
             r.row.wcr, r.row.mean_delay_s, r.row.afr, r.audit.ok() ? "ok" : "FAILED", secs);
  if (!r.audit.ok()) {
    fmt::print(stderr, "error: audit failed, see {}/summary.txt\n", o.out);
    return kExitRuntime;
  }
  return kExitOk;
}

int Sweep(const Options& o) {
  cnsc::SweepSpec spec;
  if (!o.preset.empty()) {
    cnsc::Preset p = cnsc::GetPreset(o.preset);
    if (!p.sweep) {
      throw cnsc::ValidationError(
          fmt::format("preset '{}' is a single scenario; use the run subcommand", o.preset));
    }
    spec = *p.sweep;
  } else if (!o.config.empty()) {
    spec = cnsc::ParseSweepSpec(ReadFile(o.config), ParentDir(o.config));
  } else {
    throw cnsc::ValidationError("sweep needs --config or --preset");
  }
  if (o.seed_override) spec.seeds = {*o.seed_override};
  if (o.jobs < 1) throw cnsc::ValidationError("--jobs must be >= 1");
  spec.Validate();

  const auto t0 = std::chrono::steady_clock::now();
  cnsc::SweepOptions opts;
  opts.jobs = o.jobs;
  opts.cell_dir = (std::filesystem::path(o.out) / "cells").string();
  opts.on_cell = [](const std::string& cell, const cnsc::MetricsRow& row) {
    fmt::print(stderr, "{} wcr={:.4f} delay_s={:.3f} afr={:.4f}\n", cell, row.wcr,
               row.mean_delay_s, row.afr);
  };
  const cnsc::SweepResult r = cnsc::RunSweep(spec, opts);
  cnsc::WriteSweepOutputs(o.out, r);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  int audit_failures = 0;
  for (const cnsc::AuditReport& a : r.audits) audit_failures += a.ok() ? 0 : 1;
  fmt::print("sweep rows={} failed_cells={} audit_failures={} wall_s={:.1f}\n", r.rows.size(),
             r.failures.size(), audit_failures, secs);
  for (const cnsc::CellFailure& f : r.failures) {
    fmt::print(stderr, "cell {} failed: {}\n", f.cell, f.error);
  }
  return r.failures.empty() && audit_failures == 0 ? kExitOk : kExitRuntime;
}

int PrintDefault(const Options& o) {
  cnsc::ScenarioConfig c = cnsc::DefaultScenarioConfig();
  if (!o.preset.empty()) {
    cnsc::Preset p = cnsc::GetPreset(o.preset);
    c = p.sweep ? p.sweep->base : p.config;
  }
  if (o.seed_override) c.seed = *o.seed_override;
  std::cout << cnsc::SerializeScenarioConfig(c);
  return kExitOk;
}

int Validate(const Options& o) {
  if (o.config.empty()) throw cnsc::ValidationError("validate needs --config");
  const std::string text = ReadFile(o.config);
  if (LooksLikeSweep(text)) {
    const cnsc::SweepSpec s = cnsc::ParseSweepSpec(text, ParentDir(o.config));
    fmt::print("{}: valid sweep, {} cells\n", o.config, s.Cells().size());
  } else {
    const cnsc::ScenarioConfig c = cnsc::ParseScenarioConfig(text);
    fmt::print("{}: valid scenario '{}'\n", o.config, c.name);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-event simulator for orchestrated satellite clusters"};
  app.require_subcommand(1);
  Options o;
  uint64_t seed = 0;
  std::string presets;
  for (const std::string& p : cnsc::PresetNames()) presets += (presets.empty() ? "" : ", ") + p;

  auto add_common = [&](CLI::App* sub, bool with_jobs) {
    sub->add_option("--config", o.config, "scenario config (run) or sweep spec (sweep) JSON");
    sub->add_option("--preset", o.preset, "built-in preset: " + presets);
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
    sub->add_option("--seed-override", seed, "replace the seed (sweep: the seed axis)");
    if (with_jobs) {
      sub->add_option("--jobs", o.jobs, "parallel workers")->capture_default_str();
    }
  };
  CLI::App* run = app.add_subcommand("run", "run one scenario");
  add_common(run, false);
  CLI::App* sweep = app.add_subcommand("sweep", "run a parameter sweep");
  add_common(sweep, true);
  CLI::App* print = app.add_subcommand("print-default-config", "print the default config");
  print->add_option("--preset", o.preset, "print this preset's base config instead");
  print->add_option("--seed-override", seed, "replace the seed");
  CLI::App* validate = app.add_subcommand("validate", "check a scenario config or sweep spec");
  validate->add_option("--config", o.config, "file to check")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }
  for (CLI::App* sub : {run, sweep, print}) {
    if (sub->parsed() && sub->count("--seed-override") > 0) o.seed_override = seed;
  }
  if (!o.config.empty() && !o.preset.empty()) {
    fmt::print(stderr, "error: --config and --preset are exclusive\n");
    return kExitValidation;
  }

  try {
    if (run->parsed()) return Run(o);
    if (sweep->parsed()) return Sweep(o);
    if (print->parsed()) return PrintDefault(o);
    return Validate(o);
  } catch (const cnsc::ValidationError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitRuntime;
  }
}
