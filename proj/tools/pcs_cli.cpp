// Copyright 2026 The PCS Authors
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

// Command-line driver: one subcommand per pipeline stage.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pcs/pipeline.hpp"

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

struct Common {
  std::string config;
  std::string run_dir;
  std::uint64_t seed = 1;
  int threads = 1;
};

void AddCommon(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "YAML run configuration");
  cmd->add_option("--run-dir", c.run_dir, "Directory for all artifacts")->required();
  cmd->add_option("--seed", c.seed, "Root seed")->capture_default_str();
  cmd->add_option("--threads", c.threads, "Worker threads")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

// Explicit --config wins; otherwise the copy stored by `train`; otherwise
// the built-in defaults.
pcs::RunConfig ResolveConfig(const Common& c) {
  if (!c.config.empty()) return pcs::RunConfig::load(c.config);
  const pcs::RunDir run{c.run_dir};
  if (std::filesystem::exists(run.config())) return pcs::RunConfig::load(run.config());
  return pcs::RunConfig::defaults();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Predecessor combination search for calibrated classifiers"};
  app.require_subcommand(1);
  Common c;

  auto* gen = app.add_subcommand("gen-data", "Generate and split the synthetic dataset");
  auto* train = app.add_subcommand("train", "Train and store candidate checkpoints");
  auto* probe = app.add_subcommand("probe-blocks", "Per-block overfitting curves");
  auto* search = app.add_subcommand("search", "Run the combination search");
  auto* baseline = app.add_subcommand("baseline", "Run a baseline method");
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate one combination");
  auto* report = app.add_subcommand("report", "Summarize every evaluation in a run");
  for (auto* cmd : {gen, train, probe, search, baseline, evaluate}) AddCommon(cmd, c);
  report->add_option("--run-dir", c.run_dir, "Run directory")->required();

  std::string which;
  baseline->add_option("method", which, "early-stop | random | loss-search")
      ->required()
      ->check(CLI::IsMember({"early-stop", "random", "loss-search"}));

  std::string pc_json;
  bool no_fine_tune = false;
  std::string name = "pc";
  evaluate->add_option("--pc", pc_json, "Candidate indices as a JSON array; default best_pc.json");
  evaluate->add_flag("--no-fine-tune", no_fine_tune, "Skip the one-epoch fine-tune");
  evaluate->add_option("--name", name, "Record name (eval_<name>.json)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    if (rc != 0) std::cerr << app.help();
    return rc == 0 ? 0 : kUsageError;
  }

  try {
    const pcs::RunDir run{c.run_dir};
    if (report->parsed()) {
      pcs::cmd_report(run);
      return 0;
    }
    const pcs::RunConfig cfg = ResolveConfig(c);
    std::filesystem::create_directories(run.root);
    if (gen->parsed()) {
      pcs::cmd_gen_data(cfg, run, c.seed);
    } else if (train->parsed()) {
      pcs::cmd_train(cfg, run, c.seed, c.threads);
    } else if (probe->parsed()) {
      pcs::cmd_probe_blocks(cfg, run, c.seed, c.threads);
    } else if (search->parsed()) {
      pcs::cmd_search(cfg, run, c.seed, c.threads);
    } else if (baseline->parsed()) {
      if (which == "early-stop") pcs::cmd_baseline_early_stop(cfg, run, c.seed, c.threads);
      else if (which == "random") pcs::cmd_baseline_random(cfg, run, c.seed, c.threads);
      else pcs::cmd_baseline_loss_search(cfg, run, c.seed, c.threads);
    } else if (evaluate->parsed()) {
      std::vector<int> pc;
      if (!pc_json.empty()) pc = nlohmann::json::parse(pc_json).get<std::vector<int>>();
      pcs::cmd_evaluate(cfg, run, c.seed, c.threads, pc, !no_fine_tune, name);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return 0;
}
