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

#ifndef PCS_PIPELINE_HPP_
#define PCS_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pcs/blockprobe.hpp"
#include "pcs/ckptstore.hpp"
#include "pcs/netcore.hpp"
#include "pcs/orchestrator.hpp"

namespace pcs {

// Every knob of a run. Loaded from a YAML file; unknown keys are rejected.
struct RunConfig {
  struct DataSection {
    std::size_t n = 2000;
    int classes = 4;
    std::size_t dim = 2;
    double label_noise = 0.2;
    double train_fraction = 0.7;
    double val_fraction = 0.15;
    double test_fraction = 0.15;
    int ood_severity = 5;  // 0 disables the corrupted test set
  } data;

  std::vector<int> widths = {64, 64, 64, 64};

  TrainConfig train;  // seed is overwritten from the root seed

  struct CheckpointSection {
    int k = 10;
    SamplingStrategy sampling;
  } checkpoints;

  SearchConfig search;  // seed and threads come from the command line

  struct BaselineSection {
    int random_samples = 50;
  } baseline;

  struct ProbeSection {
    FixingRule fixing = FixingRule::kFinalEpoch;
    std::vector<int> blocks;  // empty means every block
    // Validation-NLL filter for the candidate histogram. Unset: the
    // quantile threshold used by the selection rule.
    std::optional<double> nll_threshold;
  } probe;

  static RunConfig defaults();
  static RunConfig from_yaml(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  std::string to_yaml() const;

  void validate() const;
  Architecture architecture() const;
};

// Paths of the run-directory layout.
struct RunDir {
  std::filesystem::path root;

  std::filesystem::path data(const std::string& split) const {
    return root / "data" / (split + ".csv");
  }
  std::filesystem::path config() const { return root / "config.yaml"; }
  std::filesystem::path checkpoints() const { return root / "checkpoints"; }
  std::filesystem::path train_log() const { return root / "train_log.csv"; }
  std::filesystem::path history() const { return root / "history.json"; }
  std::filesystem::path best_pc() const { return root / "best_pc.json"; }
  std::filesystem::path selection_params() const {
    return root / "selection_params.csv";
  }
  std::filesystem::path estimator() const { return root / "estimator.bin"; }
  std::filesystem::path eval(const std::string& method) const {
    return root / ("eval_" + method + ".json");
  }
};

struct Splits {
  Dataset train;
  Dataset val;
  Dataset test;
  std::optional<Dataset> ood;
};

// Subcommands. Each reads its inputs from and writes its artifacts to the
// run directory; `seed` is the root seed every stream derives from.
void cmd_gen_data(const RunConfig& cfg, const RunDir& run, std::uint64_t seed);
void cmd_train(const RunConfig& cfg, const RunDir& run, std::uint64_t seed,
               int threads);
void cmd_search(const RunConfig& cfg, const RunDir& run, std::uint64_t seed,
                int threads);
void cmd_probe_blocks(const RunConfig& cfg, const RunDir& run,
                      std::uint64_t seed, int threads);
void cmd_baseline_early_stop(const RunConfig& cfg, const RunDir& run,
                             std::uint64_t seed, int threads);
void cmd_baseline_random(const RunConfig& cfg, const RunDir& run,
                         std::uint64_t seed, int threads);
void cmd_baseline_loss_search(const RunConfig& cfg, const RunDir& run,
                              std::uint64_t seed, int threads);
// Evaluates `pc` (or best_pc.json when empty) and writes eval_<name>.json.
void cmd_evaluate(const RunConfig& cfg, const RunDir& run, std::uint64_t seed,
                  int threads, std::vector<int> pc, bool fine_tune,
                  const std::string& name);
// Renders report.json, report.txt and reliability CSVs from eval_*.json.
void cmd_report(const RunDir& run);

Splits load_splits(const RunDir& run);
TrainLog load_train_log(const RunDir& run);
CheckpointStore open_store(const RunConfig& cfg, const RunDir& run);

// Derived configurations for a given root seed.
SearchConfig search_config(const RunConfig& cfg, std::uint64_t seed,
                           int threads, std::string_view stream);

}  // namespace pcs

#endif  // PCS_PIPELINE_HPP_
