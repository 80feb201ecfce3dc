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

#ifndef PCS_ORCHESTRATOR_HPP_
#define PCS_ORCHESTRATOR_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pcs/calmetrics.hpp"
#include "pcs/ckptstore.hpp"
#include "pcs/combsearch.hpp"
#include "pcs/data.hpp"
#include "pcs/netcore.hpp"
#include "pcs/surrogate.hpp"

namespace pcs {

// Everything a combination evaluation needs. References must outlive it.
struct SearchContext {
  const CheckpointStore& store;
  const Architecture& arch;
  const Dataset& train;
  const Dataset& val;
  const Dataset& test;
  const Dataset* ood = nullptr;  // corrupted test set, optional
};

struct SearchConfig {
  int population = 20;  // S
  int steps = 30;       // T_se
  double lambda = 50.0;
  double gamma = 1.0;   // ECE weight in the estimator loss
  double eta = 1.0;     // selection-logit learning rate
  double gumbel_tau = 1.0;
  bool anneal_tau = false;
  double gumbel_tau_min = 0.1;
  double fine_tune_lr = 1e-2;
  FineTuneOptions fine_tune;
  int hidden = 32;
  double estimator_lr = 1e-2;
  int estimator_steps = 200;
  std::size_t memory_capacity = 256;
  double nll_quantile = 0.25;
  int n_bins = kDefaultBins;
  std::vector<double> temperature_grid = default_temperature_grid();
  std::uint64_t seed = 1;
  int threads = 1;
  // Test hook: use xi = 0 instead of Gumbel noise during the search loop.
  bool zero_noise = false;

  void validate() const;
  // Gumbel temperature at search step t (1-based).
  double tau_at(int step) const;
};

struct MetricSet {
  double err = 0.0;
  double ece = 0.0;
  double adaece = 0.0;
  double cwece = 0.0;
  double mce = 0.0;
  double nll = 0.0;

  friend bool operator==(const MetricSet&, const MetricSet&) = default;
};

MetricSet compute_metrics(const PredictionSet& p, int n_bins);

struct EvalRecord {
  std::string method;
  std::vector<int> pc;      // candidate index per block
  std::vector<int> epochs;  // the corresponding training epochs
  bool fine_tuned = false;
  MetricSet val;
  MetricSet test;
  double temperature = 1.0;  // chosen on validation ECE
  MetricSet val_post;
  MetricSet test_post;
  std::optional<double> auroc_pre;
  std::optional<double> auroc_post;
  BinTable test_reliability;
  BinTable test_reliability_post;
};

nlohmann::json to_json(const EvalRecord& r);
EvalRecord eval_record_from_json(const nlohmann::json& j);

// Scores a model on val/test (and OoD when present), including the
// temperature-scaled variants.
EvalRecord evaluate_model(const BlockwiseModel& model, const SearchContext& ctx,
                          const SearchConfig& cfg);

// Assembles `pc`, optionally fine-tunes it for one epoch, and evaluates it.
EvalRecord evaluate_pc(const SearchContext& ctx, std::span<const int> pc,
                       const SearchConfig& cfg, bool fine_tune,
                       std::uint64_t fine_tune_seed);

struct WarmUpResult {
  Memory memory;
  SurrogateEstimator estimator;
  std::vector<EvalRecord> records;
};

WarmUpResult warm_up(const SearchContext& ctx, const SearchConfig& cfg,
                     SurrogateTarget target = SurrogateTarget::kErrEce);

struct SearchResult {
  EvalRecord best;
  std::vector<EvalRecord> history;
  Matrix final_logits;
  // Selection logits before every step followed by the final ones.
  std::vector<Matrix> logits_trace;
  // Relaxed combination sampled at every step.
  std::vector<Matrix> relaxed_trace;
  WarmUpResult state;
};

// Search loop starting from a finished warm-up. With target kNll the
// estimator has one output and the selection follows the predicted NLL.
SearchResult pcs_search(const SearchContext& ctx, const SearchConfig& cfg,
                        WarmUpResult warm,
                        SurrogateTarget target = SurrogateTarget::kErrEce);

// warm_up followed by pcs_search.
SearchResult run_pcs(const SearchContext& ctx, const SearchConfig& cfg);
SearchResult baseline_search_on_loss(const SearchContext& ctx,
                                     const SearchConfig& cfg);

// Index into `history` of the selected record. For kErrEce: among records
// whose validation NLL is at most the `nll_quantile` quantile, the minimum
// of val err + lambda * val ece. For kNll: the minimum validation NLL.
// Earliest index wins ties.
std::size_t select_best(const std::vector<EvalRecord>& history, double lambda,
                        double nll_quantile,
                        SurrogateTarget target = SurrogateTarget::kErrEce);

enum class EarlyStopCriterion { kLoss, kError, kEce };

std::string_view to_string(EarlyStopCriterion c) noexcept;

// One-based epoch minimizing the validation criterion, earliest on ties.
int baseline_early_stop(const TrainLog& log, EarlyStopCriterion criterion);

// `n_samples` uniform combinations, each fine-tuned and evaluated; the one
// with the lowest validation NLL wins.
EvalRecord baseline_random_search(const SearchContext& ctx,
                                  const SearchConfig& cfg, int n_samples);

// Runs fn(0..n-1) on up to `threads` workers. Results are stored by index,
// so the output never depends on scheduling.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace pcs

#endif  // PCS_ORCHESTRATOR_HPP_
