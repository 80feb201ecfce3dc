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

#include "pcs/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "pcs/errors.hpp"
#include "pcs/rng.hpp"

namespace pcs {

void SearchConfig::validate() const {
  if (population < 1) throw std::invalid_argument("search: population must be >= 1");
  if (steps < 1) throw std::invalid_argument("search: steps must be >= 1");
  if (!(lambda >= 0.0)) throw std::invalid_argument("search: lambda must be >= 0");
  if (!(gamma >= 0.0)) throw std::invalid_argument("search: gamma must be >= 0");
  if (!(eta > 0.0)) throw std::invalid_argument("search: eta must be > 0");
  if (!(gumbel_tau > 0.0) || !(gumbel_tau_min > 0.0)) {
    throw std::invalid_argument("search: gumbel temperatures must be > 0");
  }
  if (!(fine_tune_lr >= 0.0)) throw std::invalid_argument("search: fine_tune_lr < 0");
  if (hidden < 1) throw std::invalid_argument("search: hidden must be >= 1");
  if (estimator_steps < 0) throw std::invalid_argument("search: estimator_steps < 0");
  if (memory_capacity < 1) throw std::invalid_argument("search: memory_capacity < 1");
  if (!(nll_quantile > 0.0 && nll_quantile <= 1.0)) {
    throw std::invalid_argument("search: nll_quantile must be in (0, 1]");
  }
  if (n_bins < 1) throw std::invalid_argument("search: n_bins must be >= 1");
  if (threads < 1) throw std::invalid_argument("search: threads must be >= 1");
  if (temperature_grid.empty()) throw std::invalid_argument("search: empty temperature grid");
  for (double t : temperature_grid) {
    if (!(t > 0.0)) throw std::invalid_argument("search: temperatures must be > 0");
  }
}

double SearchConfig::tau_at(int step) const {
  if (!anneal_tau || steps <= 1) return gumbel_tau;
  const double frac = static_cast<double>(step - 1) / (steps - 1);
  return gumbel_tau + (gumbel_tau_min - gumbel_tau) * frac;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex mu;
  int failed_index = n;
  std::exception_ptr failure;
  {
    std::vector<std::jthread> workers;
    for (int w = 0; w < std::min(threads, n); ++w) {
      workers.emplace_back([&] {
        for (int i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(mu);
            if (i < failed_index) {
              failed_index = i;
              failure = std::current_exception();
            }
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Evaluation

MetricSet compute_metrics(const PredictionSet& p, int n_bins) {
  MetricSet m;
  m.err = error(p);
  m.ece = ece(p, n_bins);
  m.adaece = adaptive_ece(p, std::min<int>(n_bins, static_cast<int>(p.size())));
  m.cwece = classwise_ece(p, n_bins);
  m.mce = mce(p, n_bins);
  m.nll = nll(p);
  return m;
}

EvalRecord evaluate_model(const BlockwiseModel& model, const SearchContext& ctx,
                          const SearchConfig& cfg) {
  EvalRecord r;
  const auto val_out = forward(model, ctx.val.features);
  const auto test_out = forward(model, ctx.test.features);
  const PredictionSet val{val_out.probs, ctx.val.labels};
  const PredictionSet test{test_out.probs, ctx.test.labels};
  r.val = compute_metrics(val, cfg.n_bins);
  r.test = compute_metrics(test, cfg.n_bins);
  r.test_reliability = reliability_table(test, cfg.n_bins);

  r.temperature = temperature_search(val_out.logits, ctx.val.labels,
                                     cfg.temperature_grid, cfg.n_bins);
  const PredictionSet val_t{apply_temperature(val_out.logits, r.temperature),
                            ctx.val.labels};
  const PredictionSet test_t{apply_temperature(test_out.logits, r.temperature),
                             ctx.test.labels};
  r.val_post = compute_metrics(val_t, cfg.n_bins);
  r.test_post = compute_metrics(test_t, cfg.n_bins);
  r.test_reliability_post = reliability_table(test_t, cfg.n_bins);

  if (ctx.ood) {
    const auto ood_logits = forward(model, ctx.ood->features).logits;
    r.auroc_pre = auroc(confidences(test.probs),
                        confidences(softmax_rows(ood_logits)));
    r.auroc_post = auroc(confidences(test_t.probs),
                         confidences(apply_temperature(ood_logits, r.temperature)));
  }
  return r;
}

namespace {

std::vector<int> EpochsOf(const CheckpointStore& store, std::span<const int> pc) {
  std::vector<int> out;
  for (int c : pc) out.push_back(store.epochs().at(static_cast<std::size_t>(c)));
  return out;
}

// Assemble, optionally fine-tune, evaluate.
EvalRecord EvaluateCandidates(const SearchContext& ctx, std::span<const int> pc,
                              const SearchConfig& cfg, bool fine_tune,
                              std::uint64_t seed) {
  BlockwiseModel model = assemble(ctx.store, ctx.arch, pc);
  if (fine_tune) {
    model = fine_tune_one_epoch(model, ctx.train, cfg.fine_tune_lr, seed,
                                cfg.fine_tune);
  }
  EvalRecord r = evaluate_model(model, ctx, cfg);
  r.pc.assign(pc.begin(), pc.end());
  r.epochs = EpochsOf(ctx.store, pc);
  r.fine_tuned = fine_tune;
  return r;
}

std::vector<double> LossWeights(SurrogateTarget target, double gamma) {
  if (target == SurrogateTarget::kErrEce) return {1.0, gamma};
  return {1.0};
}

int OutputsFor(SurrogateTarget target) {
  return target == SurrogateTarget::kErrEce ? 2 : 1;
}

void TrainOnMemory(SurrogateEstimator& psi, const Memory& memory,
                   SurrogateTarget target, const SearchConfig& cfg,
                   std::uint64_t seed) {
  if (cfg.estimator_steps == 0) return;
  const auto samples = training_samples(memory, target);
  const auto weights = LossWeights(target, cfg.gamma);
  train_estimator(psi, samples, weights, cfg.estimator_steps, cfg.estimator_lr,
                  seed);
}

}  // namespace

EvalRecord evaluate_pc(const SearchContext& ctx, std::span<const int> pc,
                       const SearchConfig& cfg, bool fine_tune,
                       std::uint64_t fine_tune_seed) {
  return EvaluateCandidates(ctx, pc, cfg, fine_tune, fine_tune_seed);
}

// ---------------------------------------------------------------------------
// Warm-up and search

WarmUpResult warm_up(const SearchContext& ctx, const SearchConfig& cfg,
                     SurrogateTarget target) {
  cfg.validate();
  if (!ctx.store.sealed()) throw std::invalid_argument("warm_up: store is not sealed");
  const int m = ctx.arch.n_blocks();
  const int k = ctx.store.k();
  const Matrix zero_logits(static_cast<std::size_t>(m), static_cast<std::size_t>(k));

  std::vector<Matrix> relaxed(static_cast<std::size_t>(cfg.population));
  std::vector<EvalRecord> records(static_cast<std::size_t>(cfg.population));
  parallel_for(cfg.population, cfg.threads, [&](int i) {
    Rng rng = make_rng(cfg.seed, "warmup/gumbel", static_cast<std::uint64_t>(i));
    const PcRepresentation p = gumbel_relax(zero_logits, cfg.gumbel_tau, rng);
    const auto pc = p.selected();
    try {
      records[i] = EvaluateCandidates(ctx, pc, cfg, true,
                                      derive_seed(cfg.seed, "warmup/finetune", i));
    } catch (const Error& e) {
      throw Error("warm-up member " + std::to_string(i) + ": " + e.what());
    }
    records[i].method = "warmup";
    relaxed[i] = p.rows;
  });

  WarmUpResult w{Memory(cfg.memory_capacity),
                 init_estimator(k, cfg.hidden, derive_seed(cfg.seed, "estimator"),
                                OutputsFor(target)),
                 std::move(records)};
  for (std::size_t i = 0; i < relaxed.size(); ++i) {
    w.memory.push({std::move(relaxed[i]), w.records[i].val.err,
                   w.records[i].val.ece, w.records[i].val.nll});
  }
  TrainOnMemory(w.estimator, w.memory, target, cfg,
                derive_seed(cfg.seed, "warmup/estimator"));
  return w;
}

SearchResult pcs_search(const SearchContext& ctx, const SearchConfig& cfg,
                        WarmUpResult warm, SurrogateTarget target) {
  cfg.validate();
  if (warm.estimator.n_out != OutputsFor(target)) {
    throw std::invalid_argument("pcs_search: estimator head does not match target");
  }
  const int m = ctx.arch.n_blocks();
  const int k = ctx.store.k();
  SearchResult res;
  Matrix logits(static_cast<std::size_t>(m), static_cast<std::size_t>(k));
  res.state = std::move(warm);
  const std::string method =
      target == SurrogateTarget::kErrEce ? "pcs" : "search_on_loss";

  for (int t = 1; t <= cfg.steps; ++t) {
    res.logits_trace.push_back(logits);
    const double tau = cfg.tau_at(t);
    Rng rng = make_rng(cfg.seed, "search/gumbel", static_cast<std::uint64_t>(t));
    const Matrix noise = cfg.zero_noise ? Matrix(logits.rows(), logits.cols())
                                        : sample_gumbel(logits.rows(), logits.cols(), rng);
    const PcRepresentation relaxed = gumbel_relax(logits, tau, noise);
    const auto pc = relaxed.selected();

    EvalRecord rec = EvaluateCandidates(ctx, pc, cfg, true,
                                        derive_seed(cfg.seed, "search/finetune", t));
    rec.method = method;
    res.state.memory.push({relaxed.rows, rec.val.err, rec.val.ece, rec.val.nll});
    res.relaxed_trace.push_back(relaxed.rows);
    res.history.push_back(std::move(rec));

    TrainOnMemory(res.state.estimator, res.state.memory, target, cfg,
                  derive_seed(cfg.seed, "search/estimator", t));
    const Matrix grad_relaxed =
        input_gradient(res.state.estimator, relaxed.rows, cfg.lambda);
    const Matrix grad_logits = gumbel_backward(relaxed, tau, grad_relaxed);
    logits = update_selection(logits, grad_logits, cfg.eta);
  }
  res.logits_trace.push_back(logits);
  res.final_logits = logits;
  res.best = res.history[select_best(res.history, cfg.lambda, cfg.nll_quantile, target)];
  return res;
}

SearchResult run_pcs(const SearchContext& ctx, const SearchConfig& cfg) {
  return pcs_search(ctx, cfg, warm_up(ctx, cfg));
}

SearchResult baseline_search_on_loss(const SearchContext& ctx,
                                     const SearchConfig& cfg) {
  return pcs_search(ctx, cfg, warm_up(ctx, cfg, SurrogateTarget::kNll),
                    SurrogateTarget::kNll);
}

std::size_t select_best(const std::vector<EvalRecord>& history, double lambda,
                        double nll_quantile, SurrogateTarget target) {
  if (history.empty()) throw std::invalid_argument("select_best: empty history");
  std::size_t best = 0;
  if (target == SurrogateTarget::kNll) {
    for (std::size_t i = 1; i < history.size(); ++i) {
      if (history[i].val.nll < history[best].val.nll) best = i;
    }
    return best;
  }
  std::vector<double> nlls;
  for (const auto& r : history) nlls.push_back(r.val.nll);
  std::sort(nlls.begin(), nlls.end());
  // Lower nearest-rank quantile.
  const auto q_index = static_cast<std::size_t>(
      std::floor(nll_quantile * static_cast<double>(nlls.size() - 1)));
  const double threshold = nlls[q_index];
  bool found = false;
  double best_score = 0.0;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (history[i].val.nll > threshold) continue;
    const double score = history[i].val.err + lambda * history[i].val.ece;
    if (!found || score < best_score) {
      found = true;
      best = i;
      best_score = score;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Baselines

std::string_view to_string(EarlyStopCriterion c) noexcept {
  switch (c) {
    case EarlyStopCriterion::kLoss: return "loss";
    case EarlyStopCriterion::kError: return "error";
    case EarlyStopCriterion::kEce: return "ece";
  }
  return "unknown";
}

int baseline_early_stop(const TrainLog& log, EarlyStopCriterion criterion) {
  if (log.records.empty()) throw std::invalid_argument("early stop: empty train log");
  const auto value = [criterion](const EpochRecord& r) {
    switch (criterion) {
      case EarlyStopCriterion::kLoss: return r.val_loss;
      case EarlyStopCriterion::kError: return r.val_error;
      case EarlyStopCriterion::kEce: return r.val_ece;
    }
    return r.val_loss;
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < log.records.size(); ++i) {
    if (value(log.records[i]) < value(log.records[best])) best = i;
  }
  return log.records[best].epoch;
}

EvalRecord baseline_random_search(const SearchContext& ctx,
                                  const SearchConfig& cfg, int n_samples) {
  if (n_samples < 1) throw std::invalid_argument("random search: n_samples < 1");
  const int m = ctx.arch.n_blocks();
  const int k = ctx.store.k();
  std::vector<EvalRecord> records(static_cast<std::size_t>(n_samples));
  parallel_for(n_samples, cfg.threads, [&](int i) {
    Rng rng = make_rng(cfg.seed, "random-search/pc", static_cast<std::uint64_t>(i));
    std::uniform_int_distribution<int> pick(0, k - 1);
    std::vector<int> pc(static_cast<std::size_t>(m));
    for (int& c : pc) c = pick(rng);
    records[i] = EvaluateCandidates(ctx, pc, cfg, true,
                                    derive_seed(cfg.seed, "random-search/finetune", i));
    records[i].method = "random_search";
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].val.nll < records[best].val.nll) best = i;
  }
  return records[best];
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json MetricsJson(const MetricSet& m) {
  return {{"err", m.err},     {"ece", m.ece}, {"adaece", m.adaece},
          {"cwece", m.cwece}, {"mce", m.mce}, {"nll", m.nll}};
}

MetricSet MetricsFromJson(const nlohmann::json& j) {
  MetricSet m;
  m.err = j.at("err").get<double>();
  m.ece = j.at("ece").get<double>();
  m.adaece = j.at("adaece").get<double>();
  m.cwece = j.at("cwece").get<double>();
  m.mce = j.at("mce").get<double>();
  m.nll = j.at("nll").get<double>();
  return m;
}

nlohmann::json BinsJson(const BinTable& t) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& b : t.bins) {
    arr.push_back({{"lo", b.lo}, {"hi", b.hi}, {"count", b.count},
                   {"accuracy", b.accuracy}, {"confidence", b.confidence}});
  }
  return arr;
}

BinTable BinsFromJson(const nlohmann::json& j) {
  BinTable t;
  for (const auto& b : j) {
    t.bins.push_back({b.at("lo").get<double>(), b.at("hi").get<double>(),
                      b.at("count").get<std::size_t>(),
                      b.at("accuracy").get<double>(),
                      b.at("confidence").get<double>()});
  }
  return t;
}

}  // namespace

nlohmann::json to_json(const EvalRecord& r) {
  nlohmann::json j;
  j["method"] = r.method;
  j["pc"] = r.pc;
  j["epochs"] = r.epochs;
  j["fine_tuned"] = r.fine_tuned;
  j["val"] = MetricsJson(r.val);
  j["test"] = MetricsJson(r.test);
  j["temperature"] = r.temperature;
  j["val_post"] = MetricsJson(r.val_post);
  j["test_post"] = MetricsJson(r.test_post);
  j["auroc_pre"] = r.auroc_pre ? nlohmann::json(*r.auroc_pre) : nlohmann::json();
  j["auroc_post"] = r.auroc_post ? nlohmann::json(*r.auroc_post) : nlohmann::json();
  j["test_reliability"] = BinsJson(r.test_reliability);
  j["test_reliability_post"] = BinsJson(r.test_reliability_post);
  return j;
}

EvalRecord eval_record_from_json(const nlohmann::json& j) {
  EvalRecord r;
  r.method = j.at("method").get<std::string>();
  r.pc = j.at("pc").get<std::vector<int>>();
  r.epochs = j.at("epochs").get<std::vector<int>>();
  r.fine_tuned = j.at("fine_tuned").get<bool>();
  r.val = MetricsFromJson(j.at("val"));
  r.test = MetricsFromJson(j.at("test"));
  r.temperature = j.at("temperature").get<double>();
  r.val_post = MetricsFromJson(j.at("val_post"));
  r.test_post = MetricsFromJson(j.at("test_post"));
  if (!j.at("auroc_pre").is_null()) r.auroc_pre = j.at("auroc_pre").get<double>();
  if (!j.at("auroc_post").is_null()) r.auroc_post = j.at("auroc_post").get<double>();
  r.test_reliability = BinsFromJson(j.at("test_reliability"));
  r.test_reliability_post = BinsFromJson(j.at("test_reliability_post"));
  return r;
}

}  // namespace pcs
