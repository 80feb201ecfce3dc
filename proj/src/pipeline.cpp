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

#include "pcs/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <yaml-cpp/yaml.h>

#include "json.hpp"
#include "pcs/errors.hpp"
#include "pcs/io.hpp"
#include "pcs/rng.hpp"

namespace pcs {
namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

namespace {

void RejectUnknown(const YAML::Node& node, const std::string& where,
                   std::initializer_list<std::string_view> allowed) {
  if (!node.IsMap()) throw ParseError("config: '" + where + "' must be a mapping", 0);
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ParseError("config: unknown key '" + where + "." + key + "'",
                       kv.first.Mark().line + 1);
    }
  }
}

template <class T>
void Read(const YAML::Node& node, const char* key, T& out) {
  if (const auto v = node[key]) {
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      throw ParseError(std::string("config: bad value for '") + key + "'",
                       v.Mark().line + 1);
    }
  }
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.train.epochs = 60;
  c.train.lr_schedule = {{0, 0.1}, {30, 0.01}, {50, 0.001}};
  c.train.batch_size = 32;
  c.search.fine_tune.batch_size = 32;
  c.checkpoints.sampling.variant = SamplingVariant::kRandom;
  return c;
}

RunConfig RunConfig::from_yaml(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ParseError(std::string("config: ") + e.what(), e.mark.line + 1);
  }
  RunConfig c = defaults();
  if (root.IsNull()) return c;
  RejectUnknown(root, "", {"data", "model", "train", "checkpoints", "search",
                           "baseline", "probe"});

  if (const auto d = root["data"]) {
    RejectUnknown(d, "data", {"n", "classes", "dim", "label_noise",
                              "train_fraction", "val_fraction",
                              "test_fraction", "ood_severity"});
    Read(d, "n", c.data.n);
    Read(d, "classes", c.data.classes);
    Read(d, "dim", c.data.dim);
    Read(d, "label_noise", c.data.label_noise);
    Read(d, "train_fraction", c.data.train_fraction);
    Read(d, "val_fraction", c.data.val_fraction);
    Read(d, "test_fraction", c.data.test_fraction);
    Read(d, "ood_severity", c.data.ood_severity);
  }
  if (const auto m = root["model"]) {
    RejectUnknown(m, "model", {"widths"});
    Read(m, "widths", c.widths);
  }
  if (const auto t = root["train"]) {
    RejectUnknown(t, "train", {"epochs", "lr_schedule", "momentum",
                               "weight_decay", "batch_size", "loss",
                               "smoothing", "focal_gamma"});
    Read(t, "epochs", c.train.epochs);
    if (const auto s = t["lr_schedule"]) {
      std::vector<std::pair<int, double>> pieces;
      Read(t, "lr_schedule", pieces);
      c.train.lr_schedule.clear();
      for (const auto& [start, lr] : pieces) c.train.lr_schedule.push_back({start, lr});
    }
    Read(t, "momentum", c.train.momentum);
    Read(t, "weight_decay", c.train.weight_decay);
    Read(t, "batch_size", c.train.batch_size);
    std::string loss(to_string(c.train.loss.kind));
    Read(t, "loss", loss);
    c.train.loss.kind = loss_kind_from_string(loss);
    Read(t, "smoothing", c.train.loss.smoothing);
    Read(t, "focal_gamma", c.train.loss.focal_gamma);
  }
  if (const auto k = root["checkpoints"]) {
    RejectUnknown(k, "checkpoints", {"k", "sampling", "scale", "schedule_points"});
    Read(k, "k", c.checkpoints.k);
    std::string variant(to_string(c.checkpoints.sampling.variant));
    Read(k, "sampling", variant);
    c.checkpoints.sampling.variant = sampling_variant_from_string(variant);
    Read(k, "scale", c.checkpoints.sampling.scale);
    Read(k, "schedule_points", c.checkpoints.sampling.schedule_points);
  }
  if (const auto s = root["search"]) {
    RejectUnknown(s, "search", {"population", "steps", "lambda", "gamma", "eta",
                                "gumbel_tau", "anneal_tau", "gumbel_tau_min",
                                "fine_tune_lr", "fine_tune_batch_size",
                                "fine_tune_momentum", "fine_tune_weight_decay",
                                "hidden", "estimator_lr", "estimator_steps",
                                "memory_capacity", "nll_quantile", "n_bins"});
    auto& sc = c.search;
    Read(s, "population", sc.population);
    Read(s, "steps", sc.steps);
    Read(s, "lambda", sc.lambda);
    Read(s, "gamma", sc.gamma);
    Read(s, "eta", sc.eta);
    Read(s, "gumbel_tau", sc.gumbel_tau);
    Read(s, "anneal_tau", sc.anneal_tau);
    Read(s, "gumbel_tau_min", sc.gumbel_tau_min);
    Read(s, "fine_tune_lr", sc.fine_tune_lr);
    Read(s, "fine_tune_batch_size", sc.fine_tune.batch_size);
    Read(s, "fine_tune_momentum", sc.fine_tune.momentum);
    Read(s, "fine_tune_weight_decay", sc.fine_tune.weight_decay);
    Read(s, "hidden", sc.hidden);
    Read(s, "estimator_lr", sc.estimator_lr);
    Read(s, "estimator_steps", sc.estimator_steps);
    Read(s, "memory_capacity", sc.memory_capacity);
    Read(s, "nll_quantile", sc.nll_quantile);
    Read(s, "n_bins", sc.n_bins);
  }
  if (const auto b = root["baseline"]) {
    RejectUnknown(b, "baseline", {"random_samples"});
    Read(b, "random_samples", c.baseline.random_samples);
  }
  if (const auto p = root["probe"]) {
    RejectUnknown(p, "probe", {"fixing", "blocks", "nll_threshold"});
    std::string fixing(to_string(c.probe.fixing));
    Read(p, "fixing", fixing);
    c.probe.fixing = fixing_rule_from_string(fixing);
    Read(p, "blocks", c.probe.blocks);
    if (p["nll_threshold"]) {
      double t = 0.0;
      Read(p, "nll_threshold", t);
      c.probe.nll_threshold = t;
    }
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  return from_yaml(read_file(path));
}

namespace {

std::string Num(double v) { return format_double(v); }

template <class T>
std::string List(const std::vector<T>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_floating_point_v<T>) out += Num(v[i]);
    else out += std::to_string(v[i]);
  }
  return out + "]";
}

}  // namespace

std::string RunConfig::to_yaml() const {
  std::ostringstream o;
  o << "data:\n"
    << "  n: " << data.n << "\n"
    << "  classes: " << data.classes << "\n"
    << "  dim: " << data.dim << "\n"
    << "  label_noise: " << Num(data.label_noise) << "\n"
    << "  train_fraction: " << Num(data.train_fraction) << "\n"
    << "  val_fraction: " << Num(data.val_fraction) << "\n"
    << "  test_fraction: " << Num(data.test_fraction) << "\n"
    << "  ood_severity: " << data.ood_severity << "\n"
    << "model:\n"
    << "  widths: " << List(widths) << "\n"
    << "train:\n"
    << "  epochs: " << train.epochs << "\n"
    << "  lr_schedule: [";
  for (std::size_t i = 0; i < train.lr_schedule.size(); ++i) {
    if (i) o << ", ";
    o << "[" << train.lr_schedule[i].start_epoch << ", "
      << Num(train.lr_schedule[i].lr) << "]";
  }
  o << "]\n"
    << "  momentum: " << Num(train.momentum) << "\n"
    << "  weight_decay: " << Num(train.weight_decay) << "\n"
    << "  batch_size: " << train.batch_size << "\n"
    << "  loss: " << to_string(train.loss.kind) << "\n"
    << "  smoothing: " << Num(train.loss.smoothing) << "\n"
    << "  focal_gamma: " << Num(train.loss.focal_gamma) << "\n"
    << "checkpoints:\n"
    << "  k: " << checkpoints.k << "\n"
    << "  sampling: " << to_string(checkpoints.sampling.variant) << "\n"
    << "  scale: " << Num(checkpoints.sampling.scale) << "\n"
    << "  schedule_points: " << List(checkpoints.sampling.schedule_points) << "\n"
    << "search:\n"
    << "  population: " << search.population << "\n"
    << "  steps: " << search.steps << "\n"
    << "  lambda: " << Num(search.lambda) << "\n"
    << "  gamma: " << Num(search.gamma) << "\n"
    << "  eta: " << Num(search.eta) << "\n"
    << "  gumbel_tau: " << Num(search.gumbel_tau) << "\n"
    << "  anneal_tau: " << (search.anneal_tau ? "true" : "false") << "\n"
    << "  gumbel_tau_min: " << Num(search.gumbel_tau_min) << "\n"
    << "  fine_tune_lr: " << Num(search.fine_tune_lr) << "\n"
    << "  fine_tune_batch_size: " << search.fine_tune.batch_size << "\n"
    << "  fine_tune_momentum: " << Num(search.fine_tune.momentum) << "\n"
    << "  fine_tune_weight_decay: " << Num(search.fine_tune.weight_decay) << "\n"
    << "  hidden: " << search.hidden << "\n"
    << "  estimator_lr: " << Num(search.estimator_lr) << "\n"
    << "  estimator_steps: " << search.estimator_steps << "\n"
    << "  memory_capacity: " << search.memory_capacity << "\n"
    << "  nll_quantile: " << Num(search.nll_quantile) << "\n"
    << "  n_bins: " << search.n_bins << "\n"
    << "baseline:\n"
    << "  random_samples: " << baseline.random_samples << "\n"
    << "probe:\n"
    << "  fixing: " << to_string(probe.fixing) << "\n"
    << "  blocks: " << List(probe.blocks) << "\n";
  if (probe.nll_threshold) o << "  nll_threshold: " << Num(*probe.nll_threshold) << "\n";
  return o.str();
}

void RunConfig::validate() const {
  if (data.n < 3) throw std::invalid_argument("config: data.n must be >= 3");
  if (data.classes < 2) throw std::invalid_argument("config: data.classes must be >= 2");
  if (data.dim < 1) throw std::invalid_argument("config: data.dim must be >= 1");
  if (!(data.label_noise >= 0.0 && data.label_noise <= 1.0)) {
    throw std::invalid_argument("config: data.label_noise must be in [0, 1]");
  }
  const double total = data.train_fraction + data.val_fraction + data.test_fraction;
  if (!(data.train_fraction > 0.0 && data.val_fraction > 0.0 &&
        data.test_fraction > 0.0) ||
      std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("config: split fractions must be positive and sum to 1");
  }
  if (data.ood_severity < 0) throw std::invalid_argument("config: data.ood_severity < 0");
  architecture().validate();
  train.validate();
  if (checkpoints.k < 1 || checkpoints.k > train.epochs) {
    throw std::invalid_argument("config: checkpoints.k must be in [1, train.epochs]");
  }
  search.validate();
  if (baseline.random_samples < 1) {
    throw std::invalid_argument("config: baseline.random_samples must be >= 1");
  }
  for (int b : probe.blocks) {
    if (b < 0 || b >= static_cast<int>(widths.size()) + 1) {
      throw std::invalid_argument("config: probe block out of range");
    }
  }
}

Architecture RunConfig::architecture() const {
  return Architecture{static_cast<int>(data.dim), data.classes, widths};
}

// ---------------------------------------------------------------------------
// Helpers

namespace {

void WriteJson(const fs::path& path, const json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

json ReadJson(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void WriteRecord(const RunDir& run, const std::string& method, EvalRecord r) {
  r.method = method;
  WriteJson(run.eval(method), to_json(r));
}

std::string MatrixCsv(const Matrix& m, const std::vector<int>& epochs) {
  std::string out = "block";
  for (int e : epochs) out += ",epoch_" + std::to_string(e);
  out += '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out += std::to_string(r);
    for (double v : m.row(r)) out += ',' + format_double(v);
    out += '\n';
  }
  return out;
}

struct Loaded {
  CheckpointStore store;
  Architecture arch;
  Splits splits;
};

Loaded LoadAll(const RunConfig& cfg, const RunDir& run) {
  CheckpointStore store = open_store(cfg, run);
  return {std::move(store), cfg.architecture(), load_splits(run)};
}

SearchContext ContextOf(const Loaded& l) {
  return SearchContext{l.store, l.arch, l.splits.train, l.splits.val,
                       l.splits.test, l.splits.ood ? &*l.splits.ood : nullptr};
}

}  // namespace

Splits load_splits(const RunDir& run) {
  Splits s;
  s.train = load_csv(run.data("train"));
  s.val = load_csv(run.data("val"));
  s.test = load_csv(run.data("test"));
  if (fs::exists(run.data("ood"))) s.ood = load_csv(run.data("ood"));
  // Class count comes from the labels present; align every split on the max.
  const int k = std::max({s.train.n_classes, s.val.n_classes, s.test.n_classes,
                          s.ood ? s.ood->n_classes : 0});
  s.train.n_classes = s.val.n_classes = s.test.n_classes = k;
  if (s.ood) s.ood->n_classes = k;
  return s;
}

TrainLog load_train_log(const RunDir& run) {
  return TrainLog::from_csv(read_file(run.train_log()));
}

CheckpointStore open_store(const RunConfig& cfg, const RunDir& run) {
  const Architecture arch = cfg.architecture();
  return CheckpointStore::open(run.checkpoints(), arch.digest(), arch.n_blocks());
}

SearchConfig search_config(const RunConfig& cfg, std::uint64_t seed,
                           int threads, std::string_view stream) {
  SearchConfig sc = cfg.search;
  sc.seed = derive_seed(seed, stream);
  sc.threads = threads;
  return sc;
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_gen_data(const RunConfig& cfg, const RunDir& run, std::uint64_t seed) {
  cfg.validate();
  const Dataset all = gen_blobs(cfg.data.n, cfg.data.classes, cfg.data.dim,
                                cfg.data.label_noise, derive_seed(seed, "data/blobs"));
  SplitSpec spec{cfg.data.train_fraction, cfg.data.val_fraction,
                 cfg.data.test_fraction, derive_seed(seed, "data/split")};
  const auto parts = split(all, spec);
  fs::create_directories(run.root / "data");
  save_csv(parts[0], run.data("train"));
  save_csv(parts[1], run.data("val"));
  save_csv(parts[2], run.data("test"));
  if (cfg.data.ood_severity > 0) {
    save_csv(corrupt_gaussian(parts[2], cfg.data.ood_severity,
                              derive_seed(seed, "data/ood")),
             run.data("ood"));
  }
}

void cmd_train(const RunConfig& cfg, const RunDir& run, std::uint64_t seed,
               int threads) {
  cfg.validate();
  if (fs::exists(CheckpointStore::manifest_path(run.checkpoints()))) {
    throw IoError("run directory already holds a trained store: " + run.root.string());
  }
  if (!fs::exists(run.data("train"))) cmd_gen_data(cfg, run, seed);
  const Splits s = load_splits(run);
  const Architecture arch = cfg.architecture();
  if (s.train.n_features() != static_cast<std::size_t>(arch.n_features)) {
    throw DimensionMismatch("data width does not match the configured dim");
  }

  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(seed, "train");
  BlockwiseModel model = init_model(arch, derive_seed(seed, "model/init"));
  RetainAllSink all;
  const TrainLog log = train_epochs(model, s.train, s.val, tc, &all);
  write_file_atomic(run.train_log(), log.to_csv());
  write_file_atomic(run.config(), cfg.to_yaml());

  // Candidate epochs: the sampled ones plus every sweet point and the final
  // epoch, so each baseline and fixing rule can be assembled from the store.
  SamplingStrategy strategy = cfg.checkpoints.sampling;
  if (strategy.schedule_points.empty()) {
    for (const auto& piece : tc.lr_schedule) {
      if (piece.start_epoch > 0) strategy.schedule_points.push_back(piece.start_epoch + 1);
    }
  }
  std::vector<int> epochs = sample_epochs(strategy, cfg.checkpoints.k, tc.epochs,
                                          derive_seed(seed, "checkpoints/sample"));
  for (auto c : {EarlyStopCriterion::kLoss, EarlyStopCriterion::kError,
                 EarlyStopCriterion::kEce}) {
    epochs.push_back(baseline_early_stop(log, c));
  }
  epochs.push_back(tc.epochs);
  std::sort(epochs.begin(), epochs.end());
  epochs.erase(std::unique(epochs.begin(), epochs.end()), epochs.end());

  CheckpointStore store = CheckpointStore::create(run.checkpoints(), arch.digest(),
                                                  arch.n_blocks(), tc.epochs, epochs);
  for (int c = 0; c < store.k(); ++c) {
    const BlockwiseModel& m = all.at(epochs[static_cast<std::size_t>(c)]);
    for (int b = 0; b < arch.n_blocks(); ++b) {
      store.put_block(b, c, block_to_tensor(m.blocks[static_cast<std::size_t>(b)]));
    }
  }
  store.seal();

  // Reference row: the untouched final-epoch model.
  const SearchContext ctx{store, arch, s.train, s.val, s.test,
                          s.ood ? &*s.ood : nullptr};
  const SearchConfig sc = search_config(cfg, seed, threads, "evaluate");
  const int final_c = *store.candidate_of_epoch(tc.epochs);
  const std::vector<int> pc(static_cast<std::size_t>(arch.n_blocks()), final_c);
  WriteRecord(run, "final_epoch", evaluate_pc(ctx, pc, sc, false, 0));
}

void cmd_search(const RunConfig& cfg, const RunDir& run, std::uint64_t seed,
                int threads) {
  cfg.validate();
  const Loaded l = LoadAll(cfg, run);
  const SearchContext ctx = ContextOf(l);
  const SearchConfig sc = search_config(cfg, seed, threads, "search");
  const SearchResult res = run_pcs(ctx, sc);

  json hist;
  hist["warmup"] = json::array();
  for (const auto& r : res.state.records) hist["warmup"].push_back(to_json(r));
  hist["search"] = json::array();
  for (const auto& r : res.history) hist["search"].push_back(to_json(r));
  WriteJson(run.history(), hist);
  WriteJson(run.best_pc(), {{"pc", res.best.pc}, {"epochs", res.best.epochs}});
  write_file_atomic(run.selection_params(),
                    MatrixCsv(res.final_logits, l.store.epochs()));
  save_estimator(res.state.estimator, run.estimator());
  WriteRecord(run, "pcs", res.best);

  std::vector<EvalRecord> records = res.state.records;
  records.insert(records.end(), res.history.begin(), res.history.end());
  double threshold = 0.0;
  if (cfg.probe.nll_threshold) {
    threshold = *cfg.probe.nll_threshold;
  } else {
    // Same filter as the selection rule; strict < in the histogram, so
    // nudge up to keep the records sitting exactly on the quantile.
    std::vector<double> nlls;
    for (const auto& r : records) nlls.push_back(r.val.nll);
    std::sort(nlls.begin(), nlls.end());
    const auto q = static_cast<std::size_t>(
        std::floor(sc.nll_quantile * static_cast<double>(nlls.size() - 1)));
    threshold = std::nextafter(nlls[q], std::numeric_limits<double>::infinity());
  }
  const PcHistogram h =
      pc_statistics(records, threshold, l.arch.n_blocks(), l.store.epochs());
  write_file_atomic(run.root / "pc_frequency.csv", h.to_csv());
}

void cmd_probe_blocks(const RunConfig& cfg, const RunDir& run,
                      std::uint64_t seed, int threads) {
  cfg.validate();
  const Loaded l = LoadAll(cfg, run);
  const SearchContext ctx = ContextOf(l);
  const TrainLog log = load_train_log(run);
  const SearchConfig sc = search_config(cfg, seed, threads, "probe");
  std::vector<int> blocks = cfg.probe.blocks;
  if (blocks.empty()) {
    for (int b = 0; b < l.arch.n_blocks(); ++b) blocks.push_back(b);
  }
  for (int b : blocks) {
    const BlockCurve curve = probe_block(ctx, log, b, cfg.probe.fixing, sc);
    write_file_atomic(run.root / ("probe_block_" + std::to_string(b) + ".csv"),
                      curve.to_csv());
  }
}

void cmd_baseline_early_stop(const RunConfig& cfg, const RunDir& run,
                             std::uint64_t seed, int threads) {
  cfg.validate();
  const Loaded l = LoadAll(cfg, run);
  const SearchContext ctx = ContextOf(l);
  const TrainLog log = load_train_log(run);
  const SearchConfig sc = search_config(cfg, seed, threads, "early-stop");
  for (auto c : {EarlyStopCriterion::kLoss, EarlyStopCriterion::kError,
                 EarlyStopCriterion::kEce}) {
    const int epoch = baseline_early_stop(log, c);
    const auto cand = l.store.candidate_of_epoch(epoch);
    if (!cand) {
      throw MissingCheckpoint("early-stop epoch " + std::to_string(epoch) +
                                  " is not in the store",
                              0, -1);
    }
    const std::vector<int> pc(static_cast<std::size_t>(l.arch.n_blocks()), *cand);
    WriteRecord(run, "early_stop_" + std::string(to_string(c)),
                evaluate_pc(ctx, pc, sc, false, 0));
  }
}

void cmd_baseline_random(const RunConfig& cfg, const RunDir& run,
                         std::uint64_t seed, int threads) {
  cfg.validate();
  const Loaded l = LoadAll(cfg, run);
  const SearchConfig sc = search_config(cfg, seed, threads, "random-search");
  WriteRecord(run, "random_search",
              baseline_random_search(ContextOf(l), sc, cfg.baseline.random_samples));
}

void cmd_baseline_loss_search(const RunConfig& cfg, const RunDir& run,
                              std::uint64_t seed, int threads) {
  cfg.validate();
  const Loaded l = LoadAll(cfg, run);
  const SearchConfig sc = search_config(cfg, seed, threads, "loss-search");
  const SearchResult res = baseline_search_on_loss(ContextOf(l), sc);
  json hist = json::array();
  for (const auto& r : res.history) hist.push_back(to_json(r));
  WriteJson(run.root / "history_search_on_loss.json", hist);
  WriteRecord(run, "search_on_loss", res.best);
}

void cmd_evaluate(const RunConfig& cfg, const RunDir& run, std::uint64_t seed,
                  int threads, std::vector<int> pc, bool fine_tune,
                  const std::string& name) {
  cfg.validate();
  const Loaded l = LoadAll(cfg, run);
  if (pc.empty()) {
    if (!fs::exists(run.best_pc())) {
      throw IoError("no combination given and no best_pc.json in " + run.root.string());
    }
    pc = ReadJson(run.best_pc()).at("pc").get<std::vector<int>>();
  }
  const SearchConfig sc = search_config(cfg, seed, threads, "evaluate");
  WriteRecord(run, name,
              evaluate_pc(ContextOf(l), pc, sc, fine_tune,
                          derive_seed(seed, "evaluate/finetune")));
}

void cmd_report(const RunDir& run) {
  std::vector<fs::path> files;
  if (fs::is_directory(run.root)) {
    for (const auto& entry : fs::directory_iterator(run.root)) {
      const auto name = entry.path().filename().string();
      if (name.starts_with("eval_") && name.ends_with(".json")) {
        files.push_back(entry.path());
      }
    }
  }
  if (files.empty()) throw IoError("no evaluation records in " + run.root.string());
  std::sort(files.begin(), files.end());

  json rows = json::array();
  std::ostringstream txt;
  char line[256];
  std::snprintf(line, sizeof line, "%-20s %-5s %8s %8s %8s %8s %8s %8s %6s %8s %8s %8s\n",
                "method", "ft", "err", "ece", "adaece", "cwece", "mce", "nll",
                "T", "ece_T", "nll_T", "auroc");
  txt << line;
  for (const auto& f : files) {
    const EvalRecord r = eval_record_from_json(ReadJson(f));
    rows.push_back({{"method", r.method},
                    {"pc", r.pc},
                    {"epochs", r.epochs},
                    {"fine_tuned", r.fine_tuned},
                    {"temperature", r.temperature},
                    {"test_pre", to_json(r)["test"]},
                    {"test_post", to_json(r)["test_post"]},
                    {"auroc_pre", r.auroc_pre ? json(*r.auroc_pre) : json()},
                    {"auroc_post", r.auroc_post ? json(*r.auroc_post) : json()}});
    std::snprintf(line, sizeof line,
                  "%-20s %-5s %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f %6.2f %8.4f %8.4f %8s\n",
                  r.method.c_str(), r.fine_tuned ? "yes" : "no", r.test.err,
                  r.test.ece, r.test.adaece, r.test.cwece, r.test.mce, r.test.nll,
                  r.temperature, r.test_post.ece, r.test_post.nll,
                  r.auroc_pre ? format_double(std::round(*r.auroc_pre * 1e4) / 1e4).c_str()
                              : "-");
    txt << line;
    write_file_atomic(run.root / ("reliability_" + r.method + "_pre.csv"),
                      r.test_reliability.to_csv());
    write_file_atomic(run.root / ("reliability_" + r.method + "_post.csv"),
                      r.test_reliability_post.to_csv());
  }
  WriteJson(run.root / "report.json", {{"rows", rows}});
  write_file_atomic(run.root / "report.txt", txt.str());
}

}  // namespace pcs
