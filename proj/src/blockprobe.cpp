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

#include "pcs/blockprobe.hpp"

#include <stdexcept>

#include "pcs/errors.hpp"
#include "pcs/io.hpp"
#include "pcs/rng.hpp"

namespace pcs {

std::string_view to_string(FixingRule rule) noexcept {
  switch (rule) {
    case FixingRule::kSweetPointLoss: return "sweet_loss";
    case FixingRule::kSweetPointError: return "sweet_error";
    case FixingRule::kFinalEpoch: return "final";
  }
  return "unknown";
}

FixingRule fixing_rule_from_string(std::string_view s) {
  if (s == "sweet_loss") return FixingRule::kSweetPointLoss;
  if (s == "sweet_error") return FixingRule::kSweetPointError;
  if (s == "final") return FixingRule::kFinalEpoch;
  throw std::invalid_argument("unknown fixing rule: " + std::string(s));
}

int fixing_epoch(const TrainLog& log, FixingRule rule) {
  if (log.records.empty()) throw std::invalid_argument("fixing_epoch: empty train log");
  switch (rule) {
    case FixingRule::kSweetPointLoss:
      return baseline_early_stop(log, EarlyStopCriterion::kLoss);
    case FixingRule::kSweetPointError:
      return baseline_early_stop(log, EarlyStopCriterion::kError);
    case FixingRule::kFinalEpoch:
      break;
  }
  return log.records.back().epoch;
}

int BlockCurve::argmin_nll_epoch() const {
  if (points.empty()) throw std::invalid_argument("argmin_nll_epoch: empty curve");
  std::size_t best = 0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].val_nll < points[best].val_nll) best = i;
  }
  return points[best].epoch;
}

std::string BlockCurve::to_csv() const {
  std::string out = "epoch,val_nll,val_ece,val_error\n";
  for (const auto& p : points) {
    out += std::to_string(p.epoch) + ',' + format_double(p.val_nll) + ',' +
           format_double(p.val_ece) + ',' + format_double(p.val_error) + '\n';
  }
  return out;
}

BlockCurve probe_block(const SearchContext& ctx, const TrainLog& log,
                       int block, FixingRule fixing, const SearchConfig& cfg) {
  const int m = ctx.arch.n_blocks();
  if (block < 0 || block >= m) throw IndexOutOfRange("probe_block: block out of range");
  BlockCurve curve;
  curve.block = block;
  curve.fixing = fixing;
  curve.fixing_epoch = fixing_epoch(log, fixing);
  const auto fixed = ctx.store.candidate_of_epoch(curve.fixing_epoch);
  if (!fixed) {
    throw MissingCheckpoint("fixing epoch " + std::to_string(curve.fixing_epoch) +
                                " is not a stored candidate",
                            block, -1);
  }
  const int k = ctx.store.k();
  curve.points.resize(static_cast<std::size_t>(k));
  parallel_for(k, cfg.threads, [&](int c) {
    std::vector<int> pc(static_cast<std::size_t>(m), *fixed);
    pc[static_cast<std::size_t>(block)] = c;
    const auto seed = derive_seed(cfg.seed, "probe/finetune",
                                  static_cast<std::uint64_t>(block * k + c));
    const EvalRecord r = evaluate_pc(ctx, pc, cfg, true, seed);
    curve.points[static_cast<std::size_t>(c)] = {
        ctx.store.epochs()[static_cast<std::size_t>(c)], r.val.nll, r.val.ece,
        r.val.err};
  });
  return curve;
}

std::string PcHistogram::to_csv() const {
  std::string out = "block,candidate_epoch,count\n";
  for (int b = 0; b < n_blocks; ++b) {
    for (std::size_t c = 0; c < epochs.size(); ++c) {
      out += std::to_string(b) + ',' + std::to_string(epochs[c]) + ',' +
             std::to_string(counts[b][c]) + '\n';
    }
  }
  return out;
}

PcHistogram pc_statistics(const std::vector<EvalRecord>& history,
                          double nll_threshold, int n_blocks,
                          const std::vector<int>& epochs) {
  if (n_blocks < 1) throw std::invalid_argument("pc_statistics: n_blocks < 1");
  PcHistogram h;
  h.n_blocks = n_blocks;
  h.epochs = epochs;
  h.counts.assign(static_cast<std::size_t>(n_blocks),
                  std::vector<int>(epochs.size(), 0));
  for (const auto& r : history) {
    if (!(r.val.nll < nll_threshold)) continue;
    if (r.pc.size() != static_cast<std::size_t>(n_blocks)) {
      throw DimensionMismatch("pc_statistics: record has wrong block count");
    }
    for (int b = 0; b < n_blocks; ++b) {
      const int c = r.pc[static_cast<std::size_t>(b)];
      if (c < 0 || static_cast<std::size_t>(c) >= epochs.size()) {
        throw IndexOutOfRange("pc_statistics: candidate out of range");
      }
      ++h.counts[b][static_cast<std::size_t>(c)];
    }
    ++h.n_records;
  }
  return h;
}

}  // namespace pcs
