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

#ifndef PCS_BLOCKPROBE_HPP_
#define PCS_BLOCKPROBE_HPP_

#include <string>
#include <string_view>
#include <vector>

#include "pcs/orchestrator.hpp"

namespace pcs {

// Which epoch every block other than the probed one is frozen at.
enum class FixingRule { kSweetPointLoss, kSweetPointError, kFinalEpoch };

std::string_view to_string(FixingRule rule) noexcept;
FixingRule fixing_rule_from_string(std::string_view s);

// One-based epoch the rule resolves to for a given training log.
int fixing_epoch(const TrainLog& log, FixingRule rule);

struct ProbePoint {
  int epoch = 0;
  double val_nll = 0.0;
  double val_ece = 0.0;
  double val_error = 0.0;

  friend bool operator==(const ProbePoint&, const ProbePoint&) = default;
};

struct BlockCurve {
  int block = 0;
  FixingRule fixing = FixingRule::kFinalEpoch;
  int fixing_epoch = 0;
  std::vector<ProbePoint> points;  // ascending epoch, one per candidate

  // Epoch of the lowest validation NLL, earliest on ties.
  int argmin_nll_epoch() const;
  std::string to_csv() const;
};

// Moves block `block` through every stored candidate while the others stay
// at the fixing epoch; each combination gets one fine-tune epoch. Throws
// MissingCheckpoint if the fixing epoch is not in the store.
BlockCurve probe_block(const SearchContext& ctx, const TrainLog& log,
                       int block, FixingRule fixing, const SearchConfig& cfg);

struct PcHistogram {
  int n_blocks = 0;
  std::vector<int> epochs;               // candidate epochs, column labels
  std::vector<std::vector<int>> counts;  // n_blocks x K
  std::size_t n_records = 0;             // records that passed the filter
  bool empty() const noexcept { return n_records == 0; }

  std::string to_csv() const;
};

// Counts the candidate picked for each block over the records whose
// validation NLL is below `nll_threshold`.
PcHistogram pc_statistics(const std::vector<EvalRecord>& history,
                          double nll_threshold, int n_blocks,
                          const std::vector<int>& epochs);

}  // namespace pcs

#endif  // PCS_BLOCKPROBE_HPP_
