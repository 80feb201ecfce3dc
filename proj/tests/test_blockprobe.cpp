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

#include <gtest/gtest.h>

#include <stdexcept>

#include "pcs/errors.hpp"
#include "testing.hpp"

namespace pcs {
namespace {

using testing::TinyRun;

EvalRecord Record(std::vector<int> pc, double nll) {
  EvalRecord r;
  r.pc = std::move(pc);
  r.val.nll = nll;
  return r;
}

TEST(Fixing, RulesResolveAgainstLog) {
  TrainLog log;
  log.records = {{1, 0, 0.9, 0.5, 0.1}, {2, 0, 0.5, 0.3, 0.2}, {3, 0, 0.7, 0.2, 0.3}};
  EXPECT_EQ(fixing_epoch(log, FixingRule::kSweetPointLoss), 2);
  EXPECT_EQ(fixing_epoch(log, FixingRule::kSweetPointError), 3);
  EXPECT_EQ(fixing_epoch(log, FixingRule::kFinalEpoch), 3);
  for (auto r : {FixingRule::kSweetPointLoss, FixingRule::kSweetPointError,
                 FixingRule::kFinalEpoch}) {
    EXPECT_EQ(fixing_rule_from_string(to_string(r)), r);
  }
  EXPECT_THROW(fixing_rule_from_string("median"), std::invalid_argument);
}

TEST(Probe, CurveCoversEveryCandidate) {
  const TinyRun run(5, 4);
  SearchConfig cfg = TinyRun::small_search();
  cfg.threads = 2;
  const BlockCurve curve = probe_block(run.context(), run.log, 1, FixingRule::kFinalEpoch, cfg);
  ASSERT_EQ(curve.points.size(), 5u);
  EXPECT_EQ(curve.fixing_epoch, 5);
  for (int c = 0; c < 5; ++c) EXPECT_EQ(curve.points[c].epoch, c + 1);

  // The point at the fixing epoch is the all-final combination.
  const std::vector<int> all_final(3, 4);
  const EvalRecord r = evaluate_pc(run.context(), all_final, cfg, true,
                                   derive_seed(cfg.seed, "probe/finetune", 1 * 5 + 4));
  EXPECT_EQ(curve.points[4].val_nll, r.val.nll);
  EXPECT_EQ(curve.points[4].val_ece, r.val.ece);

  const std::string csv = curve.to_csv();
  EXPECT_EQ(csv.rfind("epoch,val_nll,val_ece,val_error\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
  const int best = curve.argmin_nll_epoch();
  for (const auto& p : curve.points) EXPECT_LE(curve.points[best - 1].val_nll, p.val_nll);

  cfg.threads = 1;
  EXPECT_EQ(probe_block(run.context(), run.log, 1, FixingRule::kFinalEpoch, cfg).points,
            curve.points);
  EXPECT_THROW(probe_block(run.context(), run.log, 3, FixingRule::kFinalEpoch, cfg),
               IndexOutOfRange);
}

TEST(Probe, MissingFixingEpoch) {
  testing::ScratchDir dir("probe");
  const TinyRun run(4, 2);
  const Architecture& arch = run.arch;
  auto store = CheckpointStore::create(dir.path(), arch.digest(), 3, 4, {1, 2});
  for (int b = 0; b < 3; ++b) {
    for (int c = 0; c < 2; ++c) store.put_block(b, c, run.store->get_block(b, c));
  }
  store.seal();
  const SearchContext ctx{store, arch, run.train, run.val, run.test, nullptr};
  EXPECT_THROW(probe_block(ctx, run.log, 0, FixingRule::kFinalEpoch, TinyRun::small_search()),
               MissingCheckpoint);
}

TEST(Histogram, CountsBelowThreshold) {
  const std::vector<EvalRecord> h = {Record({0, 1}, 0.1), Record({0, 2}, 0.15),
                                     Record({1, 1}, 0.2), Record({2, 2}, 0.5)};
  const PcHistogram hist = pc_statistics(h, 0.2, 2, {10, 20, 30});
  EXPECT_EQ(hist.n_records, 2u);
  EXPECT_EQ(hist.counts, (std::vector<std::vector<int>>{{2, 0, 0}, {0, 1, 1}}));
  EXPECT_EQ(hist.to_csv(),
            "block,candidate_epoch,count\n"
            "0,10,2\n0,20,0\n0,30,0\n1,10,0\n1,20,1\n1,30,1\n");
  const PcHistogram none = pc_statistics(h, 0.05, 2, {10, 20, 30});
  EXPECT_TRUE(none.empty());
  EXPECT_EQ(none.counts, (std::vector<std::vector<int>>{{0, 0, 0}, {0, 0, 0}}));
}

}  // namespace
}  // namespace pcs
