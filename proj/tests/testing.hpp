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

// Shared helpers for the unit tests: scratch directories, a tiny trained
// run, and central finite differences.

#ifndef PCS_TESTS_TESTING_HPP_
#define PCS_TESTS_TESTING_HPP_

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pcs/ckptstore.hpp"
#include "pcs/data.hpp"
#include "pcs/netcore.hpp"
#include "pcs/orchestrator.hpp"

namespace pcs::testing {

// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("pcs_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Central difference of f at x along coordinate i.
inline double central_difference(const std::function<double()>& f, double& x,
                                 double h) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * h);
}

// |a - b| / max(|a|, |b|, floor): relative error that stays meaningful near
// zero.
inline double rel_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// A small trained run: 3-block MLP on 4-class blobs, every epoch stored.
struct TinyRun {
  ScratchDir dir{"tinyrun"};
  Dataset train, val, test, ood;
  Architecture arch{2, 4, {8, 8}};
  TrainLog log;
  std::unique_ptr<CheckpointStore> store;

  explicit TinyRun(int epochs = 6, std::uint64_t seed = 3) {
    const Dataset all = gen_blobs(400, 4, 2, 0.1, seed);
    auto parts = split(all, SplitSpec{0.5, 0.25, 0.25, seed});
    train = parts[0];
    val = parts[1];
    test = parts[2];
    ood = corrupt_gaussian(test, 5, seed);
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.lr_schedule = {{0, 0.05}};
    cfg.batch_size = 16;
    cfg.seed = seed;
    BlockwiseModel m = init_model(arch, seed);
    std::vector<int> all_epochs;
    for (int e = 1; e <= epochs; ++e) all_epochs.push_back(e);
    store = std::make_unique<CheckpointStore>(CheckpointStore::create(
        dir.path() / "store", arch.digest(), arch.n_blocks(), epochs, all_epochs));
    StoreSink sink(*store);
    log = train_epochs(m, train, val, cfg, &sink);
    store->seal();
  }

  SearchContext context(bool with_ood = true) const {
    return SearchContext{*store, arch, train, val, test, with_ood ? &ood : nullptr};
  }

  static SearchConfig small_search() {
    SearchConfig c;
    c.population = 4;
    c.steps = 3;
    c.hidden = 4;
    c.estimator_steps = 20;
    c.fine_tune.batch_size = 16;
    return c;
  }
};

}  // namespace pcs::testing

#endif  // PCS_TESTS_TESTING_HPP_
