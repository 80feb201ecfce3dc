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

#include "pcs/calmetrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "oracles.hpp"

namespace pcs {
namespace {

// Confidences 0.3, 0.7, 0.8, 0.9 with correctness 0, 1, 1, 1. A top
// probability of 0.3 needs at least four classes.
PredictionSet FourSample() {
  PredictionSet p{Matrix(4, 4), {2, 0, 0, 0}};
  const double rows[4][4] = {{0.3, 0.3, 0.2, 0.2},
                             {0.7, 0.1, 0.1, 0.1},
                             {0.8, 0.1, 0.05, 0.05},
                             {0.9, 0.05, 0.03, 0.02}};
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) p.probs(r, c) = rows[r][c];
  }
  return p;
}

TEST(Ece, FourSampleTwoBins) {
  EXPECT_NEAR(ece(FourSample(), 2), 0.225, 1e-12);
}

TEST(Ece, PerfectConfidentPredictionsGiveZero) {
  PredictionSet p{Matrix(3, 2), {0, 1, 0}};
  p.probs(0, 0) = 1.0;
  p.probs(1, 1) = 1.0;
  p.probs(2, 0) = 1.0;
  EXPECT_EQ(ece(p), 0.0);
}

TEST(Ece, SingleBinIsAccuracyMinusConfidence) {
  const auto p = FourSample();
  const double acc = 0.75;
  const double conf = (0.3 + 0.7 + 0.8 + 0.9) / 4.0;
  EXPECT_NEAR(ece(p, 1), std::abs(acc - conf), 1e-15);
}

TEST(Ece, RejectsZeroBins) {
  EXPECT_THROW(ece(FourSample(), 0), std::invalid_argument);
}

TEST(Mce, FourSampleTwoBins) {
  EXPECT_NEAR(mce(FourSample(), 2), 0.3, 1e-12);
}

TEST(Mce, DominatesEce) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    const auto p = oracle::random_predictions(rng, 20, 3);
    EXPECT_GE(mce(p, 5) + 1e-15, ece(p, 5));
  }
}

TEST(AdaptiveEce, FourSampleTwoBins) {
  EXPECT_NEAR(adaptive_ece(FourSample(), 2), 0.075, 1e-12);
}

TEST(AdaptiveEce, SingleBinMatchesEce) {
  EXPECT_NEAR(adaptive_ece(FourSample(), 1), ece(FourSample(), 1), 1e-15);
}

TEST(AdaptiveEce, BinSizes) {
  EXPECT_EQ(adaptive_bin_sizes(7, 3), (std::vector<std::size_t>{3, 2, 2}));
  EXPECT_EQ(adaptive_bin_sizes(8, 4), (std::vector<std::size_t>{2, 2, 2, 2}));
}

TEST(AdaptiveEce, RejectsMoreBinsThanSamples) {
  EXPECT_THROW(adaptive_ece(FourSample(), 5), std::invalid_argument);
}

TEST(ClasswiseEce, HandExample) {
  PredictionSet p{Matrix(2, 2), {0, 0}};
  p.probs(0, 0) = 0.8;
  p.probs(0, 1) = 0.2;
  p.probs(1, 0) = 0.6;
  p.probs(1, 1) = 0.4;
  EXPECT_NEAR(classwise_ece(p, 1), 0.3, 1e-12);
}

TEST(ClasswiseEce, OneHotOfLabelIsZero) {
  PredictionSet p{Matrix(3, 3), {2, 0, 1}};
  for (int r = 0; r < 3; ++r) p.probs(r, p.labels[r]) = 1.0;
  EXPECT_EQ(classwise_ece(p, 15), 0.0);
}

TEST(Nll, HandValues) {
  PredictionSet half{Matrix(1, 2), {0}};
  half.probs(0, 0) = 0.5;
  half.probs(0, 1) = 0.5;
  EXPECT_NEAR(nll(half), std::log(2.0), 1e-12);
  PredictionSet sure{Matrix(1, 2), {1}};
  sure.probs(0, 1) = 1.0;
  EXPECT_EQ(nll(sure), 0.0);
  PredictionSet zero{Matrix(1, 2), {1}};
  zero.probs(0, 0) = 1.0;
  EXPECT_NEAR(nll(zero), -std::log(1e-12), 1e-9);
}

TEST(Error, CountsWrongArgmaxWithFirstIndexTies) {
  PredictionSet p{Matrix(4, 2), {0, 0, 1, 1}};
  p.probs(0, 0) = 0.9; p.probs(0, 1) = 0.1;
  p.probs(1, 0) = 0.6; p.probs(1, 1) = 0.4;
  p.probs(2, 0) = 0.2; p.probs(2, 1) = 0.8;
  p.probs(3, 0) = 0.5; p.probs(3, 1) = 0.5;  // tie -> class 0 -> wrong
  EXPECT_DOUBLE_EQ(error(p), 0.25);
}

TEST(Reliability, FourSampleTable) {
  const BinTable t = reliability_table(FourSample(), 2);
  ASSERT_EQ(t.bins.size(), 2u);
  EXPECT_EQ(t.bins[0].count, 1u);
  EXPECT_NEAR(t.bins[0].accuracy, 0.0, 1e-15);
  EXPECT_NEAR(t.bins[0].confidence, 0.3, 1e-15);
  EXPECT_EQ(t.bins[1].count, 3u);
  EXPECT_NEAR(t.bins[1].accuracy, 1.0, 1e-15);
  EXPECT_NEAR(t.bins[1].confidence, 0.8, 1e-15);
  EXPECT_EQ(t.total(), 4u);
  EXPECT_NEAR(t.weighted_gap(), ece(FourSample(), 2), 1e-15);
  EXPECT_EQ(t.to_csv().substr(0, t.to_csv().find('\n')),
            "bin_lo,bin_hi,count,accuracy,confidence");
}

TEST(BinIndex, LeftOpenIntervals) {
  EXPECT_EQ(bin_index(0.5, 2), 0);
  EXPECT_EQ(bin_index(0.5000001, 2), 1);
  EXPECT_EQ(bin_index(1.0, 2), 1);
  EXPECT_EQ(bin_index(0.0, 4), 0);
  EXPECT_EQ(bin_index(1.0 / 3.0, 3), 0);
  EXPECT_EQ(bin_index(2.0 / 3.0, 3), 1);
  for (int b = 1; b <= 20; ++b) {
    for (int i = 1; i <= b; ++i) {
      EXPECT_EQ(bin_index(static_cast<double>(i) / b, b), i - 1) << i << "/" << b;
    }
  }
}

TEST(BruteForce, AllBinnedMetricsMatchNaiveOracles) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> n_dist(1, 12), b_dist(1, 4), k_dist(2, 4);
  for (int t = 0; t < 200; ++t) {
    const int n = n_dist(rng), b = b_dist(rng), k = k_dist(rng);
    const auto p = oracle::random_predictions(rng, n, k);
    EXPECT_NEAR(ece(p, b), oracle::naive_ece(p, b), 1e-15);
    EXPECT_NEAR(mce(p, b), oracle::naive_mce(p, b), 1e-15);
    EXPECT_NEAR(classwise_ece(p, b), oracle::naive_classwise_ece(p, b), 1e-15);
    if (n >= b) {
      EXPECT_NEAR(adaptive_ece(p, b), oracle::naive_adaptive_ece(p, b), 1e-15);
    }
  }
}

TEST(Metrics, RangesHoldOnRandomInputs) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 100; ++t) {
    const auto p = oracle::random_predictions(rng, 30, 5);
    for (double v : {ece(p), mce(p), adaptive_ece(p), classwise_ece(p), error(p)}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_GE(nll(p), 0.0);
  }
}

TEST(Temperature, HandSoftmax) {
  Matrix logits(1, 2);
  logits(0, 0) = 2.0;
  const Matrix p = apply_temperature(logits, 2.0);
  EXPECT_NEAR(p(0, 0), 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
  EXPECT_NEAR(p(0, 0), 0.731059, 1e-6);
  EXPECT_NEAR(p(0, 1), 0.268941, 1e-6);
  EXPECT_EQ(apply_temperature(logits, 1.0), softmax_rows(logits));
  EXPECT_THROW(apply_temperature(logits, 0.0), std::invalid_argument);
}

TEST(Temperature, GridIsTenthsUpToTen) {
  const auto g = default_temperature_grid();
  ASSERT_EQ(g.size(), 100u);
  EXPECT_DOUBLE_EQ(g.front(), 0.1);
  EXPECT_DOUBLE_EQ(g[9], 1.0);
  EXPECT_DOUBLE_EQ(g.back(), 10.0);
}

TEST(Temperature, OverconfidentLogitsPickTauAboveOne) {
  // A 70%-accurate predictor whose logits claim ~99% confidence.
  const int n = 1000;
  Matrix logits(n, 3);
  std::vector<int> labels(n);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> jitter(0.0, 0.3);
  for (int i = 0; i < n; ++i) {
    logits(i, 0) = 5.0 + jitter(rng);
    labels[i] = (i % 10 < 7) ? 0 : 1 + (i % 2);
  }
  const auto grid = default_temperature_grid();
  const double tau = temperature_search(logits, labels, grid);
  EXPECT_GT(tau, 1.0);
  // Brute force over the grid.
  double best = 1e9;
  double best_tau = 0.0;
  for (double t : grid) {
    const double e = ece(PredictionSet{apply_temperature(logits, t), labels});
    if (e < best) {
      best = e;
      best_tau = t;
    }
  }
  EXPECT_EQ(ece(PredictionSet{apply_temperature(logits, tau), labels}), best);
  EXPECT_GT(best_tau, 1.0);
}

TEST(Temperature, TieGoesToOne) {
  // Every temperature yields ECE 0: uniform logits, labels split evenly.
  Matrix logits(2, 2);
  const std::vector<int> labels = {0, 1};
  const std::vector<double> grid = {0.5, 1.0, 2.0};
  EXPECT_DOUBLE_EQ(temperature_search(logits, labels, grid), 1.0);
  const std::vector<double> no_one = {0.5, 2.0, 1.5};
  EXPECT_DOUBLE_EQ(temperature_search(logits, labels, no_one), 0.5);
  EXPECT_THROW(temperature_search(logits, labels, std::vector<double>{}),
               std::invalid_argument);
}

TEST(Temperature, PostEceNeverWorseAndErrorInvariant) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> z(0.0, 3.0);
  const auto grid = default_temperature_grid();
  for (int t = 0; t < 20; ++t) {
    Matrix logits(60, 4);
    std::vector<int> labels(60);
    for (std::size_t i = 0; i < 60; ++i) {
      for (double& v : logits.row(i)) v = z(rng);
      labels[i] = static_cast<int>(rng() % 4);
    }
    const PredictionSet pre{softmax_rows(logits), labels};
    const double tau = temperature_search(logits, labels, grid);
    const PredictionSet post{apply_temperature(logits, tau), labels};
    EXPECT_LE(ece(post), ece(pre));
    for (double any : {0.01, 0.1, 0.7, 3.0, 1e3}) {
      EXPECT_EQ(error(PredictionSet{apply_temperature(logits, any), labels}),
                error(pre));
    }
  }
}

TEST(Auroc, UnitOracles) {
  EXPECT_NEAR(auroc(std::vector<double>{0.9, 0.8}, std::vector<double>{0.2, 0.1}), 1.0, 1e-12);
  EXPECT_NEAR(auroc(std::vector<double>{0.9, 0.4}, std::vector<double>{0.6, 0.1}), 0.75, 1e-12);
  EXPECT_NEAR(auroc(std::vector<double>{0.5, 0.5}, std::vector<double>{0.5, 0.5, 0.5}), 0.5, 1e-12);
  EXPECT_THROW(auroc(std::vector<double>{}, std::vector<double>{0.1}), std::invalid_argument);
}

TEST(Auroc, SwapSumsToOneExactly) {
  std::mt19937_64 rng(29);
  std::uniform_int_distribution<int> level(0, 9);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> a(1 + rng() % 17), b(1 + rng() % 13);
    for (double& v : a) v = level(rng) / 10.0;
    for (double& v : b) v = level(rng) / 10.0;
    EXPECT_EQ(auroc(a, b) + auroc(b, a), 1.0);
    EXPECT_NEAR(auroc(a, b), oracle::naive_auroc(a, b), 1e-12);
  }
}

TEST(Softmax, RowsSumToOne) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> z(0.0, 10.0);
  Matrix logits(50, 6);
  for (double& v : logits.flat()) v = z(rng);
  const Matrix p = softmax_rows(logits);
  for (std::size_t r = 0; r < p.rows(); ++r) {
    const auto row = p.row(r);
    EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-9);
    EXPECT_EQ(argmax(row), argmax(logits.row(r)));
  }
}

}  // namespace
}  // namespace pcs
