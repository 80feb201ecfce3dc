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

#include "pcs/combsearch.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "pcs/calmetrics.hpp"
#include "pcs/errors.hpp"
#include "testing.hpp"

namespace pcs {
namespace {

Matrix Row(std::initializer_list<double> v) {
  Matrix m(1, v.size());
  std::size_t i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

TEST(Harden, ArgmaxWithFirstIndexTies) {
  EXPECT_EQ(harden(Row({0.1, 0.9, 0.3})).rows, Row({0, 1, 0}));
  EXPECT_EQ(harden(Row({0.5, 0.5})).rows, Row({1, 0}));
  EXPECT_EQ(harden(Row({0.1, 0.9, 0.3})).mode, PcMode::kDiscrete);
  EXPECT_EQ(harden(Row({2.1, 2.9, 2.3})).rows, harden(Row({0.1, 0.9, 0.3})).rows);
}

TEST(GumbelRelax, ZeroNoiseExamples) {
  const Matrix zero(1, 2);
  EXPECT_EQ(gumbel_relax(Row({0, 0}), 1.0, zero).rows, Row({0.5, 0.5}));
  const auto r = gumbel_relax(Row({std::log(2.0), 0}), 1.0, zero).rows;
  EXPECT_NEAR(r(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r(0, 1), 1.0 / 3.0, 1e-15);
  EXPECT_THROW(gumbel_relax(Row({0, 0}), 0.0, zero), std::invalid_argument);
}

TEST(GumbelRelax, RowsOnSimplexAndArgmaxConsistent) {
  Rng rng(4);
  Matrix a(6, 5);
  std::normal_distribution<double> z(0.0, 2.0);
  for (double& v : a.flat()) v = z(rng);
  for (double tau : {0.01, 0.1, 1.0, 10.0}) {
    const Matrix xi = sample_gumbel(6, 5, rng);
    const auto p = gumbel_relax(a, tau, xi);
    EXPECT_NO_THROW(p.validate());
    Matrix shifted = a;
    for (std::size_t i = 0; i < a.size(); ++i) shifted.data()[i] += xi.data()[i];
    EXPECT_EQ(p.selected(), harden(shifted).selected());
  }
}

TEST(GumbelRelax, LowTemperatureConcentrates) {
  Rng rng(5);
  Matrix a(1000, 4);
  std::normal_distribution<double> z(0.0, 1.0);
  for (double& v : a.flat()) v = z(rng);
  const Matrix xi = sample_gumbel(1000, 4, rng);
  const auto p = gumbel_relax(a, 0.01, xi);
  Matrix shifted = a;
  for (std::size_t i = 0; i < a.size(); ++i) shifted.data()[i] += xi.data()[i];
  int concentrated = 0;
  for (std::size_t r = 0; r < 1000; ++r) {
    concentrated += p.rows(r, argmax(shifted.row(r))) > 0.99;
  }
  EXPECT_GE(concentrated, 950);
}

TEST(GumbelRelax, ZeroTemperatureLimitIsHardArgmax) {
  Rng rng(6);
  Matrix a(8, 6);
  for (double& v : a.flat()) v = std::normal_distribution<double>(0, 1)(rng);
  const Matrix xi = sample_gumbel(8, 6, rng);
  Matrix shifted = a;
  for (std::size_t i = 0; i < a.size(); ++i) shifted.data()[i] += xi.data()[i];
  EXPECT_EQ(to_discrete(gumbel_relax(a, 1e-4, xi)).rows, harden(shifted).rows);
}

TEST(GumbelNoise, StandardGumbelMoments) {
  Rng rng(7);
  const Matrix xi = sample_gumbel(200, 100, rng);
  double mean = 0.0;
  for (double v : xi.flat()) mean += v;
  mean /= xi.size();
  EXPECT_NEAR(mean, 0.5772156649, 0.02);  // Euler-Mascheroni
}

TEST(ToDiscrete, Examples) {
  const PcRepresentation r{Row({0.7, 0.2, 0.1}), PcMode::kRelaxed};
  EXPECT_EQ(to_discrete(r).rows, Row({1, 0, 0}));
  const auto h = one_hot(std::vector<int>{1}, 3);
  EXPECT_EQ(to_discrete(h).rows, h.rows);
}

TEST(Representation, ValidateModes) {
  PcRepresentation bad{Row({0.5, 0.5}), PcMode::kDiscrete};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad.mode = PcMode::kRelaxed;
  EXPECT_NO_THROW(bad.validate());
  PcRepresentation off{Row({0.5, 0.6}), PcMode::kRelaxed};
  EXPECT_THROW(off.validate(), std::invalid_argument);
  EXPECT_THROW(one_hot(std::vector<int>{3}, 3), std::invalid_argument);
}

TEST(Update, Examples) {
  EXPECT_EQ(update_selection(Row({0, 0}), Row({1, -1}), 0.1), Row({-0.1, 0.1}));
  EXPECT_EQ(update_selection(Row({0.3, -2}), Row({0, 0}), 0.1), Row({0.3, -2}));
  EXPECT_THROW(update_selection(Row({0, 0}), Row({NAN, 0}), 0.1), NonFiniteGradient);
  EXPECT_THROW(update_selection(Row({0, 0}), Row({1, 0, 0}), 0.1), DimensionMismatch);
}

TEST(Jacobian, RowsSumToZeroAndMatchFiniteDifferences) {
  Rng rng(8);
  for (double tau : {0.3, 1.0, 2.5}) {
    Matrix a(1, 5);
    for (double& v : a.flat()) v = std::normal_distribution<double>(0, 1)(rng);
    const Matrix xi = sample_gumbel(1, 5, rng);
    const auto rho = gumbel_relax(a, tau, xi).rows;
    const Matrix j = gumbel_jacobian(rho.row(0), tau);
    double max_err = 0.0;
    for (std::size_t k = 0; k < 5; ++k) {
      double col_sum = 0.0;
      for (std::size_t kp = 0; kp < 5; ++kp) col_sum += j(k, kp);
      EXPECT_NEAR(col_sum, 0.0, 1e-15);
    }
    for (std::size_t kp = 0; kp < 5; ++kp) {
      double sum_over_k = 0.0;
      for (std::size_t k = 0; k < 5; ++k) sum_over_k += j(k, kp);
      EXPECT_NEAR(sum_over_k, 0.0, 1e-15);
      for (std::size_t k = 0; k < 5; ++k) {
        const auto f = [&] { return gumbel_relax(a, tau, xi).rows(0, k); };
        const double fd = testing::central_difference(f, a(0, kp), 1e-6);
        max_err = std::max(max_err, testing::rel_error(j(k, kp), fd, 1e-3));
      }
    }
    EXPECT_LT(max_err, 1e-6) << "tau " << tau;
  }
}

TEST(Jacobian, BackwardIsTransposeProduct) {
  Rng rng(9);
  Matrix a(3, 4);
  for (double& v : a.flat()) v = std::normal_distribution<double>(0, 1)(rng);
  const auto p = gumbel_relax(a, 0.7, rng);
  Matrix g(3, 4);
  for (double& v : g.flat()) v = std::normal_distribution<double>(0, 1)(rng);
  const Matrix back = gumbel_backward(p, 0.7, g);
  for (std::size_t r = 0; r < 3; ++r) {
    const Matrix j = gumbel_jacobian(p.rows.row(r), 0.7);
    for (std::size_t kp = 0; kp < 4; ++kp) {
      double expect = 0.0;
      for (std::size_t k = 0; k < 4; ++k) expect += j(k, kp) * g(r, k);
      EXPECT_NEAR(back(r, kp), expect, 1e-14);
    }
  }
}

TEST(PcJson, RoundTrip) {
  const std::vector<int> pc = {239, 208, 278, 152, 237};
  EXPECT_EQ(pc_to_json(pc), "[239,208,278,152,237]");
  EXPECT_EQ(pc_from_json(pc_to_json(pc)), pc);
  EXPECT_THROW(pc_from_json("{\"a\":1}"), FormatError);
}

}  // namespace
}  // namespace pcs
