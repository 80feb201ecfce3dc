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

#include "pcs/surrogate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pcs/errors.hpp"
#include "testing.hpp"

namespace pcs {
namespace {

Matrix RandomInput(int m, int k, std::mt19937_64& rng) {
  Matrix x(m, k);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int r = 0; r < m; ++r) {
    double s = 0.0;
    for (int c = 0; c < k; ++c) s += x(r, c) = u(rng);
    for (int c = 0; c < k; ++c) x(r, c) /= s;
  }
  return x;
}

double Sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

TEST(Estimator, InitLayoutAndForgetBias) {
  const auto psi = init_estimator(5, 4, 1);
  EXPECT_EQ(psi.w.rows(), 16u);
  EXPECT_EQ(psi.w.cols(), 9u);
  EXPECT_EQ(psi.n_params(), 16u * 9u + 16u + 2u * 4u + 2u);
  for (int i = 0; i < 16; ++i) EXPECT_EQ(psi.b[i], (i >= 4 && i < 8) ? 1.0 : 0.0);
  const double bound = 0.5;
  for (double v : psi.w.flat()) EXPECT_LE(std::abs(v), bound);
  EXPECT_EQ(psi, init_estimator(5, 4, 1));
  EXPECT_NE(psi, init_estimator(5, 4, 2));
}

TEST(Estimator, ZeroHeadPredictsZero) {
  auto psi = init_estimator(3, 4, 7);
  std::fill(psi.head_w.flat().begin(), psi.head_w.flat().end(), 0.0);
  std::fill(psi.head_b.begin(), psi.head_b.end(), 0.0);
  std::mt19937_64 rng(1);
  EXPECT_EQ(predict(psi, RandomInput(4, 3, rng)), (std::vector<double>{0.0, 0.0}));
}

TEST(Estimator, SingleStepMatchesHandComputation) {
  // k = 1, d = 1, M = 1: every gate sees w_x * x + b.
  SurrogateEstimator psi = init_estimator(1, 1, 3, 1);
  psi.w = Matrix(4, 2);
  const double wx[4] = {0.5, -0.3, 0.8, 0.2};
  for (int g = 0; g < 4; ++g) psi.w(g, 0) = wx[g];
  psi.b = {0.1, 1.0, -0.2, 0.0};
  psi.head_w(0, 0) = 2.0;
  psi.head_b[0] = 0.25;
  Matrix x(1, 1);
  x(0, 0) = 1.0;
  const double i = Sigmoid(0.6), g = std::tanh(0.6), o = Sigmoid(0.2);
  const double c = i * g;  // c_0 = 0
  const double h = o * std::tanh(c);
  EXPECT_NEAR(predict(psi, x)[0], 2.0 * h + 0.25, 1e-15);
}

TEST(Estimator, FlattenRoundTrip) {
  auto psi = init_estimator(4, 3, 2);
  auto p = psi.flatten();
  for (double& v : p) v *= -2.0;
  SurrogateEstimator q = psi;
  q.unflatten(p);
  EXPECT_EQ(q.flatten(), p);
  std::vector<double> short_params(p.size() - 1);
  EXPECT_THROW(q.unflatten(short_params), DimensionMismatch);
}

TEST(Estimator, InputGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  const auto psi = init_estimator(5, 4, 5);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix x = RandomInput(3, 5, rng);
    const double lambda = 0.5 * trial;
    const Matrix g = input_gradient(psi, x, lambda);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto f = [&] {
        const auto out = predict(psi, x);
        return out[0] + lambda * out[1];
      };
      const double fd = testing::central_difference(f, x.data()[i], 1e-6);
      worst = std::max(worst, testing::rel_error(g.data()[i], fd, 1e-4));
    }
    EXPECT_LT(worst, 1e-6);
  }
}

TEST(Estimator, ParameterGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  auto psi = init_estimator(5, 4, 6);
  const Matrix x = RandomInput(3, 5, rng);
  const std::vector<double> weights = {1.0, 0.3};
  const auto grad = backprop(psi, x, weights);
  auto params = psi.flatten();
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto f = [&] {
      SurrogateEstimator q = psi;
      q.unflatten(params);
      const auto out = predict(q, x);
      return out[0] + 0.3 * out[1];
    };
    const double fd = testing::central_difference(f, params[i], 1e-6);
    worst = std::max(worst, testing::rel_error(grad.params[i], fd, 1e-4));
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(Estimator, InputGradientIsLinearInLambda) {
  std::mt19937_64 rng(13);
  const auto psi = init_estimator(4, 3, 8);
  const Matrix x = RandomInput(5, 4, rng);
  const Matrix g0 = input_gradient(psi, x, 0.0);
  const Matrix g1 = input_gradient(psi, x, 1.0);
  const Matrix g3 = input_gradient(psi, x, 3.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(g3.data()[i], g0.data()[i] + 3.0 * (g1.data()[i] - g0.data()[i]), 1e-12);
  }
  auto one = init_estimator(4, 3, 8, 1);
  EXPECT_EQ(input_gradient(one, x, 0.0), input_gradient(one, x, 5.0));
}

TEST(Estimator, TrainingRecoversPlantedFunction) {
  // Target: fraction of mass on candidate 0 in the last block.
  std::mt19937_64 rng(14);
  std::vector<TrainingSample> samples;
  for (int i = 0; i < 64; ++i) {
    Matrix x = RandomInput(3, 4, rng);
    samples.push_back({x, {x(2, 0)}});
  }
  auto psi = init_estimator(4, 8, 9, 1);
  const std::vector<double> w = {1.0};
  const auto trace = train_estimator(psi, samples, w, 3000, 0.5, 1);
  ASSERT_EQ(trace.size(), 3001u);
  EXPECT_LT(trace.back(), 0.1 * trace.front());
  EXPECT_LT(trace.back(), 2e-3);
  EXPECT_DOUBLE_EQ(trace.back(), estimator_loss(psi, samples, w));

  auto again = init_estimator(4, 8, 9, 1);
  train_estimator(again, samples, w, 3000, 0.5, 1);
  EXPECT_EQ(again, psi);
}

TEST(Estimator, MiniBatchTrainingIsSeeded) {
  std::mt19937_64 rng(15);
  std::vector<TrainingSample> samples;
  for (int i = 0; i < 20; ++i) samples.push_back({RandomInput(2, 3, rng), {0.1, 0.2}});
  const std::vector<double> w = {1.0, 1.0};
  auto a = init_estimator(3, 4, 1), b = a, c = a;
  train_estimator(a, samples, w, 10, 0.1, 5, 4);
  train_estimator(b, samples, w, 10, 0.1, 5, 4);
  train_estimator(c, samples, w, 10, 0.1, 6, 4);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Estimator, DivergenceIsReported) {
  std::mt19937_64 rng(16);
  std::vector<TrainingSample> samples = {{RandomInput(2, 3, rng), {1e200, 0.0}}};
  auto psi = init_estimator(3, 4, 1);
  const std::vector<double> w = {1.0, 1.0};
  EXPECT_THROW(train_estimator(psi, samples, w, 5, 1.0, 1), NumericOverflow);
}

TEST(Estimator, SaveLoadRoundsThroughF32) {
  testing::ScratchDir dir("psi");
  const auto psi = init_estimator(5, 4, 3);
  save_estimator(psi, dir.path() / "psi.bin");
  const auto loaded = load_estimator(dir.path() / "psi.bin");
  EXPECT_EQ(loaded.k, 5);
  EXPECT_EQ(loaded.hidden, 4);
  EXPECT_EQ(loaded.n_out, 2);
  const auto a = psi.flatten(), b = loaded.flatten();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(b[i], static_cast<double>(static_cast<float>(a[i])));
  }
  save_estimator(loaded, dir.path() / "again.bin");
  EXPECT_EQ(load_estimator(dir.path() / "again.bin"), loaded);
}

TEST(Memory, FifoEviction) {
  Memory mem(3);
  for (int i = 0; i < 5; ++i) mem.push({Matrix(1, 2), 0.1 * i, 0.01 * i, 1.0 * i});
  ASSERT_EQ(mem.size(), 3u);
  EXPECT_DOUBLE_EQ(mem[0].err, 0.2);
  EXPECT_DOUBLE_EQ(mem[2].err, 0.4);
  const auto s = training_samples(mem, SurrogateTarget::kErrEce);
  EXPECT_EQ(s[1].target, (std::vector<double>{0.1 * 3, 0.01 * 3}));
  EXPECT_EQ(training_samples(mem, SurrogateTarget::kNll)[2].target,
            (std::vector<double>{4.0}));
}

}  // namespace
}  // namespace pcs
