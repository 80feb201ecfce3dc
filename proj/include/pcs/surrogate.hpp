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

#ifndef PCS_SURROGATE_HPP_
#define PCS_SURROGATE_HPP_

#include <cstdint>
#include <deque>
#include <filesystem>
#include <span>
#include <vector>

#include "pcs/kernels.hpp"
#include "pcs/matrix.hpp"

namespace pcs {

// One-layer LSTM over the M rows of a relaxed combination followed by a
// linear head on the last hidden state.
//
// Gate rows of `w` are stacked [input; forget; cell; output], each `hidden`
// rows tall, and act on the concatenation [x_t; h_{t-1}].
struct SurrogateEstimator {
  int k = 0;       // input width (candidates per block)
  int hidden = 0;  // d
  int n_out = 2;   // (err, ece) for the calibration search, 1 for NLL

  Matrix w;                     // 4d x (k + d)
  std::vector<double> b;        // 4d
  Matrix head_w;                // n_out x d
  std::vector<double> head_b;   // n_out

  std::size_t n_params() const noexcept;
  // Parameters in the order w, b, head_w, head_b.
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> params);

  friend bool operator==(const SurrogateEstimator&,
                         const SurrogateEstimator&) = default;
};

// LSTM and head weights ~ U(-1/sqrt(d), 1/sqrt(d)); forget-gate bias 1,
// every other bias 0.
SurrogateEstimator init_estimator(int k, int hidden, std::uint64_t seed,
                                  int n_out = 2);

std::vector<double> predict(const SurrogateEstimator& psi, const Matrix& input,
                            const kernels::KernelTable& kt = kernels::active());

// Gradient of sum_j weights[j] * output_j.
struct EstimatorGradient {
  std::vector<double> params;  // same layout as flatten()
  Matrix input;                // M x k
};

EstimatorGradient backprop(const SurrogateEstimator& psi, const Matrix& input,
                           std::span<const double> output_weights,
                           const kernels::KernelTable& kt = kernels::active());

// d(out_0 + lambda * out_1)/d(input) for the (err, ece) head, or
// d(out_0)/d(input) for a one-output head.
Matrix input_gradient(const SurrogateEstimator& psi, const Matrix& input,
                      double lambda);

struct TrainingSample {
  Matrix input;
  std::vector<double> target;
};

// mean over samples of sum_j loss_weights[j] * (out_j - target_j)^2
double estimator_loss(const SurrogateEstimator& psi,
                      std::span<const TrainingSample> samples,
                      std::span<const double> loss_weights);

// Plain gradient descent on estimator_loss. batch_size 0 uses every sample
// each step; otherwise mini-batches are drawn in a seeded order. Returns the
// loss before every step followed by the final loss (steps + 1 values).
// Throws NumericOverflow if the loss becomes non-finite.
std::vector<double> train_estimator(SurrogateEstimator& psi,
                                    std::span<const TrainingSample> samples,
                                    std::span<const double> loss_weights,
                                    int steps, double lr, std::uint64_t seed,
                                    std::size_t batch_size = 0);

// Persisted as four shaped f32 blobs: w, b, head_w, head_b.
void save_estimator(const SurrogateEstimator& psi,
                    const std::filesystem::path& path);
SurrogateEstimator load_estimator(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

struct MemoryEntry {
  Matrix relaxed;  // M x K, exactly as sampled
  double err = 0.0;
  double ece = 0.0;
  double nll = 0.0;
};

// Bounded first-in-first-out store of evaluated combinations.
class Memory {
 public:
  explicit Memory(std::size_t capacity = 256);

  void push(MemoryEntry entry);
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const MemoryEntry& operator[](std::size_t i) const { return entries_[i]; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::size_t capacity_;
  std::deque<MemoryEntry> entries_;
};

enum class SurrogateTarget { kErrEce, kNll };

std::vector<TrainingSample> training_samples(const Memory& memory,
                                             SurrogateTarget target);

}  // namespace pcs

#endif  // PCS_SURROGATE_HPP_
