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

#ifndef PCS_DATA_HPP_
#define PCS_DATA_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pcs/matrix.hpp"

namespace pcs {

struct Dataset {
  Matrix features;          // n_samples x n_features
  std::vector<int> labels;  // each in [0, n_classes)
  int n_classes = 0;
  std::string name;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t n_features() const noexcept { return features.cols(); }

  // Throws std::invalid_argument if any invariant is violated.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Rows of `d` at `indices`, in that order.
Dataset subset(const Dataset& d, std::span<const std::size_t> indices,
               std::string name);

struct SplitSpec {
  double train_fraction = 0.7;
  double val_fraction = 0.15;
  double test_fraction = 0.15;
  std::uint64_t seed = 1;
};

// Gaussian blobs: `k` unit-variance clusters on a radius-4 sphere, with
// exactly floor(label_noise * n) labels moved to a different class.
Dataset gen_blobs(std::size_t n, int k, std::size_t dim, double label_noise,
                  std::uint64_t seed);

// Cluster centers used by gen_blobs (k x dim, every row of norm 4).
Matrix blob_centers(int k, std::size_t dim, std::uint64_t seed);

// Index sets (train, val, test) into a dataset of size n. Val and test get
// floor(n * fraction); train takes the remainder.
std::array<std::vector<std::size_t>, 3> split_indices(std::size_t n,
                                                      const SplitSpec& spec);

std::array<Dataset, 3> split(const Dataset& d, const SplitSpec& spec);

// Adds N(0, (0.2 * severity)^2) noise to every feature.
Dataset corrupt_gaussian(const Dataset& d, int severity, std::uint64_t seed);

// CSV with header `f0,...,f{d-1},label`.
Dataset load_csv(const std::filesystem::path& path);
void save_csv(const Dataset& d, const std::filesystem::path& path);

}  // namespace pcs

#endif  // PCS_DATA_HPP_
