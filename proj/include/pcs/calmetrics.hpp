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

#ifndef PCS_CALMETRICS_HPP_
#define PCS_CALMETRICS_HPP_

#include <span>
#include <string>
#include <vector>

#include "pcs/matrix.hpp"

namespace pcs {

inline constexpr int kDefaultBins = 15;

// Class probabilities (rows sum to one) and the true labels.
struct PredictionSet {
  Matrix probs;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }

  // Throws std::invalid_argument on empty input, shape mismatch, labels out
  // of range or rows that do not sum to one within 1e-9.
  void validate() const;
};

// Row-wise softmax of `logits / temperature`.
Matrix softmax_rows(const Matrix& logits, double temperature = 1.0);

// Index of the row maximum, first index on ties.
int argmax(std::span<const double> row) noexcept;

struct Bin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double accuracy = 0.0;    // 0 for empty bins
  double confidence = 0.0;  // 0 for empty bins
};

struct BinTable {
  std::vector<Bin> bins;

  std::size_t total() const noexcept;
  // Sum over bins of |B|/N * |I - C|.
  double weighted_gap() const noexcept;
  // max over non-empty bins of |I - C|; 0 if all bins are empty.
  double max_gap() const noexcept;
  // `bin_lo,bin_hi,count,accuracy,confidence` with a header row.
  std::string to_csv() const;
};

// Bin of confidence c among `n_bins` equal-width bins ((i-1)/B, i/B],
// zero-based. c <= 0 falls in the first bin.
int bin_index(double confidence, int n_bins) noexcept;

BinTable reliability_table(const PredictionSet& p, int n_bins = kDefaultBins);

double ece(const PredictionSet& p, int n_bins = kDefaultBins);
double mce(const PredictionSet& p, int n_bins = kDefaultBins);
// Equal-count bins over samples sorted by (confidence, index); the first
// n mod B bins hold one extra sample.
double adaptive_ece(const PredictionSet& p, int n_bins = kDefaultBins);
// Sizes of the adaptive bins for n samples.
std::vector<std::size_t> adaptive_bin_sizes(std::size_t n, int n_bins);
double classwise_ece(const PredictionSet& p, int n_bins = kDefaultBins);
// Mean of -log(max(p_true, 1e-12)).
double nll(const PredictionSet& p);
// Fraction of rows whose argmax differs from the label.
double error(const PredictionSet& p);

// Max-probability confidences, one per row.
std::vector<double> confidences(const Matrix& probs);

// Grid 0.1, 0.2, ..., 10.0.
std::vector<double> default_temperature_grid();

Matrix apply_temperature(const Matrix& logits, double temperature);

// Grid temperature minimizing validation ECE; ties go to the value closest
// to 1.0, then to the smaller value.
double temperature_search(const Matrix& logits_val,
                          std::span<const int> labels_val,
                          std::span<const double> grid,
                          int n_bins = kDefaultBins);

// Mann-Whitney AUROC with in-distribution as the positive class and 0.5
// credit for ties.
double auroc(std::span<const double> scores_in,
             std::span<const double> scores_out);

}  // namespace pcs

#endif  // PCS_CALMETRICS_HPP_
