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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "pcs/io.hpp"

namespace pcs {

void PredictionSet::validate() const {
  if (labels.empty()) throw std::invalid_argument("prediction set is empty");
  if (probs.rows() != labels.size()) {
    throw std::invalid_argument("probs rows do not match label count");
  }
  const auto k = static_cast<int>(probs.cols());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    if (labels[r] < 0 || labels[r] >= k) {
      throw std::invalid_argument("label out of range");
    }
    double s = 0.0;
    for (double v : probs.row(r)) s += v;
    if (std::abs(s - 1.0) > 1e-9) {
      throw std::invalid_argument("probability row does not sum to 1");
    }
  }
}

Matrix softmax_rows(const Matrix& logits, double temperature) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto o = out.row(r);
    double m = -INFINITY;
    for (double z : in) m = std::max(m, z / temperature);
    double s = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] / temperature - m);
      s += o[c];
    }
    for (double& v : o) v /= s;
  }
  return out;
}

int argmax(std::span<const double> row) noexcept {
  int best = 0;
  for (std::size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) best = static_cast<int>(i);
  }
  return best;
}

std::size_t BinTable::total() const noexcept {
  std::size_t n = 0;
  for (const auto& b : bins) n += b.count;
  return n;
}

double BinTable::weighted_gap() const noexcept {
  const double n = static_cast<double>(total());
  double s = 0.0;
  for (const auto& b : bins) {
    if (b.count == 0) continue;
    s += (static_cast<double>(b.count) / n) * std::abs(b.accuracy - b.confidence);
  }
  return s;
}

double BinTable::max_gap() const noexcept {
  double m = 0.0;
  for (const auto& b : bins) {
    if (b.count > 0) m = std::max(m, std::abs(b.accuracy - b.confidence));
  }
  return m;
}

std::string BinTable::to_csv() const {
  std::ostringstream out;
  out << "bin_lo,bin_hi,count,accuracy,confidence\n";
  for (const auto& b : bins) {
    out << format_double(b.lo) << ',' << format_double(b.hi) << ',' << b.count
        << ',' << format_double(b.accuracy) << ','
        << format_double(b.confidence) << '\n';
  }
  return out.str();
}

int bin_index(double confidence, int n_bins) noexcept {
  if (!(confidence > 0.0)) return 0;
  auto i = static_cast<int>(std::ceil(confidence * n_bins));
  // Repair rounding in confidence * n_bins against the exact edges i / B.
  if (i > 1 && confidence <= static_cast<double>(i - 1) / n_bins) --i;
  if (i < n_bins && confidence > static_cast<double>(i) / n_bins) ++i;
  return std::clamp(i, 1, n_bins) - 1;
}

namespace {

void CheckBins(int n_bins) {
  if (n_bins < 1) throw std::invalid_argument("n_bins must be >= 1");
}

// Equal-width table over arbitrary (score, hit) pairs.
BinTable EqualWidthTable(std::span<const double> scores,
                         const std::vector<char>& hits, int n_bins) {
  BinTable t;
  t.bins.resize(static_cast<std::size_t>(n_bins));
  std::vector<double> hit_sum(t.bins.size(), 0.0), conf_sum(t.bins.size(), 0.0);
  for (std::size_t s = 0; s < scores.size(); ++s) {
    const auto b = static_cast<std::size_t>(bin_index(scores[s], n_bins));
    ++t.bins[b].count;
    hit_sum[b] += hits[s] ? 1.0 : 0.0;
    conf_sum[b] += scores[s];
  }
  for (std::size_t b = 0; b < t.bins.size(); ++b) {
    auto& bin = t.bins[b];
    bin.lo = static_cast<double>(b) / n_bins;
    bin.hi = static_cast<double>(b + 1) / n_bins;
    if (bin.count > 0) {
      bin.accuracy = hit_sum[b] / static_cast<double>(bin.count);
      bin.confidence = conf_sum[b] / static_cast<double>(bin.count);
    }
  }
  return t;
}

std::vector<char> Correctness(const PredictionSet& p) {
  std::vector<char> hits(p.size());
  for (std::size_t r = 0; r < p.size(); ++r) {
    hits[r] = argmax(p.probs.row(r)) == p.labels[r];
  }
  return hits;
}

}  // namespace

std::vector<double> confidences(const Matrix& probs) {
  std::vector<double> out(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    auto row = probs.row(r);
    out[r] = row[static_cast<std::size_t>(argmax(row))];
  }
  return out;
}

BinTable reliability_table(const PredictionSet& p, int n_bins) {
  CheckBins(n_bins);
  const auto conf = confidences(p.probs);
  return EqualWidthTable(conf, Correctness(p), n_bins);
}

double ece(const PredictionSet& p, int n_bins) {
  return reliability_table(p, n_bins).weighted_gap();
}

double mce(const PredictionSet& p, int n_bins) {
  return reliability_table(p, n_bins).max_gap();
}

std::vector<std::size_t> adaptive_bin_sizes(std::size_t n, int n_bins) {
  const auto b = static_cast<std::size_t>(n_bins);
  std::vector<std::size_t> sizes(b, n / b);
  for (std::size_t i = 0; i < n % b; ++i) ++sizes[i];
  return sizes;
}

double adaptive_ece(const PredictionSet& p, int n_bins) {
  CheckBins(n_bins);
  const std::size_t n = p.size();
  if (n < static_cast<std::size_t>(n_bins)) {
    throw std::invalid_argument("adaptive_ece: fewer samples than bins");
  }
  const auto conf = confidences(p.probs);
  const auto hits = Correctness(p);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return conf[a] < conf[b];
  });
  double total = 0.0;
  std::size_t pos = 0;
  for (std::size_t size : adaptive_bin_sizes(n, n_bins)) {
    double hit_sum = 0.0, conf_sum = 0.0;
    for (std::size_t j = pos; j < pos + size; ++j) {
      hit_sum += hits[order[j]] ? 1.0 : 0.0;
      conf_sum += conf[order[j]];
    }
    const double count = static_cast<double>(size);
    total += (count / static_cast<double>(n)) *
             std::abs(hit_sum / count - conf_sum / count);
    pos += size;
  }
  return total;
}

double classwise_ece(const PredictionSet& p, int n_bins) {
  CheckBins(n_bins);
  const std::size_t k = p.probs.cols();
  std::vector<double> scores(p.size());
  std::vector<char> hits(p.size());
  double total = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t r = 0; r < p.size(); ++r) {
      scores[r] = p.probs(r, j);
      hits[r] = p.labels[r] == static_cast<int>(j);
    }
    total += EqualWidthTable(scores, hits, n_bins).weighted_gap();
  }
  return total / static_cast<double>(k);
}

double nll(const PredictionSet& p) {
  double s = 0.0;
  for (std::size_t r = 0; r < p.size(); ++r) {
    s -= std::log(std::max(p.probs(r, static_cast<std::size_t>(p.labels[r])), 1e-12));
  }
  return s / static_cast<double>(p.size());
}

double error(const PredictionSet& p) {
  std::size_t wrong = 0;
  for (std::size_t r = 0; r < p.size(); ++r) {
    if (argmax(p.probs.row(r)) != p.labels[r]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(p.size());
}

std::vector<double> default_temperature_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 100; ++i) grid.push_back(i / 10.0);
  return grid;
}

Matrix apply_temperature(const Matrix& logits, double temperature) {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("temperature must be > 0");
  }
  return softmax_rows(logits, temperature);
}

double temperature_search(const Matrix& logits_val,
                          std::span<const int> labels_val,
                          std::span<const double> grid, int n_bins) {
  if (grid.empty()) throw std::invalid_argument("empty temperature grid");
  double best_t = 0.0;
  double best_ece = INFINITY;
  for (double t : grid) {
    PredictionSet ps{apply_temperature(logits_val, t),
                     {labels_val.begin(), labels_val.end()}};
    const double e = ece(ps, n_bins);
    bool take = e < best_ece;
    if (e == best_ece) {
      const double d_new = std::abs(t - 1.0), d_old = std::abs(best_t - 1.0);
      take = d_new < d_old || (d_new == d_old && t < best_t);
    }
    if (take) {
      best_ece = e;
      best_t = t;
    }
  }
  return best_t;
}

double auroc(std::span<const double> scores_in,
             std::span<const double> scores_out) {
  if (scores_in.empty() || scores_out.empty()) {
    throw std::invalid_argument("auroc: both score sets must be non-empty");
  }
  std::vector<double> out(scores_out.begin(), scores_out.end());
  std::sort(out.begin(), out.end());
  // Twice the U statistic, kept integral so that auroc(A,B) + auroc(B,A)
  // is exactly one.
  std::uint64_t twice_u = 0;
  for (double s : scores_in) {
    const auto lo = std::lower_bound(out.begin(), out.end(), s);
    const auto hi = std::upper_bound(lo, out.end(), s);
    twice_u += 2 * static_cast<std::uint64_t>(lo - out.begin()) +
               static_cast<std::uint64_t>(hi - lo);
  }
  const std::uint64_t twice_total =
      2 * static_cast<std::uint64_t>(scores_in.size()) * scores_out.size();
  if (2 * twice_u <= twice_total) {
    return static_cast<double>(twice_u) / static_cast<double>(twice_total);
  }
  return 1.0 - static_cast<double>(twice_total - twice_u) /
                   static_cast<double>(twice_total);
}

}  // namespace pcs
