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

#include "pcs/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string_view>

#include "pcs/errors.hpp"
#include "pcs/io.hpp"
#include "pcs/rng.hpp"

namespace pcs {

namespace {

constexpr double kCenterRadius = 4.0;

double Frac(double x) { return x - std::floor(x); }

// Positive root of x^(d+1) = x + 1, the generator of the R_d sequence.
double RdGenerator(std::size_t dim) {
  double g = 2.0;
  for (int it = 0; it < 64; ++it) {
    g = std::pow(1.0 + g, 1.0 / static_cast<double>(dim + 1));
  }
  return g;
}

}  // namespace

void Dataset::validate() const {
  if (labels.empty()) throw std::invalid_argument("dataset is empty");
  if (n_classes < 1) throw std::invalid_argument("n_classes must be >= 1");
  if (features.rows() != labels.size()) {
    throw std::invalid_argument("feature rows do not match label count");
  }
  for (int y : labels) {
    if (y < 0 || y >= n_classes) {
      throw std::invalid_argument("label out of range: " + std::to_string(y));
    }
  }
  for (double v : features.flat()) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature");
  }
}

Dataset subset(const Dataset& d, std::span<const std::size_t> indices,
               std::string name) {
  Dataset out;
  out.features = Matrix(indices.size(), d.n_features());
  out.labels.resize(indices.size());
  out.n_classes = d.n_classes;
  out.name = std::move(name);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    auto src = d.features.row(indices[r]);
    std::copy(src.begin(), src.end(), out.features.row(r).begin());
    out.labels[r] = d.labels[indices[r]];
  }
  return out;
}

Matrix blob_centers(int k, std::size_t dim, std::uint64_t seed) {
  Matrix centers(static_cast<std::size_t>(k), dim);
  Rng rng = make_rng(seed, "blobs/centers");
  if (dim == 1) {
    // The 1-sphere has two points; spread centers along the diameter.
    for (int j = 0; j < k; ++j) {
      centers(j, 0) = kCenterRadius * (-1.0 + 2.0 * j / std::max(1, k - 1));
    }
    return centers;
  }
  if (dim == 2) {
    const double offset = uniform_open01(rng);
    const double step = std::numbers::phi - 1.0;
    for (int j = 0; j < k; ++j) {
      const double angle = 2.0 * std::numbers::pi * Frac(offset + j * step);
      centers(j, 0) = kCenterRadius * std::cos(angle);
      centers(j, 1) = kCenterRadius * std::sin(angle);
    }
    return centers;
  }
  const double g = RdGenerator(dim);
  std::vector<double> alpha(dim), offset(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    alpha[i] = 1.0 / std::pow(g, static_cast<double>(i + 1));
    offset[i] = uniform_open01(rng);
  }
  for (int j = 0; j < k; ++j) {
    double norm2 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double x = 2.0 * Frac(offset[i] + (j + 1) * alpha[i]) - 1.0;
      centers(j, i) = x;
      norm2 += x * x;
    }
    const double scale = kCenterRadius / std::sqrt(std::max(norm2, 1e-300));
    for (std::size_t i = 0; i < dim; ++i) centers(j, i) *= scale;
  }
  return centers;
}

Dataset gen_blobs(std::size_t n, int k, std::size_t dim, double label_noise,
                  std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("gen_blobs: k must be >= 2");
  if (n < static_cast<std::size_t>(k)) {
    throw std::invalid_argument("gen_blobs: n must be >= k");
  }
  if (dim < 1) throw std::invalid_argument("gen_blobs: dim must be >= 1");
  if (!(label_noise >= 0.0) || label_noise >= 1.0) {
    throw std::invalid_argument("gen_blobs: label_noise must be in [0, 1)");
  }

  const Matrix centers = blob_centers(k, dim, seed);
  Dataset d;
  d.features = Matrix(n, dim);
  d.labels.resize(n);
  d.n_classes = k;
  d.name = "blobs";

  Rng feature_rng = make_rng(seed, "blobs/features");
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t r = 0; r < n; ++r) {
    const int cluster = static_cast<int>(r % static_cast<std::size_t>(k));
    d.labels[r] = cluster;
    for (std::size_t c = 0; c < dim; ++c) {
      d.features(r, c) = centers(cluster, c) + normal(feature_rng);
    }
  }

  const auto n_flip =
      static_cast<std::size_t>(std::floor(label_noise * static_cast<double>(n)));
  if (n_flip > 0) {
    Rng noise_rng = make_rng(seed, "blobs/label-noise");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), noise_rng);
    std::uniform_int_distribution<int> shift(1, k - 1);
    for (std::size_t i = 0; i < n_flip; ++i) {
      int& y = d.labels[order[i]];
      y = (y + shift(noise_rng)) % k;
    }
  }
  return d;
}

std::array<std::vector<std::size_t>, 3> split_indices(std::size_t n,
                                                      const SplitSpec& spec) {
  const double fr[3] = {spec.train_fraction, spec.val_fraction,
                        spec.test_fraction};
  for (double f : fr) {
    if (!(f > 0.0 && f < 1.0)) {
      throw std::invalid_argument("split: each fraction must be in (0, 1)");
    }
  }
  if (std::abs(fr[0] + fr[1] + fr[2] - 1.0) > 1e-12) {
    throw std::invalid_argument("split: fractions must sum to 1");
  }
  // The epsilon absorbs representation error such as 0.15 * 2000.
  const auto floor_of = [n](double f) {
    return static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9));
  };
  const std::size_t n_val = floor_of(spec.val_fraction);
  const std::size_t n_test = floor_of(spec.test_fraction);
  if (n_val == 0 || n_test == 0 || n_val + n_test >= n) {
    throw std::invalid_argument("split: a split would be empty");
  }
  const std::size_t n_train = n - n_val - n_test;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(spec.seed, "split");
  std::shuffle(order.begin(), order.end(), rng);

  std::array<std::vector<std::size_t>, 3> out;
  out[0].assign(order.begin(), order.begin() + n_train);
  out[1].assign(order.begin() + n_train, order.begin() + n_train + n_val);
  out[2].assign(order.begin() + n_train + n_val, order.end());
  return out;
}

std::array<Dataset, 3> split(const Dataset& d, const SplitSpec& spec) {
  auto idx = split_indices(d.size(), spec);
  return {subset(d, idx[0], d.name + "/train"),
          subset(d, idx[1], d.name + "/val"),
          subset(d, idx[2], d.name + "/test")};
}

Dataset corrupt_gaussian(const Dataset& d, int severity, std::uint64_t seed) {
  if (severity < 1 || severity > 5) {
    throw std::invalid_argument("corrupt_gaussian: severity must be in 1..5");
  }
  const double sigma = 0.2 * severity;
  Dataset out = d;
  out.name = d.name + "/gaussian" + std::to_string(severity);
  Rng rng = make_rng(seed, "corrupt/gaussian");
  std::normal_distribution<double> normal(0.0, sigma);
  for (double& v : out.features.flat()) v += normal(rng);
  return out;
}

namespace {

std::vector<std::string_view> SplitFields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path.string());

  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError(path.string() + ": missing header", 1);
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = SplitFields(line);
  if (header.size() < 2 || header.back() != "label") {
    throw ParseError(path.string() + ": header must be f0,...,label", 1);
  }
  const std::size_t dim = header.size() - 1;
  for (std::size_t i = 0; i < dim; ++i) {
    if (header[i] != "f" + std::to_string(i)) {
      throw ParseError(path.string() + ": bad header column " +
                           std::string(header[i]),
                       1);
    }
  }

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = SplitFields(line);
    const auto fail = [&](const std::string& why) {
      return ParseError(
          path.string() + ": row " + std::to_string(row) + ": " + why, row);
    };
    if (fields.size() != dim + 1) throw fail("wrong number of fields");
    for (std::size_t i = 0; i < dim; ++i) {
      double v = 0.0;
      const char* b = fields[i].data();
      const char* e = b + fields[i].size();
      auto [p, ec] = std::from_chars(b, e, v);
      if (ec != std::errc() || p != e) {
        throw fail("bad feature '" + std::string(fields[i]) + "'");
      }
      if (!std::isfinite(v)) {
        throw std::invalid_argument(path.string() + ": row " +
                                    std::to_string(row) +
                                    ": non-finite feature");
      }
      values.push_back(v);
    }
    int y = -1;
    const char* b = fields[dim].data();
    const char* e = b + fields[dim].size();
    auto [p, ec] = std::from_chars(b, e, y);
    if (ec != std::errc() || p != e || y < 0) {
      throw fail("bad label '" + std::string(fields[dim]) + "'");
    }
    labels.push_back(y);
  }
  if (labels.empty()) throw ParseError(path.string() + ": no rows", row);

  Dataset d;
  d.features = Matrix(labels.size(), dim, std::move(values));
  d.n_classes = *std::max_element(labels.begin(), labels.end()) + 1;
  d.labels = std::move(labels);
  d.name = path.stem().string();
  return d;
}

void save_csv(const Dataset& d, const std::filesystem::path& path) {
  std::ostringstream out;
  for (std::size_t i = 0; i < d.n_features(); ++i) out << 'f' << i << ',';
  out << "label\n";
  for (std::size_t r = 0; r < d.size(); ++r) {
    for (double v : d.features.row(r)) out << format_double(v) << ',';
    out << d.labels[r] << '\n';
  }
  write_file_atomic(path, out.str());
}

}  // namespace pcs
