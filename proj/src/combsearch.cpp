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

#include <cmath>
#include <stdexcept>

#include "json.hpp"

#include "pcs/calmetrics.hpp"
#include "pcs/errors.hpp"

namespace pcs {

void SelectionParams::validate() const {
  for (double v : logits.flat()) {
    if (!std::isfinite(v)) throw std::invalid_argument("selection logits not finite");
  }
  if (!(gumbel_tau > 0.0)) throw std::invalid_argument("gumbel tau must be > 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("eta must be > 0");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
}

SelectionParams init_selection(int n_blocks, int k) {
  SelectionParams p;
  p.logits = Matrix(static_cast<std::size_t>(n_blocks), static_cast<std::size_t>(k));
  return p;
}

std::vector<int> PcRepresentation::selected() const {
  std::vector<int> out(rows.rows());
  for (std::size_t r = 0; r < rows.rows(); ++r) out[r] = argmax(rows.row(r));
  return out;
}

void PcRepresentation::validate() const {
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    double sum = 0.0;
    int ones = 0;
    for (double v : rows.row(r)) {
      if (!(v >= 0.0)) throw std::invalid_argument("PC row has a negative entry");
      sum += v;
      if (v == 1.0) ++ones;
      else if (mode == PcMode::kDiscrete && v != 0.0) {
        throw std::invalid_argument("discrete PC row is not one-hot");
      }
    }
    if (mode == PcMode::kDiscrete && ones != 1) {
      throw std::invalid_argument("discrete PC row is not one-hot");
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw std::invalid_argument("PC row does not sum to 1");
    }
  }
}

PcRepresentation one_hot(std::span<const int> candidates, int k) {
  PcRepresentation pc{Matrix(candidates.size(), static_cast<std::size_t>(k)),
                      PcMode::kDiscrete};
  for (std::size_t r = 0; r < candidates.size(); ++r) {
    if (candidates[r] < 0 || candidates[r] >= k) {
      throw std::invalid_argument("candidate index out of range");
    }
    pc.rows(r, static_cast<std::size_t>(candidates[r])) = 1.0;
  }
  return pc;
}

PcRepresentation harden(const Matrix& logits) {
  std::vector<int> sel(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) sel[r] = argmax(logits.row(r));
  return one_hot(sel, static_cast<int>(logits.cols()));
}

Matrix sample_gumbel(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix xi(rows, cols);
  for (double& v : xi.flat()) v = -std::log(-std::log(uniform_open01(rng)));
  return xi;
}

PcRepresentation gumbel_relax(const Matrix& logits, double tau,
                              const Matrix& noise) {
  if (!(tau > 0.0)) throw std::invalid_argument("gumbel tau must be > 0");
  if (noise.rows() != logits.rows() || noise.cols() != logits.cols()) {
    throw DimensionMismatch("gumbel noise shape mismatch");
  }
  Matrix shifted = logits;
  for (std::size_t i = 0; i < shifted.size(); ++i) {
    shifted.data()[i] += noise.data()[i];
  }
  return {softmax_rows(shifted, tau), PcMode::kRelaxed};
}

PcRepresentation gumbel_relax(const Matrix& logits, double tau, Rng& rng) {
  return gumbel_relax(logits, tau, sample_gumbel(logits.rows(), logits.cols(), rng));
}

PcRepresentation to_discrete(const PcRepresentation& relaxed) {
  return one_hot(relaxed.selected(), static_cast<int>(relaxed.rows.cols()));
}

Matrix gumbel_jacobian(std::span<const double> rho, double tau) {
  const std::size_t k = rho.size();
  Matrix j(k, k);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      j(a, b) = rho[a] * ((a == b ? 1.0 : 0.0) - rho[b]) / tau;
    }
  }
  return j;
}

Matrix gumbel_backward(const PcRepresentation& relaxed, double tau,
                       const Matrix& grad_relaxed) {
  const Matrix& rho = relaxed.rows;
  if (grad_relaxed.rows() != rho.rows() || grad_relaxed.cols() != rho.cols()) {
    throw DimensionMismatch("gumbel_backward: gradient shape mismatch");
  }
  Matrix out(rho.rows(), rho.cols());
  for (std::size_t r = 0; r < rho.rows(); ++r) {
    double inner = 0.0;
    for (std::size_t c = 0; c < rho.cols(); ++c) inner += grad_relaxed(r, c) * rho(r, c);
    for (std::size_t c = 0; c < rho.cols(); ++c) {
      out(r, c) = rho(r, c) * (grad_relaxed(r, c) - inner) / tau;
    }
  }
  return out;
}

Matrix update_selection(const Matrix& logits, const Matrix& grad, double eta) {
  if (grad.rows() != logits.rows() || grad.cols() != logits.cols()) {
    throw DimensionMismatch("update_selection: shape mismatch");
  }
  Matrix out = logits;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double g = grad.data()[i];
    if (!std::isfinite(g)) throw NonFiniteGradient("selection gradient not finite");
    out.data()[i] -= eta * g;
  }
  return out;
}

std::string pc_to_json(std::span<const int> candidates) {
  return nlohmann::json(std::vector<int>(candidates.begin(), candidates.end())).dump();
}

std::vector<int> pc_from_json(const std::string& json) {
  const auto j = nlohmann::json::parse(json);
  if (!j.is_array()) throw FormatError("predecessor combination must be a JSON array");
  return j.get<std::vector<int>>();
}

}  // namespace pcs
