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

#ifndef PCS_COMBSEARCH_HPP_
#define PCS_COMBSEARCH_HPP_

#include <span>
#include <string>
#include <vector>

#include "pcs/matrix.hpp"
#include "pcs/rng.hpp"

namespace pcs {

// Learnable selection logits A (M x K) and the knobs of its update.
struct SelectionParams {
  Matrix logits;              // one row per block, one column per candidate
  double learning_rate = 0.1; // eta
  double lambda = 50.0;       // weight of the ECE term
  double gumbel_tau = 1.0;

  void validate() const;
};

// All-zero logits: every candidate equally likely.
SelectionParams init_selection(int n_blocks, int k);

enum class PcMode { kDiscrete, kRelaxed };

// One row per block. Discrete rows are one-hot, relaxed rows lie on the
// probability simplex.
struct PcRepresentation {
  Matrix rows;
  PcMode mode = PcMode::kDiscrete;

  // Selected candidate per block (row argmax, first index on ties).
  std::vector<int> selected() const;
  // Throws std::invalid_argument if the rows violate the mode invariant.
  void validate() const;
};

PcRepresentation one_hot(std::span<const int> candidates, int k);

// Row-wise one-hot of argmax(A), first index on ties.
PcRepresentation harden(const Matrix& logits);

// Standard Gumbel noise -log(-log u), u ~ U(0,1), one entry per logit.
Matrix sample_gumbel(std::size_t rows, std::size_t cols, Rng& rng);

// softmax((A + xi) / tau) row-wise, with caller-supplied noise.
PcRepresentation gumbel_relax(const Matrix& logits, double tau,
                              const Matrix& noise);
// Same, with noise drawn from `rng`.
PcRepresentation gumbel_relax(const Matrix& logits, double tau, Rng& rng);

PcRepresentation to_discrete(const PcRepresentation& relaxed);

// Jacobian of one relaxed row with respect to its logits:
//   J[k][k'] = (1/tau) * rho_k * (1{k = k'} - rho_k').
Matrix gumbel_jacobian(std::span<const double> relaxed_row, double tau);

// Pulls a gradient on the relaxed rows back to the logits (J^T g per row).
Matrix gumbel_backward(const PcRepresentation& relaxed, double tau,
                       const Matrix& grad_relaxed);

// A' = A - eta * grad. Throws NonFiniteGradient on a non-finite entry.
Matrix update_selection(const Matrix& logits, const Matrix& grad, double eta);

// JSON array of the selected candidate index per block.
std::string pc_to_json(std::span<const int> candidates);
std::vector<int> pc_from_json(const std::string& json);

}  // namespace pcs

#endif  // PCS_COMBSEARCH_HPP_
