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

#ifndef PCS_KERNELS_HPP_
#define PCS_KERNELS_HPP_

#include <cstddef>
#include <string_view>

namespace pcs::kernels {

// Instruction set of a kernel table. Every table computes the same
// functions; elementwise kernels are bitwise identical across tables while
// reductions (dot) may differ by reassociation only.
enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa) noexcept;

struct KernelTable {
  Isa isa;

  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);

  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  // Momentum SGD with decoupled weight decay, applied in this order:
  //   w -= lr * wd * w;  v = momentum * v + g;  w -= lr * v
  void (*sgd_momentum)(double* w, double* v, const double* g, std::size_t n,
                       double lr, double momentum, double weight_decay);

  // x[i] = max(x[i], 0)
  void (*relu)(double* x, std::size_t n);

  // grad[i] = pre[i] > 0 ? grad[i] : 0
  void (*relu_backward)(double* grad, const double* pre, std::size_t n);
};

bool supported(Isa isa) noexcept;

// Table for a specific ISA. Throws std::invalid_argument if the CPU (or the
// build) lacks it.
const KernelTable& table(Isa isa);

// Best table for this CPU, chosen once. Setting PCS_KERNELS=scalar in the
// environment forces the reference kernels.
const KernelTable& active();

namespace scalar {
extern const KernelTable kTable;
}

#if defined(PCS_HAVE_AVX2)
namespace avx2 {
extern const KernelTable kTable;
}
#endif

}  // namespace pcs::kernels

#endif  // PCS_KERNELS_HPP_
