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

// Reference kernels. These define the semantics every SIMD table must match.

#include "pcs/kernels.hpp"

namespace pcs::kernels::scalar {
namespace {

double Dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void Axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void SgdMomentum(double* w, double* v, const double* g, std::size_t n,
                 double lr, double momentum, double weight_decay) {
  const double decay = lr * weight_decay;
  for (std::size_t i = 0; i < n; ++i) {
    double wi = w[i] - decay * w[i];
    const double vi = momentum * v[i] + g[i];
    v[i] = vi;
    w[i] = wi - lr * vi;
  }
}

void Relu(double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void ReluBackward(double* grad, const double* pre, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) grad[i] = pre[i] > 0.0 ? grad[i] : 0.0;
}

}  // namespace

const KernelTable kTable = {
    Isa::kScalar, &Dot, &Axpy, &SgdMomentum, &Relu, &ReluBackward,
};

}  // namespace pcs::kernels::scalar
