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

// This file is compiled with -mavx2 -mfma. Runtime CPU detection in
// dispatch.cpp ensures it is only called on CPUs with AVX2 and FMA.
//
// Elementwise kernels use separate mul/add (no FMA) so they round exactly
// like the scalar reference. Only Dot reassociates.

#include <immintrin.h>

#include "pcs/kernels.hpp"

namespace pcs::kernels::avx2 {
namespace {

double Dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                           acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                           acc0);
  }
  acc0 = _mm256_add_pd(acc0, acc1);
  __m128d lo = _mm256_castpd256_pd128(acc0);
  __m128d hi = _mm256_extractf128_pd(acc0, 1);
  lo = _mm_add_pd(lo, hi);
  lo = _mm_add_sd(lo, _mm_unpackhi_pd(lo, lo));
  double s = _mm_cvtsd_f64(lo);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void Axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void SgdMomentum(double* w, double* v, const double* g, std::size_t n,
                 double lr, double momentum, double weight_decay) {
  const double decay = lr * weight_decay;
  const __m256d vdecay = _mm256_set1_pd(decay);
  const __m256d vmom = _mm256_set1_pd(momentum);
  const __m256d vlr = _mm256_set1_pd(lr);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d wi = _mm256_loadu_pd(w + i);
    wi = _mm256_sub_pd(wi, _mm256_mul_pd(vdecay, wi));
    __m256d vi = _mm256_add_pd(_mm256_mul_pd(vmom, _mm256_loadu_pd(v + i)),
                               _mm256_loadu_pd(g + i));
    _mm256_storeu_pd(v + i, vi);
    _mm256_storeu_pd(w + i, _mm256_sub_pd(wi, _mm256_mul_pd(vlr, vi)));
  }
  for (; i < n; ++i) {
    double wi = w[i] - decay * w[i];
    const double vi = momentum * v[i] + g[i];
    v[i] = vi;
    w[i] = wi - lr * vi;
  }
}

void Relu(double* x, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d xi = _mm256_loadu_pd(x + i);
    __m256d mask = _mm256_cmp_pd(xi, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(x + i, _mm256_and_pd(xi, mask));
  }
  for (; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void ReluBackward(double* grad, const double* pre, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(pre + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(grad + i, _mm256_and_pd(_mm256_loadu_pd(grad + i), mask));
  }
  for (; i < n; ++i) grad[i] = pre[i] > 0.0 ? grad[i] : 0.0;
}

}  // namespace

const KernelTable kTable = {
    Isa::kAvx2, &Dot, &Axpy, &SgdMomentum, &Relu, &ReluBackward,
};

}  // namespace pcs::kernels::avx2
