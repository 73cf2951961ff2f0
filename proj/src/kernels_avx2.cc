// Copyright 2026 The MyoCtl Authors.
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

// Built with -mavx2 -mfma. Nothing in this file may run before the dispatcher
// has confirmed CPU support.

#include "myoctl/kernels.h"

#if defined(MYOCTL_HAVE_AVX2_TU)

#include <immintrin.h>

#include <cmath>
#include <cstddef>

namespace myoctl::kernels::internal {
namespace {

inline double HorizontalSum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  const __m128d swapped = _mm_unpackhi_pd(pair, pair);
  return _mm_cvtsd_f64(_mm_add_sd(pair, swapped));
}

double DotAvx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 =
        _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  if (i + 4 <= n) {
    acc0 =
        _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    i += 4;
  }
  double acc = HorizontalSum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void AffineAvx2(const double* w, const double* bias, const double* x,
                std::size_t rows, std::size_t cols, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    y[r] = bias[r] + DotAvx2(w + r * cols, x, cols);
  }
}

// y += s * x over n entries.
inline void Axpy(double s, const double* x, std::size_t n, double* y) {
  const __m256d sv = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(sv, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += s * x[i];
}

void AffineTransposeAvx2(const double* w, const double* d, std::size_t rows,
                         std::size_t cols, double* y) {
  for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) Axpy(d[r], w + r * cols, cols, y);
}

void AddOuterAvx2(const double* d, const double* x, std::size_t rows,
                  std::size_t cols, double* w) {
  for (std::size_t r = 0; r < rows; ++r) Axpy(d[r], x, cols, w + r * cols);
}

void AdamAvx2(const AdamStepParams& p, const double* grad, double* param,
              double* m, double* v, std::size_t n) {
  const __m256d b1 = _mm256_set1_pd(p.beta1);
  const __m256d one_minus_b1 = _mm256_set1_pd(1.0 - p.beta1);
  const __m256d b2 = _mm256_set1_pd(p.beta2);
  const __m256d one_minus_b2 = _mm256_set1_pd(1.0 - p.beta2);
  const __m256d inv_bc1 = _mm256_set1_pd(1.0 / p.bias_correction1);
  const __m256d inv_bc2 = _mm256_set1_pd(1.0 / p.bias_correction2);
  const __m256d lr = _mm256_set1_pd(p.learning_rate);
  const __m256d eps = _mm256_set1_pd(p.epsilon);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    __m256d mi = _mm256_loadu_pd(m + i);
    __m256d vi = _mm256_loadu_pd(v + i);
    mi = _mm256_fmadd_pd(b1, mi, _mm256_mul_pd(one_minus_b1, g));
    vi = _mm256_fmadd_pd(b2, vi,
                         _mm256_mul_pd(one_minus_b2, _mm256_mul_pd(g, g)));
    const __m256d m_hat = _mm256_mul_pd(mi, inv_bc1);
    const __m256d v_hat = _mm256_mul_pd(vi, inv_bc2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, m_hat), denom);
    _mm256_storeu_pd(param + i,
                     _mm256_sub_pd(_mm256_loadu_pd(param + i), step));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
  }
  for (; i < n; ++i) {
    m[i] = p.beta1 * m[i] + (1.0 - p.beta1) * grad[i];
    v[i] = p.beta2 * v[i] + (1.0 - p.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / p.bias_correction1;
    const double v_hat = v[i] / p.bias_correction2;
    param[i] -= p.learning_rate * m_hat / (std::sqrt(v_hat) + p.epsilon);
  }
}

}  // namespace

const KernelTable* Avx2Table() {
  static const KernelTable table{DotAvx2, AffineAvx2, AffineTransposeAvx2,
                                 AddOuterAvx2, AdamAvx2};
  return &table;
}

}  // namespace myoctl::kernels::internal

#else

namespace myoctl::kernels::internal {
const KernelTable* Avx2Table() { return nullptr; }
}  // namespace myoctl::kernels::internal

#endif
