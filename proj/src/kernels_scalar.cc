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

#include <cmath>
#include <cstddef>

#include "myoctl/kernels.h"

namespace myoctl::kernels::internal {
namespace {

double DotScalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void AffineScalar(const double* w, const double* bias, const double* x,
                  std::size_t rows, std::size_t cols, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    y[r] = bias[r] + DotScalar(w + r * cols, x, cols);
  }
}

void AffineTransposeScalar(const double* w, const double* d, std::size_t rows,
                           std::size_t cols, double* y) {
  for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) y[c] += row[c] * d[r];
  }
}

void AddOuterScalar(const double* d, const double* x, std::size_t rows,
                    std::size_t cols, double* w) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += d[r] * x[c];
  }
}

void AdamScalar(const AdamStepParams& p, const double* grad, double* param,
                double* m, double* v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = p.beta1 * m[i] + (1.0 - p.beta1) * grad[i];
    v[i] = p.beta2 * v[i] + (1.0 - p.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / p.bias_correction1;
    const double v_hat = v[i] / p.bias_correction2;
    param[i] -= p.learning_rate * m_hat / (std::sqrt(v_hat) + p.epsilon);
  }
}

}  // namespace

const KernelTable& ScalarTable() {
  static const KernelTable table{DotScalar, AffineScalar, AffineTransposeScalar,
                                 AddOuterScalar, AdamScalar};
  return table;
}

}  // namespace myoctl::kernels::internal
