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

// Dense inner loops used by the perceptron engine. Every kernel has a scalar
// reference implementation and, on x86-64, an AVX2/FMA variant. The variant is
// chosen once per process from the CPU feature bits; MYOCTL_SIMD=scalar forces
// the reference path.

#ifndef MYOCTL_KERNELS_H_
#define MYOCTL_KERNELS_H_

#include <cstddef>
#include <span>
#include <string_view>

namespace myoctl::kernels {

enum class Isa { kScalar, kAvx2 };

std::string_view IsaName(Isa isa);

struct AdamStepParams {
  double learning_rate;
  double beta1;
  double beta2;
  double epsilon;
  // 1 - beta^t for the current step count t.
  double bias_correction1;
  double bias_correction2;
};

struct KernelTable {
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[r] = bias[r] + sum_c w[r * cols + c] * x[c]
  void (*affine)(const double* w, const double* bias, const double* x,
                 std::size_t rows, std::size_t cols, double* y);
  // y[c] = sum_r w[r * cols + c] * d[r]
  void (*affine_transpose)(const double* w, const double* d, std::size_t rows,
                           std::size_t cols, double* y);
  // w[r * cols + c] += d[r] * x[c]
  void (*add_outer)(const double* d, const double* x, std::size_t rows,
                    std::size_t cols, double* w);
  // In-place Adam update of n parameters.
  void (*adam)(const AdamStepParams& p, const double* grad, double* param,
               double* m, double* v, std::size_t n);
};

bool IsaSupported(Isa isa);

// Table for a specific ISA. Throws if the ISA is not supported here.
const KernelTable& TableFor(Isa isa);

// ISA selected for this process.
Isa ActiveIsa();
const KernelTable& Active();

// Span front-ends over the active table.
double Dot(std::span<const double> a, std::span<const double> b);
void Affine(std::span<const double> w, std::span<const double> bias,
            std::span<const double> x, std::span<double> y);
void AffineTranspose(std::span<const double> w, std::span<const double> d,
                     std::span<double> y);
void AddOuter(std::span<const double> d, std::span<const double> x,
              std::span<double> w);
void AdamUpdate(const AdamStepParams& p, std::span<const double> grad,
                std::span<double> param, std::span<double> m,
                std::span<double> v);

namespace internal {
const KernelTable& ScalarTable();
// nullptr when the AVX2 translation unit is not compiled in.
const KernelTable* Avx2Table();
}  // namespace internal

}  // namespace myoctl::kernels

#endif  // MYOCTL_KERNELS_H_
