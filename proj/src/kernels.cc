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

#include "myoctl/kernels.h"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace myoctl::kernels {
namespace {

bool CpuHasAvx2Fma() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa SelectIsa() {
  if (const char* env = std::getenv("MYOCTL_SIMD")) {
    if (std::string(env) == "scalar") return Isa::kScalar;
  }
  return IsaSupported(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar;
}

void CheckSize(bool ok, const char* what) {
  if (!ok)
    throw std::invalid_argument(std::string("kernel size mismatch: ") + what);
}

}  // namespace

std::string_view IsaName(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

bool IsaSupported(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
      return internal::Avx2Table() != nullptr && CpuHasAvx2Fma();
  }
  return false;
}

const KernelTable& TableFor(Isa isa) {
  if (!IsaSupported(isa)) {
    throw std::runtime_error("ISA not supported on this machine: " +
                             std::string(IsaName(isa)));
  }
  return isa == Isa::kAvx2 ? *internal::Avx2Table() : internal::ScalarTable();
}

Isa ActiveIsa() {
  static const Isa isa = SelectIsa();
  return isa;
}

const KernelTable& Active() {
  static const KernelTable& table = TableFor(ActiveIsa());
  return table;
}

double Dot(std::span<const double> a, std::span<const double> b) {
  CheckSize(a.size() == b.size(), "dot");
  return Active().dot(a.data(), b.data(), a.size());
}

void Affine(std::span<const double> w, std::span<const double> bias,
            std::span<const double> x, std::span<double> y) {
  CheckSize(bias.size() == y.size() && w.size() == y.size() * x.size(),
            "affine");
  Active().affine(w.data(), bias.data(), x.data(), y.size(), x.size(),
                  y.data());
}

void AffineTranspose(std::span<const double> w, std::span<const double> d,
                     std::span<double> y) {
  CheckSize(w.size() == d.size() * y.size(), "affine_transpose");
  Active().affine_transpose(w.data(), d.data(), d.size(), y.size(), y.data());
}

void AddOuter(std::span<const double> d, std::span<const double> x,
              std::span<double> w) {
  CheckSize(w.size() == d.size() * x.size(), "add_outer");
  Active().add_outer(d.data(), x.data(), d.size(), x.size(), w.data());
}

void AdamUpdate(const AdamStepParams& p, std::span<const double> grad,
                std::span<double> param, std::span<double> m,
                std::span<double> v) {
  CheckSize(grad.size() == param.size() && m.size() == param.size() &&
                v.size() == param.size(),
            "adam");
  Active().adam(p, grad.data(), param.data(), m.data(), v.data(), param.size());
}

}  // namespace myoctl::kernels
