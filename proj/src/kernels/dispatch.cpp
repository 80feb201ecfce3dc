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

#include <cstdlib>
#include <stdexcept>
#include <string>
#include <string_view>

#include "pcs/kernels.hpp"

namespace pcs::kernels {

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

bool supported(Isa isa) noexcept {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(PCS_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!supported(isa)) {
    throw std::invalid_argument("kernel ISA not available: " +
                                std::string(isa_name(isa)));
  }
#if defined(PCS_HAVE_AVX2)
  if (isa == Isa::kAvx2) return avx2::kTable;
#endif
  return scalar::kTable;
}

namespace {

const KernelTable& Select() {
  if (const char* env = std::getenv("PCS_KERNELS")) {
    if (std::string_view(env) == "scalar") return scalar::kTable;
  }
  if (supported(Isa::kAvx2)) return table(Isa::kAvx2);
  return scalar::kTable;
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& selected = Select();
  return selected;
}

}  // namespace pcs::kernels
