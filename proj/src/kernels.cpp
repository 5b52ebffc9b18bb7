#include <cstdlib>
#include <string>

#include "kernels_impl.hpp"

namespace raketab::kernels {

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Avx2: return "avx2";
    case Isa::Scalar: break;
  }
  return "scalar";
}

const RowKernels& scalar() { return detail::kScalarKernels; }

const RowKernels* avx2() {
#if defined(RAKETAB_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &detail::kAvx2Kernels : nullptr;
#else
  return nullptr;
#endif
}

const RowKernels& active() {
  static const RowKernels* selected = [] {
    const char* env = std::getenv("RAKETAB_KERNELS");
    if (env != nullptr && std::string(env) == "scalar") return &scalar();
    if (const RowKernels* k = avx2()) return k;
    return &scalar();
  }();
  return *selected;
}

}  // namespace raketab::kernels
