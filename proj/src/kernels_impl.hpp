#pragma once

#include "raketab/kernels.hpp"

namespace raketab::kernels::detail {

extern const RowKernels kScalarKernels;
#if defined(RAKETAB_HAVE_AVX2)
extern const RowKernels kAvx2Kernels;
#endif

}  // namespace raketab::kernels::detail
