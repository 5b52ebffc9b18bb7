#pragma once

// Inner loops over flat rows of six doubles (one row per stored cell).
//
// Each kernel has a scalar reference implementation and, on x86-64 builds,
// an AVX2 variant. The active variant is chosen once at runtime from CPU
// support; RAKETAB_KERNELS=scalar forces the reference path.
//
// Kernels that reduce over rows (race sums) operate on a caller-supplied
// range so that callers can split work into fixed-size chunks and merge
// partials in chunk order. Results then do not depend on thread count.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace raketab::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

struct RowKernels {
  Isa isa;

  // cell_sums[i] = sum_r rows[i][r];  race_sums[r] += sum_i rows[i][r]
  void (*margins)(const double* rows, std::size_t n, double* cell_sums, double* race_sums);

  // rows[i][r] *= race_factors[r]; cell_sums[i] = new row sum
  void (*scale_races)(double* rows, std::size_t n, const double* race_factors,
                      double* cell_sums);

  // rows[i][r] *= cell_factors[i]
  void (*scale_cells)(double* rows, std::size_t n, const double* cell_factors);

  // out[i][r] = geo_rows[geo_idx[i]][r] * surname_rows[surname_idx[i]][r] * race_weights[r]
  void (*gather_products)(const double* geo_rows, const std::uint32_t* geo_idx,
                          const double* surname_rows, const std::uint32_t* surname_idx,
                          const double* race_weights, std::size_t n, double* out);

  // l1[i] = sum_r |x[i][r] - m[i][r]|;  l2sq[i] = sum_r (x[i][r] - m[i][r])^2
  void (*deviations)(const double* x, const double* m, std::size_t n, double* l1, double* l2sq);
};

const RowKernels& scalar();

/// AVX2 variant, or nullptr when not compiled in or not supported by the CPU.
const RowKernels* avx2();

/// Runtime-selected variant.
const RowKernels& active();

/// Rows per chunk for chunked reductions.
inline constexpr std::size_t kChunkRows = 4096;

}  // namespace raketab::kernels
