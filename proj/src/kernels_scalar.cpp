#include <cmath>

#include "kernels_impl.hpp"

namespace raketab::kernels::detail {

namespace {

constexpr std::size_t R = 6;

void margins_scalar(const double* rows, std::size_t n, double* cell_sums, double* race_sums) {
  double acc[R] = {0, 0, 0, 0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = rows + i * R;
    double s = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      s += row[r];
      acc[r] += row[r];
    }
    cell_sums[i] = s;
  }
  for (std::size_t r = 0; r < R; ++r) race_sums[r] += acc[r];
}

void scale_races_scalar(double* rows, std::size_t n, const double* f, double* cell_sums) {
  for (std::size_t i = 0; i < n; ++i) {
    double* row = rows + i * R;
    double s = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      row[r] *= f[r];
      s += row[r];
    }
    cell_sums[i] = s;
  }
}

void scale_cells_scalar(double* rows, std::size_t n, const double* g) {
  for (std::size_t i = 0; i < n; ++i) {
    double* row = rows + i * R;
    for (std::size_t r = 0; r < R; ++r) row[r] *= g[i];
  }
}

void gather_products_scalar(const double* geo_rows, const std::uint32_t* geo_idx,
                            const double* surname_rows, const std::uint32_t* surname_idx,
                            const double* w, std::size_t n, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* a = geo_rows + std::size_t{geo_idx[i]} * R;
    const double* b = surname_rows + std::size_t{surname_idx[i]} * R;
    double* o = out + i * R;
    for (std::size_t r = 0; r < R; ++r) o[r] = (a[r] * b[r]) * w[r];
  }
}

void deviations_scalar(const double* x, const double* m, std::size_t n, double* l1,
                       double* l2sq) {
  for (std::size_t i = 0; i < n; ++i) {
    double a = 0.0, b = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      const double d = x[i * R + r] - m[i * R + r];
      a += std::abs(d);
      b += d * d;
    }
    l1[i] = a;
    l2sq[i] = b;
  }
}

}  // namespace

const RowKernels kScalarKernels = {
    Isa::Scalar,        margins_scalar,         scale_races_scalar,
    scale_cells_scalar, gather_products_scalar, deviations_scalar,
};

}  // namespace raketab::kernels::detail
