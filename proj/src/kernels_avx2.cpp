// AVX2 variants of the row kernels. This translation unit is compiled with
// -mavx2 and must only be reached through the runtime dispatch in kernels.cpp.
//
// Rows are six doubles, so two rows occupy exactly three 256-bit registers:
//   v0 = [a0 a1 a2 a3]  v1 = [a4 a5 b0 b1]  v2 = [b2 b3 b4 b5]
// Per-race constants are laid out in the same rotating pattern.

#include <immintrin.h>

#include <cmath>

#include "kernels_impl.hpp"

namespace raketab::kernels::detail {

namespace {

constexpr std::size_t R = 6;

struct RacePattern {
  __m256d p0, p1, p2;
};

inline RacePattern race_pattern(const double* f) {
  return {_mm256_loadu_pd(f), _mm256_setr_pd(f[4], f[5], f[0], f[1]), _mm256_loadu_pd(f + 2)};
}

// Returns [sum(row a), sum(row b)].
inline __m128d pair_sums(__m256d v0, __m256d v1, __m256d v2) {
  const __m128d ta = _mm_add_pd(_mm_add_pd(_mm256_castpd256_pd128(v0), _mm256_extractf128_pd(v0, 1)),
                                _mm256_castpd256_pd128(v1));
  const __m128d tb = _mm_add_pd(_mm_add_pd(_mm256_castpd256_pd128(v2), _mm256_extractf128_pd(v2, 1)),
                                _mm256_extractf128_pd(v1, 1));
  return _mm_hadd_pd(ta, tb);
}

void margins_avx2(const double* rows, std::size_t n, double* cell_sums, double* race_sums) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const double* p = rows + i * R;
    const __m256d v0 = _mm256_loadu_pd(p);
    const __m256d v1 = _mm256_loadu_pd(p + 4);
    const __m256d v2 = _mm256_loadu_pd(p + 8);
    acc0 = _mm256_add_pd(acc0, v0);
    acc1 = _mm256_add_pd(acc1, v1);
    acc2 = _mm256_add_pd(acc2, v2);
    _mm_storeu_pd(cell_sums + i, pair_sums(v0, v1, v2));
  }
  alignas(32) double a0[4], a1[4], a2[4];
  _mm256_store_pd(a0, acc0);
  _mm256_store_pd(a1, acc1);
  _mm256_store_pd(a2, acc2);
  double acc[R] = {a0[0] + a1[2], a0[1] + a1[3], a0[2] + a2[0],
                   a0[3] + a2[1], a1[0] + a2[2], a1[1] + a2[3]};
  for (; i < n; ++i) {
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

void scale_races_avx2(double* rows, std::size_t n, const double* f, double* cell_sums) {
  const RacePattern pat = race_pattern(f);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    double* p = rows + i * R;
    const __m256d v0 = _mm256_mul_pd(_mm256_loadu_pd(p), pat.p0);
    const __m256d v1 = _mm256_mul_pd(_mm256_loadu_pd(p + 4), pat.p1);
    const __m256d v2 = _mm256_mul_pd(_mm256_loadu_pd(p + 8), pat.p2);
    _mm256_storeu_pd(p, v0);
    _mm256_storeu_pd(p + 4, v1);
    _mm256_storeu_pd(p + 8, v2);
    _mm_storeu_pd(cell_sums + i, pair_sums(v0, v1, v2));
  }
  for (; i < n; ++i) {
    double* row = rows + i * R;
    double s = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      row[r] *= f[r];
      s += row[r];
    }
    cell_sums[i] = s;
  }
}

void scale_cells_avx2(double* rows, std::size_t n, const double* g) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    double* p = rows + i * R;
    const __m256d ga = _mm256_set1_pd(g[i]);
    const __m256d gb = _mm256_set1_pd(g[i + 1]);
    const __m256d gab = _mm256_set_m128d(_mm_set1_pd(g[i + 1]), _mm_set1_pd(g[i]));
    _mm256_storeu_pd(p, _mm256_mul_pd(_mm256_loadu_pd(p), ga));
    _mm256_storeu_pd(p + 4, _mm256_mul_pd(_mm256_loadu_pd(p + 4), gab));
    _mm256_storeu_pd(p + 8, _mm256_mul_pd(_mm256_loadu_pd(p + 8), gb));
  }
  for (; i < n; ++i) {
    double* row = rows + i * R;
    for (std::size_t r = 0; r < R; ++r) row[r] *= g[i];
  }
}

void gather_products_avx2(const double* geo_rows, const std::uint32_t* geo_idx,
                          const double* surname_rows, const std::uint32_t* surname_idx,
                          const double* w, std::size_t n, double* out) {
  const __m256d w_lo = _mm256_loadu_pd(w);
  const __m128d w_hi = _mm_loadu_pd(w + 4);
  for (std::size_t i = 0; i < n; ++i) {
    const double* a = geo_rows + std::size_t{geo_idx[i]} * R;
    const double* b = surname_rows + std::size_t{surname_idx[i]} * R;
    double* o = out + i * R;
    const __m256d lo = _mm256_mul_pd(_mm256_mul_pd(_mm256_loadu_pd(a), _mm256_loadu_pd(b)), w_lo);
    const __m128d hi = _mm_mul_pd(_mm_mul_pd(_mm_loadu_pd(a + 4), _mm_loadu_pd(b + 4)), w_hi);
    _mm256_storeu_pd(o, lo);
    _mm_storeu_pd(o + 4, hi);
  }
}

void deviations_avx2(const double* x, const double* m, std::size_t n, double* l1, double* l2sq) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const std::size_t o = i * R;
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(x + o), _mm256_loadu_pd(m + o));
    const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(x + o + 4), _mm256_loadu_pd(m + o + 4));
    const __m256d d2 = _mm256_sub_pd(_mm256_loadu_pd(x + o + 8), _mm256_loadu_pd(m + o + 8));
    _mm_storeu_pd(l1 + i, pair_sums(_mm256_andnot_pd(sign, d0), _mm256_andnot_pd(sign, d1),
                                    _mm256_andnot_pd(sign, d2)));
    _mm_storeu_pd(l2sq + i,
                  pair_sums(_mm256_mul_pd(d0, d0), _mm256_mul_pd(d1, d1), _mm256_mul_pd(d2, d2)));
  }
  for (; i < n; ++i) {
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

const RowKernels kAvx2Kernels = {
    Isa::Avx2,        margins_avx2,         scale_races_avx2,
    scale_cells_avx2, gather_products_avx2, deviations_avx2,
};

}  // namespace raketab::kernels::detail
