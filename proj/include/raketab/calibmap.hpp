#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "raketab/race.hpp"

namespace raketab {

/// Column-stochastic matrix nearest the identity (Frobenius) that maps the
/// source distribution onto the target distribution.
struct CalibrationMap {
  std::size_t dim = 0;
  /// Row-major dim x dim; entry (i, j) moves mass from category j to i.
  std::vector<double> matrix;
  std::vector<double> source;
  std::vector<double> target;
  /// ||A - I||_F
  double objective = 0.0;
  /// max over |A u - v| and |column sum - 1| at the returned solution.
  double kkt_residual = 0.0;
  std::size_t iterations = 0;

  double at(std::size_t i, std::size_t j) const { return matrix[i * dim + j]; }
};

struct CalibMapOptions {
  /// Step and multiplier threshold treated as zero.
  double kkt_tolerance = 1e-10;
  /// Constraint residual above which the solve is reported as failed.
  double accept_tolerance = 1e-8;
  /// Active-set changes allowed.
  std::size_t max_iterations = 10'000;
};

/// Solves min ||A - I||_F subject to A >= 0, column sums 1, A u_cps = u_vf.
///
/// Primal active-set method started from the feasible map u_vf 1^T: each
/// step projects toward I within the equality constraints with the current
/// zero entries held fixed, stopping at the first entry that would turn
/// negative; a zero entry is released when its bound multiplier is negative.
/// Inputs are renormalized to sum exactly 1.
CalibrationMap solve_calibration_map(std::span<const double> u_cps, std::span<const double> u_vf,
                                     const CalibMapOptions& options = {});

CalibrationMap solve_calibration_map(const RaceVector& u_cps, const RaceVector& u_vf);

/// Returns A p. Requires p to be a probability vector within 1e-6.
std::vector<double> apply_calibration_map(const CalibrationMap& map, std::span<const double> p);
RaceVector apply_calibration_map(const CalibrationMap& map, const RaceVector& p);

/// Euclidean projection of y onto the probability simplex.
std::vector<double> project_to_simplex(std::span<const double> y);

}  // namespace raketab
