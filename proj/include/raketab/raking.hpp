#pragma once

#include <cstddef>
#include <vector>

#include "raketab/error.hpp"
#include "raketab/race.hpp"
#include "raketab/table.hpp"

namespace raketab {

struct RakingConfig {
  /// Max relative margin deviation accepted as converged.
  double tolerance = 1e-10;
  std::size_t max_iterations = 10'000;
  /// Worker threads for the per-sweep passes. Output does not depend on it.
  std::size_t threads = 1;
  /// Scale the race family first (default) or the cell family first.
  bool race_first = true;

  void validate() const;
};

struct RakingResult {
  PredictionTable table;
  /// Accumulated log scale per race. -inf for races with a zero target.
  RaceVector theta_race{};
  /// Accumulated log scale per base cell, aligned with table.keys().
  /// -inf for cells with a zero target.
  std::vector<double> theta_cell;
  /// Sweeps performed, counting the final sweep that verified convergence.
  std::size_t iterations = 0;
  double final_margin_gap = 0.0;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& message, double gap, std::size_t iterations)
      : Error(ErrorKind::NonConvergence, message), gap_(gap), iterations_(iterations) {}

  double final_margin_gap() const { return gap_; }
  std::size_t iterations() const { return iterations_; }

 private:
  double gap_;
  std::size_t iterations_;
};

/// Two-family iterative proportional fitting of `base` to the race totals
/// and (s,g) totals in `targets`.
///
/// Each sweep measures both margin families, stops if the largest relative
/// gap is within tolerance, and otherwise rescales every race slice and then
/// every cell. Base cells with a zero target are zeroed up front. The result
/// satisfies m = base * exp(theta_race[r] + theta_cell[sg]) on its support.
///
/// Throws Error(Infeasible) when a positive target has no base mass, and
/// NonConvergenceError when max_iterations sweeps do not reach tolerance.
RakingResult rake(const PredictionTable& base, const MarginSet& targets,
                  const RakingConfig& config = {});

/// Generalized KL divergence between unnormalized tables:
/// sum m log(m / base) - sum m + sum base.
double kl_divergence(const PredictionTable& m, const PredictionTable& base);

/// Max over target entries of |achieved - target| / max(target, 1).
double margin_gap(const PredictionTable& m, const MarginSet& targets);

}  // namespace raketab
