#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "raketab/race.hpp"
#include "raketab/table.hpp"

namespace raketab {

/// Sign convention for signed subpopulation errors. The default matches the
/// scatter plots: positive means the estimate is too large.
enum class ErrorOrientation { EstimateMinusTruth, TruthMinusEstimate };

struct SubpopEntry {
  double truth = 0.0;
  double estimate = 0.0;
  double error = 0.0;
  /// error / truth; nullopt where truth is zero.
  std::optional<double> relative;
};

struct SubpopReport {
  ErrorOrientation orientation = ErrorOrientation::EstimateMinusTruth;
  /// Indexed [g][r] over the truth table's geolocation labels.
  std::vector<std::array<SubpopEntry, kRaceCount>> by_geo;
  /// sum_g |x_{+gr} - m_{+gr}|
  RaceVector mean_absolute_deviation{};
  /// Statewide x_{++r} vs m_{++r}.
  std::array<SubpopEntry, kRaceCount> statewide{};
};

/// Subpopulation errors of `pred` against `truth` on x_{+gr} and x_{++r}.
/// Both tables must share axis labels.
SubpopReport subpop_report(const CellTable& truth, const CellTable& pred,
                           ErrorOrientation orientation = ErrorOrientation::EstimateMinusTruth);

/// Subpopulation errors from totals alone, for one statewide row.
SubpopEntry subpop_entry(double truth, double estimate,
                         ErrorOrientation orientation = ErrorOrientation::EstimateMinusTruth);

/// Mean of |m_{+gr} - x_{+gr}| over all (g, r) with truth or estimate mass.
double mean_absolute_subpop_error(const SubpopReport& report);

struct CellwiseEntry {
  std::string name;
  double population = 0.0;
  /// nullopt when the group has zero truth population.
  std::optional<double> l1;
  std::optional<double> l2;
  std::optional<double> neg_log_likelihood;
  /// Negative log-likelihood minus that of the truth's own conditionals
  /// (a weighted KL divergence); zero exactly when pred matches truth.
  std::optional<double> nll_excess;
};

struct CellwiseReport {
  std::vector<CellwiseEntry> by_geo;
  std::vector<CellwiseEntry> by_region;
  CellwiseEntry overall;
};

/// Probability floor inside the log-likelihood.
inline constexpr double kLogFloor = 1e-12;

/// l1, l2 and negative log-likelihood per geolocation, per region group
/// (from truth.labels().regions unless `regions` is given) and overall.
/// The likelihood uses the predicted conditional m_{sgr} / m_{sg+}.
CellwiseReport cellwise_report(const CellTable& truth, const CellTable& pred,
                               const std::map<std::string, std::string>* regions = nullptr);

struct CurvePoint {
  double weight_fraction = 0.0;
  double miscalibration = 0.0;
};

struct CalibrationCurve {
  Race race = Race::AIAN;
  /// Starts with (0, 0); one point per weighted cell in ascending order of
  /// predicted probability.
  std::vector<CurvePoint> points;
  double kuiper = 0.0;
};

/// Cumulative weighted miscalibration of the predicted conditional for one
/// race. Cells are weighted by the truth total x_{sg+}; zero-weight cells are
/// dropped; ties in predicted probability keep (surname, geolocation) order.
CalibrationCurve calibration_curve(const CellTable& truth, const CellTable& pred, Race race);

/// max - min over the curve values with 0 prepended.
double kuiper(const CalibrationCurve& curve);
double kuiper(std::span<const double> curve_values);

}  // namespace raketab
