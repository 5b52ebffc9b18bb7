#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "raketab/race.hpp"
#include "raketab/table.hpp"

namespace raketab {

/// One conditional race distribution plus the population it was computed on.
struct FactorEntry {
  RaceVector prob{};
  std::optional<double> count;
};

using FactorMap = std::map<std::string, FactorEntry, std::less<>>;

/// P(r|g), P(r|s) and P(r), with optional axis populations so that the
/// count-scale margins x*_{+gr}, x*_{s+r}, x*_{++r} can be recovered.
struct BisgFactors {
  FactorMap race_given_geo;
  FactorMap race_given_surname;
  RaceVector race_prior{};
  /// x*_{+++}; required for count-scale predictions.
  std::optional<double> population;

  /// Checks that every conditional and the prior sum to 1 within 1e-9.
  void validate() const;
};

/// Entrywise weights proportional to P(v|r).
struct VoterAdjustment {
  RaceVector weight{};
};

/// A cell that could not be predicted as requested.
struct CellReject {
  std::string surname;
  std::string geolocation;
  std::string reason;
};

enum class PredictionMethod { Bisg, GeoOnly, SurnameOnly };

std::optional<PredictionMethod> parse_prediction_method(std::string_view text);

/// Exact factors from a labeled table. Labels with zero mass are omitted.
BisgFactors fit_factors(const ContingencyTable& labeled);

/// Race prior and population implied by the geolocation factors.
void derive_prior_from_geo(BisgFactors& factors);

struct BisgCountResult {
  PredictionTable table;
  std::vector<CellReject> rejects;
};

/// Count-scale BISG, m_{sgr} = x*_{+gr} x*_{s+r} / x*_{++r}, over `support`.
/// Cells missing a surname or geolocation factor are skipped and reported.
BisgCountResult bisg_counts(const BisgFactors& factors, const LabelsPtr& labels,
                            std::span<const CellKey> support);

/// Normalized P(r|g) P(r|s) / P(r), optionally times the voter adjustment.
/// Throws InputError("no admissible race for cell") on an all-zero numerator.
RaceVector bisg_probability(const BisgFactors& factors, std::string_view surname,
                            std::string_view geo,
                            const std::optional<VoterAdjustment>& adjustment = std::nullopt);

/// weight[r] = cps[r] / census_prior[r].
VoterAdjustment voter_adjustment(const RaceVector& cps_race_given_voter,
                                 const RaceVector& census_race_prior_18plus);

RaceVector baseline_geo_only(const BisgFactors& factors, std::string_view geo);
RaceVector baseline_surname_only(const BisgFactors& factors, std::string_view surname);

struct WeightedPrediction {
  PredictionTable table;
  std::vector<CellReject> rejects;
};

/// Weighted estimator over occupied cells: m_{sgr} = n_{sg} p(r | s, g).
///
/// For PredictionMethod::Bisg, cells whose surname is unknown (or whose BISG
/// numerator vanishes) fall back to the geolocation-only prediction and are
/// listed in the rejects. Cells whose required factor is missing outright
/// are skipped and listed.
WeightedPrediction predict_cells(const BisgFactors& factors, const LabelsPtr& labels,
                                 std::span<const CellKey> keys,
                                 std::span<const double> cell_counts, PredictionMethod method,
                                 const std::optional<VoterAdjustment>& adjustment = std::nullopt);

}  // namespace raketab
