#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>

#include "raketab/bisg.hpp"
#include "raketab/race.hpp"
#include "raketab/table.hpp"

namespace raketab {

struct SynthConfig {
  std::size_t n_surnames = 20;
  std::size_t n_geos = 10;
  RaceVector race_mix{0.01, 0.05, 0.15, 0.2, 0.55, 0.04};
  /// Fraction of each race's mass placed on its surname -> geolocation
  /// diagonal, g = (s + r) mod n_geos. Zero gives exact product form.
  double dependence = 0.0;
  double total_population = 100'000.0;
  std::uint64_t seed = 1;
  /// Draw integer counts from a multinomial instead of using expectations.
  bool multinomial = false;

  void validate() const;
};

/// x_{sgr} = N P(r) P(s|r) [(1 - d) P(g|r) + d 1{g = (s + r) mod n_g}]
/// with P(s|r), P(g|r) drawn from the seeded generator. Zero cells are not
/// stored. Labels are zero-padded ("S007", "G03") so index order is string
/// order.
ContingencyTable generate(const SynthConfig& config);

/// Self-fit factors plus the table itself as truth.
std::pair<BisgFactors, ContingencyTable> split_factors_and_truth(const ContingencyTable& table);

}  // namespace raketab
