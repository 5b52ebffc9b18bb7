#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "raketab/race.hpp"
#include "raketab/rng.hpp"
#include "raketab/table.hpp"

namespace fixtures {

// Races carrying mass in the 2x2x2 fixtures.
inline constexpr raketab::Race kR1 = raketab::Race::Black;
inline constexpr raketab::Race kR2 = raketab::Race::White;

// (s1,g1)=(9,1), (s1,g2)=(1,4), (s2,g1)=(2,8), (s2,g2)=(5,10) over (r1, r2).
raketab::ContingencyTable f1();

// Builds a table from a dense [s][g][r] array over the two fixture races.
raketab::ContingencyTable two_race_table(const double (&cells)[2][2][2]);

// Random sparse table. Each (s,g) cell is present with probability
// `density`; present cells get uniform(0.1, 10) weights on `active` races.
raketab::ContingencyTable random_table(raketab::Rng& rng, std::size_t ns, std::size_t ng, double density,
                                       const std::vector<raketab::Race>& active = {
                                           raketab::kAllRaces.begin(), raketab::kAllRaces.end()});

raketab::PredictionTable as_prediction(const raketab::CellTable& t);

// Same labels and keys as `t`, every value multiplied by `factor`.
raketab::ContingencyTable scaled(const raketab::CellTable& t, double factor);

// Relative difference max |a - b| / max(|b|, floor).
double max_rel_diff(const raketab::CellTable& a, const raketab::CellTable& b, double floor = 1.0);

}  // namespace fixtures
