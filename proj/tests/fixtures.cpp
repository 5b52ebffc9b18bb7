#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fixtures {

using namespace raketab;

ContingencyTable two_race_table(const double (&cells)[2][2][2]) {
  TableBuilder b;
  const char* s[] = {"S1", "S2"};
  const char* g[] = {"G1", "G2"};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      RaceVector w{};
      w[race_index(kR1)] = cells[i][j][0];
      w[race_index(kR2)] = cells[i][j][1];
      b.add(s[i], g[j], w);
    }
  }
  return b.build();
}

ContingencyTable f1() {
  const double cells[2][2][2] = {{{9, 1}, {1, 4}}, {{2, 8}, {5, 10}}};
  return two_race_table(cells);
}

ContingencyTable random_table(Rng& rng, std::size_t ns, std::size_t ng, double density,
                              const std::vector<Race>& active) {
  TableBuilder b;
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t g = 0; g < ng; ++g) {
      if (rng.uniform() >= density) continue;
      RaceVector w{};
      for (Race r : active) w[race_index(r)] = 0.1 + 9.9 * rng.uniform();
      char sn[32], gn[32];
      std::snprintf(sn, sizeof sn, "S%04zu", s);
      std::snprintf(gn, sizeof gn, "G%04zu", g);
      b.add(sn, gn, w);
    }
  }
  if (b.empty()) {
    RaceVector w{};
    for (Race r : active) w[race_index(r)] = 1.0;
    b.add("S0000", "G0000", w);
  }
  return b.build();
}

PredictionTable as_prediction(const CellTable& t) {
  return PredictionTable(t.labels_ptr(), {t.keys().begin(), t.keys().end()},
                         {t.values().begin(), t.values().end()});
}

ContingencyTable scaled(const CellTable& t, double factor) {
  std::vector<double> v(t.values().begin(), t.values().end());
  for (double& x : v) x *= factor;
  return ContingencyTable(t.labels_ptr(), {t.keys().begin(), t.keys().end()}, std::move(v));
}

double max_rel_diff(const CellTable& a, const CellTable& b, double floor) {
  double worst = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto j = a.find(b.key(i));
    for (std::size_t r = 0; r < kRaceCount; ++r) {
      const double av = j ? a.row(*j)[r] : 0.0;
      const double bv = b.row(i)[r];
      worst = std::max(worst, std::abs(av - bv) / std::max(std::abs(bv), floor));
    }
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (b.find(a.key(i))) continue;
    for (double v : a.row(i)) worst = std::max(worst, std::abs(v) / floor);
  }
  return worst;
}

}  // namespace fixtures
