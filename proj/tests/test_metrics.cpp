#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "raketab/bisg.hpp"
#include "raketab/error.hpp"
#include "raketab/metrics.hpp"

using namespace raketab;
using fixtures::kR1;
using fixtures::kR2;

namespace {

PredictionTable weighted_bisg(const ContingencyTable& t) {
  std::vector<double> n;
  for (std::size_t i = 0; i < t.size(); ++i) n.push_back(t.cell_total(i));
  return predict_cells(fit_factors(t), t.labels_ptr(), t.keys(), n, PredictionMethod::Bisg).table;
}

ContingencyTable one_cell(const char* s, const char* g, double a, double b) {
  TableBuilder builder;
  RaceVector w{};
  w[race_index(kR1)] = a;
  w[race_index(kR2)] = b;
  builder.add(s, g, w);
  return builder.build();
}

}  // namespace

TEST_CASE("statewide signed and relative error") {
  const auto e = subpop_entry(1'762'643, 1'725'555);
  CHECK(e.error == -37'088.0);
  CHECK(*e.relative * 100 == doctest::Approx(-2.104).epsilon(1e-3));
  const auto flipped = subpop_entry(1'762'643, 1'725'555, ErrorOrientation::TruthMinusEstimate);
  CHECK(flipped.error == 37'088.0);
  CHECK(!subpop_entry(0, 5).relative);
}

TEST_CASE("fixture subpopulation errors") {
  const auto t = fixtures::f1();
  const auto pred = weighted_bisg(t);
  const auto rep = subpop_report(t, pred);
  const auto& e = rep.by_geo[0][race_index(kR1)];
  CHECK(e.truth == 11.0);
  CHECK(e.error == doctest::Approx(0.592).epsilon(1e-3));
  CHECK(*e.relative == doctest::Approx(0.0538).epsilon(1e-2));
  for (std::size_t r = 0; r < kRaceCount; ++r) {
    CHECK(rep.mean_absolute_deviation[r] + 1e-12 >= std::abs(rep.statewide[r].error));
  }
  const auto flipped = subpop_report(t, pred, ErrorOrientation::TruthMinusEstimate);
  CHECK(flipped.by_geo[1][race_index(kR2)].error == -rep.by_geo[1][race_index(kR2)].error);
  CHECK(flipped.mean_absolute_deviation == rep.mean_absolute_deviation);

  const auto same = subpop_report(t, t);
  CHECK(mean_absolute_subpop_error(same) == 0.0);
}

TEST_CASE("cellwise norms on the fixture") {
  const auto t = fixtures::f1();
  const auto pred = weighted_bisg(t);
  const auto rep = cellwise_report(t, pred);
  // Brute-force l1 and l2 for G1.
  double l1 = 0, l2 = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t.key(i).geo != 0) continue;
    double sq = 0;
    for (std::size_t r = 0; r < kRaceCount; ++r) {
      const double d = t.row(i)[r] - pred.row(i)[r];
      l1 += std::abs(d);
      sq += d * d;
    }
    l2 += std::sqrt(sq);
  }
  CHECK(*rep.by_geo[0].l1 == doctest::Approx(l1 / 20.0).epsilon(1e-14));
  CHECK(*rep.by_geo[0].l2 == doctest::Approx(l2 / 20.0).epsilon(1e-14));
  CHECK(*rep.by_geo[0].l2 <= *rep.by_geo[0].l1);
  CHECK(*rep.overall.nll_excess > 0.0);

  const auto zero = cellwise_report(t, t);
  CHECK(*zero.overall.l1 == 0.0);
  CHECK(*zero.overall.l2 == 0.0);
  CHECK(*zero.overall.nll_excess == 0.0);
}

TEST_CASE("negative log-likelihood uses the predicted conditional") {
  const auto truth = one_cell("A", "G", 1.0, 0.0);
  const auto pred = one_cell("A", "G", 0.5, 0.5);
  const auto rep = cellwise_report(truth, pred);
  CHECK(*rep.overall.neg_log_likelihood == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(*rep.overall.nll_excess == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  // Scale of the prediction does not matter.
  const auto rep2 = cellwise_report(truth, one_cell("A", "G", 50, 50));
  CHECK(*rep2.overall.neg_log_likelihood == *rep.overall.neg_log_likelihood);
}

TEST_CASE("region grouping normalizes by the region total") {
  const auto t = fixtures::f1();
  const auto pred = weighted_bisg(t);
  const std::map<std::string, std::string> regions = {{"G1", "north"}, {"G2", "north"}};
  const auto rep = cellwise_report(t, pred, &regions);
  REQUIRE(rep.by_region.size() == 1);
  CHECK(*rep.by_region[0].l1 == doctest::Approx(*rep.overall.l1).epsilon(1e-15));
  CHECK(rep.by_region[0].population == 40.0);
}

TEST_CASE("two-cell calibration example") {
  // Equal weights, p = (0.2, 0.8), f = (0.4, 0.6).
  TableBuilder tb, pb;
  RaceVector x1{}, x2{}, m1{}, m2{};
  x1[0] = 4, x1[1] = 6;
  x2[0] = 6, x2[1] = 4;
  m1[0] = 2, m1[1] = 8;
  m2[0] = 8, m2[1] = 2;
  tb.add("A", "G", x1), tb.add("B", "G", x2);
  pb.add("A", "G", m1), pb.add("B", "G", m2);
  const auto curve = calibration_curve(tb.build(), pb.build(), Race::AIAN);
  REQUIRE(curve.points.size() == 3);
  CHECK(curve.points[0].miscalibration == 0.0);
  CHECK(curve.points[1].miscalibration == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(std::abs(curve.points[2].miscalibration) <= 1e-15);
  CHECK(curve.kuiper == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(kuiper(curve) == curve.kuiper);
}

TEST_CASE("kuiper values") {
  CHECK(kuiper(std::vector<double>{0.1, 0.0}) == 0.1);
  CHECK(kuiper(std::vector<double>{-0.05, 0.02}) == doctest::Approx(0.07));
  CHECK(kuiper(std::vector<double>{0.0, 0.0}) == 0.0);
}

TEST_CASE("calibration curves against the naive oracle") {
  Rng rng(31);
  for (int k = 0; k < 10; ++k) {
    const auto t = fixtures::random_table(rng, 12, 6, 0.7);
    const auto pred = weighted_bisg(t);
    for (Race race : kAllRaces) {
      std::vector<double> p, w, x;
      for (std::size_t i = 0; i < t.size(); ++i) {
        w.push_back(t.cell_total(i));
        x.push_back(t.row(i)[race_index(race)]);
        p.push_back((*pred.conditional(*pred.find(t.key(i))))[race_index(race)]);
      }
      const auto curve = calibration_curve(t, pred, race);
      CHECK(curve.kuiper == doctest::Approx(oracles::kuiper_naive(p, w, x)).epsilon(1e-12));
      CHECK(curve.points.back().weight_fraction == doctest::Approx(1.0));
    }
    // Perfect predictions are perfectly calibrated.
    CHECK(calibration_curve(t, t, Race::White).kuiper <= 1e-15);
  }
}

TEST_CASE("zero-weight cells do not change kuiper") {
  const auto t = fixtures::f1();
  const auto pred = weighted_bisg(t);
  const double base = calibration_curve(t, pred, kR1).kuiper;

  TableBuilder tb, pb;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto k = t.key(i);
    tb.add(t.labels().surnames[k.surname], t.labels().geolocations[k.geo], t.row_vector(i));
    pb.add(t.labels().surnames[k.surname], t.labels().geolocations[k.geo], pred.row_vector(i));
  }
  RaceVector zero{}, some{};
  some[race_index(kR1)] = 1.0;
  tb.add("S0", "G1", zero);
  pb.add("S0", "G1", some);
  tb.add("S9", "G2", zero);
  pb.add("S9", "G2", some);
  CHECK(calibration_curve(tb.build(), pb.build(), kR1).kuiper == doctest::Approx(base).epsilon(1e-15));
}

TEST_CASE("metric errors") {
  const auto t = fixtures::f1();
  const auto other = one_cell("X", "Y", 1, 1);
  CHECK_THROWS_AS(subpop_report(t, other), InputError);
  TableBuilder pb;
  RaceVector w{};
  w[0] = 1;
  pb.add("S1", "G1", w);
  pb.add("S2", "G2", w);
  pb.add("S1", "G2", w);
  pb.add("S2", "G1", RaceVector{});
  CHECK_THROWS_AS(calibration_curve(t, pb.build(), kR1), InputError);
}
