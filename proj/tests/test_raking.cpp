#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "raketab/bisg.hpp"
#include "raketab/kernels.hpp"
#include "raketab/raking.hpp"
#include "raketab/synth.hpp"

using namespace raketab;

namespace {

PredictionTable self_fit_bisg(const ContingencyTable& t) {
  return bisg_counts(fit_factors(t), t.labels_ptr(), t.keys()).table;
}

void check_against_oracle(const PredictionTable& base, const ContingencyTable& truth) {
  const auto targets = MarginSet::from_table(truth);
  const auto res = rake(base, targets);
  std::vector<double> cells;
  const auto d = oracles::to_dense(truth);
  for (std::size_t c = 0; c < d.ns * d.ng; ++c) {
    double s = 0;
    for (std::size_t r = 0; r < kRaceCount; ++r) s += d.v[c * kRaceCount + r];
    cells.push_back(s);
  }
  const auto expect = oracles::ipf(oracles::to_dense(base), truth.race_totals(), cells);
  const auto got = oracles::to_dense(res.table);
  for (std::size_t k = 0; k < got.v.size(); ++k) {
    CHECK(std::abs(got.v[k] - expect.v[k]) <= 1e-8 * std::max(1.0, expect.v[k]));
  }
}

}  // namespace

TEST_CASE("targets equal to base margins are a fixed point") {
  Rng rng(1);
  const auto base = fixtures::as_prediction(fixtures::random_table(rng, 10, 4, 0.7));
  const auto res = rake(base, MarginSet::from_table(base));
  CHECK(res.iterations == 1);
  CHECK(res.final_margin_gap <= 1e-12);
  CHECK(std::equal(res.table.values().begin(), res.table.values().end(), base.values().begin()));
  for (double th : res.theta_cell) CHECK(th == 0.0);
}

TEST_CASE("raking the fixture's BISG table recovers its margins") {
  const auto t = fixtures::f1();
  const auto base = self_fit_bisg(t);
  const auto res = rake(base, MarginSet::from_table(t));
  CHECK(res.final_margin_gap <= 1e-10);
  const auto races = res.table.race_totals();
  CHECK(races[race_index(fixtures::kR1)] == doctest::Approx(17.0).epsilon(1e-10));
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(res.table.cell_total(i) == doctest::Approx(t.cell_total(i)).epsilon(1e-10));
  }
  check_against_oracle(base, t);
}

TEST_CASE("raking matches plain alternating scaling") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    CAPTURE(seed);
    Rng rng(seed);
    const auto truth = fixtures::random_table(rng, 7, 5, 0.8);
    const auto base = fixtures::as_prediction(fixtures::random_table(rng, 7, 5, 1.0));
    check_against_oracle(base, truth);
  }
}

TEST_CASE("converged raking has the log-linear form") {
  SynthConfig cfg;
  cfg.n_surnames = 30;
  cfg.n_geos = 8;
  cfg.dependence = 0.6;
  const auto truth = generate(cfg);
  const auto base = self_fit_bisg(truth);
  const auto res = rake(base, MarginSet::from_table(truth));
  for (std::size_t i = 0; i < base.size(); ++i) {
    for (std::size_t r = 0; r < kRaceCount; ++r) {
      const double b = base.row(i)[r];
      if (b == 0.0) continue;
      const double expect = b * std::exp(res.theta_race[r] + res.theta_cell[i]);
      CHECK(std::abs(res.table.row(i)[r] - expect) <= 1e-8 * expect);
    }
  }
  // Any feasible table is at least as far from the base in KL.
  CHECK(kl_divergence(res.table, base) <= kl_divergence(fixtures::as_prediction(truth), base) + 1e-9);
  CHECK(margin_gap(res.table, MarginSet::from_table(truth)) <= 1e-10);
}

TEST_CASE("sweep order and thread count do not change the answer") {
  Rng rng(21);
  // More rows than one chunk so the chunked reductions split.
  const auto truth = fixtures::random_table(rng, 150, 60, 0.7);
  const auto base = fixtures::as_prediction(fixtures::random_table(rng, 150, 60, 1.0));
  const auto targets = MarginSet::from_table(truth);
  REQUIRE(base.size() > 2 * kernels::kChunkRows);

  RakingConfig one;
  RakingConfig four;
  four.threads = 4;
  const auto a = rake(base, targets, one);
  const auto b = rake(base, targets, four);
  CHECK(std::equal(a.table.values().begin(), a.table.values().end(), b.table.values().begin()));
  CHECK(a.iterations == b.iterations);

  RakingConfig cells_first;
  cells_first.race_first = false;
  const auto c = rake(base, targets, cells_first);
  CHECK(fixtures::max_rel_diff(c.table, a.table) < 1e-8);
}

TEST_CASE("zero targets, infeasible support and the sweep cap") {
  const auto t = fixtures::f1();
  const auto base = fixtures::as_prediction(t);

  // Dropping the (S1,G1) target zeroes that cell.
  std::vector<CellKey> keys(t.keys().begin() + 1, t.keys().end());
  std::vector<double> cells;
  for (std::size_t i = 1; i < t.size(); ++i) cells.push_back(t.cell_total(i));
  RaceVector race{};
  race[race_index(fixtures::kR1)] = 8.0;
  race[race_index(fixtures::kR2)] = 22.0;
  const auto res = rake(base, MarginSet(t.labels_ptr(), race, keys, cells));
  CHECK(res.table.cell_total(0) == 0.0);
  CHECK(std::isinf(res.theta_cell[0]));
  CHECK(res.final_margin_gap <= 1e-10);

  // A race with a target but no base mass.
  RaceVector race2{};
  race2[race_index(Race::AIAN)] = 1.0;
  race2[race_index(fixtures::kR2)] = 39.0;
  std::vector<double> all;
  for (std::size_t i = 0; i < t.size(); ++i) all.push_back(t.cell_total(i));
  try {
    rake(base, MarginSet(t.labels_ptr(), race2, {t.keys().begin(), t.keys().end()}, all));
    FAIL("expected an infeasibility error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Infeasible);
  }

  RakingConfig capped;
  capped.max_iterations = 1;
  const auto bisg = self_fit_bisg(t);
  try {
    rake(bisg, MarginSet::from_table(t), capped);
    FAIL("expected non-convergence");
  } catch (const NonConvergenceError& e) {
    CHECK(e.final_margin_gap() > 1e-10);
    CHECK(e.iterations() == 1);
  }

  RakingConfig bad;
  bad.tolerance = -1.0;
  CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("KL divergence basics") {
  const auto t = fixtures::as_prediction(fixtures::f1());
  CHECK(kl_divergence(t, t) == 0.0);
  const auto double_t = fixtures::as_prediction(fixtures::scaled(t, 2.0));
  // sum 2x log 2 - 2x + x
  CHECK(kl_divergence(double_t, t) == doctest::Approx(40.0 * (2 * std::log(2.0) - 1)).epsilon(1e-12));
  CHECK(margin_gap(t, MarginSet()) == 0.0);
}
