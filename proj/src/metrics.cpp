#include "raketab/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "raketab/error.hpp"
#include "raketab/kernels.hpp"

namespace raketab {

namespace {

void require_shared_labels(const CellTable& truth, const CellTable& pred) {
  if (!truth.labels().same_axes(pred.labels())) {
    throw InputError("truth and prediction tables have different axis labels");
  }
}

// Rows of truth and prediction aligned over the union of stored cells.
struct AlignedCells {
  std::vector<CellKey> keys;
  std::vector<double> x;
  std::vector<double> m;
};

AlignedCells align(const CellTable& truth, const CellTable& pred) {
  AlignedCells out;
  std::size_t i = 0, j = 0;
  const std::size_t nt = truth.size(), np = pred.size();
  auto push = [&](CellKey k, const CellTable* t, std::size_t ti, const CellTable* p, std::size_t pi) {
    out.keys.push_back(k);
    for (std::size_t r = 0; r < kRaceCount; ++r) {
      out.x.push_back(t ? t->row(ti)[r] : 0.0);
      out.m.push_back(p ? p->row(pi)[r] : 0.0);
    }
  };
  while (i < nt || j < np) {
    if (j == np || (i < nt && truth.key(i) < pred.key(j))) {
      push(truth.key(i), &truth, i, nullptr, 0);
      ++i;
    } else if (i == nt || pred.key(j) < truth.key(i)) {
      push(pred.key(j), nullptr, 0, &pred, j);
      ++j;
    } else {
      push(truth.key(i), &truth, i, &pred, j);
      ++i;
      ++j;
    }
  }
  return out;
}

struct Accum {
  double population = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  double nll = 0.0;
  double nll_truth = 0.0;

  CellwiseEntry finish(std::string name) const {
    CellwiseEntry e;
    e.name = std::move(name);
    e.population = population;
    if (population > 0.0) {
      e.l1 = l1 / population;
      e.l2 = l2 / population;
      e.neg_log_likelihood = nll / population;
      e.nll_excess = std::max(0.0, (nll - nll_truth) / population);
    }
    return e;
  }

  void add(const Accum& o) {
    population += o.population;
    l1 += o.l1;
    l2 += o.l2;
    nll += o.nll;
    nll_truth += o.nll_truth;
  }
};

}  // namespace

SubpopEntry subpop_entry(double truth, double estimate, ErrorOrientation orientation) {
  SubpopEntry e;
  e.truth = truth;
  e.estimate = estimate;
  e.error = orientation == ErrorOrientation::EstimateMinusTruth ? estimate - truth : truth - estimate;
  if (truth != 0.0) e.relative = e.error / truth;
  return e;
}

SubpopReport subpop_report(const CellTable& truth, const CellTable& pred, ErrorOrientation orientation) {
  require_shared_labels(truth, pred);
  SubpopReport rep;
  rep.orientation = orientation;
  const auto x = geo_race_margin(truth);
  const auto m = geo_race_margin(pred);
  rep.by_geo.resize(x.size());
  for (std::size_t g = 0; g < x.size(); ++g) {
    for (std::size_t r = 0; r < kRaceCount; ++r) {
      rep.by_geo[g][r] = subpop_entry(x[g][r], m[g][r], orientation);
      rep.mean_absolute_deviation[r] += std::abs(x[g][r] - m[g][r]);
    }
  }
  const RaceVector xs = truth.race_totals();
  const RaceVector ms = pred.race_totals();
  for (std::size_t r = 0; r < kRaceCount; ++r) rep.statewide[r] = subpop_entry(xs[r], ms[r], orientation);
  return rep;
}

double mean_absolute_subpop_error(const SubpopReport& report) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& row : report.by_geo) {
    for (const auto& e : row) {
      if (e.truth == 0.0 && e.estimate == 0.0) continue;
      sum += std::abs(e.error);
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

CellwiseReport cellwise_report(const CellTable& truth, const CellTable& pred,
                               const std::map<std::string, std::string>* regions) {
  require_shared_labels(truth, pred);
  const auto& labels = truth.labels();
  const auto& region_map = regions ? *regions : labels.regions;

  const AlignedCells cells = align(truth, pred);
  const std::size_t n = cells.keys.size();
  std::vector<double> l1(n), l2sq(n);
  kernels::active().deviations(cells.x.data(), cells.m.data(), n, l1.data(), l2sq.data());

  std::vector<Accum> geo(labels.geolocations.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = cells.x.data() + i * kRaceCount;
    const double* m = cells.m.data() + i * kRaceCount;
    double xs = 0.0, ms = 0.0;
    for (std::size_t r = 0; r < kRaceCount; ++r) {
      xs += x[r];
      ms += m[r];
    }
    Accum& acc = geo[cells.keys[i].geo];
    acc.population += xs;
    acc.l1 += l1[i];
    acc.l2 += std::sqrt(l2sq[i]);
    for (std::size_t r = 0; r < kRaceCount; ++r) {
      if (!(x[r] > 0.0)) continue;
      const double p = ms > 0.0 ? std::max(m[r] / ms, kLogFloor) : kLogFloor;
      acc.nll -= x[r] * std::log(p);
      acc.nll_truth -= x[r] * std::log(x[r] / xs);
    }
  }

  CellwiseReport rep;
  Accum overall;
  std::map<std::string, Accum> by_region;
  for (std::size_t g = 0; g < geo.size(); ++g) {
    rep.by_geo.push_back(geo[g].finish(labels.geolocations[g]));
    overall.add(geo[g]);
    if (auto it = region_map.find(labels.geolocations[g]); it != region_map.end()) {
      by_region[it->second].add(geo[g]);
    }
  }
  for (const auto& [name, acc] : by_region) rep.by_region.push_back(acc.finish(name));
  rep.overall = overall.finish("overall");
  return rep;
}

CalibrationCurve calibration_curve(const CellTable& truth, const CellTable& pred, Race race) {
  require_shared_labels(truth, pred);
  const std::size_t r = race_index(race);
  struct Item {
    double p;
    double weight;
    double observed;  // x_{sgr}
  };
  std::vector<Item> items;
  double total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double w = truth.cell_total(i);
    if (!(w > 0.0)) continue;
    const auto j = pred.find(truth.key(i));
    const double ms = j ? pred.cell_total(*j) : 0.0;
    if (!(ms > 0.0)) {
      const auto k = truth.key(i);
      throw InputError("prediction missing for occupied cell (" + truth.labels().surnames[k.surname] +
                       ", " + truth.labels().geolocations[k.geo] + ")");
    }
    items.push_back({pred.row(*j)[r] / ms, w, truth.row(i)[r]});
    total += w;
  }
  if (items.empty()) throw InputError("calibration curve needs at least one weighted cell");
  // Stable sort keeps (surname, geolocation) order among ties.
  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.p < b.p; });

  CalibrationCurve curve;
  curve.race = race;
  curve.points.push_back({0.0, 0.0});
  double cum_w = 0.0, cum_miscal = 0.0;
  std::vector<double> values;
  values.reserve(items.size());
  for (const auto& it : items) {
    cum_w += it.weight;
    // w (f - p) with f = observed / w
    cum_miscal += (it.observed - it.weight * it.p) / total;
    curve.points.push_back({cum_w / total, cum_miscal});
    values.push_back(cum_miscal);
  }
  curve.kuiper = kuiper(values);
  return curve;
}

double kuiper(std::span<const double> values) {
  double hi = 0.0, lo = 0.0;
  for (double v : values) {
    hi = std::max(hi, v);
    lo = std::min(lo, v);
  }
  return hi - lo;
}

double kuiper(const CalibrationCurve& curve) {
  if (curve.points.empty()) throw InputError("kuiper requires a nonempty curve");
  std::vector<double> values;
  for (const auto& p : curve.points) values.push_back(p.miscalibration);
  return kuiper(values);
}

}  // namespace raketab
