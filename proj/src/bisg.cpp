#include "raketab/bisg.hpp"

#include <cmath>
#include <cstdint>

#include "raketab/error.hpp"
#include "raketab/kernels.hpp"

namespace raketab {

namespace {

void check_distribution(const RaceVector& p, const std::string& what) {
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InputError(what + " has a negative entry");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9) throw InputError(what + " does not sum to 1");
}

const FactorEntry* lookup(const FactorMap& map, std::string_view label) {
  auto it = map.find(label);
  return it == map.end() ? nullptr : &it->second;
}

// Normalizes v in place; returns false when the sum is not positive.
bool normalize(RaceVector& v) {
  const double s = race_sum(v);
  if (!(s > 0.0) || !std::isfinite(s)) return false;
  for (double& x : v) x /= s;
  return true;
}

RaceVector bisg_weights(const BisgFactors& f, const std::optional<VoterAdjustment>& adj) {
  RaceVector w{};
  for (std::size_t r = 0; r < kRaceCount; ++r) {
    // Races absent from the prior are excluded rather than producing 0/0.
    if (f.race_prior[r] > 0.0) w[r] = (adj ? adj->weight[r] : 1.0) / f.race_prior[r];
  }
  return w;
}

}  // namespace

std::optional<PredictionMethod> parse_prediction_method(std::string_view text) {
  if (text == "bisg") return PredictionMethod::Bisg;
  if (text == "geo-only") return PredictionMethod::GeoOnly;
  if (text == "surname-only") return PredictionMethod::SurnameOnly;
  return std::nullopt;
}

void BisgFactors::validate() const {
  check_distribution(race_prior, "race prior");
  for (const auto& [g, e] : race_given_geo) check_distribution(e.prob, "P(r|g) for '" + g + "'");
  for (const auto& [s, e] : race_given_surname) {
    check_distribution(e.prob, "P(r|s) for '" + s + "'");
  }
}

BisgFactors fit_factors(const ContingencyTable& labeled) {
  const double total = labeled.total();
  if (!(total > 0.0)) throw InputError("cannot fit factors on a table with zero total");

  BisgFactors out;
  const auto& labels = labeled.labels();
  const auto geo = geo_race_margin(labeled);
  for (std::size_t g = 0; g < geo.size(); ++g) {
    const double n = race_sum(geo[g]);
    if (!(n > 0.0)) continue;
    FactorEntry e{geo[g], n};
    for (double& v : e.prob) v /= n;
    out.race_given_geo.emplace(labels.geolocations[g], e);
  }
  const auto sur = surname_race_margin(labeled);
  for (std::size_t s = 0; s < sur.size(); ++s) {
    const double n = race_sum(sur[s]);
    if (!(n > 0.0)) continue;
    FactorEntry e{sur[s], n};
    for (double& v : e.prob) v /= n;
    out.race_given_surname.emplace(labels.surnames[s], e);
  }
  out.race_prior = labeled.race_totals();
  for (double& v : out.race_prior) v /= total;
  out.population = total;
  return out;
}

void derive_prior_from_geo(BisgFactors& factors) {
  RaceVector counts{};
  double total = 0.0;
  for (const auto& [g, e] : factors.race_given_geo) {
    if (!e.count) throw InputError("geolocation '" + g + "' has no population count");
    for (std::size_t r = 0; r < kRaceCount; ++r) counts[r] += e.prob[r] * *e.count;
    total += *e.count;
  }
  if (!(total > 0.0)) throw InputError("geolocation factors have zero population");
  for (double& v : counts) v /= total;
  normalize(counts);
  factors.race_prior = counts;
  factors.population = total;
}

BisgCountResult bisg_counts(const BisgFactors& factors, const LabelsPtr& labels,
                            std::span<const CellKey> support) {
  if (!labels) throw InputError("bisg_counts requires axis labels");
  if (!factors.population || !(*factors.population > 0.0)) {
    throw InputError("count-scale BISG requires the factor population total");
  }
  const auto& lab = *labels;

  // Dense per-label rows of x*_{+gr} and x*_{s+r}; absent labels stay unset.
  const std::size_t n_g = lab.geolocations.size();
  const std::size_t n_s = lab.surnames.size();
  std::vector<double> geo_rows(n_g * kRaceCount, 0.0);
  std::vector<double> sur_rows(n_s * kRaceCount, 0.0);
  std::vector<bool> has_geo(n_g, false), has_sur(n_s, false);
  for (std::size_t g = 0; g < n_g; ++g) {
    if (const auto* e = lookup(factors.race_given_geo, lab.geolocations[g])) {
      if (!e->count) throw InputError("geolocation '" + lab.geolocations[g] + "' has no count");
      for (std::size_t r = 0; r < kRaceCount; ++r) geo_rows[g * kRaceCount + r] = e->prob[r] * *e->count;
      has_geo[g] = true;
    }
  }
  for (std::size_t s = 0; s < n_s; ++s) {
    if (const auto* e = lookup(factors.race_given_surname, lab.surnames[s])) {
      if (!e->count) throw InputError("surname '" + lab.surnames[s] + "' has no count");
      for (std::size_t r = 0; r < kRaceCount; ++r) sur_rows[s * kRaceCount + r] = e->prob[r] * *e->count;
      has_sur[s] = true;
    }
  }
  RaceVector inv_race{};
  for (std::size_t r = 0; r < kRaceCount; ++r) {
    const double xr = factors.race_prior[r] * *factors.population;
    inv_race[r] = xr > 0.0 ? 1.0 / xr : 0.0;
  }

  std::vector<CellKey> keys;
  std::vector<std::uint32_t> gi, si;
  std::vector<CellReject> rejects;
  for (const CellKey& k : support) {
    if (k.geo >= n_g || k.surname >= n_s) throw InputError("support key outside the axis labels");
    if (!has_geo[k.geo] || !has_sur[k.surname]) {
      rejects.push_back({lab.surnames[k.surname], lab.geolocations[k.geo],
                         !has_geo[k.geo] ? "missing geolocation factor" : "missing surname factor"});
      continue;
    }
    if (!keys.empty() && !(keys.back() < k)) throw InputError("support keys must be sorted");
    keys.push_back(k);
    gi.push_back(k.geo);
    si.push_back(k.surname);
  }
  std::vector<double> values(keys.size() * kRaceCount);
  kernels::active().gather_products(geo_rows.data(), gi.data(), sur_rows.data(), si.data(),
                                    inv_race.data(), keys.size(), values.data());
  return {PredictionTable(labels, std::move(keys), std::move(values)), std::move(rejects)};
}

RaceVector bisg_probability(const BisgFactors& factors, std::string_view surname,
                            std::string_view geo, const std::optional<VoterAdjustment>& adjustment) {
  const auto* g = lookup(factors.race_given_geo, geo);
  if (!g) throw InputError("label not in factors: geolocation '" + std::string(geo) + "'");
  const auto* s = lookup(factors.race_given_surname, surname);
  if (!s) throw InputError("label not in factors: surname '" + std::string(surname) + "'");
  const RaceVector w = bisg_weights(factors, adjustment);
  RaceVector out;
  for (std::size_t r = 0; r < kRaceCount; ++r) out[r] = g->prob[r] * s->prob[r] * w[r];
  if (!normalize(out)) throw InputError("no admissible race for cell");
  return out;
}

VoterAdjustment voter_adjustment(const RaceVector& cps, const RaceVector& prior) {
  for (const auto* v : {&cps, &prior}) {
    double s = 0.0;
    for (double x : *v) {
      if (!(x >= 0.0) || !std::isfinite(x)) throw InputError("distribution has a negative entry");
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-6) throw InputError("distribution does not sum to 1");
  }
  VoterAdjustment out;
  bool any = false;
  for (std::size_t r = 0; r < kRaceCount; ++r) {
    if (cps[r] > 0.0 && !(prior[r] > 0.0)) {
      throw InputError("unsupported race in voter population: " +
                       std::string(race_display_name(kAllRaces[r])));
    }
    out.weight[r] = cps[r] > 0.0 ? cps[r] / prior[r] : 0.0;
    any = any || out.weight[r] > 0.0;
  }
  if (!any) throw InputError("voter adjustment has no positive weight");
  return out;
}

RaceVector baseline_geo_only(const BisgFactors& factors, std::string_view geo) {
  const auto* e = lookup(factors.race_given_geo, geo);
  if (!e) throw InputError("label not in factors: geolocation '" + std::string(geo) + "'");
  return e->prob;
}

RaceVector baseline_surname_only(const BisgFactors& factors, std::string_view surname) {
  const auto* e = lookup(factors.race_given_surname, surname);
  if (!e) throw InputError("label not in factors: surname '" + std::string(surname) + "'");
  return e->prob;
}

WeightedPrediction predict_cells(const BisgFactors& factors, const LabelsPtr& labels,
                                 std::span<const CellKey> keys, std::span<const double> cell_counts,
                                 PredictionMethod method,
                                 const std::optional<VoterAdjustment>& adjustment) {
  if (!labels) throw InputError("predict_cells requires axis labels");
  if (keys.size() != cell_counts.size()) throw InputError("cell key/count size mismatch");
  const auto& lab = *labels;
  const RaceVector bisg_w = bisg_weights(factors, adjustment);
  RaceVector single_w;
  for (std::size_t r = 0; r < kRaceCount; ++r) single_w[r] = adjustment ? adjustment->weight[r] : 1.0;

  // Resolve per-label factor rows once; the products run as one batch.
  const std::size_t n_g = lab.geolocations.size();
  const std::size_t n_s = lab.surnames.size();
  std::vector<const FactorEntry*> geo_entry(n_g), sur_entry(n_s);
  for (std::size_t g = 0; g < n_g; ++g) geo_entry[g] = lookup(factors.race_given_geo, lab.geolocations[g]);
  for (std::size_t s = 0; s < n_s; ++s) sur_entry[s] = lookup(factors.race_given_surname, lab.surnames[s]);

  std::vector<double> geo_rows(n_g * kRaceCount, 0.0), sur_rows(n_s * kRaceCount, 0.0);
  for (std::size_t g = 0; g < n_g; ++g) {
    if (geo_entry[g]) std::copy(geo_entry[g]->prob.begin(), geo_entry[g]->prob.end(), geo_rows.begin() + g * kRaceCount);
  }
  for (std::size_t s = 0; s < n_s; ++s) {
    if (sur_entry[s]) std::copy(sur_entry[s]->prob.begin(), sur_entry[s]->prob.end(), sur_rows.begin() + s * kRaceCount);
  }

  std::vector<CellKey> out_keys;
  std::vector<double> out_counts;
  std::vector<std::uint32_t> gi, si;
  std::vector<CellReject> rejects;
  // Fallback cells are computed directly; they carry an index into out_keys.
  std::vector<std::pair<std::size_t, RaceVector>> direct;

  auto reject = [&](const CellKey& k, const char* reason) {
    rejects.push_back({lab.surnames[k.surname], lab.geolocations[k.geo], reason});
  };
  auto weighted = [](RaceVector p, const RaceVector& w) {
    for (std::size_t r = 0; r < kRaceCount; ++r) p[r] *= w[r];
    return p;
  };

  for (std::size_t i = 0; i < keys.size(); ++i) {
    const CellKey k = keys[i];
    if (k.geo >= n_g || k.surname >= n_s) throw InputError("cell key outside the axis labels");
    if (!(cell_counts[i] >= 0.0)) throw InputError("cell counts must be >= 0");
    const FactorEntry* ge = geo_entry[k.geo];
    const FactorEntry* se = sur_entry[k.surname];
    const std::size_t slot = out_keys.size();
    switch (method) {
      case PredictionMethod::GeoOnly:
        if (!ge) { reject(k, "missing geolocation factor"); continue; }
        direct.emplace_back(slot, weighted(ge->prob, single_w));
        break;
      case PredictionMethod::SurnameOnly:
        if (!se) { reject(k, "missing surname factor"); continue; }
        direct.emplace_back(slot, weighted(se->prob, single_w));
        break;
      case PredictionMethod::Bisg:
        if (!ge) { reject(k, "missing geolocation factor"); continue; }
        if (!se) {
          reject(k, "missing surname factor; geolocation-only fallback");
          direct.emplace_back(slot, weighted(ge->prob, single_w));
        } else {
          gi.push_back(k.geo);
          si.push_back(k.surname);
        }
        break;
    }
    out_keys.push_back(k);
    out_counts.push_back(cell_counts[i]);
  }

  // Batch products for the BISG cells, scattered into their slots.
  std::vector<double> products(gi.size() * kRaceCount);
  kernels::active().gather_products(geo_rows.data(), gi.data(), sur_rows.data(), si.data(),
                                    bisg_w.data(), gi.size(), products.data());

  std::vector<double> values(out_keys.size() * kRaceCount, 0.0);
  std::size_t next_direct = 0, next_product = 0;
  for (std::size_t slot = 0; slot < out_keys.size(); ++slot) {
    RaceVector p;
    if (next_direct < direct.size() && direct[next_direct].first == slot) {
      p = direct[next_direct++].second;
    } else {
      std::copy_n(products.begin() + next_product * kRaceCount, kRaceCount, p.begin());
      ++next_product;
      if (race_sum(p) <= 0.0) {
        const CellKey& k = out_keys[slot];
        reject(k, "no admissible race for cell; geolocation-only fallback");
        p = weighted(geo_entry[k.geo]->prob, single_w);
      }
    }
    if (!normalize(p)) {
      const CellKey& k = out_keys[slot];
      throw InputError("no admissible race for cell (" + lab.surnames[k.surname] + ", " +
                       lab.geolocations[k.geo] + ")");
    }
    for (std::size_t r = 0; r < kRaceCount; ++r) values[slot * kRaceCount + r] = out_counts[slot] * p[r];
  }
  return {PredictionTable(labels, std::move(out_keys), std::move(values)), std::move(rejects)};
}

}  // namespace raketab
