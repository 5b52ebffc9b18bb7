#include "raketab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "raketab/error.hpp"
#include "raketab/rng.hpp"

namespace raketab {

namespace {

std::vector<std::string> make_labels(char prefix, std::size_t n) {
  const std::size_t width = std::to_string(n - 1).size();
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string digits = std::to_string(i);
    out.push_back(std::string(1, prefix) + std::string(width - digits.size(), '0') + digits);
  }
  return out;
}

// Weights uniform on [0.05, 1), normalized.
std::vector<double> draw_distribution(Rng& rng, std::size_t n) {
  std::vector<double> w(n);
  double s = 0.0;
  for (double& v : w) {
    v = 0.05 + 0.95 * rng.uniform();
    s += v;
  }
  for (double& v : w) v /= s;
  return w;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_surnames < 2 || n_geos < 2) throw InputError("synth: axis sizes must be at least 2");
  if (!(dependence >= 0.0 && dependence <= 1.0)) throw InputError("synth: dependence must lie in [0, 1]");
  if (!(total_population >= 1.0) || !std::isfinite(total_population)) {
    throw InputError("synth: total population must be at least 1");
  }
  if (multinomial && total_population != std::floor(total_population)) {
    throw InputError("synth: multinomial mode needs an integer population");
  }
  for (double p : race_mix) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InputError("synth: race mix entries must be >= 0");
  }
  if (std::abs(race_sum(race_mix) - 1.0) > 1e-9) throw InputError("synth: race mix must sum to 1");
}

ContingencyTable generate(const SynthConfig& config) {
  config.validate();
  const std::size_t ns = config.n_surnames, ng = config.n_geos;
  Rng rng(config.seed);

  std::vector<std::vector<double>> p_s(kRaceCount), p_g(kRaceCount);
  for (std::size_t r = 0; r < kRaceCount; ++r) {
    p_s[r] = draw_distribution(rng, ns);
    p_g[r] = draw_distribution(rng, ng);
  }

  std::vector<double> dense(ns * ng * kRaceCount, 0.0);
  const double d = config.dependence;
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t g = 0; g < ng; ++g) {
      for (std::size_t r = 0; r < kRaceCount; ++r) {
        const double diag = g == (s + r) % ng ? 1.0 : 0.0;
        const double mix = (1.0 - d) * p_g[r][g] + d * diag;
        dense[(s * ng + g) * kRaceCount + r] = config.race_mix[r] * p_s[r][s] * mix;
      }
    }
  }

  if (config.multinomial) {
    std::vector<double> cdf(dense.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < dense.size(); ++k) cdf[k] = acc += dense[k];
    std::vector<double> counts(dense.size(), 0.0);
    const auto draws = static_cast<std::uint64_t>(config.total_population);
    for (std::uint64_t i = 0; i < draws; ++i) {
      const double u = rng.uniform() * acc;
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      if (it == cdf.end()) --it;
      // Skip zero-probability slots that share the same cumulative value.
      std::size_t k = static_cast<std::size_t>(it - cdf.begin());
      while (dense[k] == 0.0 && k + 1 < dense.size()) ++k;
      counts[k] += 1.0;
    }
    dense = std::move(counts);
  } else {
    for (double& v : dense) v *= config.total_population;
  }

  auto labels = std::make_shared<AxisLabels>();
  labels->surnames = make_labels('S', ns);
  labels->geolocations = make_labels('G', ng);
  std::vector<CellKey> keys;
  std::vector<double> values;
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t g = 0; g < ng; ++g) {
      const double* row = dense.data() + (s * ng + g) * kRaceCount;
      double total = 0.0;
      for (std::size_t r = 0; r < kRaceCount; ++r) total += row[r];
      if (!(total > 0.0)) continue;
      keys.push_back({static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(g)});
      values.insert(values.end(), row, row + kRaceCount);
    }
  }
  return ContingencyTable(std::move(labels), std::move(keys), std::move(values));
}

std::pair<BisgFactors, ContingencyTable> split_factors_and_truth(const ContingencyTable& table) {
  return {fit_factors(table), table};
}

}  // namespace raketab
