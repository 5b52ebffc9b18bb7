#include "raketab/raking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "parallel.hpp"
#include "raketab/kernels.hpp"

namespace raketab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double rel_dev(double achieved, double target) {
  return std::abs(achieved - target) / std::max(target, 1.0);
}

std::string cell_name(const AxisLabels& labels, CellKey k) {
  return "(" + labels.surnames[k.surname] + ", " + labels.geolocations[k.geo] + ")";
}

// Working state for one rake() call. Rows are split into fixed chunks of
// kernels::kChunkRows; every reduction is merged in chunk order.
class Sweeper {
 public:
  Sweeper(std::vector<double>& rows, std::span<const double> cell_targets, const RaceVector& race_targets,
          std::size_t threads)
      : rows_(rows),
        cell_targets_(cell_targets),
        race_targets_(race_targets),
        n_(cell_targets.size()),
        n_chunks_((n_ + kernels::kChunkRows - 1) / kernels::kChunkRows),
        k_(kernels::active()),
        pool_(threads),
        cell_sums_(n_),
        cell_factors_(n_),
        race_partials_(n_chunks_),
        gap_partials_(n_chunks_) {}

  // Measures both margin families; returns the largest relative gap.
  double measure(RaceVector& race_sums) {
    pool_.run(n_chunks_, [&](std::size_t c) {
      const auto [b, len] = chunk(c);
      race_partials_[c] = RaceVector{};
      k_.margins(rows_.data() + b * kRaceCount, len, cell_sums_.data() + b, race_partials_[c].data());
      double gap = 0.0;
      for (std::size_t i = b; i < b + len; ++i) gap = std::max(gap, rel_dev(cell_sums_[i], cell_targets_[i]));
      gap_partials_[c] = gap;
    });
    race_sums = merge_races();
    double gap = 0.0;
    for (double g : gap_partials_) gap = std::max(gap, g);
    for (std::size_t r = 0; r < kRaceCount; ++r) gap = std::max(gap, rel_dev(race_sums[r], race_targets_[r]));
    return gap;
  }

  RaceVector race_sums_only() {
    pool_.run(n_chunks_, [&](std::size_t c) {
      const auto [b, len] = chunk(c);
      race_partials_[c] = RaceVector{};
      k_.margins(rows_.data() + b * kRaceCount, len, cell_sums_.data() + b, race_partials_[c].data());
    });
    return merge_races();
  }

  // Scales race slices; leaves the new cell sums in cell_sums_.
  void scale_races(const RaceVector& factors) {
    pool_.run(n_chunks_, [&](std::size_t c) {
      const auto [b, len] = chunk(c);
      k_.scale_races(rows_.data() + b * kRaceCount, len, factors.data(), cell_sums_.data() + b);
    });
  }

  // Scales each cell to its target using the current cell_sums_.
  void scale_cells(std::vector<double>& theta_cell) {
    for (std::size_t i = 0; i < n_; ++i) {
      const double s = cell_sums_[i];
      const double f = s > 0.0 ? cell_targets_[i] / s : 1.0;
      cell_factors_[i] = f;
      if (s > 0.0) theta_cell[i] += std::log(f);
    }
    pool_.run(n_chunks_, [&](std::size_t c) {
      const auto [b, len] = chunk(c);
      k_.scale_cells(rows_.data() + b * kRaceCount, len, cell_factors_.data() + b);
    });
  }

 private:
  std::pair<std::size_t, std::size_t> chunk(std::size_t c) const {
    const std::size_t b = c * kernels::kChunkRows;
    return {b, std::min(kernels::kChunkRows, n_ - b)};
  }

  RaceVector merge_races() const {
    RaceVector out{};
    for (const auto& p : race_partials_) {
      for (std::size_t r = 0; r < kRaceCount; ++r) out[r] += p[r];
    }
    return out;
  }

  std::vector<double>& rows_;
  std::span<const double> cell_targets_;
  const RaceVector& race_targets_;
  std::size_t n_;
  std::size_t n_chunks_;
  const kernels::RowKernels& k_;
  detail::ChunkPool pool_;
  std::vector<double> cell_sums_;
  std::vector<double> cell_factors_;
  std::vector<RaceVector> race_partials_;
  std::vector<double> gap_partials_;
};

}  // namespace

void RakingConfig::validate() const {
  if (!(tolerance > 0.0)) throw InputError("raking tolerance must be > 0");
  if (max_iterations < 1) throw InputError("raking max_iterations must be >= 1");
}

RakingResult rake(const PredictionTable& base, const MarginSet& targets, const RakingConfig& config) {
  config.validate();
  if (targets.empty()) throw InputError("raking requires target margins");
  if (!base.labels().same_axes(targets.labels())) {
    throw InputError("base table and targets use different axis labels");
  }
  const auto& labels = base.labels();
  const std::size_t n = base.size();

  // Target cells that the base does not store must be zero.
  for (std::size_t j = 0; j < targets.cell_keys().size(); ++j) {
    const CellKey k = targets.cell_keys()[j];
    if (targets.cell_totals()[j] > 0.0 && !base.find(k)) {
      throw Error(ErrorKind::Infeasible,
                  "infeasible support: cell target " + cell_name(labels, k) + " has no base mass");
    }
  }

  std::vector<double> rows(base.values().begin(), base.values().end());
  std::vector<double> cell_targets(n);
  RakingResult result{base, RaceVector{}, std::vector<double>(n, 0.0), 0, 0.0};
  const RaceVector& race_targets = targets.race();

  // Zero targets zero their base mass before iterating.
  for (std::size_t i = 0; i < n; ++i) {
    cell_targets[i] = targets.cell_target(base.key(i));
    if (cell_targets[i] == 0.0) {
      std::fill_n(rows.begin() + i * kRaceCount, kRaceCount, 0.0);
      result.theta_cell[i] = kNegInf;
    }
  }
  for (std::size_t r = 0; r < kRaceCount; ++r) {
    if (race_targets[r] == 0.0) {
      for (std::size_t i = 0; i < n; ++i) rows[i * kRaceCount + r] = 0.0;
      result.theta_race[r] = kNegInf;
    }
  }

  Sweeper sweeper(rows, cell_targets, race_targets, std::max<std::size_t>(config.threads, 1));
  RaceVector race_sums;
  double gap = sweeper.measure(race_sums);

  for (std::size_t r = 0; r < kRaceCount; ++r) {
    if (race_targets[r] > 0.0 && !(race_sums[r] > 0.0)) {
      throw Error(ErrorKind::Infeasible, "infeasible support: race target " +
                                             std::string(race_display_name(kAllRaces[r])) +
                                             " has no base mass");
    }
  }
  // The pass above left raw cell sums behind; check them against the targets.
  {
    std::vector<double> tmp_sums(n);
    RaceVector ignore{};
    kernels::active().margins(rows.data(), n, tmp_sums.data(), ignore.data());
    for (std::size_t i = 0; i < n; ++i) {
      if (cell_targets[i] > 0.0 && !(tmp_sums[i] > 0.0)) {
        throw Error(ErrorKind::Infeasible, "infeasible support: cell target " +
                                               cell_name(labels, base.key(i)) + " has no base mass");
      }
    }
  }

  auto race_step = [&](const RaceVector& sums) {
    RaceVector f;
    for (std::size_t r = 0; r < kRaceCount; ++r) {
      f[r] = sums[r] > 0.0 ? race_targets[r] / sums[r] : 1.0;
      if (sums[r] > 0.0) result.theta_race[r] += std::log(f[r]);
    }
    sweeper.scale_races(f);
  };

  std::size_t sweep = 1;
  while (gap > config.tolerance) {
    if (sweep >= config.max_iterations) {
      throw NonConvergenceError("raking did not converge in " + std::to_string(config.max_iterations) +
                                    " sweeps; final margin gap " + std::to_string(gap),
                                gap, sweep);
    }
    if (config.race_first) {
      race_step(race_sums);           // leaves fresh cell sums
      sweeper.scale_cells(result.theta_cell);
    } else {
      // measure() left the current cell sums in place.
      sweeper.scale_cells(result.theta_cell);
      race_step(sweeper.race_sums_only());
    }
    gap = sweeper.measure(race_sums);
    ++sweep;
  }

  result.iterations = sweep;
  result.final_margin_gap = gap;
  result.table = PredictionTable(base.labels_ptr(),
                                 std::vector<CellKey>(base.keys().begin(), base.keys().end()),
                                 std::move(rows));
  return result;
}

double kl_divergence(const PredictionTable& m, const PredictionTable& base) {
  if (!m.labels().same_axes(base.labels())) throw InputError("KL requires shared axis labels");
  double kl = 0.0;
  double base_total = 0.0;
  for (double v : base.values()) base_total += v;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto j = base.find(m.key(i));
    for (std::size_t r = 0; r < kRaceCount; ++r) {
      const double mv = m.row(i)[r];
      const double bv = j ? base.row(*j)[r] : 0.0;
      if (mv > 0.0 && !(bv > 0.0)) throw InputError("absolute continuity violated");
      if (mv > 0.0) kl += mv * std::log(mv / bv);
      kl -= mv;
    }
  }
  return std::max(0.0, kl + base_total);
}

double margin_gap(const PredictionTable& m, const MarginSet& targets) {
  if (targets.empty()) return 0.0;
  if (!m.labels().same_axes(targets.labels())) throw InputError("margin gap requires shared axis labels");
  double gap = 0.0;
  const RaceVector achieved = m.race_totals();
  for (std::size_t r = 0; r < kRaceCount; ++r) gap = std::max(gap, rel_dev(achieved[r], targets.race()[r]));
  for (std::size_t j = 0; j < targets.cell_keys().size(); ++j) {
    const auto i = m.find(targets.cell_keys()[j]);
    gap = std::max(gap, rel_dev(i ? m.cell_total(*i) : 0.0, targets.cell_totals()[j]));
  }
  // Stored cells without a target have target zero.
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!std::binary_search(targets.cell_keys().begin(), targets.cell_keys().end(), m.key(i))) {
      gap = std::max(gap, rel_dev(m.cell_total(i), 0.0));
    }
  }
  return gap;
}

}  // namespace raketab
