#include "raketab/table.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "raketab/error.hpp"

namespace raketab {

std::optional<Race> parse_race_key(std::string_view text) {
  for (Race r : kAllRaces) {
    if (text == race_key(r) || text == race_display_name(r)) return r;
  }
  return std::nullopt;
}

namespace {

std::optional<std::uint32_t> sorted_index(const std::vector<std::string>& list,
                                          std::string_view value) {
  auto it = std::lower_bound(list.begin(), list.end(), value,
                             [](const std::string& a, std::string_view b) { return a < b; });
  if (it == list.end() || *it != value) return std::nullopt;
  return static_cast<std::uint32_t>(it - list.begin());
}

void check_axis(const std::vector<std::string>& list, const char* name) {
  if (list.empty()) throw InputError(std::string("axis '") + name + "' has no labels");
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (list[i].empty()) throw InputError(std::string("empty label on axis '") + name + "'");
    if (i > 0 && !(list[i - 1] < list[i])) {
      throw InputError(std::string("labels on axis '") + name +
                       "' must be sorted and unique near '" + list[i] + "'");
    }
  }
}

}  // namespace

std::optional<std::uint32_t> AxisLabels::surname_index(std::string_view surname) const {
  return sorted_index(surnames, surname);
}

std::optional<std::uint32_t> AxisLabels::geo_index(std::string_view geo) const {
  return sorted_index(geolocations, geo);
}

void AxisLabels::validate() const {
  check_axis(surnames, "surname");
  check_axis(geolocations, "geolocation");
}

CellTable::CellTable(LabelsPtr labels, std::vector<CellKey> keys, std::vector<double> values)
    : labels_(std::move(labels)), keys_(std::move(keys)), values_(std::move(values)) {
  if (!labels_) throw InputError("table requires axis labels");
  labels_->validate();
  if (values_.size() != keys_.size() * kRaceCount) {
    throw InputError("table value buffer does not match its key count");
  }
  const auto n_s = labels_->surnames.size();
  const auto n_g = labels_->geolocations.size();
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    if (keys_[i].surname >= n_s || keys_[i].geo >= n_g) {
      throw InputError("cell key outside the axis labels");
    }
    if (i > 0 && !(keys_[i - 1] < keys_[i])) {
      throw InputError("cell keys must be strictly increasing");
    }
  }
  for (double v : values_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("table counts must be finite and >= 0");
  }
}

RaceVector CellTable::row_vector(std::size_t i) const {
  RaceVector out;
  auto r = row(i);
  std::copy(r.begin(), r.end(), out.begin());
  return out;
}

std::optional<std::size_t> CellTable::find(CellKey key) const {
  auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
  if (it == keys_.end() || *it != key) return std::nullopt;
  return static_cast<std::size_t>(it - keys_.begin());
}

double CellTable::cell_total(std::size_t i) const {
  double s = 0.0;
  for (double v : row(i)) s += v;
  return s;
}

double CellTable::total() const {
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) s += cell_total(i);
  return s;
}

RaceVector CellTable::race_totals() const {
  RaceVector out{};
  for (std::size_t i = 0; i < size(); ++i) {
    auto r = row(i);
    for (std::size_t k = 0; k < kRaceCount; ++k) out[k] += r[k];
  }
  return out;
}

std::optional<RaceVector> PredictionTable::conditional(std::size_t i) const {
  const double s = cell_total(i);
  if (!(s > 0.0)) return std::nullopt;
  RaceVector out;
  auto r = row(i);
  for (std::size_t k = 0; k < kRaceCount; ++k) out[k] = r[k] / s;
  return out;
}

void TableBuilder::add(std::string_view surname, std::string_view geo, const RaceVector& weight) {
  if (surname.empty() || geo.empty()) throw InputError("surname and geolocation must be nonempty");
  for (double w : weight) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InputError("weights must be finite and >= 0");
  }
  auto& cell = cells_[{std::string(surname), std::string(geo)}];
  for (std::size_t k = 0; k < kRaceCount; ++k) cell[k] += weight[k];
}

ContingencyTable TableBuilder::build(std::map<std::string, std::string> regions) const {
  if (cells_.empty()) throw InputError("empty table");
  auto labels = std::make_shared<AxisLabels>();
  for (const auto& [key, _] : cells_) {
    labels->surnames.push_back(key.first);
    labels->geolocations.push_back(key.second);
  }
  for (auto* axis : {&labels->surnames, &labels->geolocations}) {
    std::sort(axis->begin(), axis->end());
    axis->erase(std::unique(axis->begin(), axis->end()), axis->end());
  }
  labels->regions = std::move(regions);

  std::vector<CellKey> keys;
  std::vector<double> values;
  keys.reserve(cells_.size());
  values.reserve(cells_.size() * kRaceCount);
  // std::map iterates in (surname, geo) string order, which is key order.
  for (const auto& [key, row] : cells_) {
    keys.push_back({*labels->surname_index(key.first), *labels->geo_index(key.second)});
    values.insert(values.end(), row.begin(), row.end());
  }
  return ContingencyTable(std::move(labels), std::move(keys), std::move(values));
}

ContingencyTable build_table(std::span<const WeightedRecord> records) {
  if (records.empty()) throw InputError("empty table");
  TableBuilder builder;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    for (double w : rec.weight) {
      if (!(w >= 0.0) || !std::isfinite(w)) {
        throw InputError("negative or non-finite weight in record " + std::to_string(i));
      }
    }
    if (rec.surname.empty() || rec.geolocation.empty()) {
      throw InputError("empty surname or geolocation in record " + std::to_string(i));
    }
    builder.add(rec.surname, rec.geolocation, rec.weight);
  }
  return builder.build();
}

// ---------------------------------------------------------------------------
// Margins

namespace {

std::vector<Axes> axis_order(Axes set) {
  std::vector<Axes> out;
  for (Axes a : {Axes::Surname, Axes::Geo, Axes::Race}) {
    if (has_axis(set, a)) out.push_back(a);
  }
  return out;
}

std::size_t flat_index(std::span<const std::size_t> shape, std::span<const std::size_t> index) {
  std::size_t flat = 0;
  for (std::size_t d = 0; d < shape.size(); ++d) flat = flat * shape[d] + index[d];
  return flat;
}

}  // namespace

double DenseMargin::total() const {
  return std::accumulate(data.begin(), data.end(), 0.0);
}

double DenseMargin::at(std::span<const std::size_t> index) const {
  if (index.size() != shape.size()) throw InputError("margin index rank mismatch");
  for (std::size_t d = 0; d < shape.size(); ++d) {
    if (index[d] >= shape[d]) throw InputError("margin index out of range");
  }
  return data[flat_index(shape, index)];
}

DenseMargin margin(const CellTable& table, Axes retain) {
  if (retain == Axes::None || static_cast<unsigned>(retain) > static_cast<unsigned>(Axes::All)) {
    throw InputError("margin requires a nonempty subset of {s,g,r}");
  }
  DenseMargin out;
  out.axes = retain;
  for (Axes a : axis_order(retain)) {
    switch (a) {
      case Axes::Surname: out.shape.push_back(table.labels().surnames.size()); break;
      case Axes::Geo: out.shape.push_back(table.labels().geolocations.size()); break;
      default: out.shape.push_back(kRaceCount); break;
    }
  }
  std::size_t n = 1;
  for (auto d : out.shape) n *= d;
  out.data.assign(n, 0.0);

  const bool keep_s = has_axis(retain, Axes::Surname);
  const bool keep_g = has_axis(retain, Axes::Geo);
  const bool keep_r = has_axis(retain, Axes::Race);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto key = table.key(i);
    auto row = table.row(i);
    for (std::size_t r = 0; r < kRaceCount; ++r) {
      idx.clear();
      if (keep_s) idx.push_back(key.surname);
      if (keep_g) idx.push_back(key.geo);
      if (keep_r) idx.push_back(r);
      out.data[flat_index(out.shape, idx)] += row[r];
    }
  }
  return out;
}

DenseMargin margin(const DenseMargin& dense, Axes retain) {
  if (retain == Axes::None ||
      (static_cast<unsigned>(retain) & ~static_cast<unsigned>(dense.axes)) != 0) {
    throw InputError("margin axes must be a nonempty subset of the source axes");
  }
  const auto src_axes = axis_order(dense.axes);
  DenseMargin out;
  out.axes = retain;
  std::vector<bool> keep(src_axes.size());
  for (std::size_t d = 0; d < src_axes.size(); ++d) {
    keep[d] = has_axis(retain, src_axes[d]);
    if (keep[d]) out.shape.push_back(dense.shape[d]);
  }
  std::size_t n = 1;
  for (auto d : out.shape) n *= d;
  out.data.assign(n, 0.0);

  std::vector<std::size_t> src_idx(src_axes.size(), 0);
  std::vector<std::size_t> dst_idx;
  for (std::size_t flat = 0; flat < dense.data.size(); ++flat) {
    std::size_t rem = flat;
    for (std::size_t d = src_axes.size(); d-- > 0;) {
      src_idx[d] = rem % dense.shape[d];
      rem /= dense.shape[d];
    }
    dst_idx.clear();
    for (std::size_t d = 0; d < src_axes.size(); ++d) {
      if (keep[d]) dst_idx.push_back(src_idx[d]);
    }
    out.data[flat_index(out.shape, dst_idx)] += dense.data[flat];
  }
  return out;
}

std::vector<RaceVector> geo_race_margin(const CellTable& table) {
  std::vector<RaceVector> out(table.labels().geolocations.size(), RaceVector{});
  for (std::size_t i = 0; i < table.size(); ++i) {
    auto row = table.row(i);
    auto& acc = out[table.key(i).geo];
    for (std::size_t r = 0; r < kRaceCount; ++r) acc[r] += row[r];
  }
  return out;
}

std::vector<RaceVector> surname_race_margin(const CellTable& table) {
  std::vector<RaceVector> out(table.labels().surnames.size(), RaceVector{});
  for (std::size_t i = 0; i < table.size(); ++i) {
    auto row = table.row(i);
    auto& acc = out[table.key(i).surname];
    for (std::size_t r = 0; r < kRaceCount; ++r) acc[r] += row[r];
  }
  return out;
}

RaceVector conditional_race(const RaceVector& cell) {
  const double s = race_sum(cell);
  if (!(s > 0.0) || !std::isfinite(s)) throw InputError("empty cell conditional");
  RaceVector out;
  for (std::size_t r = 0; r < kRaceCount; ++r) out[r] = cell[r] / s;
  return out;
}

// ---------------------------------------------------------------------------

MarginSet::MarginSet(LabelsPtr labels, RaceVector race, std::vector<CellKey> keys,
                     std::vector<double> cell_totals)
    : labels_(std::move(labels)), race_(race), keys_(std::move(keys)), cells_(std::move(cell_totals)) {
  if (!labels_) throw InputError("margin set requires axis labels");
  if (keys_.size() != cells_.size()) throw InputError("margin set key/value size mismatch");
  for (double v : race_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("race targets must be finite and >= 0");
  }
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    if (!(cells_[i] >= 0.0) || !std::isfinite(cells_[i])) {
      throw InputError("cell targets must be finite and >= 0");
    }
    if (keys_[i].surname >= labels_->surnames.size() ||
        keys_[i].geo >= labels_->geolocations.size()) {
      throw InputError("cell target key outside the axis labels");
    }
    if (i > 0 && !(keys_[i - 1] < keys_[i])) throw InputError("cell target keys must be sorted");
  }
  const double race_total = race_sum(race_);
  const double cell_total = std::accumulate(cells_.begin(), cells_.end(), 0.0);
  const double scale = std::max(std::abs(race_total), std::abs(cell_total));
  if (std::abs(race_total - cell_total) > 1e-9 * scale) {
    throw InputError("inconsistent targets: race total " + std::to_string(race_total) +
                     " != cell total " + std::to_string(cell_total));
  }
}

MarginSet MarginSet::from_table(const CellTable& table) {
  std::vector<CellKey> keys(table.keys().begin(), table.keys().end());
  std::vector<double> cells(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) cells[i] = table.cell_total(i);
  return MarginSet(table.labels_ptr(), table.race_totals(), std::move(keys), std::move(cells));
}

double MarginSet::cell_target(CellKey key) const {
  auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
  if (it == keys_.end() || *it != key) return 0.0;
  return cells_[static_cast<std::size_t>(it - keys_.begin())];
}

}  // namespace raketab
