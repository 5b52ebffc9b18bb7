#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "raketab/race.hpp"

namespace raketab {

/// Index pair addressing one (surname, geolocation) cell.
struct CellKey {
  std::uint32_t surname = 0;
  std::uint32_t geo = 0;

  auto operator<=>(const CellKey&) const = default;
};

/// Axis labels. Both label lists are sorted and unique, so cell keys order
/// lexicographically by (surname, geolocation) string.
struct AxisLabels {
  std::vector<std::string> surnames;
  std::vector<std::string> geolocations;
  /// Optional geolocation -> region group.
  std::map<std::string, std::string> regions;

  std::optional<std::uint32_t> surname_index(std::string_view surname) const;
  std::optional<std::uint32_t> geo_index(std::string_view geo) const;

  /// Throws InputError when a list is empty, unsorted, or has duplicates.
  void validate() const;

  bool same_axes(const AxisLabels& other) const {
    return surnames == other.surnames && geolocations == other.geolocations;
  }
};

using LabelsPtr = std::shared_ptr<const AxisLabels>;

/// Sparse (s,g) -> 6-vector storage. Rows are contiguous (AoS, six doubles
/// per stored cell) and keys are strictly increasing. Immutable once built.
class CellTable {
 public:
  CellTable(LabelsPtr labels, std::vector<CellKey> keys, std::vector<double> values);

  const AxisLabels& labels() const { return *labels_; }
  const LabelsPtr& labels_ptr() const { return labels_; }

  std::size_t size() const { return keys_.size(); }
  bool empty() const { return keys_.empty(); }

  std::span<const CellKey> keys() const { return keys_; }
  const CellKey& key(std::size_t i) const { return keys_[i]; }

  /// Flat row-major values, size() * kRaceCount entries.
  std::span<const double> values() const { return values_; }
  std::span<const double, kRaceCount> row(std::size_t i) const {
    return std::span<const double, kRaceCount>(values_.data() + i * kRaceCount, kRaceCount);
  }
  RaceVector row_vector(std::size_t i) const;

  /// Position of a stored cell; nullopt means the cell is exactly zero.
  std::optional<std::size_t> find(CellKey key) const;

  double cell_total(std::size_t i) const;
  double total() const;
  RaceVector race_totals() const;

 protected:
  LabelsPtr labels_;
  std::vector<CellKey> keys_;
  std::vector<double> values_;
};

/// Known three-way counts x_{sgr}. Counts are real valued and nonnegative.
class ContingencyTable : public CellTable {
 public:
  using CellTable::CellTable;
};

/// Predicted counts m_{sgr} on the count scale.
class PredictionTable : public CellTable {
 public:
  using CellTable::CellTable;

  /// Conditional p(r | s, g) of stored cell i; nullopt for zero-sum cells.
  std::optional<RaceVector> conditional(std::size_t i) const;
};

/// Labeled input record for build_table.
struct WeightedRecord {
  std::string surname;
  std::string geolocation;
  RaceVector weight{};
};

/// Accumulates weights by label, then builds a table with sorted labels.
class TableBuilder {
 public:
  /// Throws InputError on empty labels or negative / non-finite weights.
  void add(std::string_view surname, std::string_view geo, const RaceVector& weight);

  bool empty() const { return cells_.empty(); }

  ContingencyTable build(std::map<std::string, std::string> regions = {}) const;

 private:
  std::map<std::pair<std::string, std::string>, RaceVector> cells_;
};

ContingencyTable build_table(std::span<const WeightedRecord> records);

/// Bitmask of retained axes for margin().
enum class Axes : unsigned { None = 0, Surname = 1, Geo = 2, Race = 4, All = 7 };

constexpr Axes operator|(Axes a, Axes b) {
  return static_cast<Axes>(static_cast<unsigned>(a) | static_cast<unsigned>(b));
}
constexpr bool has_axis(Axes set, Axes axis) {
  return (static_cast<unsigned>(set) & static_cast<unsigned>(axis)) != 0;
}

/// Dense array over the retained axes, laid out row-major in (s, g, r) order.
struct DenseMargin {
  Axes axes = Axes::None;
  std::vector<std::size_t> shape;
  std::vector<double> data;

  double total() const;
  double at(std::span<const std::size_t> index) const;
};

/// Sums the table over every axis not in `retain`.
DenseMargin margin(const CellTable& table, Axes retain);
/// Sums a dense margin further down to `retain`, which must be a subset.
DenseMargin margin(const DenseMargin& dense, Axes retain);

/// x_{+gr} as one RaceVector per geolocation index.
std::vector<RaceVector> geo_race_margin(const CellTable& table);
/// x_{s+r} as one RaceVector per surname index.
std::vector<RaceVector> surname_race_margin(const CellTable& table);

/// cell / sum(cell). Throws InputError("empty cell conditional") on zero sum.
RaceVector conditional_race(const RaceVector& cell);

/// Target margins for raking: race totals x_{++r} and cell totals x_{sg+}
/// keyed against a fixed set of axis labels.
class MarginSet {
 public:
  /// Empty target set (no race or cell entries).
  MarginSet() = default;
  MarginSet(LabelsPtr labels, RaceVector race, std::vector<CellKey> keys,
            std::vector<double> cell_totals);

  static MarginSet from_table(const CellTable& table);

  const AxisLabels& labels() const { return *labels_; }
  const LabelsPtr& labels_ptr() const { return labels_; }
  const RaceVector& race() const { return race_; }
  std::span<const CellKey> cell_keys() const { return keys_; }
  std::span<const double> cell_totals() const { return cells_; }
  /// Target for an (s,g) pair; absent pairs have target zero.
  double cell_target(CellKey key) const;
  bool empty() const { return labels_ == nullptr; }

 private:
  LabelsPtr labels_;
  RaceVector race_{};
  std::vector<CellKey> keys_;
  std::vector<double> cells_;
};

}  // namespace raketab
