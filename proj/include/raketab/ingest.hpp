#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "raketab/bisg.hpp"
#include "raketab/race.hpp"
#include "raketab/table.hpp"

namespace raketab {

// Canonical file headers. Readers require these exactly.
inline constexpr std::string_view kSurnameFactorHeader =
    "surname,count,p_aian,p_api,p_black,p_hispanic,p_white,p_other";
inline constexpr std::string_view kGeoFactorHeader = "geoid,count,aian,api,black,hispanic,white,other";
inline constexpr std::string_view kVoterFileHeader = "voter_id,surname,geoid,race,active";
inline constexpr std::string_view kTableHeader = "surname,geoid,aian,api,black,hispanic,white,other";
inline constexpr std::string_view kCellCountHeader = "surname,geoid,count";
inline constexpr std::string_view kRegionHeader = "geoid,region";
inline constexpr std::string_view kRejectHeader = "line,reason";

/// A row dropped while parsing, by 1-based file line.
struct RejectRow {
  std::size_t line = 0;
  std::string reason;
};

void write_rejects(std::ostream& out, std::span<const RejectRow> rejects);

/// Shortest decimal text that reads back to the same double.
std::string format_number(double value);

/// Uppercased, whitespace-trimmed surname.
std::string normalize_surname(std::string_view raw);

// ---------------------------------------------------------------------------
// Factor files

struct FactorFile {
  FactorMap entries;
  std::vector<RejectRow> rejects;
};

/// Probabilities summing within [0.98, 1.02] are renormalized; other rows are
/// rejected. More than 10% rejected rows is a hard error.
FactorFile parse_surname_factors(std::istream& in);
/// P(r|g) = race counts / row total; zero-total rows are rejected and a
/// repeated geoid is an error.
FactorFile parse_geo_factors(std::istream& in);

void write_surname_factors(std::ostream& out, const FactorMap& entries);
void write_geo_factors(std::ostream& out, const FactorMap& entries);

/// Combines parsed factor files; the race prior and population come from the
/// geolocation counts.
BisgFactors assemble_factors(FactorMap surnames, FactorMap geos);

// ---------------------------------------------------------------------------
// Voter files

struct VoterRecord {
  std::string voter_id;
  std::string surname;
  std::string geolocation;
  std::optional<Race> race;  // nullopt: race not answered
  bool active = true;

  bool race_missing() const { return !race.has_value(); }
};

/// Source-category text -> race. A mapped nullopt marks an explicit
/// "not answered" code. Strings absent from the map are errors.
struct CategoryMapping {
  std::string source;
  std::map<std::string, std::optional<Race>, std::less<>> map;

  /// Empty text always means not answered.
  std::optional<Race> resolve(std::string_view text) const;
};

/// Lowercase keys and display names ("aian", "AIAN", ...).
CategoryMapping canonical_mapping();
/// Florida race codes 1-9 and their labels; multi-racial goes to Other.
CategoryMapping florida_mapping();
/// North Carolina "<race>/<ethnicity>" pairs, e.g. "W/NL", "B/HL".
/// Hispanic ethnicity wins over race; multi-racial goes to Other.
CategoryMapping north_carolina_mapping();
/// "canonical", "florida" or "north-carolina".
CategoryMapping mapping_by_name(std::string_view name);

std::vector<VoterRecord> parse_voter_file(std::istream& in, const CategoryMapping& mapping);
void write_voter_file(std::ostream& out, std::span<const VoterRecord> records);

/// Drops inactive and race-missing records.
std::vector<VoterRecord> filter_answered_active(std::span<const VoterRecord> records);

struct AggregatedVoters {
  /// Labeled counts; cells holding only unlabeled voters have a zero row.
  ContingencyTable table;
  /// x_{sg+} over every included record, aligned with table.keys().
  std::vector<double> cell_counts;
};

/// With require_race, inactive and race-missing records are dropped first.
AggregatedVoters aggregate_voters(std::span<const VoterRecord> records, bool require_race);

/// Draws a subsample whose race distribution matches `target`.
/// N = floor(min_r count_r / target_r); quotas by largest remainder of
/// N * target; sampling without replacement; output order shuffled.
std::vector<VoterRecord> subsample_to_margin(std::span<const VoterRecord> records,
                                             const RaceVector& target, std::uint64_t seed);

/// Largest-remainder rounding of n * target (ties go to the lower race index).
std::array<std::size_t, kRaceCount> largest_remainder_quotas(std::size_t n, const RaceVector& target);

// ---------------------------------------------------------------------------
// CPS categories

/// Keys look like "NH:White", "NH:Black+White", "H:Asian". Race components
/// are White, Black, AIAN, Asian and HPI, joined by '+' in any order.
RaceVector map_cps_categories(const std::map<std::string, double>& histogram);
/// Every documented key, one per Hispanic flag and nonempty component set.
std::vector<std::string> cps_category_keys();

// ---------------------------------------------------------------------------
// Race distributions (JSON) and tables (CSV)

/// {"race_distribution": {"aian": ..., ..., "other": ...}}
RaceVector read_race_distribution(std::istream& in);
void write_race_distribution(std::ostream& out, const RaceVector& distribution);

ContingencyTable read_table_csv(std::istream& in);
void write_table_csv(std::ostream& out, const CellTable& table);

struct CellCounts {
  LabelsPtr labels;
  std::vector<CellKey> keys;
  std::vector<double> counts;
};
CellCounts read_cell_counts(std::istream& in);
void write_cell_counts(std::ostream& out, const LabelsPtr& labels, std::span<const CellKey> keys,
                       std::span<const double> counts);

std::map<std::string, std::string> read_regions(std::istream& in);

/// Re-keys a table onto `labels`, which must contain every label used by a
/// stored cell.
ContingencyTable realign(const CellTable& table, const LabelsPtr& labels);
PredictionTable as_prediction(const CellTable& table);

/// Sorted union of two label sets; regions are merged.
LabelsPtr merge_labels(const AxisLabels& a, const AxisLabels& b);

}  // namespace raketab
