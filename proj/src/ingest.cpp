#include "raketab/ingest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "csv.hpp"
#include "raketab/error.hpp"
#include "raketab/rng.hpp"

namespace raketab {

using detail::LineReader;
using detail::parse_double;
using detail::split_csv;
using detail::trim;

namespace {

std::string at_line(std::size_t line) { return " (line " + std::to_string(line) + ")"; }

void expect_header(LineReader& reader, std::string_view header, const char* what) {
  std::string line;
  if (!reader.next(line)) throw InputError(std::string(what) + ": missing header");
  std::string_view view = line;
  if (view.substr(0, 3) == "\xEF\xBB\xBF") view.remove_prefix(3);
  if (trim(view) != header) {
    throw InputError(std::string(what) + ": expected header '" + std::string(header) + "'");
  }
}

bool blank(std::string_view line) { return trim(line).empty(); }

std::optional<double> parse_nonnegative(std::string_view text) {
  auto v = parse_double(text);
  if (!v || !std::isfinite(*v) || *v < 0.0) return std::nullopt;
  return v;
}

void enforce_reject_ratio(const FactorFile& f, std::size_t rows, const char* what) {
  if (rows > 0 && static_cast<double>(f.rejects.size()) > 0.1 * static_cast<double>(rows)) {
    throw InputError(std::string(what) + ": " + std::to_string(f.rejects.size()) + " of " +
                     std::to_string(rows) + " rows rejected (more than 10%)");
  }
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::optional<bool> parse_active(std::string_view text) {
  const std::string t = lower(trim(text));
  if (t == "1" || t == "true" || t == "yes" || t == "a" || t == "act" || t == "active") return true;
  if (t == "0" || t == "false" || t == "no" || t == "i" || t == "ina" || t == "inactive") return false;
  return std::nullopt;
}

}  // namespace

void write_rejects(std::ostream& out, std::span<const RejectRow> rejects) {
  out << kRejectHeader << '\n';
  for (const auto& r : rejects) out << r.line << ',' << detail::quote_csv(r.reason) << '\n';
}

std::string format_number(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw InputError("cannot format number");
  return std::string(buf.data(), ptr);
}

std::string normalize_surname(std::string_view raw) {
  std::string out(trim(raw));
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

// ---------------------------------------------------------------------------
// Factor files

FactorFile parse_surname_factors(std::istream& in) {
  LineReader reader(in);
  expect_header(reader, kSurnameFactorHeader, "surname factors");
  FactorFile out;
  std::string line;
  std::size_t rows = 0;
  while (reader.next(line)) {
    if (blank(line)) continue;
    ++rows;
    const std::size_t ln = reader.line_no();
    auto fields = split_csv(line);
    if (!fields || fields->size() != 8) {
      out.rejects.push_back({ln, "expected 8 fields"});
      continue;
    }
    const std::string surname = normalize_surname((*fields)[0]);
    auto count = parse_nonnegative((*fields)[1]);
    RaceVector p{};
    bool ok = !surname.empty() && count.has_value();
    for (std::size_t r = 0; ok && r < kRaceCount; ++r) {
      auto v = parse_nonnegative((*fields)[2 + r]);
      ok = v.has_value();
      if (ok) p[r] = *v;
    }
    if (!ok) {
      out.rejects.push_back({ln, "malformed surname, count or probability"});
      continue;
    }
    const double s = race_sum(p);
    if (s < 0.98 || s > 1.02) {
      out.rejects.push_back({ln, "probabilities sum to " + format_number(s)});
      continue;
    }
    for (double& v : p) v /= s;
    if (out.entries.contains(surname)) {
      out.rejects.push_back({ln, "duplicate surname " + surname});
      continue;
    }
    out.entries.emplace(surname, FactorEntry{p, *count});
  }
  enforce_reject_ratio(out, rows, "surname factors");
  return out;
}

FactorFile parse_geo_factors(std::istream& in) {
  LineReader reader(in);
  expect_header(reader, kGeoFactorHeader, "geolocation factors");
  FactorFile out;
  std::string line;
  std::size_t rows = 0;
  while (reader.next(line)) {
    if (blank(line)) continue;
    ++rows;
    const std::size_t ln = reader.line_no();
    auto fields = split_csv(line);
    if (!fields || fields->size() != 8) {
      out.rejects.push_back({ln, "expected 8 fields"});
      continue;
    }
    const std::string geoid(trim((*fields)[0]));
    auto count = parse_nonnegative((*fields)[1]);
    RaceVector c{};
    bool ok = !geoid.empty() && count.has_value();
    for (std::size_t r = 0; ok && r < kRaceCount; ++r) {
      auto v = parse_nonnegative((*fields)[2 + r]);
      ok = v.has_value();
      if (ok) c[r] = *v;
    }
    if (!ok) {
      out.rejects.push_back({ln, "malformed geoid or count"});
      continue;
    }
    if (out.entries.contains(geoid)) throw InputError("duplicate geolocation '" + geoid + "'" + at_line(ln));
    const double total = race_sum(c);
    if (!(total > 0.0) || !(*count > 0.0)) {
      out.rejects.push_back({ln, "zero total for geoid " + geoid});
      continue;
    }
    for (double& v : c) v /= total;
    out.entries.emplace(geoid, FactorEntry{c, *count});
  }
  enforce_reject_ratio(out, rows, "geolocation factors");
  return out;
}

void write_surname_factors(std::ostream& out, const FactorMap& entries) {
  out << kSurnameFactorHeader << '\n';
  for (const auto& [name, e] : entries) {
    out << detail::quote_csv(name) << ',' << format_number(e.count.value_or(0.0));
    for (double p : e.prob) out << ',' << format_number(p);
    out << '\n';
  }
}

void write_geo_factors(std::ostream& out, const FactorMap& entries) {
  out << kGeoFactorHeader << '\n';
  for (const auto& [name, e] : entries) {
    const double n = e.count.value_or(1.0);
    out << detail::quote_csv(name) << ',' << format_number(n);
    for (double p : e.prob) out << ',' << format_number(p * n);
    out << '\n';
  }
}

BisgFactors assemble_factors(FactorMap surnames, FactorMap geos) {
  BisgFactors f;
  f.race_given_surname = std::move(surnames);
  f.race_given_geo = std::move(geos);
  derive_prior_from_geo(f);
  return f;
}

// ---------------------------------------------------------------------------
// Category mappings

std::optional<Race> CategoryMapping::resolve(std::string_view text) const {
  const auto t = trim(text);
  if (t.empty()) return std::nullopt;
  auto it = map.find(t);
  if (it == map.end()) {
    throw InputError("unknown race category '" + std::string(t) + "' for mapping " + source);
  }
  return it->second;
}

CategoryMapping canonical_mapping() {
  CategoryMapping m{"canonical", {}};
  for (Race r : kAllRaces) {
    m.map.emplace(std::string(race_key(r)), r);
    m.map.emplace(std::string(race_display_name(r)), r);
  }
  return m;
}

CategoryMapping florida_mapping() {
  CategoryMapping m{"florida", {}};
  const std::pair<const char*, std::optional<Race>> codes[] = {
      {"1", Race::AIAN},  {"2", Race::API},   {"3", Race::Black}, {"4", Race::Hispanic},
      {"5", Race::White}, {"6", Race::Other}, {"7", Race::Other}, {"9", std::nullopt},
  };
  const std::pair<const char*, std::optional<Race>> labels[] = {
      {"American Indian/Alaskan Native", Race::AIAN},
      {"Asian/Pacific Islander", Race::API},
      {"Black, Not Hispanic", Race::Black},
      {"Hispanic", Race::Hispanic},
      {"White, Not Hispanic", Race::White},
      {"Other", Race::Other},
      {"Multi-racial", Race::Other},
      {"Unknown", std::nullopt},
  };
  for (const auto& [k, v] : codes) m.map.emplace(k, v);
  for (const auto& [k, v] : labels) m.map.emplace(k, v);
  return m;
}

CategoryMapping north_carolina_mapping() {
  CategoryMapping m{"north-carolina", {}};
  const std::pair<const char*, std::optional<Race>> races[] = {
      {"A", Race::API},   {"B", Race::Black}, {"I", Race::AIAN},  {"M", Race::Other},
      {"O", Race::Other}, {"P", Race::API},   {"W", Race::White}, {"U", std::nullopt},
  };
  for (const auto& [code, race] : races) {
    m.map.emplace(std::string(code) + "/HL", Race::Hispanic);
    m.map.emplace(std::string(code) + "/NL", race);
    m.map.emplace(std::string(code) + "/UN", race);
  }
  return m;
}

CategoryMapping mapping_by_name(std::string_view name) {
  if (name == "canonical") return canonical_mapping();
  if (name == "florida") return florida_mapping();
  if (name == "north-carolina") return north_carolina_mapping();
  throw InputError("unknown category mapping '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Voter files

std::vector<VoterRecord> parse_voter_file(std::istream& in, const CategoryMapping& mapping) {
  LineReader reader(in);
  expect_header(reader, kVoterFileHeader, "voter file");
  std::vector<VoterRecord> out;
  std::unordered_set<std::string> ids;
  std::string line;
  while (reader.next(line)) {
    if (blank(line)) continue;
    const std::size_t ln = reader.line_no();
    auto fields = split_csv(line);
    if (!fields || fields->size() != 5) throw InputError("voter file: expected 5 fields" + at_line(ln));
    VoterRecord rec;
    rec.voter_id = std::string(trim((*fields)[0]));
    rec.surname = normalize_surname((*fields)[1]);
    rec.geolocation = std::string(trim((*fields)[2]));
    if (rec.voter_id.empty() || rec.surname.empty() || rec.geolocation.empty()) {
      throw InputError("voter file: empty voter_id, surname or geoid" + at_line(ln));
    }
    try {
      rec.race = mapping.resolve((*fields)[3]);
    } catch (const InputError& e) {
      throw InputError(std::string("voter file: ") + e.what() + at_line(ln));
    }
    auto active = parse_active((*fields)[4]);
    if (!active) throw InputError("voter file: unrecognized active flag" + at_line(ln));
    rec.active = *active;
    if (!ids.insert(rec.voter_id).second) {
      throw InputError("voter file: duplicate voter_id '" + rec.voter_id + "'" + at_line(ln));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void write_voter_file(std::ostream& out, std::span<const VoterRecord> records) {
  out << kVoterFileHeader << '\n';
  for (const auto& r : records) {
    out << detail::quote_csv(r.voter_id) << ',' << detail::quote_csv(r.surname) << ','
        << detail::quote_csv(r.geolocation) << ',' << (r.race ? race_key(*r.race) : "") << ','
        << (r.active ? "1" : "0") << '\n';
  }
}

std::vector<VoterRecord> filter_answered_active(std::span<const VoterRecord> records) {
  std::vector<VoterRecord> out;
  for (const auto& r : records) {
    if (r.active && !r.race_missing()) out.push_back(r);
  }
  return out;
}

AggregatedVoters aggregate_voters(std::span<const VoterRecord> records, bool require_race) {
  TableBuilder builder;
  std::map<std::pair<std::string, std::string>, double> counts;
  for (const auto& rec : records) {
    if (require_race && (!rec.active || rec.race_missing())) continue;
    RaceVector w{};
    if (rec.race) w[race_index(*rec.race)] = 1.0;
    builder.add(rec.surname, rec.geolocation, w);
    counts[{rec.surname, rec.geolocation}] += 1.0;
  }
  ContingencyTable table = builder.build();
  std::vector<double> cell_counts;
  cell_counts.reserve(counts.size());
  // Both maps iterate in (surname, geo) string order, which is key order.
  for (const auto& [_, c] : counts) cell_counts.push_back(c);
  return {std::move(table), std::move(cell_counts)};
}

std::array<std::size_t, kRaceCount> largest_remainder_quotas(std::size_t n, const RaceVector& target) {
  std::array<std::size_t, kRaceCount> quotas{};
  std::array<double, kRaceCount> remainder{};
  std::size_t assigned = 0;
  for (std::size_t r = 0; r < kRaceCount; ++r) {
    const double exact = static_cast<double>(n) * target[r];
    quotas[r] = static_cast<std::size_t>(std::floor(exact));
    remainder[r] = exact - static_cast<double>(quotas[r]);
    assigned += quotas[r];
  }
  std::array<std::size_t, kRaceCount> order;
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < n && k < kRaceCount; ++k) {
    if (target[order[k]] > 0.0) {
      ++quotas[order[k]];
      ++assigned;
    }
  }
  // Overshoot from floating-point floors is taken back from the smallest remainders.
  for (std::size_t k = kRaceCount; assigned > n && k-- > 0;) {
    if (quotas[order[k]] > 0) {
      --quotas[order[k]];
      --assigned;
    }
  }
  return quotas;
}

std::vector<VoterRecord> subsample_to_margin(std::span<const VoterRecord> records, const RaceVector& target,
                                             std::uint64_t seed) {
  double tsum = 0.0;
  for (double t : target) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw InputError("subsample target has a negative entry");
    tsum += t;
  }
  if (std::abs(tsum - 1.0) > 1e-6) throw InputError("subsample target must sum to 1");

  std::array<std::vector<std::size_t>, kRaceCount> by_race;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].race) throw InputError("subsample requires race-labeled records");
    by_race[race_index(*records[i].race)].push_back(i);
  }
  double bound = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < kRaceCount; ++r) {
    if (target[r] > 0.0) {
      if (by_race[r].empty()) {
        throw InputError("subsample target is positive for " +
                         std::string(race_display_name(kAllRaces[r])) + " but no records have that race");
      }
      bound = std::min(bound, static_cast<double>(by_race[r].size()) / target[r]);
    }
  }
  std::size_t n = static_cast<std::size_t>(std::floor(bound * (1.0 + 1e-12)));
  std::array<std::size_t, kRaceCount> quotas;
  for (;; --n) {
    quotas = largest_remainder_quotas(n, target);
    bool fits = true;
    for (std::size_t r = 0; r < kRaceCount; ++r) fits = fits && quotas[r] <= by_race[r].size();
    if (fits) break;
  }

  Rng rng(seed);
  std::vector<VoterRecord> out;
  out.reserve(n);
  for (std::size_t r = 0; r < kRaceCount; ++r) {
    auto& pool = by_race[r];
    // Partial Fisher-Yates: the first quota slots become the sample.
    for (std::size_t k = 0; k < quotas[r]; ++k) {
      const std::size_t j = k + static_cast<std::size_t>(rng.below(pool.size() - k));
      std::swap(pool[k], pool[j]);
      out.push_back(records[pool[k]]);
    }
  }
  for (std::size_t k = out.size(); k > 1; --k) {
    std::swap(out[k - 1], out[static_cast<std::size_t>(rng.below(k))]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CPS categories

namespace {

constexpr std::array<std::string_view, 5> kCpsComponents = {"White", "Black", "AIAN", "Asian", "HPI"};
enum CpsBit : unsigned { kWhite = 1, kBlack = 2, kAian = 4, kAsian = 8, kHpi = 16 };

Race classify_cps(bool hispanic, unsigned mask) {
  if (hispanic) return Race::Hispanic;
  if (std::popcount(mask) == 1) {
    switch (mask) {
      case kWhite: return Race::White;
      case kBlack: return Race::Black;
      case kAian: return Race::AIAN;
      default: return Race::API;  // Asian or HPI alone
    }
  }
  if ((mask & ~(kAsian | kHpi)) == 0) return Race::API;  // Asian + HPI only
  if (mask & kBlack) return Race::Black;
  if (mask & (kAsian | kHpi)) return Race::API;
  return Race::Other;
}

}  // namespace

RaceVector map_cps_categories(const std::map<std::string, double>& histogram) {
  RaceVector out{};
  for (const auto& [key, weight] : histogram) {
    auto fail = [&](const std::string& why) {
      throw InputError("unknown CPS category '" + key + "': " + why);
    };
    const auto colon = key.find(':');
    if (colon == std::string::npos) fail("expected H:<races> or NH:<races>");
    const std::string_view flag = std::string_view(key).substr(0, colon);
    if (flag != "H" && flag != "NH") fail("Hispanic flag must be H or NH");
    unsigned mask = 0;
    std::string_view rest = std::string_view(key).substr(colon + 1);
    while (true) {
      const auto plus = rest.find('+');
      const std::string_view part = rest.substr(0, plus);
      auto it = std::find(kCpsComponents.begin(), kCpsComponents.end(), part);
      if (it == kCpsComponents.end()) fail("unknown race component '" + std::string(part) + "'");
      const unsigned bit = 1u << (it - kCpsComponents.begin());
      if (mask & bit) fail("repeated race component");
      mask |= bit;
      if (plus == std::string_view::npos) break;
      rest.remove_prefix(plus + 1);
    }
    if (!(weight >= 0.0) || !std::isfinite(weight)) fail("weight must be finite and >= 0");
    out[race_index(classify_cps(flag == "H", mask))] += weight;
  }
  return out;
}

std::vector<std::string> cps_category_keys() {
  std::vector<std::string> keys;
  for (const char* flag : {"NH:", "H:"}) {
    for (unsigned mask = 1; mask < 32; ++mask) {
      std::string key = flag;
      bool first = true;
      for (std::size_t b = 0; b < kCpsComponents.size(); ++b) {
        if (!(mask & (1u << b))) continue;
        if (!first) key += '+';
        key += kCpsComponents[b];
        first = false;
      }
      keys.push_back(std::move(key));
    }
  }
  return keys;
}

// ---------------------------------------------------------------------------
// Race distributions and tables

RaceVector read_race_distribution(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("race distribution: invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("race_distribution") || !doc["race_distribution"].is_object()) {
    throw InputError("race distribution: missing \"race_distribution\" object");
  }
  const auto& obj = doc["race_distribution"];
  RaceVector out{};
  for (Race r : kAllRaces) {
    const std::string key(race_key(r));
    if (!obj.contains(key) || !obj[key].is_number()) {
      throw InputError("race distribution: missing numeric entry '" + key + "'");
    }
    out[race_index(r)] = obj[key].get<double>();
    if (!(out[race_index(r)] >= 0.0)) throw InputError("race distribution: negative entry '" + key + "'");
  }
  for (const auto& [k, _] : obj.items()) {
    if (!parse_race_key(k)) throw InputError("race distribution: unknown key '" + k + "'");
  }
  if (std::abs(race_sum(out) - 1.0) > 1e-6) throw InputError("race distribution must sum to 1");
  return out;
}

void write_race_distribution(std::ostream& out, const RaceVector& distribution) {
  out << "{\"race_distribution\": {";
  for (std::size_t r = 0; r < kRaceCount; ++r) {
    if (r > 0) out << ", ";
    out << '"' << race_key(kAllRaces[r]) << "\": " << format_number(distribution[r]);
  }
  out << "}}\n";
}

ContingencyTable read_table_csv(std::istream& in) {
  LineReader reader(in);
  expect_header(reader, kTableHeader, "table");
  TableBuilder builder;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  while (reader.next(line)) {
    if (blank(line)) continue;
    const std::size_t ln = reader.line_no();
    auto fields = split_csv(line);
    if (!fields || fields->size() != 8) throw InputError("table: expected 8 fields" + at_line(ln));
    const std::string s = normalize_surname((*fields)[0]);
    const std::string g(trim((*fields)[1]));
    if (s.empty() || g.empty()) throw InputError("table: empty surname or geoid" + at_line(ln));
    RaceVector w{};
    for (std::size_t r = 0; r < kRaceCount; ++r) {
      auto v = parse_nonnegative((*fields)[2 + r]);
      if (!v) throw InputError("table: invalid count" + at_line(ln));
      w[r] = *v;
    }
    if (!seen.emplace(s, g).second) throw InputError("table: duplicate cell (" + s + ", " + g + ")" + at_line(ln));
    builder.add(s, g, w);
  }
  return builder.build();
}

void write_table_csv(std::ostream& out, const CellTable& table) {
  out << kTableHeader << '\n';
  const auto& labels = table.labels();
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto k = table.key(i);
    out << detail::quote_csv(labels.surnames[k.surname]) << ',' << detail::quote_csv(labels.geolocations[k.geo]);
    for (double v : table.row(i)) out << ',' << format_number(v);
    out << '\n';
  }
}

CellCounts read_cell_counts(std::istream& in) {
  LineReader reader(in);
  expect_header(reader, kCellCountHeader, "cell counts");
  std::map<std::pair<std::string, std::string>, double> cells;
  std::string line;
  while (reader.next(line)) {
    if (blank(line)) continue;
    const std::size_t ln = reader.line_no();
    auto fields = split_csv(line);
    if (!fields || fields->size() != 3) throw InputError("cell counts: expected 3 fields" + at_line(ln));
    const std::string s = normalize_surname((*fields)[0]);
    const std::string g(trim((*fields)[1]));
    auto v = parse_nonnegative((*fields)[2]);
    if (s.empty() || g.empty() || !v) throw InputError("cell counts: malformed row" + at_line(ln));
    if (!cells.emplace(std::pair{s, g}, *v).second) {
      throw InputError("cell counts: duplicate cell (" + s + ", " + g + ")" + at_line(ln));
    }
  }
  if (cells.empty()) throw InputError("cell counts: empty file");
  auto labels = std::make_shared<AxisLabels>();
  for (const auto& [k, _] : cells) {
    labels->surnames.push_back(k.first);
    labels->geolocations.push_back(k.second);
  }
  for (auto* axis : {&labels->surnames, &labels->geolocations}) {
    std::sort(axis->begin(), axis->end());
    axis->erase(std::unique(axis->begin(), axis->end()), axis->end());
  }
  CellCounts out;
  for (const auto& [k, v] : cells) {
    out.keys.push_back({*labels->surname_index(k.first), *labels->geo_index(k.second)});
    out.counts.push_back(v);
  }
  out.labels = std::move(labels);
  return out;
}

void write_cell_counts(std::ostream& out, const LabelsPtr& labels, std::span<const CellKey> keys,
                       std::span<const double> counts) {
  out << kCellCountHeader << '\n';
  for (std::size_t i = 0; i < keys.size(); ++i) {
    out << detail::quote_csv(labels->surnames[keys[i].surname]) << ','
        << detail::quote_csv(labels->geolocations[keys[i].geo]) << ',' << format_number(counts[i]) << '\n';
  }
}

std::map<std::string, std::string> read_regions(std::istream& in) {
  LineReader reader(in);
  expect_header(reader, kRegionHeader, "regions");
  std::map<std::string, std::string> out;
  std::string line;
  while (reader.next(line)) {
    if (blank(line)) continue;
    auto fields = split_csv(line);
    if (!fields || fields->size() != 2) throw InputError("regions: expected 2 fields" + at_line(reader.line_no()));
    std::string g(trim((*fields)[0]));
    std::string region(trim((*fields)[1]));
    if (g.empty() || region.empty()) throw InputError("regions: empty field" + at_line(reader.line_no()));
    if (!out.emplace(std::move(g), std::move(region)).second) {
      throw InputError("regions: duplicate geoid" + at_line(reader.line_no()));
    }
  }
  return out;
}

ContingencyTable realign(const CellTable& table, const LabelsPtr& labels) {
  const auto& src = table.labels();
  std::vector<CellKey> keys;
  keys.reserve(table.size());
  for (const auto& k : table.keys()) {
    auto s = labels->surname_index(src.surnames[k.surname]);
    auto g = labels->geo_index(src.geolocations[k.geo]);
    if (!s || !g) {
      throw InputError("label (" + src.surnames[k.surname] + ", " + src.geolocations[k.geo] +
                       ") is not present in the target axis labels");
    }
    keys.push_back({*s, *g});
  }
  return ContingencyTable(labels, std::move(keys),
                          std::vector<double>(table.values().begin(), table.values().end()));
}

PredictionTable as_prediction(const CellTable& table) {
  return PredictionTable(table.labels_ptr(), std::vector<CellKey>(table.keys().begin(), table.keys().end()),
                         std::vector<double>(table.values().begin(), table.values().end()));
}

LabelsPtr merge_labels(const AxisLabels& a, const AxisLabels& b) {
  auto out = std::make_shared<AxisLabels>();
  std::set_union(a.surnames.begin(), a.surnames.end(), b.surnames.begin(), b.surnames.end(),
                 std::back_inserter(out->surnames));
  std::set_union(a.geolocations.begin(), a.geolocations.end(), b.geolocations.begin(), b.geolocations.end(),
                 std::back_inserter(out->geolocations));
  out->regions = a.regions;
  out->regions.insert(b.regions.begin(), b.regions.end());
  return out;
}

}  // namespace raketab
