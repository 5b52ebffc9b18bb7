#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace raketab {

inline constexpr std::size_t kRaceCount = 6;

/// The six race/ethnicity groups. The order is fixed and shared by every
/// vector, table row, file column and report in the library.
enum class Race : std::uint8_t { AIAN = 0, API = 1, Black = 2, Hispanic = 3, White = 4, Other = 5 };

using RaceVector = std::array<double, kRaceCount>;

inline constexpr std::array<Race, kRaceCount> kAllRaces = {
    Race::AIAN, Race::API, Race::Black, Race::Hispanic, Race::White, Race::Other};

/// Lowercase key used in file headers and JSON ("aian", "api", ...).
constexpr std::string_view race_key(Race r) {
  constexpr std::array<std::string_view, kRaceCount> keys = {"aian", "api", "black",
                                                             "hispanic", "white", "other"};
  return keys[static_cast<std::size_t>(r)];
}

constexpr std::string_view race_display_name(Race r) {
  constexpr std::array<std::string_view, kRaceCount> names = {"AIAN", "API", "Black",
                                                              "Hispanic", "White", "Other"};
  return names[static_cast<std::size_t>(r)];
}

constexpr std::size_t race_index(Race r) { return static_cast<std::size_t>(r); }

/// Accepts either the lowercase key or the display name.
std::optional<Race> parse_race_key(std::string_view text);

inline double race_sum(const RaceVector& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace raketab
