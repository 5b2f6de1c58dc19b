#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace deeptrader {

// Microseconds since the Unix epoch, UTC. All timestamps in the pipeline
// use this representation; calendar logic is UTC throughout.
using Micros = std::int64_t;

inline constexpr Micros kMicrosPerDay = 86'400'000'000LL;

// UTC day index (days since epoch, floored - works for negative times too).
inline std::int64_t utc_day(Micros ts) {
  return ts >= 0 ? ts / kMicrosPerDay : (ts - (kMicrosPerDay - 1)) / kMicrosPerDay;
}

// Year/month bucket "YYYY-MM" of a UTC timestamp (monthly aggregation key).
std::string utc_month(Micros ts);

// Parses ISO-8601 timestamps with offset: YYYY-MM-DD[T ]HH:MM:SS[.frac](Z|+-HH[:MM]).
// Throws std::invalid_argument on malformed input.
Micros parse_iso8601(std::string_view s);

// Formats as UTC with microsecond precision and a Z suffix.
std::string format_iso8601(Micros ts);

// Civil date helpers (Howard Hinnant's algorithms).
std::int64_t days_from_civil(int y, unsigned m, unsigned d);
void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d);

}  // namespace deeptrader
