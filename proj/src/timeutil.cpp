#include "deeptrader/timeutil.hpp"

#include <cctype>
#include <cstdio>
#include <stdexcept>

namespace deeptrader {

std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);            // [0, 399]
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;  // [0, 365]
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;           // [0, 146096]
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y = static_cast<int>(yy + (m <= 2));
}

std::string utc_month(Micros ts) {
  int y;
  unsigned m, d;
  civil_from_days(utc_day(ts), y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u", y, m);
  return buf;
}

namespace {

bool parse_uint(std::string_view s, std::size_t& pos, int digits, long long& out) {
  long long v = 0;
  for (int i = 0; i < digits; ++i) {
    if (pos >= s.size() || !std::isdigit(static_cast<unsigned char>(s[pos]))) return false;
    v = v * 10 + (s[pos] - '0');
    ++pos;
  }
  out = v;
  return true;
}

}  // namespace

Micros parse_iso8601(std::string_view s) {
  std::size_t pos = 0;
  long long year, month, day, hour, minute, second;
  auto fail = [&]() -> Micros { throw std::invalid_argument("malformed ISO-8601 timestamp: " + std::string(s)); };

  if (!parse_uint(s, pos, 4, year)) return fail();
  if (pos >= s.size() || s[pos] != '-') return fail();
  ++pos;
  if (!parse_uint(s, pos, 2, month)) return fail();
  if (pos >= s.size() || s[pos] != '-') return fail();
  ++pos;
  if (!parse_uint(s, pos, 2, day)) return fail();
  if (pos >= s.size() || (s[pos] != 'T' && s[pos] != 't' && s[pos] != ' ')) return fail();
  ++pos;
  if (!parse_uint(s, pos, 2, hour)) return fail();
  if (pos >= s.size() || s[pos] != ':') return fail();
  ++pos;
  if (!parse_uint(s, pos, 2, minute)) return fail();
  if (pos >= s.size() || s[pos] != ':') return fail();
  ++pos;
  if (!parse_uint(s, pos, 2, second)) return fail();
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60) return fail();

  long long micros = 0;
  if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
    ++pos;
    int ndig = 0;
    long long frac = 0;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
      if (ndig < 6) frac = frac * 10 + (s[pos] - '0');
      ++ndig;
      ++pos;
    }
    if (ndig == 0) return fail();
    for (int i = ndig; i < 6; ++i) frac *= 10;
    micros = frac;
  }

  // offset: Z or +-HH[:]MM (minutes optional)
  long long offset_min = 0;
  if (pos >= s.size()) return fail();
  if (s[pos] == 'Z' || s[pos] == 'z') {
    ++pos;
  } else if (s[pos] == '+' || s[pos] == '-') {
    const int sign = s[pos] == '+' ? 1 : -1;
    ++pos;
    long long oh, om = 0;
    if (!parse_uint(s, pos, 2, oh)) return fail();
    if (pos < s.size() && s[pos] == ':') ++pos;
    if (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
      if (!parse_uint(s, pos, 2, om)) return fail();
    }
    offset_min = sign * (oh * 60 + om);
  } else {
    return fail();
  }
  if (pos != s.size()) return fail();

  const std::int64_t days = days_from_civil(static_cast<int>(year), static_cast<unsigned>(month),
                                            static_cast<unsigned>(day));
  Micros ts = days * kMicrosPerDay + ((hour * 60 + minute) * 60 + second) * 1'000'000LL + micros;
  return ts - offset_min * 60'000'000LL;
}

std::string format_iso8601(Micros ts) {
  const std::int64_t day = utc_day(ts);
  Micros rem = ts - day * kMicrosPerDay;
  int y;
  unsigned m, d;
  civil_from_days(day, y, m, d);
  const int hour = static_cast<int>(rem / 3'600'000'000LL);
  rem %= 3'600'000'000LL;
  const int minute = static_cast<int>(rem / 60'000'000LL);
  rem %= 60'000'000LL;
  const int second = static_cast<int>(rem / 1'000'000LL);
  const int micros = static_cast<int>(rem % 1'000'000LL);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%06dZ", y, m, d, hour, minute, second, micros);
  return buf;
}

}  // namespace deeptrader
