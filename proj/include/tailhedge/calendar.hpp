#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "tailhedge/errors.hpp"

namespace tailhedge {

/// Days since 1970-01-01 of a civil date (proleptic Gregorian).
inline long days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097L + static_cast<long>(doe) - 719468L;
}

inline void civil_from_days(long z, int& y, unsigned& m, unsigned& d) {
  z += 719468L;
  const long era = (z >= 0 ? z : z - 146096L) / 146097L;
  const unsigned doe = static_cast<unsigned>(z - era * 146097L);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long yy = static_cast<long>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y = static_cast<int>(yy + (m <= 2));
}

/// Parse "YYYY-MM-DD" into a serial day number.
inline long parse_iso_date(const std::string& text) {
  int y = 0;
  unsigned m = 0, d = 0;
  if (std::sscanf(text.c_str(), "%d-%u-%u", &y, &m, &d) != 3 || m < 1 || m > 12 || d < 1 ||
      d > 31) {
    throw ValidationError("invalid ISO-8601 date '" + text + "'");
  }
  return days_from_civil(y, m, d);
}

inline std::string format_iso_date(long serial) {
  int y;
  unsigned m, d;
  civil_from_days(serial, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", y, m, d);
  return buf;
}

/// Synthetic trading calendar: 252 trading days per year arranged as twelve
/// 21-day months of 5-day weeks. The monthly expiry is the third Friday,
/// i.e. day 14 within each month. Day indices count trading days from an
/// arbitrary reference session.
struct TradingCalendar {
  static constexpr long kDaysPerMonth = 21;
  static constexpr long kThirdFridayOffset = 14;

  bool is_expiry(long day) const {
    return day >= 0 && day % kDaysPerMonth == kThirdFridayOffset;
  }

  /// Third Fridays e with lo <= e <= hi.
  std::vector<long> expiries_between(long lo, long hi) const {
    std::vector<long> out;
    if (hi < 0) return out;
    lo = std::max(lo, kThirdFridayOffset);
    long month = (lo - kThirdFridayOffset + kDaysPerMonth - 1) / kDaysPerMonth;
    for (long e = month * kDaysPerMonth + kThirdFridayOffset; e <= hi; e += kDaysPerMonth) {
      out.push_back(e);
    }
    return out;
  }
};

}  // namespace tailhedge
