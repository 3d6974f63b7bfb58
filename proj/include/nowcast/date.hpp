#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace nowcast {

/// Calendar day. Arithmetic is in whole days.
using Date = std::chrono::sys_days;

/// Parses an ISO-8601 `YYYY-MM-DD` date; throws DataError on anything else.
Date parse_date(std::string_view text);
std::string format_date(Date d);

inline Date add_days(Date d, int n) { return d + std::chrono::days{n}; }
inline int days_between(Date from, Date to) { return static_cast<int>((to - from).count()); }

bool is_weekend(Date d);

}  // namespace nowcast
