#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace blinkkit {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

/// Parses `YYYY-MM-DDTHH:MM:SS[.fff]Z` (UTC; `+00:00` also accepted).
Timestamp parse_iso8601(std::string_view text);

/// Formats as `YYYY-MM-DDTHH:MM:SS.fffZ`; lexicographic order matches time order.
std::string format_iso8601(Timestamp t);

Timestamp utc_now();

}  // namespace blinkkit
