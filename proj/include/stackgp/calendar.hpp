#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace stackgp {

/// Months since January 1970 (January 1970 is 0).
using MonthIndex = int;

MonthIndex month_index(int year, unsigned month);
int year_of(MonthIndex m);
/// 1..12
unsigned month_of_year(MonthIndex m);
int days_in_month(MonthIndex m);

/// "YYYY-MM" <-> MonthIndex. Parsing throws SchemaError on malformed text.
std::string format_month(MonthIndex m);
MonthIndex parse_month(std::string_view text);

/// ISO-8601 calendar date "YYYY-MM-DD".
std::chrono::sys_days parse_date(std::string_view text);
std::string format_date(std::chrono::sys_days d);
MonthIndex month_of(std::chrono::sys_days d);
std::chrono::sys_days first_day(MonthIndex m);

}  // namespace stackgp
