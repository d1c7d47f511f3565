#include "stackgp/calendar.hpp"

#include <charconv>
#include <cstdio>

#include "stackgp/errors.hpp"

namespace stackgp {

namespace {

int floor_div(int a, int b) { return a / b - ((a % b != 0) && ((a < 0) != (b < 0))); }

template <typename T>
bool parse_int(std::string_view s, T& out) {
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

MonthIndex month_index(int year, unsigned month) {
    if (month < 1 || month > 12) throw SchemaError("month out of range: " + std::to_string(month));
    return (year - 1970) * 12 + static_cast<int>(month) - 1;
}

int year_of(MonthIndex m) { return 1970 + floor_div(m, 12); }

unsigned month_of_year(MonthIndex m) { return static_cast<unsigned>(m - floor_div(m, 12) * 12) + 1; }

int days_in_month(MonthIndex m) {
    using namespace std::chrono;
    const year_month_day_last last{year{year_of(m)} / month{month_of_year(m)} / std::chrono::last};
    return static_cast<int>(static_cast<unsigned>(last.day()));
}

std::string format_month(MonthIndex m) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u", year_of(m), month_of_year(m));
    return buf;
}

MonthIndex parse_month(std::string_view text) {
    int y = 0;
    unsigned mo = 0;
    if (text.size() != 7 || text[4] != '-' || !parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), mo) ||
        mo < 1 || mo > 12) {
        throw SchemaError("expected YYYY-MM, got '" + std::string(text) + "'");
    }
    return month_index(y, mo);
}

std::chrono::sys_days parse_date(std::string_view text) {
    using namespace std::chrono;
    int y = 0;
    unsigned mo = 0, d = 0;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !parse_int(text.substr(0, 4), y) ||
        !parse_int(text.substr(5, 2), mo) || !parse_int(text.substr(8, 2), d)) {
        throw SchemaError("expected YYYY-MM-DD, got '" + std::string(text) + "'");
    }
    const year_month_day ymd{year{y}, month{mo}, day{d}};
    if (!ymd.ok()) throw SchemaError("invalid calendar date '" + std::string(text) + "'");
    return sys_days{ymd};
}

std::string format_date(std::chrono::sys_days d) {
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

MonthIndex month_of(std::chrono::sys_days d) {
    const std::chrono::year_month_day ymd{d};
    return month_index(static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()));
}

std::chrono::sys_days first_day(MonthIndex m) {
    using namespace std::chrono;
    return sys_days{year{year_of(m)} / month{month_of_year(m)} / day{1}};
}

}  // namespace stackgp
