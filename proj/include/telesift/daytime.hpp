#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>

namespace telesift {

// Nanoseconds since the Unix epoch, UTC.
using NsTime = std::int64_t;

// Calendar day as days since 1970-01-01 in the analysis timezone.
using DayIndex = std::int32_t;

constexpr std::int64_t ns_per_sec = 1'000'000'000;
constexpr std::int64_t secs_per_day = 86'400;

namespace detail {

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

}  // namespace detail

// Day containing ts_ns once shifted into the given UTC offset.
inline DayIndex day_of(NsTime ts_ns, std::int32_t tz_offset_s) {
    std::int64_t secs = detail::floor_div(ts_ns, ns_per_sec) + tz_offset_s;
    return static_cast<DayIndex>(detail::floor_div(secs, secs_per_day));
}

inline std::chrono::year_month_day day_to_ymd(DayIndex day) {
    using namespace std::chrono;
    return year_month_day{sys_days{days{day}}};
}

inline int day_year(DayIndex day) { return int(day_to_ymd(day).year()); }

inline int day_month(DayIndex day) { return int(unsigned(day_to_ymd(day).month())); }

inline std::string day_to_string(DayIndex day) {
    auto ymd = day_to_ymd(day);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(ymd.year()),
                  unsigned(ymd.month()), unsigned(ymd.day()));
    return buf;
}

inline std::optional<DayIndex> parse_day(const std::string& s) {
    int y = 0;
    unsigned m = 0, d = 0;
    if (std::sscanf(s.c_str(), "%d-%u-%u", &y, &m, &d) != 3) return std::nullopt;
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                    std::chrono::day{d}};
    if (!ymd.ok()) return std::nullopt;
    return DayIndex(std::chrono::sys_days{ymd}.time_since_epoch().count());
}

inline DayIndex make_day(int y, unsigned m, unsigned d) {
    using namespace std::chrono;
    return DayIndex(sys_days{year{y} / month{m} / day{d}}.time_since_epoch().count());
}

// "UTC", "Z", "+05:30", "-08:00", "+0530" or "+5" -> offset in seconds.
inline std::optional<std::int32_t> parse_tz_offset(const std::string& s) {
    if (s.empty()) return std::nullopt;
    if (s == "UTC" || s == "utc" || s == "Z" || s == "z") return 0;
    if (s[0] != '+' && s[0] != '-') return std::nullopt;
    int sign = s[0] == '-' ? -1 : 1;
    std::string body = s.substr(1);
    unsigned h = 0, m = 0;
    if (body.find(':') != std::string::npos) {
        if (std::sscanf(body.c_str(), "%u:%u", &h, &m) != 2) return std::nullopt;
    } else if (body.size() > 2) {
        if (std::sscanf(body.c_str(), "%2u%2u", &h, &m) != 2) return std::nullopt;
    } else {
        if (std::sscanf(body.c_str(), "%u", &h) != 1) return std::nullopt;
    }
    if (h > 14 || m > 59) return std::nullopt;
    return sign * std::int32_t(h * 3600 + m * 60);
}

}  // namespace telesift
