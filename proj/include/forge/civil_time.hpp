// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>
#include <regex>
#include <string>

#include "forge/util.hpp"

namespace forge {

/// A calendar date, proleptic Gregorian.
struct CivilDate {
    int year = 1970;
    int month = 1; // 1..12
    int day = 1;   // 1..31

    auto operator<=>(const CivilDate&) const = default;

    std::string iso() const { return util::format("%04d-%02d-%02d", year, month, day); }
};

namespace civil {

inline bool is_leap(int y) {
    return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

inline int days_in_month(int y, int m) {
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return (m == 2 && is_leap(y)) ? 29 : kDays[m - 1];
}

/// Days since 1970-01-01 (Howard Hinnant's algorithm).
inline int64_t days_from_civil(const CivilDate& d) {
    int y = d.year;
    const int m = d.month;
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2) / 5 + static_cast<unsigned>(d.day) - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

inline CivilDate civil_from_days(int64_t z) {
    z += 719468;
    const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int64_t y = static_cast<int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return CivilDate{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

inline CivilDate add_days(const CivilDate& d, int64_t n) {
    return civil_from_days(days_from_civil(d) + n);
}

/// 0 = Monday .. 6 = Sunday.
inline int weekday(const CivilDate& d) {
    int64_t z = days_from_civil(d); // 1970-01-01 was a Thursday (weekday 3)
    return static_cast<int>(((z % 7) + 7 + 3) % 7);
}

inline bool valid(const CivilDate& d) {
    return d.month >= 1 && d.month <= 12 && d.day >= 1 && d.day <= days_in_month(d.year, d.month);
}

inline const char* month_name(int m) {
    static constexpr const char* kNames[] = {"January", "February", "March",     "April",   "May",      "June",
                                             "July",    "August",   "September", "October", "November", "December"};
    return kNames[m - 1];
}

} // namespace civil

/// A wall-clock instant with an explicit fixed UTC offset. Never defaults to
/// the machine-local zone: parsing requires the offset, construction takes it.
struct AnchorTimestamp {
    CivilDate date;
    int hour = 0;
    int minute = 0;
    int second = 0;
    int offset_minutes = 0; // e.g. +480 for +08:00

    auto operator<=>(const AnchorTimestamp&) const = default;

    int64_t epoch_seconds() const {
        return civil::days_from_civil(date) * 86400 + hour * 3600 + minute * 60 + second -
               static_cast<int64_t>(offset_minutes) * 60;
    }

    /// Same instant expressed at another fixed offset.
    AnchorTimestamp with_offset(int new_offset_minutes) const {
        int64_t local = epoch_seconds() + static_cast<int64_t>(new_offset_minutes) * 60;
        int64_t days = local >= 0 ? local / 86400 : (local - 86399) / 86400;
        int64_t rem = local - days * 86400;
        AnchorTimestamp out;
        out.date = civil::civil_from_days(days);
        out.hour = static_cast<int>(rem / 3600);
        out.minute = static_cast<int>((rem % 3600) / 60);
        out.second = static_cast<int>(rem % 60);
        out.offset_minutes = new_offset_minutes;
        return out;
    }

    std::string offset_string() const {
        int m = offset_minutes;
        char sign = m < 0 ? '-' : '+';
        if (m < 0) m = -m;
        return util::format("%c%02d:%02d", sign, m / 60, m % 60);
    }

    /// "2026-01-13T14:54:09+08:00"
    std::string iso() const {
        return util::format("%04d-%02d-%02dT%02d:%02d:%02d%s", date.year, date.month, date.day, hour, minute,
                            second, offset_string().c_str());
    }

    /// "2026-01-13 14:54:09" — the form injected into prompts.
    std::string wall_clock() const {
        return util::format("%04d-%02d-%02d %02d:%02d:%02d", date.year, date.month, date.day, hour, minute, second);
    }

    std::string day_label() const { return date.iso(); }
};

namespace civil {

/// Accepts "YYYY-MM-DD[ T]hh:mm:ss(±HH:MM|±HHMM|Z)" and the date-only form
/// "YYYY-MM-DD(±HH:MM)?" (midnight). The offset is mandatory context: when the
/// text carries none the caller must supply `default_offset_minutes`.
inline AnchorTimestamp parse_anchor(const std::string& text, std::optional<int> default_offset_minutes = {}) {
    static const std::regex re(R"(^(\d{4})-(\d{2})-(\d{2})(?:[T ](\d{2}):(\d{2}):(\d{2})(?:\.\d+)?)?\s*(Z|[+-]\d{2}:?\d{2})?$)");
    std::smatch m;
    std::string s = util::trim(text);
    if (!std::regex_match(s, m, re))
        throw Error("unparseable timestamp: " + text);
    AnchorTimestamp out;
    out.date = CivilDate{std::stoi(m[1]), std::stoi(m[2]), std::stoi(m[3])};
    if (!valid(out.date))
        throw Error("invalid calendar date: " + text);
    if (m[4].matched) {
        out.hour = std::stoi(m[4]);
        out.minute = std::stoi(m[5]);
        out.second = std::stoi(m[6]);
        if (out.hour > 23 || out.minute > 59 || out.second > 60)
            throw Error("invalid time of day: " + text);
    }
    if (m[7].matched) {
        std::string off = m[7];
        if (off == "Z") {
            out.offset_minutes = 0;
        } else {
            int sign = off[0] == '-' ? -1 : 1;
            std::string digits = off.substr(1);
            digits = util::replace_all(digits, ":", "");
            out.offset_minutes = sign * (std::stoi(digits.substr(0, 2)) * 60 + std::stoi(digits.substr(2, 2)));
        }
    } else if (default_offset_minutes) {
        out.offset_minutes = *default_offset_minutes;
    } else {
        throw Error("timestamp has no timezone offset and no default was given: " + text);
    }
    return out;
}

/// "+08:00" -> 480
inline int parse_offset(const std::string& text) {
    static const std::regex re(R"(^([+-])(\d{2}):?(\d{2})$)");
    std::smatch m;
    std::string s = util::trim(text);
    if (!std::regex_match(s, m, re))
        throw Error("unparseable UTC offset: " + text);
    int v = std::stoi(m[2]) * 60 + std::stoi(m[3]);
    return m[1] == "-" ? -v : v;
}

} // namespace civil
} // namespace forge
