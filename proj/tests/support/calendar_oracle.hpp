// SPDX-License-Identifier: Apache-2.0
#pragma once

// Brute-force calendar oracle for checking temporal resolution. Deliberately
// avoids the library's date arithmetic: it walks day by day with its own
// month-length table and computes weekdays with Zeller's congruence.

#include <string>
#include <vector>

namespace oracle {

struct Date {
    int y, m, d;
    bool operator==(const Date&) const = default;
    std::string iso() const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
        return buf;
    }
};

inline bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

inline int month_len(int y, int m) {
    static const int k[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && leap(y) ? 29 : k[m - 1];
}

inline Date prev_day(Date d) {
    if (--d.d >= 1) return d;
    if (--d.m < 1) {
        d.m = 12;
        --d.y;
    }
    d.d = month_len(d.y, d.m);
    return d;
}

inline Date next_day(Date d) {
    if (++d.d <= month_len(d.y, d.m)) return d;
    d.d = 1;
    if (++d.m > 12) {
        d.m = 1;
        ++d.y;
    }
    return d;
}

/// Monday = 0 .. Sunday = 6, via Zeller's congruence.
inline int weekday(Date date) {
    int y = date.y, m = date.m, d = date.d;
    if (m < 3) {
        m += 12;
        --y;
    }
    int K = y % 100, J = y / 100;
    int h = (d + 13 * (m + 1) / 5 + K + K / 4 + J / 4 + 5 * J) % 7; // 0 = Saturday
    return (h + 5) % 7;
}

/// N days walking backward, ending the day before the anchor.
inline std::vector<Date> past_days_excluding(Date anchor_date, int n) {
    std::vector<Date> out;
    Date d = anchor_date;
    for (int k = 0; k < n; ++k) {
        d = prev_day(d);
        out.insert(out.begin(), d);
    }
    return out;
}

/// N days ending on the anchor.
inline std::vector<Date> past_days_including(Date anchor_date, int n) {
    std::vector<Date> out;
    Date d = anchor_date;
    out.insert(out.begin(), d);
    for (int k = 1; k < n; ++k) {
        d = prev_day(d);
        out.insert(out.begin(), d);
    }
    return out;
}

/// The Monday..Sunday week before the anchor's week.
inline std::vector<Date> last_week(Date anchor_date) {
    Date d = anchor_date;
    while (weekday(d) != 0) d = prev_day(d); // back to this week's Monday
    for (int k = 0; k < 7; ++k) d = prev_day(d);
    std::vector<Date> out;
    for (int k = 0; k < 7; ++k) {
        out.push_back(d);
        d = next_day(d);
    }
    return out;
}

/// Every day of the anchor's month.
inline std::vector<Date> this_month(Date anchor_date) {
    std::vector<Date> out;
    for (int day = 1; day <= month_len(anchor_date.y, anchor_date.m); ++day)
        out.push_back({anchor_date.y, anchor_date.m, day});
    return out;
}

} // namespace oracle
