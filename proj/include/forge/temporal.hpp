// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "forge/civil_time.hpp"
#include "forge/util.hpp"

namespace forge::temporal {

/// Resolution of a relative-time phrase: either a concrete ordered set of
/// calendar dates, or the "latest published instance" sentinel, which carries
/// no calendar arithmetic and is passed through to the workflow.
struct DateWindow {
    enum class Kind { Dates, Latest };
    Kind kind = Kind::Dates;
    std::vector<CivilDate> dates;  // strictly ascending
    bool excludes_anchor = false;  // true when the phrase excludes "today"

    bool is_latest() const { return kind == Kind::Latest; }
    const CivilDate& front() const { return dates.front(); }
    const CivilDate& back() const { return dates.back(); }
    size_t size() const { return dates.size(); }
};

class UnsupportedPhrase : public Error {
public:
    explicit UnsupportedPhrase(const std::string& phrase)
        : Error("unsupported temporal phrase: \"" + phrase + "\""), phrase(phrase) {}
    std::string phrase;
};

namespace detail {

/// Normalizes surface text: trim, ASCII lowercase, fullwidth digits and
/// punctuation folded to ASCII, internal whitespace collapsed.
inline std::string normalize(std::string_view s) {
    std::string folded;
    size_t i = 0;
    while (i < s.size()) {
        uint32_t cp = util::utf8_next(s, i);
        if (cp >= 0xFF01 && cp <= 0xFF5E) cp -= 0xFEE0;     // fullwidth ASCII block
        else if (cp == 0x3000) cp = ' ';                      // ideographic space
        else if (cp == 0x2013 || cp == 0x2014) cp = '-';
        util::utf8_append(folded, cp);
    }
    std::string out;
    bool in_ws = false;
    for (size_t j = 0; j < folded.size(); ++j) {
        unsigned char c = static_cast<unsigned char>(folded[j]);
        if (c < 0x80 && std::isspace(c)) {
            in_ws = true;
            continue;
        }
        if (in_ws && !out.empty()) out += ' ';
        in_ws = false;
        out += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
    }
    return util::trim(out);
}

} // namespace detail

/// Semantic rules the phrase table can map surface forms onto. `past_days*`
/// rules take the N captured by the surface pattern.
enum class RuleId {
    Today,
    Yesterday,
    Tomorrow,
    PastDaysExcl,   // N days ending the day before the anchor
    PastDaysIncl,   // N days ending on the anchor date
    LastWeek,       // previous ISO week, Monday through Sunday
    ThisMonth,      // the anchor's full calendar month
    Latest,
};

inline std::optional<RuleId> rule_from_name(std::string_view name) {
    if (name == "today") return RuleId::Today;
    if (name == "yesterday") return RuleId::Yesterday;
    if (name == "tomorrow") return RuleId::Tomorrow;
    if (name == "past_days_excl") return RuleId::PastDaysExcl;
    if (name == "past_days_incl") return RuleId::PastDaysIncl;
    if (name == "last_week") return RuleId::LastWeek;
    if (name == "this_month") return RuleId::ThisMonth;
    if (name == "latest") return RuleId::Latest;
    return std::nullopt;
}

/// One phrase-table entry: literal normalized surface form, or a regex whose
/// first capture group is N for the past-days rules.
struct PhraseEntry {
    std::string surface;   // literal, or regex source when is_regex
    bool is_regex = false;
    RuleId rule;
    std::regex compiled;   // set when is_regex

    static PhraseEntry literal(std::string s, RuleId r) { return {std::move(s), false, r, {}}; }
    static PhraseEntry regex(std::string s, RuleId r) {
        PhraseEntry e{s, true, r, {}};
        e.compiled = std::regex(e.surface);
        return e;
    }
};

/// The built-in table mirrors assets/phrase_table.tsv; the asset can extend or
/// replace it at runtime without a rebuild.
inline std::vector<PhraseEntry> builtin_phrase_table() {
    auto lit = [](const char* s, RuleId r) { return PhraseEntry::literal(s, r); };
    auto rx = [](const char* s, RuleId r) { return PhraseEntry::regex(s, r); };
    return {
        lit("today", RuleId::Today),
        lit("今天", RuleId::Today),
        lit("今日", RuleId::Today),
        lit("yesterday", RuleId::Yesterday),
        lit("昨天", RuleId::Yesterday),
        lit("昨日", RuleId::Yesterday),
        lit("tomorrow", RuleId::Tomorrow),
        lit("明天", RuleId::Tomorrow),
        lit("明日", RuleId::Tomorrow),
        lit("last week", RuleId::LastWeek),
        lit("上周", RuleId::LastWeek),
        lit("上星期", RuleId::LastWeek),
        lit("this month", RuleId::ThisMonth),
        lit("本月", RuleId::ThisMonth),
        lit("这个月", RuleId::ThisMonth),
        lit("latest", RuleId::Latest),
        lit("最新", RuleId::Latest),
        lit("最新一期", RuleId::Latest),
        // Explicit exclusion of the anchor day.
        rx(R"(^(?:past|last) (\d+) days?\s*\(excluding today\)$)", RuleId::PastDaysExcl),
        rx(R"(^最近(\d+)天\s*\(不含今天\)$)", RuleId::PastDaysExcl),
        rx(R"(^最近(\d+)天\s*\(不包含今天\)$)", RuleId::PastDaysExcl),
        rx(R"(^过去(\d+)天\s*\(不含今天\)$)", RuleId::PastDaysExcl),
        // Explicit inclusion.
        rx(R"(^(?:past|last) (\d+) days?\s*\(including today\)$)", RuleId::PastDaysIncl),
        rx(R"(^最近(\d+)天\s*\(含今天\)$)", RuleId::PastDaysIncl),
        rx(R"(^最近(\d+)天\s*\(包含今天\)$)", RuleId::PastDaysIncl),
        rx(R"(^过去(\d+)天\s*\(含今天\)$)", RuleId::PastDaysIncl),
        // Unqualified N-day window counts the anchor day.
        rx(R"(^(?:past|last) (\d+) days?$)", RuleId::PastDaysIncl),
        rx(R"(^最近(\d+)天$)", RuleId::PastDaysIncl),
        rx(R"(^过去(\d+)天$)", RuleId::PastDaysIncl),
    };
}

/// Loads a phrase table asset. Format: one entry per line,
/// `surface<TAB>rule_id`; a surface wrapped in slashes is a regex whose first
/// group captures N. Lines starting with # are comments.
inline std::vector<PhraseEntry> load_phrase_table(const fs::path& path) {
    std::vector<PhraseEntry> table;
    int lineno = 0;
    for (const auto& raw : util::read_lines(path)) {
        ++lineno;
        std::string line = util::trim(raw);
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw Error(util::format("phrase table %s line %d: expected TAB separator", path.string().c_str(), lineno));
        std::string surface = util::trim(line.substr(0, tab));
        std::string rule_name = util::trim(line.substr(tab + 1));
        auto rule = rule_from_name(rule_name);
        if (!rule)
            throw Error(util::format("phrase table %s line %d: unknown rule id '%s'", path.string().c_str(), lineno,
                                     rule_name.c_str()));
        if (surface.size() >= 2 && surface.front() == '/' && surface.back() == '/')
            table.push_back(PhraseEntry::regex(surface.substr(1, surface.size() - 2), *rule));
        else
            table.push_back(PhraseEntry::literal(detail::normalize(surface), *rule));
    }
    return table;
}

struct Resolution {
    RuleId rule;
    int n = 0; // for past-days rules
};

inline std::optional<Resolution> match_phrase(const std::string& phrase, const std::vector<PhraseEntry>& table) {
    std::string norm = detail::normalize(phrase);
    for (const auto& entry : table) {
        if (entry.is_regex) {
            std::smatch m;
            if (std::regex_match(norm, m, entry.compiled)) {
                int n = m.size() > 1 && m[1].matched ? std::stoi(m[1]) : 0;
                return Resolution{entry.rule, n};
            }
        } else if (norm == entry.surface) {
            return Resolution{entry.rule, 0};
        }
    }
    return std::nullopt;
}

/// Converts a relative-time phrase into calendar dates against the anchor.
/// Deterministic: depends only on the phrase, the anchor's calendar date and
/// its offset. Unknown phrases raise UnsupportedPhrase — never a silent guess.
inline DateWindow resolve(const std::string& phrase, const AnchorTimestamp& anchor,
                          const std::vector<PhraseEntry>& table) {
    auto res = match_phrase(phrase, table);
    if (!res)
        throw UnsupportedPhrase(phrase);

    const CivilDate today = anchor.date;
    DateWindow w;
    auto span = [&](const CivilDate& first, int64_t count) {
        for (int64_t k = 0; k < count; ++k)
            w.dates.push_back(civil::add_days(first, k));
    };

    switch (res->rule) {
    case RuleId::Today:
        w.dates.push_back(today);
        break;
    case RuleId::Yesterday:
        w.dates.push_back(civil::add_days(today, -1));
        w.excludes_anchor = true;
        break;
    case RuleId::Tomorrow:
        w.dates.push_back(civil::add_days(today, 1));
        w.excludes_anchor = true;
        break;
    case RuleId::PastDaysExcl:
        if (res->n <= 0) throw UnsupportedPhrase(phrase);
        span(civil::add_days(today, -res->n), res->n);
        w.excludes_anchor = true;
        break;
    case RuleId::PastDaysIncl:
        if (res->n <= 0) throw UnsupportedPhrase(phrase);
        span(civil::add_days(today, -(res->n - 1)), res->n);
        break;
    case RuleId::LastWeek: {
        int wd = civil::weekday(today); // Monday = 0
        CivilDate this_monday = civil::add_days(today, -wd);
        span(civil::add_days(this_monday, -7), 7);
        w.excludes_anchor = true;
        break;
    }
    case RuleId::ThisMonth: {
        CivilDate first{today.year, today.month, 1};
        span(first, civil::days_in_month(today.year, today.month));
        break;
    }
    case RuleId::Latest:
        w.kind = DateWindow::Kind::Latest;
        break;
    }
    return w;
}

inline DateWindow resolve(const std::string& phrase, const AnchorTimestamp& anchor) {
    static const std::vector<PhraseEntry> kTable = builtin_phrase_table();
    return resolve(phrase, anchor, kTable);
}

/// Formats each window date with a token pattern. Tokens: YYYY, MM, DD, M, D,
/// Month (full English name). Other letters are rejected; punctuation and
/// non-ASCII text pass through.
inline std::vector<std::string> format_absolute(const DateWindow& window, const std::string& pattern) {
    if (window.is_latest())
        throw Error("cannot format the 'latest' sentinel as calendar dates");
    struct Token {
        enum class Kind { Year4, Month2, Day2, Month1, Day1, MonthName, Literal } kind;
        std::string text;
    };
    std::vector<Token> tokens;
    size_t i = 0;
    while (i < pattern.size()) {
        if (pattern.compare(i, 5, "Month") == 0) {
            tokens.push_back({Token::Kind::MonthName, {}});
            i += 5;
        } else if (pattern.compare(i, 4, "YYYY") == 0) {
            tokens.push_back({Token::Kind::Year4, {}});
            i += 4;
        } else if (pattern.compare(i, 2, "MM") == 0) {
            tokens.push_back({Token::Kind::Month2, {}});
            i += 2;
        } else if (pattern.compare(i, 2, "DD") == 0) {
            tokens.push_back({Token::Kind::Day2, {}});
            i += 2;
        } else if (pattern[i] == 'M') {
            tokens.push_back({Token::Kind::Month1, {}});
            ++i;
        } else if (pattern[i] == 'D') {
            tokens.push_back({Token::Kind::Day1, {}});
            ++i;
        } else if (static_cast<unsigned char>(pattern[i]) < 0x80 &&
                   std::isalpha(static_cast<unsigned char>(pattern[i]))) {
            throw Error(util::format("unknown date format token at '%c' in pattern \"%s\"", pattern[i],
                                     pattern.c_str()));
        } else {
            size_t start = i;
            util::utf8_next(pattern, i);
            tokens.push_back({Token::Kind::Literal, std::string(pattern.substr(start, i - start))});
        }
    }
    std::vector<std::string> out;
    out.reserve(window.dates.size());
    for (const auto& d : window.dates) {
        std::string s;
        for (const auto& t : tokens) {
            switch (t.kind) {
            case Token::Kind::Year4: s += util::format("%04d", d.year); break;
            case Token::Kind::Month2: s += util::format("%02d", d.month); break;
            case Token::Kind::Day2: s += util::format("%02d", d.day); break;
            case Token::Kind::Month1: s += util::format("%d", d.month); break;
            case Token::Kind::Day1: s += util::format("%d", d.day); break;
            case Token::Kind::MonthName: s += civil::month_name(d.month); break;
            case Token::Kind::Literal: s += t.text; break;
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace forge::temporal
