// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <regex>
#include <string>
#include <vector>

#include "forge/util.hpp"

namespace forge::lint {

enum class Severity { Error, Warning };

struct Finding {
    std::string rule;     // stable rule id
    int line = 0;         // 1-based; 0 when the rule targets the whole file
    std::string message;
    Severity severity = Severity::Error;
};

struct LintReport {
    std::vector<Finding> findings;
    bool passed = true; // no error-severity finding

    bool has_rule(std::string_view rule) const {
        for (const auto& f : findings)
            if (f.rule == rule) return true;
        return false;
    }
    std::string to_string() const {
        std::string out;
        for (const auto& f : findings)
            out += util::format("%s:%d: [%s] %s\n", f.severity == Severity::Error ? "error" : "warning", f.line,
                                f.rule.c_str(), f.message.c_str());
        return out;
    }
};

class ParseError : public Error {
public:
    using Error::Error;
};

namespace detail {

/// Blanks Python comments and the interiors of string literals (quotes kept)
/// so that code-pattern rules never fire on text data. Handles ', ", triple
/// quotes, and backslash escapes; byte positions and line breaks within
/// literals are preserved.
inline std::string blank_strings_and_comments(const std::string& src) {
    std::string out = src;
    size_t i = 0;
    const size_t n = src.size();
    auto at = [&](size_t k, char c) { return k < n && src[k] == c; };
    while (i < n) {
        char c = src[i];
        if (c == '#') {
            while (i < n && src[i] != '\n') out[i++] = ' ';
            continue;
        }
        if (c == '\'' || c == '"') {
            char q = c;
            bool triple = at(i + 1, q) && at(i + 2, q);
            size_t start = i;
            i += triple ? 3 : 1;
            while (i < n) {
                if (src[i] == '\\' && !triple) {
                    out[i] = ' ';
                    if (i + 1 < n && src[i + 1] != '\n') out[i + 1] = ' ';
                    i += 2;
                    continue;
                }
                if (src[i] == q && (!triple || (at(i + 1, q) && at(i + 2, q)))) {
                    i += triple ? 3 : 1;
                    break;
                }
                if (src[i] != '\n') out[i] = ' ';
                ++i;
            }
            // Keep the opening/closing quotes visible for fallback-literal rules.
            (void)start;
            continue;
        }
        ++i;
    }
    return out;
}

inline int line_of(const std::string& text, size_t pos) {
    int line = 1;
    for (size_t i = 0; i < pos && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

inline void find_all(const std::string& text, const std::regex& re, std::vector<size_t>& out) {
    auto begin = std::sregex_iterator(text.begin(), text.end(), re);
    for (auto it = begin; it != std::sregex_iterator(); ++it)
        out.push_back(static_cast<size_t>(it->position()));
}

} // namespace detail

struct LintOptions {
    std::string entry_point = "main";
    bool check_syntax = false;           // shell out to the interpreter for a parse check
    std::string python_exe = "python3";
};

/// Static source gates for generated workflows:
///   silent-failure   — try/except or contextlib.suppress anywhere
///   fallback-literal — a literal default standing in for fetched data
///   hardcoded-clock  — `now`/`today` bound to a fixed date instead of a clock read
///   missing-clock-read — no datetime.now() call at all
///   missing-entry-point / missing-print — entry contract not met
inline LintReport lint_workflow(const std::string& source, const LintOptions& opts = {}) {
    if (opts.check_syntax) {
        // A parse failure is an error, not a finding: the rule set below only
        // makes sense for syntactically valid sources.
        std::string tmp = (fs::temp_directory_path() / ("forge-lint-" + util::fnv1a_hex(source) + ".py")).string();
        util::write_file(tmp, source);
        std::string cmd = opts.python_exe + " -c \"import ast,sys; ast.parse(open(sys.argv[1]).read())\" '" + tmp +
                          "' 2>/dev/null";
        int rc = std::system(cmd.c_str());
        fs::remove(tmp);
        if (rc != 0)
            throw ParseError("unparseable source");
    }

    LintReport report;
    const std::string code = detail::blank_strings_and_comments(source);
    auto add = [&](const char* rule, size_t pos, const std::string& msg,
                   Severity sev = Severity::Error) {
        report.findings.push_back({rule, detail::line_of(code, pos), msg, sev});
    };

    // (a) exception suppression
    static const std::regex re_try(R"(\b(?:try|except|finally)\b)");
    static const std::regex re_suppress(R"(\bsuppress\s*\()");
    std::vector<size_t> hits;
    detail::find_all(code, re_try, hits);
    detail::find_all(code, re_suppress, hits);
    for (size_t pos : hits)
        add("silent-failure", pos, "exception suppression is not allowed; let failures propagate");

    // (b) fallback / hardcoded-answer patterns
    hits.clear();
    static const std::regex re_or_lit(R"(\bor\s*["'])");
    static const std::regex re_ternary_lit(R"(\belse\s*["'])");
    static const std::regex re_guard_default(R"(\bif\s+not\s+\w+\s*:\s*\w+\s*=\s*["'])");
    detail::find_all(code, re_or_lit, hits);
    detail::find_all(code, re_ternary_lit, hits);
    detail::find_all(code, re_guard_default, hits);
    for (size_t pos : hits)
        add("fallback-literal", pos, "literal fallback value masks retrieval failure");

    // (d) hardcoded "now"
    hits.clear();
    static const std::regex re_fixed_now(
        R"(\b(?:now|today|current_time)\s*=\s*(?:["']|datetime\s*\(\s*\d|date\s*\(\s*\d|datetime\.strptime\b|datetime\.fromisoformat\b))");
    detail::find_all(code, re_fixed_now, hits);
    for (size_t pos : hits)
        add("hardcoded-clock", pos, "clock variable bound to a fixed value; read the live clock instead");

    // (c) live clock read must exist
    static const std::regex re_clock_read(R"(\bdatetime\.now\s*\()");
    if (!std::regex_search(code, re_clock_read))
        add("missing-clock-read", 0, "no datetime.now() call; workflows must anchor to the execution clock");

    // (e) entry contract
    std::regex re_entry(R"(\bdef\s+)" + opts.entry_point + R"(\s*\()");
    if (!std::regex_search(code, re_entry))
        add("missing-entry-point", 0, "no `def " + opts.entry_point + "(` found");
    static const std::regex re_print(R"(\bprint\s*\()");
    if (!std::regex_search(code, re_print))
        add("missing-print", 0, "entry point never prints its result");

    for (const auto& f : report.findings)
        if (f.severity == Severity::Error) report.passed = false;
    return report;
}

} // namespace forge::lint
