// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>

#include "forge/agent.hpp"
#include "forge/assets.hpp"

namespace forge::eval {

/// Parsed judge output. `extracted_final_answer` uses the literal "None"
/// sentinel when the response contained no final answer. A verdict that could
/// not be parsed after one re-ask is marked malformed (and counts incorrect).
struct JudgeVerdict {
    std::string extracted_final_answer;
    std::string reasoning;
    bool correct = false;
    bool malformed = false;
    int asks = 0; // completions consumed (1 normally, 2 after a re-ask)

    bool extracted_none() const {
        std::string t = util::to_lower(util::trim(extracted_final_answer));
        if (!t.empty() && (t.front() == '"' || t.front() == '\'')) t = t.substr(1);
        if (!t.empty() && (t.back() == '"' || t.back() == '\'')) t.pop_back();
        return t == "none";
    }
};

namespace detail {

/// Finds a field label like `extracted_final_answer:` tolerating ** wrappers,
/// brackets, and fullwidth colons. Returns the position just past the colon.
inline std::optional<size_t> find_label(const std::string& text, const std::string& label) {
    std::string lower = util::to_lower(text);
    size_t from = 0;
    while (true) {
        size_t pos = lower.find(util::to_lower(label), from);
        if (pos == std::string::npos) return std::nullopt;
        size_t p = pos + label.size();
        while (p < text.size() && (text[p] == '*' || text[p] == ']' || text[p] == ' ')) ++p;
        if (p < text.size() && text[p] == ':') return p + 1;
        if (p + 2 < text.size() && text.compare(p, 3, "\xEF\xBC\x9A") == 0) return p + 3; // fullwidth colon
        from = pos + 1;
    }
}

inline std::string field_segment(const std::string& text, size_t start, const std::vector<std::string>& stops) {
    size_t end = text.size();
    std::string lower = util::to_lower(text);
    for (const auto& stop : stops) {
        size_t pos = lower.find(util::to_lower(stop), start);
        if (pos != std::string::npos && pos < end) end = pos;
    }
    return util::trim(text.substr(start, end - start));
}

} // namespace detail

/// Parses the three labeled fields out of a judge completion. nullopt when
/// the output does not carry a usable yes/no verdict.
inline std::optional<JudgeVerdict> parse_judge_output(const std::string& text) {
    auto extracted_pos = detail::find_label(text, "extracted_final_answer");
    auto reasoning_pos = detail::find_label(text, "reasoning");
    auto correct_pos = detail::find_label(text, "correct");
    if (!correct_pos) return std::nullopt;

    JudgeVerdict v;
    if (extracted_pos)
        v.extracted_final_answer =
            detail::field_segment(text, *extracted_pos, {"reasoning", "correct", "[correct_answer]"});
    if (reasoning_pos)
        v.reasoning = detail::field_segment(text, *reasoning_pos, {"correct:", "correct："});

    std::string verdict = util::to_lower(detail::field_segment(text, *correct_pos, {}));
    // strip quotes/punctuation around yes|no
    std::string token;
    for (char c : verdict) {
        if (std::isalpha(static_cast<unsigned char>(c)))
            token += c;
        else if (!token.empty())
            break;
    }
    if (token == "yes")
        v.correct = true;
    else if (token == "no")
        v.correct = false;
    else
        return std::nullopt;
    if (!extracted_pos) return std::nullopt;
    return v;
}

/// Fills the evaluation template and asks the judge for semantic equivalence
/// between response and ground truth. Numeric near-misses within rounding are
/// the judge model's call per the template's own rule. Malformed output is
/// re-asked exactly once.
inline JudgeVerdict judge(const std::string& question, const std::string& response,
                          const std::string& correct_answer, agent::LlmClient& client,
                          const fs::path& assets_dir = {}) {
    if (util::trim(question).empty() || util::trim(response).empty() || util::trim(correct_answer).empty())
        throw Error("judge requires non-empty question, response and correct_answer");

    std::string prompt = assets::fill(assets::load("prompts/judge.txt", assets_dir),
                                      {{"question", question},
                                       {"response", response},
                                       {"correct_answer", correct_answer}});
    agent::ChatContext ctx;
    ctx.system_prompt = prompt;
    ctx.user_prompt = "";
    ctx.messages.push_back({{"role", "user"}, {"content", prompt}});

    int asks = 0;
    for (int attempt = 0; attempt < 2; ++attempt) {
        ++asks;
        agent::ModelTurn turn = client.complete(ctx);
        ctx.assistant_turns += 1;
        auto parsed = parse_judge_output(turn.text);
        if (parsed) {
            parsed->asks = asks;
            return *parsed;
        }
    }
    JudgeVerdict v;
    v.malformed = true;
    v.correct = false;
    v.extracted_final_answer = "None";
    v.reasoning = "judge output unparseable after one re-ask";
    v.asks = asks;
    return v;
}

} // namespace forge::eval
