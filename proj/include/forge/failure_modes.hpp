// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>

#include "forge/agent.hpp"
#include "forge/assets.hpp"
#include "forge/judge.hpp"

namespace forge::eval {

/// The seven-mode failure taxonomy for error trajectories.
enum class FailureMode {
    LazyRetrieval,
    SourceQuality,
    IncompleteScan,
    ParsingFail,
    TemporalConfusion,
    Hallucination,
    Logic,
};

inline const std::array<FailureMode, 7>& all_failure_modes() {
    static const std::array<FailureMode, 7> kModes = {
        FailureMode::LazyRetrieval,   FailureMode::SourceQuality, FailureMode::IncompleteScan,
        FailureMode::ParsingFail,     FailureMode::TemporalConfusion, FailureMode::Hallucination,
        FailureMode::Logic,
    };
    return kModes;
}

inline const char* to_string(FailureMode m) {
    switch (m) {
    case FailureMode::LazyRetrieval: return "LazyRetrieval";
    case FailureMode::SourceQuality: return "SourceQuality";
    case FailureMode::IncompleteScan: return "IncompleteScan";
    case FailureMode::ParsingFail: return "ParsingFail";
    case FailureMode::TemporalConfusion: return "TemporalConfusion";
    case FailureMode::Hallucination: return "Hallucination";
    case FailureMode::Logic: return "Logic";
    }
    return "?";
}

inline std::optional<FailureMode> failure_mode_from_string(std::string_view s) {
    for (FailureMode m : all_failure_modes())
        if (s == to_string(m)) return m;
    return std::nullopt;
}

struct Classification {
    FailureMode mode = FailureMode::Logic;
    bool low_confidence = false; // set when the classifier never named a valid mode
    std::string raw_output;
};

namespace detail {

inline std::optional<FailureMode> scan_for_mode(const std::string& text) {
    // Prefer an explicit "mode:" line; fall back to the first mode name found.
    std::string lower = util::to_lower(text);
    size_t mode_pos = lower.find("mode:");
    std::string scan = mode_pos == std::string::npos ? text : text.substr(mode_pos);
    size_t best_pos = std::string::npos;
    std::optional<FailureMode> best;
    for (FailureMode m : all_failure_modes()) {
        size_t pos = scan.find(to_string(m));
        if (pos != std::string::npos && pos < best_pos) {
            best_pos = pos;
            best = m;
        }
    }
    return best;
}

} // namespace detail

/// Renders a trajectory into the compact text the classifier sees.
inline std::string trajectory_digest(const agent::Trajectory& traj, size_t cap = 20000) {
    std::string out;
    for (const auto& ev : traj.events) {
        switch (ev.kind) {
        case agent::EventKind::ModelText:
            out += "[Think] " + ev.payload.value("text", "") + "\n";
            break;
        case agent::EventKind::ToolCall:
            out += "[Action] " + ev.payload.value("tool", "") + " " + ev.payload["arguments"].dump() + "\n";
            break;
        case agent::EventKind::Observation:
            out += "[Observation] " + util::truncate_utf8(ev.payload.value("content", ""), 2000) + "\n";
            break;
        case agent::EventKind::FinalAnswer:
            out += "[Final Answer] " + ev.payload.value("text", "") + "\n";
            break;
        default:
            break;
        }
    }
    return util::truncate_utf8(out, cap);
}

/// Assigns exactly one taxonomy mode to a failed run via the rubric prompt.
/// An answer outside the enum is re-asked once, then falls back to Logic with
/// a low-confidence mark.
inline Classification classify_failure(const std::string& trajectory_text, const JudgeVerdict& verdict,
                                       const std::string& question, const std::string& correct_answer,
                                       agent::LlmClient& client, const fs::path& assets_dir = {}) {
    if (verdict.correct)
        throw Error("classify_failure takes only records judged incorrect");

    std::string prompt = assets::fill(assets::load("prompts/failure_classifier.txt", assets_dir),
                                      {{"question", question},
                                       {"trajectory", trajectory_text},
                                       {"final_answer", verdict.extracted_final_answer},
                                       {"correct_answer", correct_answer}});
    agent::ChatContext ctx;
    ctx.system_prompt = prompt;
    ctx.messages.push_back({{"role", "user"}, {"content", prompt}});

    Classification result;
    for (int attempt = 0; attempt < 2; ++attempt) {
        agent::ModelTurn turn = client.complete(ctx);
        ctx.assistant_turns += 1;
        result.raw_output = turn.text;
        if (auto mode = detail::scan_for_mode(turn.text)) {
            result.mode = *mode;
            return result;
        }
    }
    result.mode = FailureMode::Logic;
    result.low_confidence = true;
    return result;
}

struct DistributionSlice {
    int count = 0;
    double pct = 0.0;
};

/// Percentages over classified failures; they sum to 100 up to rounding.
inline std::map<FailureMode, DistributionSlice> failure_distribution(const std::vector<FailureMode>& modes) {
    if (modes.empty())
        throw Error("failure_distribution needs at least one classified failure");
    std::map<FailureMode, DistributionSlice> out;
    for (FailureMode m : modes)
        ++out[m].count;
    for (auto& [m, slice] : out) {
        (void)m;
        slice.pct = 100.0 * slice.count / static_cast<double>(modes.size());
    }
    return out;
}

} // namespace forge::eval
