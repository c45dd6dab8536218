// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "forge/builder.hpp"
#include "forge/engine.hpp"

namespace forge::repair {

using agent::Budget;
using agent::LlmClient;
using agent::Trajectory;
using engine::FailureSignal;
using engine::FixtureBundle;
using engine::Mode;
using engine::WorkflowEngine;

/// Multiset of answer token classes. Robust to value changes (a new draw, a
/// new temperature) while sensitive to shape changes (numbers becoming prose),
/// which operationalizes "the output format must not change".
struct FormatSignature {
    std::map<std::string, int> counts; // class -> occurrences

    bool operator==(const FormatSignature&) const = default;

    std::string to_string() const {
        std::string out;
        for (const auto& [k, v] : counts)
            out += util::format("%s:%d ", k.c_str(), v);
        return util::trim(out);
    }
};

/// Token classes: date (YYYY-MM-DD / YYYY年M月D日), decimal, integer,
/// cjk-run, word (latin run), separator punctuation. Whitespace is ignored.
inline FormatSignature format_signature(const std::string& answer) {
    FormatSignature sig;
    size_t i = 0;
    const size_t n = answer.size();
    auto peek_date = [&](size_t at) -> size_t {
        // YYYY-MM-DD or YYYY/MM/DD
        static const std::regex re(R"(^\d{4}[-/]\d{1,2}[-/]\d{1,2})");
        std::smatch m;
        std::string rest = answer.substr(at, 12);
        if (std::regex_search(rest, m, re)) return m[0].length();
        return 0;
    };
    while (i < n) {
        unsigned char c = static_cast<unsigned char>(answer[i]);
        if (std::isspace(c)) {
            ++i;
            continue;
        }
        if (std::isdigit(c)) {
            if (size_t len = peek_date(i); len > 0) {
                ++sig.counts["date"];
                i += len;
                continue;
            }
            size_t start = i;
            bool decimal = false;
            while (i < n && (std::isdigit(static_cast<unsigned char>(answer[i])) ||
                             (answer[i] == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(answer[i + 1]))))) {
                if (answer[i] == '.') decimal = true;
                ++i;
            }
            (void)start;
            ++sig.counts[decimal ? "decimal" : "integer"];
            continue;
        }
        if (c < 0x80) {
            if (std::isalpha(c)) {
                while (i < n && std::isalpha(static_cast<unsigned char>(answer[i]))) ++i;
                ++sig.counts["word"];
            } else {
                ++sig.counts["separator"];
                ++i;
            }
            continue;
        }
        size_t j = i;
        uint32_t cp = util::utf8_next(answer, j);
        if (util::is_cjk_codepoint(cp)) {
            // one run of consecutive CJK counts once
            size_t k = i;
            while (k < n) {
                size_t k2 = k;
                uint32_t cp2 = util::utf8_next(answer, k2);
                if (!util::is_cjk_codepoint(cp2)) break;
                k = k2;
            }
            // CJK punctuation acts as a separator, not a run
            if (cp >= 0x3000 && cp <= 0x303F) {
                ++sig.counts["separator"];
                i = j;
            } else {
                ++sig.counts["cjk-run"];
                i = k;
            }
        } else {
            ++sig.counts["separator"];
            i = j;
        }
    }
    return sig;
}

struct RepairOutcome {
    enum class Status { Repaired, Unrepairable };
    Status status = Status::Unrepairable;
    std::optional<WorkflowSpec> new_workflow;
    Trajectory trajectory;
    std::string reason;      // when unrepairable
    std::string diff_summary;

    bool repaired() const { return status == Status::Repaired; }
};

struct VerifyResult {
    bool passed = false;
    std::string reason;
};

/// Repair acceptance gate: the new workflow must execute cleanly, satisfy the
/// item's validator, keep the reference answer's format signature, and
/// introduce no fallback constructs.
inline VerifyResult verify_repair(const TestItem& item, const WorkflowSpec& old_wf, const WorkflowSpec& new_wf,
                                  const AnchorTimestamp& anchor, Mode mode, const WorkflowEngine& engine,
                                  const FixtureBundle* fixture, const std::string& reference_answer) {
    (void)old_wf;
    auto report = lint::lint_workflow(new_wf.source);
    if (!report.passed) {
        if (report.has_rule("fallback-literal") || report.has_rule("hardcoded-clock"))
            return {false, "fallback introduced:\n" + report.to_string()};
        return {false, "lint failed:\n" + report.to_string()};
    }
    auto result = engine.execute(new_wf, anchor, mode, fixture);
    if (!result.ok())
        return {false, util::format("execution %s: %s", engine::to_string(result.status),
                                    result.stderr_excerpt.c_str())};
    if (item.validator) {
        std::regex re(*item.validator);
        if (!std::regex_search(result.answer, re))
            return {false, "answer fails the item validator"};
    }
    if (!reference_answer.empty()) {
        FormatSignature expected = format_signature(reference_answer);
        FormatSignature got = format_signature(result.answer);
        if (!(expected == got))
            return {false, "format drift: expected {" + expected.to_string() + "} got {" + got.to_string() + "}"};
    }
    return {true, {}};
}

/// Line-level diff summary (added/removed counts) for the review record.
inline std::string diff_summary(const std::string& old_src, const std::string& new_src) {
    auto old_lines = util::split(old_src, '\n');
    auto new_lines = util::split(new_src, '\n');
    std::map<std::string, int> old_counts;
    for (const auto& l : old_lines) ++old_counts[l];
    int added = 0;
    for (const auto& l : new_lines) {
        auto it = old_counts.find(l);
        if (it != old_counts.end() && it->second > 0)
            --it->second;
        else
            ++added;
    }
    int removed = 0;
    for (const auto& [l, cnt] : old_counts) {
        (void)l;
        removed += cnt;
    }
    return util::format("+%d/-%d lines", added, removed);
}

/// Version history: old sources are retained, never overwritten in place.
class WorkflowHistory {
public:
    explicit WorkflowHistory(fs::path root) : root_(std::move(root)) {}

    fs::path dir_of(const std::string& workflow_id) const { return root_ / workflow_id; }

    int next_version(const std::string& workflow_id) const {
        int v = 0;
        fs::path dir = dir_of(workflow_id);
        if (fs::exists(dir))
            for (const auto& e : fs::directory_iterator(dir))
                if (e.path().extension() == ".py") ++v;
        return v + 1;
    }

    fs::path archive(const WorkflowSpec& wf, const std::string& note) {
        int v = next_version(wf.id);
        fs::path dir = dir_of(wf.id);
        fs::path src = dir / util::format("v%03d.py", v);
        util::write_file(src, wf.source);
        nlohmann::ordered_json j;
        j["version"] = v;
        j["note"] = note;
        j["manifest"] = core::workflow_sidecar_to_json(wf);
        util::write_file(dir / util::format("v%03d.json", v), j.dump(2) + "\n");
        return src;
    }

private:
    fs::path root_;
};

struct RepairOptions {
    Budget budget{20, 1'000'000};
    fs::path assets_dir;
    agent::EventClock clock;
    fs::path trajectory_path;
    std::string reference_answer; // last known-good answer for the format gate
    WorkflowHistory* history = nullptr;
};

namespace detail {
/// Per-workflow repair serialization: no two concurrent repairs of one id.
inline std::mutex& repair_mutex_for(const std::string& workflow_id) {
    static std::mutex registry_mu;
    static std::map<std::string, std::unique_ptr<std::mutex>> registry;
    std::lock_guard<std::mutex> lock(registry_mu);
    auto& slot = registry[workflow_id];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
}
} // namespace detail

/// Diagnose-and-patch session: an agent re-analyzes the page with the same
/// five tools, rewrites the workflow, and the result is accepted only through
/// verify_repair. Question text and workflow bindings never change — only the
/// source. The failed source is archived before any replacement.
inline RepairOutcome repair(const TestItem& item, const WorkflowSpec& old_wf, const FailureSignal& signal,
                            LlmClient& client, const WorkflowEngine& engine, builder::SessionConfig cfg,
                            const RepairOptions& opts) {
    std::lock_guard<std::mutex> serialize(detail::repair_mutex_for(old_wf.id));

    std::string system_prompt = assets::load("prompts/workflow_repair.txt", opts.assets_dir);
    std::string user_tmpl = assets::load("prompts/workflow_repair_user.txt", opts.assets_dir);
    std::string failure_text = std::string(engine::to_string(signal.kind)) + ": " + signal.detail;
    std::string user_prompt = assets::fill(
        user_tmpl, {{"question", item.question}, {"workflow", old_wf.source}, {"failure", failure_text}});

    if (cfg.allowed_hosts.empty())
        cfg.allowed_hosts = old_wf.manifest.allowed_hosts;
    cfg.timeout_s = old_wf.manifest.timeout_s;

    // The session reuses the builder toolset; the save tool writes the
    // candidate into a scratch store read back below.
    fs::path scratch = fs::temp_directory_path() / ("forge-repair-" + util::fnv1a_hex(old_wf.id + item.id));
    std::error_code ec;
    fs::remove_all(scratch, ec);
    builder::CandidateStore scratch_store(scratch);
    builder::SessionState state;
    std::string created_at = opts.clock ? opts.clock() : agent::now_at_offset(cfg.anchor.offset_minutes).iso();
    auto tools = builder::session_toolset(engine, cfg, state, scratch_store, item.source_url, item.question,
                                          created_at);

    agent::LoopOptions lo;
    lo.clock = opts.clock;
    agent::TrajectoryWriter writer;
    if (!opts.trajectory_path.empty()) {
        writer = agent::TrajectoryWriter(opts.trajectory_path, lo.clock ? lo.clock : agent::wall_event_clock());
        lo.writer = &writer;
    }

    RepairOutcome out;
    out.trajectory = agent::run_loop(system_prompt, user_prompt, tools, client, opts.budget, std::move(lo));
    fs::remove_all(scratch, ec);

    if (!state.saved) {
        out.reason = "repair session ended without a saved workflow (" +
                     std::string(agent::to_string(out.trajectory.status)) + ")";
        return out;
    }

    WorkflowSpec new_wf = old_wf; // identity preserved: same id, same manifest
    new_wf.source = state.saved->workflow.source;
    new_wf.created_at = created_at;

    auto verdict = verify_repair(item, old_wf, new_wf, cfg.anchor, cfg.mode, engine, cfg.fixture,
                                 opts.reference_answer);
    if (!verdict.passed) {
        out.reason = "verify failed: " + verdict.reason;
        return out;
    }
    if (opts.history) {
        opts.history->archive(old_wf, "pre-repair source, failure " + failure_text);
        opts.history->archive(new_wf, "repaired source");
    }
    out.status = RepairOutcome::Status::Repaired;
    out.new_workflow = new_wf;
    out.diff_summary = diff_summary(old_wf.source, new_wf.source);
    return out;
}

/// Share of workflows that needed repair over an evaluation period.
inline double repair_trigger_rate(int repaired_count, int total_workflows) {
    return total_workflows == 0 ? 0.0 : 100.0 * repaired_count / total_workflows;
}

} // namespace forge::repair
