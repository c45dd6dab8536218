// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/core.hpp"
#include "forge/fixture.hpp"
#include "forge/html.hpp"
#include "forge/http.hpp"
#include "forge/lint.hpp"
#include "forge/sandbox.hpp"

namespace forge::engine {

enum class ExecStatus { Ok, Exception, Timeout, Empty };

inline const char* to_string(ExecStatus s) {
    switch (s) {
    case ExecStatus::Ok: return "ok";
    case ExecStatus::Exception: return "exception";
    case ExecStatus::Timeout: return "timeout";
    case ExecStatus::Empty: return "empty";
    }
    return "?";
}

enum class Mode { Live, Replay };

inline const char* to_string(Mode m) { return m == Mode::Live ? "live" : "replay"; }

struct RequestLogEntry {
    int seq = 0;
    std::string url;
    int status = 0;
    size_t bytes = 0;
    std::string render; // html | markdown
};

/// Artifacts captured alongside an execution for human review.
struct EvidenceBundle {
    std::string screenshot_ppm;                       // image bytes; empty only on render failure
    std::vector<std::pair<std::string, std::string>> page_snapshots; // url -> markup
    std::vector<RequestLogEntry> request_log;
    std::vector<std::string> warnings;
};

/// Outcome of running a workflow at an anchor.
struct ExecutionResult {
    std::string answer;           // trimmed stdout of the entry point
    ExecStatus status = ExecStatus::Exception;
    std::string stderr_excerpt;
    int64_t duration_ms = 0;
    AnchorTimestamp anchor;
    Mode mode = Mode::Replay;
    std::optional<EvidenceBundle> evidence;

    bool ok() const { return status == ExecStatus::Ok; }
};

struct FailureSignal {
    enum class Kind { Exception, Empty, Invalid };
    Kind kind;
    std::string detail;
};

inline const char* to_string(FailureSignal::Kind k) {
    switch (k) {
    case FailureSignal::Kind::Exception: return "exception";
    case FailureSignal::Kind::Empty: return "empty";
    case FailureSignal::Kind::Invalid: return "invalid";
    }
    return "?";
}

struct EngineOptions {
    std::string python_exe = "python3";
    long memory_bytes = 512 * 1024 * 1024;
    size_t fetch_cap = 2 << 20;      // max stored page body
    bool enforce_lint = true;        // refuse to run sources that fail lints
};

/// Executes workflow scripts in the sandbox with brokered retrieval:
/// allowlisted live fetches, or full interception served from a fixture in
/// replay. Stateless across calls; safe to share between threads.
class WorkflowEngine {
public:
    explicit WorkflowEngine(EngineOptions opts = {}) : opts_(std::move(opts)) {}

    const EngineOptions& options() const { return opts_; }

    struct RunCapture {
        std::vector<RequestLogEntry> request_log;
        std::vector<std::pair<std::string, std::string>> pages; // url -> raw body
        std::string last_url;
        std::string last_body;
    };

    /// Exec(w, t): runs the workflow at `anchor`. In replay mode every fetch
    /// is served from `fixture` and the clock is pinned to the fixture's
    /// frozen instant; in live mode fetches are restricted to the manifest
    /// allowlist. Failures surface as status — never masked.
    ExecutionResult execute(const WorkflowSpec& workflow, const AnchorTimestamp& anchor, Mode mode,
                            const FixtureBundle* fixture = nullptr, RunCapture* capture = nullptr,
                            bool skip_lint = false) const {
        if (mode == Mode::Replay && !fixture)
            throw Error("replay execution requires a fixture bundle");

        ExecutionResult result;
        result.anchor = anchor;
        result.mode = mode;

        if (opts_.enforce_lint && !skip_lint) {
            lint::LintOptions lo;
            lo.entry_point = workflow.manifest.entry_point;
            auto report = lint::lint_workflow(workflow.source, lo);
            if (!report.passed) {
                result.status = ExecStatus::Exception;
                result.stderr_excerpt = "lint failed:\n" + report.to_string();
                return result;
            }
        }

        RunCapture local_capture;
        RunCapture& cap = capture ? *capture : local_capture;
        int seq = 0;

        auto broker = [&](const nlohmann::json& request) -> nlohmann::json {
            std::string op = request.value("op", "");
            if (op != "fetch")
                return {{"ok", false}, {"error", "unknown broker op: " + op}};
            std::string url = request.value("url", "");
            std::string render = request.value("render", "html");

            std::string body;
            int status = 0;
            if (mode == Mode::Replay) {
                auto snap = fixture->lookup(url);
                if (!snap)
                    return {{"ok", false}, {"error", "fixture miss: " + url}};
                body = *snap;
                status = 200;
            } else {
                net::Url parsed;
                try {
                    parsed = net::parse_url(url);
                } catch (const Error& e) {
                    return {{"ok", false}, {"error", e.what()}};
                }
                bool allowed = false;
                for (const auto& host : workflow.manifest.allowed_hosts)
                    if (host == parsed.host) allowed = true;
                if (!allowed)
                    return {{"ok", false}, {"error", "host not allowed: " + parsed.host}};
                auto fetched = net::http_get(url, workflow.manifest.timeout_s);
                if (!fetched.ok)
                    return {{"ok", false}, {"error", fetched.error.empty()
                                                         ? util::format("http status %d", fetched.status)
                                                         : fetched.error}};
                body = std::move(fetched.body);
                status = fetched.status;
            }
            if (body.size() > opts_.fetch_cap)
                body = util::truncate_utf8(body, opts_.fetch_cap);

            cap.request_log.push_back({++seq, url, status, body.size(), render});
            cap.pages.emplace_back(url, body);
            cap.last_url = url;
            cap.last_body = body;

            std::string rendered = render == "markdown" ? html::to_markdown(body) : body;
            return {{"ok", true}, {"status", status}, {"body", rendered}};
        };

        std::optional<AnchorTimestamp> clock;
        if (mode == Mode::Replay)
            clock = fixture->frozen_clock;
        else if (workflow.manifest.clock_mode == "injected")
            clock = anchor;

        sandbox::RunLimits limits;
        limits.timeout_s = workflow.manifest.timeout_s;
        limits.memory_bytes = opts_.memory_bytes;
        auto run = sandbox::run_script(workflow.source, workflow.manifest.entry_point, clock, limits, broker,
                                       opts_.python_exe);

        // Replay must be byte-deterministic: wall durations are environment
        // noise, so they are reported as zero there.
        result.duration_ms = mode == Mode::Replay ? 0 : run.duration_ms;
        if (!run.spawn_error.empty()) {
            result.status = ExecStatus::Exception;
            result.stderr_excerpt = run.spawn_error;
            return result;
        }
        if (run.timed_out) {
            result.status = ExecStatus::Timeout;
            result.stderr_excerpt = util::format("timed out after %d s", workflow.manifest.timeout_s);
            return result;
        }
        if (run.exit_code != 0) {
            result.status = ExecStatus::Exception;
            std::string err = util::trim(run.stderr_text);
            if (err.size() > 4000) err = "..." + err.substr(err.size() - 4000);
            result.stderr_excerpt = err.empty() ? util::format("exit code %d", run.exit_code) : err;
            return result;
        }
        result.answer = util::trim(run.stdout_text);
        result.status = result.answer.empty() ? ExecStatus::Empty : ExecStatus::Ok;
        return result;
    }

    /// execute() plus a self-contained review bundle: screenshot of the final
    /// visited page, a snapshot of every fetched page, and the request log.
    std::pair<ExecutionResult, EvidenceBundle> capture_evidence(const WorkflowSpec& workflow,
                                                                const AnchorTimestamp& anchor, Mode mode,
                                                                const FixtureBundle* fixture = nullptr) const {
        RunCapture cap;
        ExecutionResult result = execute(workflow, anchor, mode, fixture, &cap);
        EvidenceBundle bundle;
        bundle.request_log = cap.request_log;
        bundle.page_snapshots = cap.pages;
        try {
            std::string page_text = cap.last_body.empty()
                                        ? std::string("(no page visited)\n") + to_string(result.status)
                                        : cap.last_url + "\n\n" + html::to_markdown(cap.last_body);
            bundle.screenshot_ppm = html::render_text_image(page_text);
        } catch (const std::exception& e) {
            bundle.warnings.push_back(std::string("screenshot rendering failed: ") + e.what());
        }
        result.evidence = bundle;
        return {result, bundle};
    }

    /// One live execution with everything recorded: page bodies, request log,
    /// the frozen clock, and the produced answer. Replaying the bundle
    /// afterwards reproduces the answer byte-identically.
    FixtureBundle record_fixture(const WorkflowSpec& workflow, const AnchorTimestamp& anchor,
                                 const fs::path& out_dir) const {
        RunCapture cap;
        ExecutionResult result = execute(workflow, anchor, Mode::Live, nullptr, &cap);
        if (!result.ok())
            throw Error(util::format("live execution failed (%s): %s", to_string(result.status),
                                     result.stderr_excerpt.c_str()));
        FixtureBundle bundle;
        bundle.dir = out_dir;
        bundle.frozen_clock = anchor;
        bundle.expected_answer = result.answer;
        bundle.workflow_id = workflow.id;
        for (const auto& [url, body] : cap.pages)
            bundle.snapshots[url] = body;
        bundle.save();

        std::string log_lines;
        for (const auto& e : cap.request_log) {
            nlohmann::ordered_json j;
            j["seq"] = e.seq;
            j["url"] = e.url;
            j["status"] = e.status;
            j["bytes"] = e.bytes;
            j["render"] = e.render;
            log_lines += j.dump() + "\n";
        }
        util::write_file_if_changed(out_dir / "request_log.jsonl", log_lines);
        std::string page_text = cap.last_body.empty() ? std::string("(no page visited)")
                                                      : cap.last_url + "\n\n" + html::to_markdown(cap.last_body);
        util::write_file_if_changed(out_dir / "screenshot.ppm", html::render_text_image(page_text));
        return bundle;
    }

private:
    EngineOptions opts_;
};

/// Maps an execution outcome to the repair trigger taxonomy: exception, empty
/// result, or an answer the item's validity pattern rejects.
inline std::optional<FailureSignal> detect_failure(const ExecutionResult& result, const TestItem& item) {
    switch (result.status) {
    case ExecStatus::Exception:
    case ExecStatus::Timeout:
        return FailureSignal{FailureSignal::Kind::Exception, result.stderr_excerpt};
    case ExecStatus::Empty:
        return FailureSignal{FailureSignal::Kind::Empty, "workflow produced no output"};
    case ExecStatus::Ok:
        break;
    }
    if (item.validator) {
        std::regex re(*item.validator);
        if (!std::regex_search(result.answer, re))
            return FailureSignal{FailureSignal::Kind::Invalid,
                                 "answer does not match validator: " + *item.validator};
    }
    return std::nullopt;
}

} // namespace forge::engine
