// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/agent.hpp"
#include "forge/assets.hpp"
#include "forge/core.hpp"
#include "forge/engine.hpp"

namespace forge::builder {

using agent::Budget;
using agent::LlmClient;
using agent::Observation;
using agent::ToolDescriptor;
using agent::Toolset;
using agent::Trajectory;
using engine::FixtureBundle;
using engine::Mode;
using engine::WorkflowEngine;

enum class CandidateStatus { Generated, Verified, Approved, Rejected, Revised };

inline const char* to_string(CandidateStatus s) {
    switch (s) {
    case CandidateStatus::Generated: return "generated";
    case CandidateStatus::Verified: return "verified";
    case CandidateStatus::Approved: return "approved";
    case CandidateStatus::Rejected: return "rejected";
    case CandidateStatus::Revised: return "revised";
    }
    return "?";
}

inline std::optional<CandidateStatus> candidate_status_from_string(std::string_view s) {
    if (s == "generated") return CandidateStatus::Generated;
    if (s == "verified") return CandidateStatus::Verified;
    if (s == "approved") return CandidateStatus::Approved;
    if (s == "rejected") return CandidateStatus::Rejected;
    if (s == "revised") return CandidateStatus::Revised;
    return std::nullopt;
}

/// A generated (question, workflow) pair awaiting or past review.
struct CandidatePair {
    std::string id;
    std::string question;
    WorkflowSpec workflow;
    std::string trajectory_ref;
    std::string answer;          // verification answer, when verified
    std::string screenshot_ref;  // evidence image path, when verified
    CandidateStatus status = CandidateStatus::Generated;
    std::string target_url;
    std::string topic;
    std::string created_at;
    std::string decided_at;
    std::string reviewer_note;
};

struct ReviewDecision {
    std::string candidate_id;
    std::string verdict; // approve | reject | revise
    std::string note;
    std::string timestamp;
};

/// Candidate persistence under <root>/candidates/<id>/ plus an append-only
/// decisions log. All mutation is serialized through one mutex: the
/// single-writer append path.
class CandidateStore {
public:
    explicit CandidateStore(fs::path root) : root_(std::move(root)) {}

    const fs::path& root() const { return root_; }
    fs::path dir_of(const std::string& id) const { return root_ / "candidates" / id; }
    fs::path decisions_log() const { return root_ / "decisions.jsonl"; }

    bool exists(const std::string& id) const { return fs::exists(dir_of(id) / "record.json"); }

    void save(const CandidatePair& c) {
        std::lock_guard<std::mutex> lock(mu_);
        fs::path dir = dir_of(c.id);
        json j;
        j["id"] = c.id;
        j["question"] = c.question;
        j["workflow_id"] = c.workflow.id;
        j["status"] = to_string(c.status);
        j["target_url"] = c.target_url;
        j["topic"] = c.topic;
        j["trajectory_ref"] = c.trajectory_ref;
        j["answer"] = c.answer;
        j["screenshot_ref"] = c.screenshot_ref;
        j["created_at"] = c.created_at;
        j["decided_at"] = c.decided_at;
        j["reviewer_note"] = c.reviewer_note;
        util::write_file_if_changed(dir / "record.json", j.dump(2) + "\n");
        util::write_file_if_changed(dir / "workflow.py", c.workflow.source);
        util::write_file_if_changed(dir / "workflow.json", core::workflow_sidecar_to_json(c.workflow).dump(2) + "\n");
    }

    CandidatePair load(const std::string& id) const {
        fs::path dir = dir_of(id);
        json j = json::parse(util::read_file(dir / "record.json"));
        CandidatePair c;
        c.id = j.at("id").get<std::string>();
        c.question = j.value("question", "");
        c.status = candidate_status_from_string(j.value("status", "generated")).value_or(CandidateStatus::Generated);
        c.target_url = j.value("target_url", "");
        c.topic = j.value("topic", "");
        c.trajectory_ref = j.value("trajectory_ref", "");
        c.answer = j.value("answer", "");
        c.screenshot_ref = j.value("screenshot_ref", "");
        c.created_at = j.value("created_at", "");
        c.decided_at = j.value("decided_at", "");
        c.reviewer_note = j.value("reviewer_note", "");
        c.workflow.id = j.value("workflow_id", "");
        c.workflow.source = util::read_file(dir / "workflow.py");
        json side = json::parse(util::read_file(dir / "workflow.json"));
        c.workflow.manifest = core::workflow_manifest_from_json(side);
        c.workflow.created_at = side.value("created_at", "");
        return c;
    }

    std::vector<std::string> list_ids() const {
        std::vector<std::string> out;
        fs::path dir = root_ / "candidates";
        if (!fs::exists(dir)) return out;
        for (const auto& e : fs::directory_iterator(dir))
            if (fs::exists(e.path() / "record.json"))
                out.push_back(e.path().filename().string());
        std::sort(out.begin(), out.end());
        return out;
    }

    void append_decision(const ReviewDecision& d) {
        std::lock_guard<std::mutex> lock(mu_);
        json j;
        j["candidate_id"] = d.candidate_id;
        j["verdict"] = d.verdict;
        j["note"] = d.note;
        j["ts"] = d.timestamp;
        util::append_line(decisions_log(), j.dump());
    }

private:
    fs::path root_;
    std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Builder session: the five tools over shared engine + store

struct SessionConfig {
    Mode mode = Mode::Live;
    const FixtureBundle* fixture = nullptr; // required in replay
    std::vector<std::string> allowed_hosts; // session allowlist for drafts
    int timeout_s = 120;
    AnchorTimestamp anchor;
    fs::path evidence_dir; // where check_output_content drops artifacts
    size_t html_snapshot_cap = 8000;
};

/// Mutable state of one generation/repair session. Tools bound to a session
/// are per-loop (not shareable across loops).
struct SessionState {
    std::vector<std::string> executed_source_hashes; // successful sandbox runs
    std::vector<std::string> fetched_hosts;
    std::string verified_source_hash;
    std::string verified_answer;
    std::string screenshot_ref;
    std::optional<CandidatePair> saved;
    std::string last_save_error;
};

inline WorkflowSpec draft_workflow(const SessionConfig& cfg, const std::string& source) {
    WorkflowSpec wf;
    wf.id = "draft";
    wf.source = source;
    wf.manifest.entry_point = "main";
    wf.manifest.allowed_hosts = cfg.allowed_hosts.empty() ? std::vector<std::string>{"localhost"}
                                                          : cfg.allowed_hosts;
    wf.manifest.timeout_s = cfg.timeout_s;
    wf.manifest.clock_mode = "injected";
    return wf;
}

/// check_html_content: fetch a page and return markup plus a markdown
/// rendering, size-capped. Read-only.
inline ToolDescriptor tool_check_html_content(const SessionConfig& cfg, SessionState& state) {
    ToolDescriptor d;
    d.name = "check_html_content";
    d.description = "Fetch a web page and return its raw markup together with a markdown rendering, "
                    "so dynamic elements can be located. Read-only.";
    d.params = {{"url", "string", "Page address to inspect", true}};
    d.shareable = false;
    d.handler = [&cfg, &state](const json& args) -> Observation {
        std::string url = args.at("url").get<std::string>();
        std::string body;
        if (cfg.mode == Mode::Replay) {
            if (!cfg.fixture)
                return {"no fixture bound to this replay session", true};
            auto snap = cfg.fixture->lookup(url);
            if (!snap)
                return {"fixture miss: " + url, true};
            body = *snap;
        } else {
            net::Url parsed;
            try {
                parsed = net::parse_url(url);
            } catch (const Error& e) {
                return {e.what(), true};
            }
            auto fetched = net::http_get(url, cfg.timeout_s);
            if (!fetched.ok)
                return {fetched.error.empty() ? util::format("http status %d", fetched.status) : fetched.error,
                        true};
            body = fetched.body;
            state.fetched_hosts.push_back(parsed.host);
        }
        std::string markup = util::truncate_utf8(body, cfg.html_snapshot_cap);
        std::string markdown = util::truncate_utf8(html::to_markdown(body), cfg.html_snapshot_cap);
        return {"=== markup ===\n" + markup + "\n=== markdown ===\n" + markdown, false};
    };
    return d;
}

/// code_interpreter: run a draft script in the workflow sandbox. Failures are
/// observations (full error text), never loop errors — that is the
/// self-repair channel.
inline ToolDescriptor tool_code_interpreter(const WorkflowEngine& engine, const SessionConfig& cfg,
                                            SessionState& state) {
    ToolDescriptor d;
    d.name = "code_interpreter";
    d.description = "Execute a draft workflow script in the sandbox and return stdout/stderr/status. "
                    "Use it to test that the workflow runs before saving.";
    d.params = {{"source", "string", "Complete workflow script to execute", true}};
    d.shareable = false;
    d.handler = [&engine, &cfg, &state](const json& args) -> Observation {
        std::string source = args.at("source").get<std::string>();
        WorkflowSpec wf = draft_workflow(cfg, source);
        WorkflowEngine::RunCapture cap;
        auto result = engine.execute(wf, cfg.anchor, cfg.mode, cfg.fixture, &cap, /*skip_lint=*/true);
        for (const auto& e : cap.request_log) {
            try {
                state.fetched_hosts.push_back(net::parse_url(e.url).host);
            } catch (...) {
            }
        }
        if (result.ok())
            state.executed_source_hashes.push_back(util::fnv1a_hex(source));
        json out;
        out["status"] = engine::to_string(result.status);
        out["stdout"] = result.answer;
        out["stderr"] = result.stderr_excerpt;
        return {out.dump(2), false};
    };
    return d;
}

/// check_output_content: execute with evidence capture; the agent judges
/// whether answer and screenshot align.
inline ToolDescriptor tool_check_output_content(const WorkflowEngine& engine, const SessionConfig& cfg,
                                                SessionState& state) {
    ToolDescriptor d;
    d.name = "check_output_content";
    d.description = "Execute the workflow, capture the answer together with a screenshot of the final page, "
                    "and return both for cross-validation.";
    d.params = {{"source", "string", "Workflow script to verify", true}};
    d.shareable = false;
    d.handler = [&engine, &cfg, &state](const json& args) -> Observation {
        std::string source = args.at("source").get<std::string>();
        WorkflowSpec wf = draft_workflow(cfg, source);
        auto [result, evidence] = engine.capture_evidence(wf, cfg.anchor, cfg.mode, cfg.fixture);
        if (!result.ok()) {
            json out;
            out["status"] = engine::to_string(result.status);
            out["stderr"] = result.stderr_excerpt;
            return {out.dump(2), true};
        }
        state.executed_source_hashes.push_back(util::fnv1a_hex(source));
        state.verified_source_hash = util::fnv1a_hex(source);
        state.verified_answer = result.answer;
        if (!cfg.evidence_dir.empty() && !evidence.screenshot_ppm.empty()) {
            fs::path shot = cfg.evidence_dir / "screenshot.ppm";
            util::write_file_if_changed(shot, evidence.screenshot_ppm);
            state.screenshot_ref = shot.string();
        }
        json out;
        out["answer"] = result.answer;
        out["screenshot"] = state.screenshot_ref;
        out["pages_fetched"] = evidence.request_log.size();
        return {out.dump(2), false};
    };
    return d;
}

/// think: records a planning note into the trajectory; no side effects.
inline ToolDescriptor tool_think() {
    ToolDescriptor d;
    d.name = "think";
    d.description = "Record a planning or diagnosis note. No side effects.";
    d.params = {{"note", "string", "The note to record", true}};
    d.handler = [](const json&) -> Observation { return {"noted", false}; };
    return d;
}

/// save_generated_item: the save-gate. Refuses sources that fail lints or
/// were never successfully executed in this session. Terminal on success.
inline ToolDescriptor tool_save_generated_item(const SessionConfig& cfg, SessionState& state,
                                               CandidateStore& store, const std::string& target_url,
                                               const std::string& topic, const std::string& created_at) {
    ToolDescriptor d;
    d.name = "save_generated_item";
    d.description = "Persist the final question/workflow pair. Only callable after the workflow passed lint "
                    "and executed successfully in this session.";
    d.params = {{"question", "string", "The time-sensitive question", true},
                {"workflow_source", "string", "The verified workflow script", true}};
    d.terminal_on_success = true;
    d.shareable = false;
    d.handler = [&cfg, &state, &store, target_url, topic, created_at](const json& args) -> Observation {
        std::string question = args.at("question").get<std::string>();
        std::string source = args.at("workflow_source").get<std::string>();

        auto report = lint::lint_workflow(source);
        if (!report.passed) {
            state.last_save_error = "save refused, lint failed:\n" + report.to_string();
            return {state.last_save_error, true};
        }
        std::string hash = util::fnv1a_hex(source);
        bool executed = false;
        for (const auto& h : state.executed_source_hashes)
            if (h == hash) executed = true;
        if (!executed) {
            state.last_save_error =
                "unverified save refused: this exact source has no successful execution in this session";
            return {state.last_save_error, true};
        }

        CandidatePair c;
        c.id = "cand-" + util::fnv1a_hex(question + "\n" + source).substr(0, 12);
        c.question = question;
        c.target_url = target_url;
        c.topic = topic;
        c.created_at = created_at;
        c.workflow.id = "wf-" + util::fnv1a_hex(source).substr(0, 12);
        c.workflow.source = source;
        c.workflow.created_at = created_at;
        c.workflow.manifest.entry_point = "main";
        c.workflow.manifest.timeout_s = cfg.timeout_s;
        c.workflow.manifest.clock_mode = "injected";
        // Allowlist: hosts actually touched this session, else the target's.
        std::vector<std::string> hosts = state.fetched_hosts;
        if (cfg.mode == Mode::Replay && cfg.fixture) {
            for (const auto& [url, body] : cfg.fixture->snapshots) {
                (void)body;
                try {
                    hosts.push_back(net::parse_url(url).host);
                } catch (...) {
                }
            }
        }
        try {
            hosts.push_back(net::parse_url(target_url).host);
        } catch (...) {
        }
        std::sort(hosts.begin(), hosts.end());
        hosts.erase(std::unique(hosts.begin(), hosts.end()), hosts.end());
        c.workflow.manifest.allowed_hosts = hosts;

        bool verified = state.verified_source_hash == hash;
        c.status = verified ? CandidateStatus::Verified : CandidateStatus::Generated;
        if (verified) {
            c.answer = state.verified_answer;
            c.screenshot_ref = state.screenshot_ref;
        }
        store.save(c);
        state.saved = c;
        return {"saved candidate " + c.id + " with status " + to_string(c.status), false};
    };
    return d;
}

inline Toolset session_toolset(const WorkflowEngine& engine, const SessionConfig& cfg, SessionState& state,
                               CandidateStore& store, const std::string& target_url, const std::string& topic,
                               const std::string& created_at) {
    Toolset tools;
    tools.register_tool(tool_check_html_content(cfg, state));
    tools.register_tool(tool_code_interpreter(engine, cfg, state));
    tools.register_tool(tool_check_output_content(engine, cfg, state));
    tools.register_tool(tool_think());
    tools.register_tool(tool_save_generated_item(cfg, state, store, target_url, topic, created_at));
    return tools;
}

// ---------------------------------------------------------------------------
// generate_candidate

struct GenerateOptions {
    Budget budget{20, 1'000'000};
    fs::path assets_dir;
    std::string sample_question;
    std::string sample_workflow;
    agent::EventClock clock;
    fs::path trajectory_path;
};

struct GenerateOutcome {
    std::optional<CandidatePair> candidate;
    Trajectory trajectory;
    std::string failure_reason;
    bool saved() const { return candidate.has_value(); }
};

/// One agent-in-the-loop generation session: explore the target page, write
/// and test the workflow, verify output against evidence, save. Returns the
/// saved candidate or a failure report with the full trajectory.
inline GenerateOutcome generate_candidate(const std::string& target_url, const std::string& topic,
                                          LlmClient& client, const WorkflowEngine& engine, SessionConfig cfg,
                                          CandidateStore& store, const GenerateOptions& opts) {
    std::string tmpl = assets::load("prompts/workflow_generation.txt", opts.assets_dir);
    std::string system_prompt = assets::fill(tmpl, {{"sample_question", opts.sample_question},
                                                    {"sample_workflow", opts.sample_workflow}});
    std::string user_prompt = "目标网站: " + target_url + "\n主题: " + topic;

    if (cfg.allowed_hosts.empty()) {
        try {
            cfg.allowed_hosts.push_back(net::parse_url(target_url).host);
        } catch (...) {
        }
    }
    std::string created_at = opts.clock ? opts.clock() : agent::now_at_offset(cfg.anchor.offset_minutes).iso();

    SessionState state;
    Toolset tools = session_toolset(engine, cfg, state, store, target_url, topic, created_at);

    agent::LoopOptions lo;
    lo.clock = opts.clock;
    agent::TrajectoryWriter writer;
    if (!opts.trajectory_path.empty()) {
        writer = agent::TrajectoryWriter(opts.trajectory_path, lo.clock ? lo.clock : agent::wall_event_clock());
        lo.writer = &writer;
    }
    GenerateOutcome out;
    out.trajectory = agent::run_loop(system_prompt, user_prompt, tools, client, opts.budget, std::move(lo));

    if (state.saved) {
        CandidatePair c = *state.saved;
        if (!opts.trajectory_path.empty()) {
            c.trajectory_ref = opts.trajectory_path.string();
            store.save(c);
        }
        out.candidate = c;
    } else {
        out.failure_reason = !state.last_save_error.empty()
                                 ? state.last_save_error
                                 : "session ended without save_generated_item (" +
                                       std::string(agent::to_string(out.trajectory.status)) + ")";
    }
    return out;
}

/// Yield accounting for a batch of generation attempts.
struct BatchStats {
    int attempted = 0;
    int saved = 0;
    double yield_pct() const { return attempted == 0 ? 0.0 : 100.0 * saved / attempted; }
};

// ---------------------------------------------------------------------------
// Multi-hop expansion

struct HopSpec {
    std::string seed_id;
    std::string replacement; // entity -> descriptor text
    Level target_level = Level::L2;
};

/// Expands a seed item one hop up, reusing the seed's workflow so ground
/// truth stays consistent no matter how complex the question becomes.
inline TestItem expand_item(const TestItem& seed, const HopSpec& hop, const std::string& question,
                            const std::string& created_at, const std::string& new_id = {}) {
    if (seed.level == Level::L3)
        throw Error("cannot expand an L3 item: level cap reached");
    if (hop.seed_id != seed.id)
        throw Error("hop spec seed_id does not match the seed item");
    Level target = seed.level == Level::L1 ? Level::L2 : Level::L3;
    if (hop.target_level != target)
        throw Error(util::format("hop target level must be %s (seed level + 1)", to_string(target)));
    if (question.empty())
        throw Error("expanded item needs its question text");

    TestItem item;
    item.id = new_id.empty() ? seed.id + "-x" + to_string(target) : new_id;
    item.question = question;
    item.level = target;
    item.domain = seed.domain;
    item.workflow_ref = seed.workflow_ref;
    item.seed_id = seed.id;
    item.source_url = seed.source_url;
    item.validator = seed.validator;
    item.created_at = created_at;
    return item;
}

// ---------------------------------------------------------------------------
// Review

struct ReviewContext {
    CandidateStore* store = nullptr;
    Dataset* dataset = nullptr;      // approve appends here
    fs::path dataset_root;           // persisted on approve
};

/// Returns the next candidate awaiting review (generated or verified).
inline std::optional<CandidatePair> review_next(CandidateStore& store) {
    for (const auto& id : store.list_ids()) {
        CandidatePair c = store.load(id);
        if (c.status == CandidateStatus::Generated || c.status == CandidateStatus::Verified)
            return c;
    }
    return std::nullopt;
}

struct ApproveOptions {
    std::string domain;
    std::optional<std::string> validator;
    std::string item_id; // defaults to the candidate id
};

/// Applies a review decision. approve moves the pair into the dataset as an
/// L1 seed; reject archives; revise reopens with the reviewer note. Repeating
/// the identical decision is a no-op; a conflicting one is refused.
inline CandidatePair review_decide(ReviewContext ctx, const std::string& candidate_id,
                                   const std::string& verdict, const std::string& note,
                                   const std::string& timestamp, const ApproveOptions& approve_opts = {}) {
    if (!ctx.store->exists(candidate_id))
        throw Error("unknown candidate: " + candidate_id);
    CandidatePair c = ctx.store->load(candidate_id);

    auto already = [&](CandidateStatus s) {
        return (verdict == "approve" && s == CandidateStatus::Approved) ||
               (verdict == "reject" && s == CandidateStatus::Rejected) ||
               (verdict == "revise" && s == CandidateStatus::Revised);
    };
    if (already(c.status))
        return c; // idempotent repeat
    if (c.status == CandidateStatus::Approved || c.status == CandidateStatus::Rejected)
        throw Error("double-decide refused: candidate " + candidate_id + " is already " +
                    to_string(c.status));

    if (verdict == "approve") {
        if (c.status != CandidateStatus::Verified)
            throw Error("approve refused: candidate " + candidate_id + " has no verified execution evidence");
        if (!is_known_domain(approve_opts.domain))
            throw Error("approve needs a valid --domain (one of the 12 category labels); got \"" +
                        approve_opts.domain + "\"");
        TestItem item;
        item.id = approve_opts.item_id.empty() ? c.id : approve_opts.item_id;
        item.question = c.question;
        item.level = Level::L1;
        item.domain = approve_opts.domain;
        item.workflow_ref = c.workflow.id;
        item.source_url = c.target_url;
        item.validator = approve_opts.validator;
        item.created_at = timestamp;
        ctx.dataset->items.push_back(item);
        ctx.dataset->workflows[c.workflow.id] = c.workflow;
        core::refresh_manifest_counts(*ctx.dataset);
        core::save_dataset(*ctx.dataset, ctx.dataset_root);
        c.status = CandidateStatus::Approved;
    } else if (verdict == "reject") {
        c.status = CandidateStatus::Rejected;
    } else if (verdict == "revise") {
        c.status = CandidateStatus::Revised;
        c.reviewer_note = note;
    } else {
        throw Error("unknown review verdict: " + verdict);
    }
    c.decided_at = timestamp;
    ctx.store->save(c);
    ctx.store->append_decision({candidate_id, verdict, note, timestamp});
    return c;
}

/// Review pass-rate over a decided batch, to one decimal.
inline double review_pass_rate(int approved, int decided) {
    return decided == 0 ? 0.0 : 100.0 * approved / decided;
}

} // namespace forge::builder
