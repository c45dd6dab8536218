// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/civil_time.hpp"
#include "forge/util.hpp"

namespace forge::agent {

using json = nlohmann::ordered_json;

/// Wall instant at a fixed offset, for live trajectory timestamps.
inline AnchorTimestamp now_at_offset(int offset_minutes) {
    using namespace std::chrono;
    int64_t epoch = duration_cast<seconds>(system_clock::now().time_since_epoch()).count();
    AnchorTimestamp utc;
    utc.offset_minutes = 0;
    int64_t days = epoch >= 0 ? epoch / 86400 : (epoch - 86399) / 86400;
    int64_t rem = epoch - days * 86400;
    utc.date = civil::civil_from_days(days);
    utc.hour = static_cast<int>(rem / 3600);
    utc.minute = static_cast<int>((rem % 3600) / 60);
    utc.second = static_cast<int>(rem % 60);
    return utc.with_offset(offset_minutes);
}

/// Produces event timestamps. Live runs use the wall clock; replay runs use a
/// logical clock seeded at the anchor so artifacts are byte-stable.
using EventClock = std::function<std::string()>;

inline EventClock wall_event_clock(int offset_minutes = 0) {
    return [offset_minutes]() { return now_at_offset(offset_minutes).iso(); };
}

inline EventClock logical_event_clock(AnchorTimestamp anchor) {
    auto counter = std::make_shared<int64_t>(0);
    return [anchor, counter]() {
        int64_t k = (*counter)++;
        AnchorTimestamp t = anchor.with_offset(anchor.offset_minutes);
        int64_t secs = t.epoch_seconds() + k;
        AnchorTimestamp utc;
        utc.offset_minutes = 0;
        int64_t days = secs >= 0 ? secs / 86400 : (secs - 86399) / 86400;
        int64_t rem = secs - days * 86400;
        utc.date = civil::civil_from_days(days);
        utc.hour = static_cast<int>(rem / 3600);
        utc.minute = static_cast<int>((rem % 3600) / 60);
        utc.second = static_cast<int>(rem % 60);
        return utc.with_offset(anchor.offset_minutes).iso();
    };
}

// ---------------------------------------------------------------------------
// Trajectory

enum class EventKind { SystemPrompt, UserPrompt, ModelText, ToolCall, Observation, FinalAnswer };

inline const char* to_string(EventKind k) {
    switch (k) {
    case EventKind::SystemPrompt: return "system_prompt";
    case EventKind::UserPrompt: return "user_prompt";
    case EventKind::ModelText: return "model_text";
    case EventKind::ToolCall: return "tool_call";
    case EventKind::Observation: return "observation";
    case EventKind::FinalAnswer: return "final_answer";
    }
    return "?";
}

struct TrajectoryEvent {
    std::string ts;
    EventKind kind;
    json payload;

    json to_json() const {
        json j;
        j["ts"] = ts;
        j["kind"] = to_string(kind);
        j["payload"] = payload;
        return j;
    }
};

enum class LoopStatus { CompletedFinalAnswer, CompletedTerminalTool, Truncated, Aborted };

inline const char* to_string(LoopStatus s) {
    switch (s) {
    case LoopStatus::CompletedFinalAnswer: return "completed";
    case LoopStatus::CompletedTerminalTool: return "completed_terminal";
    case LoopStatus::Truncated: return "truncated";
    case LoopStatus::Aborted: return "aborted";
    }
    return "?";
}

struct Trajectory {
    std::vector<TrajectoryEvent> events;
    LoopStatus status = LoopStatus::Truncated;
    int iterations = 0;
    int64_t tokens_used = 0;
    double temperature = 0.0;
    std::string abort_reason;

    std::optional<std::string> final_answer() const {
        for (auto it = events.rbegin(); it != events.rend(); ++it)
            if (it->kind == EventKind::FinalAnswer)
                return it->payload.value("text", "");
        return std::nullopt;
    }
    bool completed() const {
        return status == LoopStatus::CompletedFinalAnswer || status == LoopStatus::CompletedTerminalTool;
    }
};

/// Streams events to disk as they happen: an aborted run still leaves a
/// complete prefix in the log.
class TrajectoryWriter {
public:
    TrajectoryWriter() = default;
    TrajectoryWriter(fs::path path, EventClock clock) : path_(std::move(path)), clock_(std::move(clock)) {
        if (path_.has_parent_path())
            fs::create_directories(path_.parent_path());
        util::write_file(path_, ""); // truncate: one file per run
    }
    void write(const TrajectoryEvent& ev) {
        if (path_.empty()) return;
        util::append_line(path_, ev.to_json().dump());
    }
    const fs::path& path() const { return path_; }
    std::string stamp() { return clock_ ? clock_() : std::string(); }

private:
    fs::path path_;
    EventClock clock_;
};

// ---------------------------------------------------------------------------
// Clients

struct ToolCallRequest {
    std::string id;
    std::string name;
    json arguments;        // parsed object when valid
    bool arguments_valid = true;
    std::string arguments_raw; // original text when parsing failed
};

struct ModelTurn {
    std::string text;
    std::vector<ToolCallRequest> tool_calls;
    int64_t prompt_tokens = 0;
    int64_t completion_tokens = 0;
};

struct ChatContext {
    std::string system_prompt;
    std::string user_prompt;
    json messages = json::array(); // OpenAI-style history maintained by the loop
    json tool_schemas = json::array();
    int assistant_turns = 0;
};

class ClientError : public Error {
public:
    using Error::Error;
};

/// A chat-completions backend bound to one pipeline role.
class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual ModelTurn complete(const ChatContext& ctx) = 0;
    virtual std::string role() const = 0;
    virtual std::string model_name() const = 0;
    virtual double temperature() const = 0;
};

/// Replays canned transcripts; the test-time client. A transcript is either a
/// bare array of turns or {"sessions":[{"match": substr, "repeat_last": bool,
/// "turns":[{"text":..., "tool_calls":[{"name","arguments"}]}]}]}; the first
/// session whose match occurs in the rendered prompt is chosen. Cursor
/// position is derived from the context, so one client instance serves many
/// concurrent loops.
class ScriptedClient : public LlmClient {
public:
    struct Session {
        std::string match;
        bool repeat_last = false;
        std::vector<ModelTurn> turns;
    };

    ScriptedClient(std::vector<Session> sessions, std::string role, std::string model = "scripted",
                   double temperature = 0.0)
        : sessions_(std::move(sessions)), role_(std::move(role)), model_(std::move(model)), temperature_(temperature) {}

    static ModelTurn parse_turn(const json& t) {
        ModelTurn turn;
        turn.text = t.value("text", "");
        if (t.contains("tool_calls")) {
            int k = 0;
            for (const auto& c : t["tool_calls"]) {
                ToolCallRequest call;
                call.id = c.value("id", util::format("call_%d", ++k));
                call.name = c.value("name", "");
                if (c.contains("arguments")) {
                    if (c["arguments"].is_string()) {
                        call.arguments_raw = c["arguments"].get<std::string>();
                        try {
                            call.arguments = json::parse(call.arguments_raw);
                        } catch (...) {
                            call.arguments_valid = false;
                        }
                    } else {
                        call.arguments = c["arguments"];
                    }
                } else {
                    call.arguments = json::object();
                }
                turn.tool_calls.push_back(std::move(call));
            }
        }
        return turn;
    }

    static std::shared_ptr<ScriptedClient> from_json(const json& spec, std::string role,
                                                     double temperature = 0.0) {
        std::vector<Session> sessions;
        auto parse_session = [](const json& s) {
            Session session;
            session.match = s.value("match", "");
            session.repeat_last = s.value("repeat_last", false);
            for (const auto& t : s.at("turns"))
                session.turns.push_back(parse_turn(t));
            return session;
        };
        if (spec.is_array()) {
            Session s;
            for (const auto& t : spec)
                s.turns.push_back(parse_turn(t));
            sessions.push_back(std::move(s));
        } else {
            for (const auto& s : spec.at("sessions"))
                sessions.push_back(parse_session(s));
        }
        return std::make_shared<ScriptedClient>(std::move(sessions), std::move(role), "scripted", temperature);
    }

    static std::shared_ptr<ScriptedClient> from_file(const fs::path& path, std::string role,
                                                     double temperature = 0.0) {
        return from_json(json::parse(util::read_file(path)), std::move(role), temperature);
    }

    ModelTurn complete(const ChatContext& ctx) override {
        const Session* chosen = nullptr;
        std::string haystack = ctx.system_prompt + "\n" + ctx.user_prompt;
        for (const auto& s : sessions_) {
            if (s.match.empty() || util::contains(haystack, s.match)) {
                chosen = &s;
                break;
            }
        }
        if (!chosen || chosen->turns.empty())
            throw ClientError("scripted client has no session matching the prompt");
        size_t idx = static_cast<size_t>(ctx.assistant_turns);
        if (idx >= chosen->turns.size()) {
            if (chosen->repeat_last)
                idx = chosen->turns.size() - 1;
            else
                return ModelTurn{"(transcript exhausted)", {}, 0, 8};
        }
        ModelTurn turn = chosen->turns[idx];
        // Deterministic token proxy: one token per 4 bytes of turn text.
        turn.completion_tokens = static_cast<int64_t>(turn.text.size() / 4 + 8);
        turn.prompt_tokens = static_cast<int64_t>(haystack.size() / 16);
        return turn;
    }

    std::string role() const override { return role_; }
    std::string model_name() const override { return model_; }
    double temperature() const override { return temperature_; }

private:
    std::vector<Session> sessions_;
    std::string role_;
    std::string model_;
    double temperature_;
};

// ---------------------------------------------------------------------------
// Tools

struct ToolParam {
    std::string name;
    std::string type = "string"; // string | integer | number | boolean | array | object
    std::string description;
    bool required = true;
};

struct Observation {
    std::string content;
    bool error = false;
};

using ToolHandler = std::function<Observation(const json& args)>;

struct ToolDescriptor {
    std::string name;
    std::string description;
    std::vector<ToolParam> params;
    ToolHandler handler;
    bool terminal_on_success = false; // a successful call ends the session
    bool shareable = true;            // safe to use from concurrent loops

    json schema() const {
        json props = json::object();
        json required = json::array();
        for (const auto& p : params) {
            props[p.name] = {{"type", p.type}, {"description", p.description}};
            if (p.required) required.push_back(p.name);
        }
        json fn;
        fn["name"] = name;
        fn["description"] = description;
        fn["parameters"] = {{"type", "object"}, {"properties", props}, {"required", required}};
        return {{"type", "function"}, {"function", fn}};
    }

    /// Returns an error message, or empty when args satisfy the schema.
    std::string validate(const json& args) const {
        if (!args.is_object())
            return "arguments must be a JSON object";
        for (const auto& p : params) {
            if (!args.contains(p.name)) {
                if (p.required) return "missing required argument: " + p.name;
                continue;
            }
            const json& v = args[p.name];
            bool ok = (p.type == "string" && v.is_string()) || (p.type == "integer" && v.is_number_integer()) ||
                      (p.type == "number" && v.is_number()) || (p.type == "boolean" && v.is_boolean()) ||
                      (p.type == "array" && v.is_array()) || (p.type == "object" && v.is_object());
            if (!ok) return "argument '" + p.name + "' must be of type " + p.type;
        }
        for (auto& [k, v] : args.items()) {
            (void)v;
            bool known = false;
            for (const auto& p : params)
                if (p.name == k) known = true;
            if (!known) return "unknown argument: " + k;
        }
        return {};
    }
};

class Toolset {
public:
    void register_tool(ToolDescriptor descriptor) {
        if (by_name_.count(descriptor.name))
            throw Error("duplicate tool name: " + descriptor.name);
        by_name_[descriptor.name] = tools_.size();
        tools_.push_back(std::move(descriptor));
    }
    const ToolDescriptor* find(std::string_view name) const {
        auto it = by_name_.find(std::string(name));
        return it == by_name_.end() ? nullptr : &tools_[it->second];
    }
    const std::vector<ToolDescriptor>& all() const { return tools_; }
    size_t size() const { return tools_.size(); }
    json schemas() const {
        json out = json::array();
        for (const auto& t : tools_)
            out.push_back(t.schema());
        return out;
    }

private:
    std::vector<ToolDescriptor> tools_;
    std::map<std::string, size_t> by_name_;
};

// ---------------------------------------------------------------------------
// Loop

struct Budget {
    int max_iterations = 20;
    int64_t max_tokens = 1'000'000;
};

struct LoopOptions {
    size_t observation_cap = 8000; // bytes per tool result fed back to the model
    EventClock clock;              // defaults to wall clock at UTC
    TrajectoryWriter* writer = nullptr;
};

/// The generic tool-calling loop shared by the builder, repair, and subject
/// agents. A model turn without tool calls is the final answer. Malformed or
/// unknown tool calls become error observations and the loop continues — the
/// model is expected to self-repair from propagated errors. The complete
/// trajectory is always returned, including on abort.
inline Trajectory run_loop(const std::string& system_prompt, const std::string& user_prompt,
                           const Toolset& tools, LlmClient& client, const Budget& budget,
                           LoopOptions opts = {}) {
    if (budget.max_iterations <= 0 || budget.max_tokens <= 0)
        throw Error("loop budget must be positive");
    if (!opts.clock)
        opts.clock = wall_event_clock(0);

    Trajectory traj;
    traj.temperature = client.temperature();

    ChatContext ctx;
    ctx.system_prompt = system_prompt;
    ctx.user_prompt = user_prompt;
    ctx.tool_schemas = tools.schemas();

    auto emit = [&](EventKind kind, json payload) {
        TrajectoryEvent ev{opts.clock(), kind, std::move(payload)};
        if (opts.writer) opts.writer->write(ev);
        traj.events.push_back(std::move(ev));
    };

    emit(EventKind::SystemPrompt, {{"text", system_prompt},
                                   {"role", client.role()},
                                   {"model", client.model_name()},
                                   {"temperature", client.temperature()}});
    emit(EventKind::UserPrompt, {{"text", user_prompt}});
    ctx.messages.push_back({{"role", "system"}, {"content", system_prompt}});
    ctx.messages.push_back({{"role", "user"}, {"content", user_prompt}});

    while (traj.iterations < budget.max_iterations) {
        ++traj.iterations;
        ModelTurn turn;
        try {
            turn = client.complete(ctx);
        } catch (const std::exception& e) {
            traj.status = LoopStatus::Aborted;
            traj.abort_reason = e.what();
            return traj;
        }
        ++ctx.assistant_turns;
        traj.tokens_used += turn.prompt_tokens + turn.completion_tokens;

        json assistant_msg = {{"role", "assistant"}, {"content", turn.text}};
        if (!turn.tool_calls.empty()) {
            json calls = json::array();
            for (const auto& c : turn.tool_calls)
                calls.push_back({{"id", c.id},
                                 {"type", "function"},
                                 {"function",
                                  {{"name", c.name},
                                   {"arguments", c.arguments_valid ? c.arguments.dump() : c.arguments_raw}}}});
            assistant_msg["tool_calls"] = calls;
        }
        ctx.messages.push_back(assistant_msg);

        if (turn.tool_calls.empty()) {
            if (!turn.text.empty())
                emit(EventKind::FinalAnswer, {{"text", turn.text}});
            traj.status = LoopStatus::CompletedFinalAnswer;
            return traj;
        }
        if (!turn.text.empty())
            emit(EventKind::ModelText, {{"text", turn.text}});

        bool terminal_hit = false;
        for (const auto& call : turn.tool_calls) {
            emit(EventKind::ToolCall, {{"tool", call.name},
                                       {"arguments", call.arguments_valid ? call.arguments : json(call.arguments_raw)},
                                       {"call_id", call.id}});
            Observation obs;
            const ToolDescriptor* descriptor = tools.find(call.name);
            if (!descriptor) {
                obs = {"unknown tool: " + call.name, true};
            } else if (!call.arguments_valid) {
                obs = {"malformed tool arguments (not valid JSON)", true};
            } else if (std::string err = descriptor->validate(call.arguments); !err.empty()) {
                obs = {"invalid arguments: " + err, true};
            } else {
                try {
                    obs = descriptor->handler(call.arguments);
                } catch (const std::exception& e) {
                    obs = {std::string("tool failed: ") + e.what(), true};
                }
            }
            bool truncated = obs.content.size() > opts.observation_cap;
            if (truncated)
                obs.content = util::truncate_utf8(obs.content, opts.observation_cap) + "\n...[truncated]";
            emit(EventKind::Observation, {{"tool", call.name},
                                          {"content", obs.content},
                                          {"error", obs.error},
                                          {"truncated", truncated},
                                          {"call_id", call.id}});
            ctx.messages.push_back({{"role", "tool"}, {"tool_call_id", call.id}, {"content", obs.content}});
            if (descriptor && descriptor->terminal_on_success && !obs.error) {
                terminal_hit = true;
                break;
            }
        }
        if (terminal_hit) {
            traj.status = LoopStatus::CompletedTerminalTool;
            return traj;
        }
        if (traj.tokens_used > budget.max_tokens) {
            traj.status = LoopStatus::Truncated;
            traj.abort_reason = "token budget exhausted";
            return traj;
        }
    }
    traj.status = LoopStatus::Truncated;
    traj.abort_reason = "iteration budget exhausted";
    return traj;
}

/// register_tool as a free operation over a Toolset.
inline Toolset& register_tool(Toolset& set, ToolDescriptor descriptor) {
    set.register_tool(std::move(descriptor));
    return set;
}

} // namespace forge::agent
