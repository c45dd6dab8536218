// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <thread>

#include <httplib.h>

#include "forge/agent.hpp"
#include "forge/llm_http.hpp"
#include "support/helpers.hpp"

using namespace forge;
using namespace forge::agent;

namespace {

ToolDescriptor echo_tool(const std::string& name = "search") {
    ToolDescriptor d;
    d.name = name;
    d.description = "echoes";
    d.params = {{"q", "string", "query", true}};
    d.handler = [](const json& args) -> Observation { return {"echo: " + args.at("q").get<std::string>(), false}; };
    return d;
}

std::shared_ptr<ScriptedClient> scripted(const json& turns) {
    return ScriptedClient::from_json(turns, "subject");
}

/// call/observation pairing + single terminating final answer
void check_wellformed(const Trajectory& traj) {
    size_t open_calls = 0;
    bool saw_final = false;
    for (const auto& ev : traj.events) {
        CHECK_FALSE(saw_final); // nothing after a final answer
        switch (ev.kind) {
        case EventKind::ToolCall:
            CHECK(open_calls == 0); // previous call already answered
            ++open_calls;
            break;
        case EventKind::Observation:
            REQUIRE(open_calls == 1);
            --open_calls;
            break;
        case EventKind::FinalAnswer:
            saw_final = true;
            break;
        default:
            break;
        }
    }
    CHECK(open_calls == 0);
}

} // namespace

TEST_CASE("scripted call then final answer yields the 4-event core trajectory") {
    Toolset tools;
    tools.register_tool(echo_tool());
    auto client = scripted(json::parse(R"([
        {"text": "looking", "tool_calls": [{"name": "search", "arguments": {"q": "hello"}}]},
        {"text": "the answer"}
    ])"));
    auto traj = run_loop("sys", "user", tools, *client, {20, 100000});
    CHECK(traj.status == LoopStatus::CompletedFinalAnswer);
    REQUIRE(traj.final_answer());
    CHECK(*traj.final_answer() == "the answer");
    // system, user, model_text, call, observation, final
    REQUIRE(traj.events.size() == 6);
    CHECK(traj.events[3].kind == EventKind::ToolCall);
    CHECK(traj.events[4].kind == EventKind::Observation);
    CHECK(traj.events[4].payload["content"] == "echo: hello");
    CHECK(traj.iterations == 2);
    check_wellformed(traj);
}

TEST_CASE("unknown tool becomes an error observation and the loop continues") {
    Toolset tools;
    tools.register_tool(echo_tool());
    auto client = scripted(json::parse(R"([
        {"tool_calls": [{"name": "teleport", "arguments": {}}]},
        {"text": "recovered"}
    ])"));
    auto traj = run_loop("sys", "user", tools, *client, {20, 100000});
    CHECK(traj.status == LoopStatus::CompletedFinalAnswer);
    bool found_error = false;
    for (const auto& ev : traj.events)
        if (ev.kind == EventKind::Observation && ev.payload["error"] == true &&
            util::contains(ev.payload["content"], "unknown tool: teleport"))
            found_error = true;
    CHECK(found_error);
    check_wellformed(traj);
}

TEST_CASE("invalid arguments are fed back, not thrown") {
    Toolset tools;
    tools.register_tool(echo_tool());
    auto client = scripted(json::parse(R"([
        {"tool_calls": [{"name": "search", "arguments": {"wrong": 1}}]},
        {"tool_calls": [{"name": "search", "arguments": {"q": 42}}]},
        {"tool_calls": [{"name": "search", "arguments": "{not json"}]},
        {"text": "done"}
    ])"));
    auto traj = run_loop("sys", "user", tools, *client, {20, 100000});
    CHECK(traj.status == LoopStatus::CompletedFinalAnswer);
    int error_obs = 0;
    for (const auto& ev : traj.events)
        if (ev.kind == EventKind::Observation && ev.payload["error"] == true) ++error_obs;
    CHECK(error_obs == 3);
    check_wellformed(traj);
}

TEST_CASE("budget exhaustion truncates with the full prefix kept") {
    Toolset tools;
    tools.register_tool(echo_tool());
    auto client = ScriptedClient::from_json(json::parse(R"({
        "sessions": [{"match": "", "repeat_last": true, "turns": [
            {"tool_calls": [{"name": "search", "arguments": {"q": "again"}}]}
        ]}]
    })"), "subject");
    auto traj = run_loop("sys", "user", tools, *client, {5, 1000000});
    CHECK(traj.status == LoopStatus::Truncated);
    CHECK(traj.iterations == 5);
    check_wellformed(traj);
}

TEST_CASE("token budget is enforced and counters are monotone") {
    Toolset tools;
    tools.register_tool(echo_tool());
    auto client = ScriptedClient::from_json(json::parse(R"({
        "sessions": [{"match": "", "repeat_last": true, "turns": [
            {"text": "thinking hard about this question at length............",
             "tool_calls": [{"name": "search", "arguments": {"q": "again"}}]}
        ]}]
    })"), "subject");
    auto traj = run_loop("sys", "user", tools, *client, {1000, 40});
    CHECK(traj.status == LoopStatus::Truncated);
    CHECK(traj.abort_reason == "token budget exhausted");
    CHECK(traj.tokens_used > 40);
    CHECK(traj.iterations < 1000);
}

TEST_CASE("client errors abort but return the trajectory prefix") {
    Toolset tools;
    tools.register_tool(echo_tool());
    struct FailingClient : LlmClient {
        ModelTurn complete(const ChatContext&) override { throw ClientError("connection reset"); }
        std::string role() const override { return "subject"; }
        std::string model_name() const override { return "x"; }
        double temperature() const override { return 0.0; }
    } client;
    auto traj = run_loop("sys", "user", tools, client, {20, 100000});
    CHECK(traj.status == LoopStatus::Aborted);
    CHECK(util::contains(traj.abort_reason, "connection reset"));
    REQUIRE(traj.events.size() == 2); // system + user prompts persisted
    check_wellformed(traj);
}

TEST_CASE("terminal tool ends the session on success only") {
    Toolset tools;
    tools.register_tool(echo_tool());
    ToolDescriptor save;
    save.name = "save";
    save.description = "terminal";
    save.params = {{"ok", "boolean", "whether to succeed", true}};
    save.terminal_on_success = true;
    save.handler = [](const json& args) -> Observation {
        if (args.at("ok").get<bool>()) return {"saved", false};
        return {"refused", true};
    };
    tools.register_tool(save);

    auto client = scripted(json::parse(R"([
        {"tool_calls": [{"name": "save", "arguments": {"ok": false}}]},
        {"tool_calls": [{"name": "save", "arguments": {"ok": true}}]},
        {"text": "never reached"}
    ])"));
    auto traj = run_loop("sys", "user", tools, *client, {20, 100000});
    CHECK(traj.status == LoopStatus::CompletedTerminalTool);
    CHECK(traj.iterations == 2);
    CHECK_FALSE(traj.final_answer());
    check_wellformed(traj);
}

TEST_CASE("register_tool refuses duplicates and builds the documented toolset") {
    Toolset tools;
    register_tool(tools, echo_tool("search"));
    CHECK(tools.size() == 1);
    CHECK_THROWS_AS(register_tool(tools, echo_tool("search")), Error);
    for (const char* name : {"check_html_content", "code_interpreter", "check_output_content", "think",
                             "save_generated_item"})
        register_tool(tools, echo_tool(name));
    CHECK(tools.size() == 6);
    CHECK(tools.find("save_generated_item") != nullptr);
}

TEST_CASE("trajectory well-formedness holds under random scripted clients") {
    std::mt19937 rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        json turns = json::array();
        int n_turns = std::uniform_int_distribution<int>(1, 6)(rng);
        for (int t = 0; t < n_turns; ++t) {
            json turn;
            int kind = std::uniform_int_distribution<int>(0, 3)(rng);
            if (kind == 0) {
                turn["text"] = "final";
            } else {
                turn["text"] = kind == 1 ? "thinking" : "";
                json calls = json::array();
                int n_calls = std::uniform_int_distribution<int>(1, 3)(rng);
                for (int c = 0; c < n_calls; ++c) {
                    bool known = std::uniform_int_distribution<int>(0, 1)(rng);
                    calls.push_back({{"name", known ? "search" : "nope"},
                                     {"arguments", json{{"q", "x"}}}});
                }
                turn["tool_calls"] = calls;
            }
            turns.push_back(turn);
        }
        Toolset tools;
        tools.register_tool(echo_tool());
        auto client = scripted(turns);
        auto traj = run_loop("sys", "user", tools, *client, {8, 1000000});
        check_wellformed(traj);
        CHECK(traj.iterations <= 8);
    }
}

TEST_CASE("identical transcripts give identical trajectories regardless of role label") {
    json turns = json::parse(R"([
        {"text": "t", "tool_calls": [{"name": "search", "arguments": {"q": "q1"}}]},
        {"text": "answer"}
    ])");
    Toolset tools;
    tools.register_tool(echo_tool());
    auto clock = [] { return std::string("2026-01-13T00:00:00+00:00"); };
    auto a = ScriptedClient::from_json(turns, "generator");
    auto b = ScriptedClient::from_json(turns, "repairer");
    LoopOptions lo_a;
    lo_a.clock = clock;
    LoopOptions lo_b;
    lo_b.clock = clock;
    auto ta = run_loop("sys", "user", tools, *a, {20, 100000}, std::move(lo_a));
    auto tb = run_loop("sys", "user", tools, *b, {20, 100000}, std::move(lo_b));
    REQUIRE(ta.events.size() == tb.events.size());
    for (size_t i = 0; i < ta.events.size(); ++i) {
        CHECK(ta.events[i].kind == tb.events[i].kind);
        json pa = ta.events[i].payload;
        json pb = tb.events[i].payload;
        pa.erase("role");
        pb.erase("role");
        CHECK(pa == pb);
    }
}

TEST_CASE("trajectory streams to disk as it runs; the log format is ts/kind/payload") {
    testutil::TempDir tmp;
    Toolset tools;
    tools.register_tool(echo_tool());
    auto client = scripted(json::parse(R"([
        {"tool_calls": [{"name": "search", "arguments": {"q": "x"}}]},
        {"text": "fin"}
    ])"));
    fs::path log = tmp.path / "traj.jsonl";
    TrajectoryWriter writer(log, logical_event_clock(testutil::sample_anchor()));
    LoopOptions lo;
    lo.writer = &writer;
    lo.clock = logical_event_clock(testutil::sample_anchor());
    auto traj = run_loop("sys", "user", tools, *client, {20, 100000}, std::move(lo));

    auto lines = util::read_lines(log);
    REQUIRE(lines.size() == traj.events.size());
    for (const auto& line : lines) {
        json ev = json::parse(line);
        CHECK(ev.contains("ts"));
        CHECK(ev.contains("kind"));
        CHECK(ev.contains("payload"));
    }
    // temperature recorded with the trajectory
    json first = json::parse(lines[0]);
    CHECK(first["kind"] == "system_prompt");
    CHECK(first["payload"].contains("temperature"));
}

TEST_CASE("observation size cap truncates tool results") {
    Toolset tools;
    ToolDescriptor big;
    big.name = "big";
    big.description = "returns a lot";
    big.params = {};
    big.handler = [](const json&) -> Observation { return {std::string(20000, 'x'), false}; };
    tools.register_tool(big);
    auto client = scripted(json::parse(R"([
        {"tool_calls": [{"name": "big", "arguments": {}}]},
        {"text": "done"}
    ])"));
    LoopOptions lo;
    lo.observation_cap = 8000;
    auto traj = run_loop("sys", "user", tools, *client, {20, 1000000}, std::move(lo));
    for (const auto& ev : traj.events)
        if (ev.kind == EventKind::Observation) {
            CHECK(ev.payload["truncated"] == true);
            CHECK(ev.payload["content"].get<std::string>().size() < 9000);
        }
}

TEST_CASE("http client speaks the completions wire format end to end") {
    httplib::Server server;
    json captured_body;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        captured_body = json::parse(req.body);
        int assistant_turns = 0;
        for (const auto& m : captured_body["messages"])
            if (m["role"] == "assistant") ++assistant_turns;
        json reply;
        if (assistant_turns == 0) {
            reply = {{"choices",
                      {{{"message",
                         {{"role", "assistant"},
                          {"content", nullptr},
                          {"tool_calls",
                           {{{"id", "call_1"},
                             {"type", "function"},
                             {"function", {{"name", "search"}, {"arguments", "{\"q\": \"ping\"}"}}}}}}}}}}},
                     {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 5}}}};
        } else {
            reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", "pong answer"}}}}}},
                     {"usage", {{"prompt_tokens", 30}, {"completion_tokens", 4}}}};
        }
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&] { server.listen_after_bind(); });
    while (!server.is_running()) std::this_thread::yield();

    HttpClientConfig cfg;
    cfg.endpoint = util::format("http://127.0.0.1:%d/v1/chat/completions", port);
    cfg.model = "test-model";
    cfg.temperature = 0.6;
    cfg.role = "subject";
    HttpLlmClient client(cfg);

    Toolset tools;
    tools.register_tool(echo_tool());
    auto traj = run_loop("sys prompt", "user prompt", tools, client, {10, 100000});
    server.stop();
    server_thread.join();

    CHECK(traj.status == LoopStatus::CompletedFinalAnswer);
    CHECK(*traj.final_answer() == "pong answer");
    CHECK(traj.tokens_used == 12 + 5 + 30 + 4);
    // request carried the function schema and the temperature
    CHECK(captured_body["model"] == "test-model");
    CHECK(captured_body["temperature"] == 0.6);
    REQUIRE(captured_body.contains("tools"));
    CHECK(captured_body["tools"][0]["function"]["name"] == "search");
    // second call carried the tool result back
    bool tool_msg = false;
    for (const auto& m : captured_body["messages"])
        if (m["role"] == "tool" && util::contains(m["content"].get<std::string>(), "echo: ping"))
            tool_msg = true;
    CHECK(tool_msg);
    check_wellformed(traj);
}
