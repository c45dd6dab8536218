// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <thread>

#include <httplib.h>

#include "forge/harness.hpp"
#include "forge/llm_http.hpp"
#include "support/helpers.hpp"

using namespace forge;
using namespace forge::eval;

namespace {

std::shared_ptr<agent::LlmClient> transcript_client(const std::string& name, const std::string& role) {
    return agent::ScriptedClient::from_file(testutil::transcripts_dir() / (name + ".json"), role, 0.6);
}

SearchClient replay_search() {
    SearchConfig cfg;
    cfg.replay = true;
    cfg.fixture_dir = testutil::fixtures_dir() / "search";
    return SearchClient(cfg);
}

} // namespace

TEST_CASE("locale routing is a pure function of the query script") {
    CHECK(route_locale("最新一期双色球开奖号码") == "cn");
    CHECK(route_locale("NBA scores January 12 2026") == "default");
    CHECK(route_locale("mixed 北京 query") == "cn");
    CHECK(route_locale("") == "default");

    // property: any CJK codepoint forces cn
    std::mt19937 rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        std::string q;
        bool has_cjk = false;
        int len = std::uniform_int_distribution<int>(1, 24)(rng);
        for (int i = 0; i < len; ++i) {
            if (std::uniform_int_distribution<int>(0, 3)(rng) == 0) {
                uint32_t cp = 0x4E00 + std::uniform_int_distribution<int>(0, 0x51FF)(rng);
                util::utf8_append(q, cp);
                has_cjk = true;
            } else {
                q += static_cast<char>('a' + std::uniform_int_distribution<int>(0, 25)(rng));
            }
        }
        CHECK(route_locale(q) == (has_cjk ? "cn" : "default"));
    }
}

TEST_CASE("replay search serves ranked top-10 lists per query, order preserved") {
    auto client = replay_search();
    auto lists = client.search({"最新一期双色球开奖号码", "NBA scores January 12 2026"});
    REQUIRE(lists.size() == 2);
    REQUIRE_FALSE(lists[0].empty());
    CHECK(lists[0][0].rank == 1);
    CHECK(lists[0][0].locale == "cn");
    CHECK(util::contains(lists[0][0].snippet, "2026005"));
    CHECK(lists[1][0].locale == "default");
    CHECK(lists[0].size() <= 10);

    CHECK_THROWS_AS(client.search({}), Error);
    CHECK_THROWS_AS(client.search(std::vector<std::string>(9, "q")), Error);
    CHECK_THROWS_AS(client.search_one("query with no fixture"), Error);
}

TEST_CASE("live search posts locale-routed requests to the provider") {
    httplib::Server server;
    json seen;
    server.Post("/search", [&](const httplib::Request& req, httplib::Response& res) {
        seen = json::parse(req.body);
        json organic = json::array();
        for (int i = 0; i < 12; ++i)
            organic.push_back({{"title", util::format("t%d", i)},
                               {"snippet", "s"},
                               {"link", util::format("http://r.test/%d", i)}});
        res.set_content(json{{"organic", organic}}.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    while (!server.is_running()) std::this_thread::yield();

    SearchConfig cfg;
    cfg.endpoint = util::format("http://127.0.0.1:%d/search", port);
    cfg.api_key = "k";
    SearchClient client(cfg);
    auto results = client.search_one("双色球");
    server.stop();
    t.join();
    CHECK(seen["gl"] == "cn");
    CHECK(seen["q"] == "双色球");
    REQUIRE(results.size() == 10); // top-10 cap
    CHECK(results.front().rank == 1);
    CHECK(results.back().rank == 10);
}

TEST_CASE("the search tool formats observations and survives provider failure") {
    auto client = std::make_shared<SearchClient>(replay_search());
    auto tool = tool_search(client);
    auto obs = tool.handler(json{{"query", json::array({"最新一期双色球开奖号码"})}});
    CHECK_FALSE(obs.error);
    CHECK(util::contains(obs.content, "locale cn"));
    auto missing = tool.handler(json{{"query", json::array({"nonexistent query"})}});
    CHECK(missing.error);
    CHECK(util::contains(missing.content, "search failed"));
}

TEST_CASE("visit extracts evidence against the goal and caps the observation") {
    VisitConfig cfg;
    cfg.replay = true;
    cfg.pages_dir = testutil::fixtures_dir() / "pages";
    auto extractor = transcript_client("extractor_replay", "extractor");
    VisitTool visit(cfg, extractor);

    std::string evidence =
        visit.visit_one("http://lottery.rt-sample.test/ssq/latest", "获取最新一期双色球的开奖号码");
    CHECK(util::contains(evidence, "01、20、22、27、30、33"));
    CHECK(util::contains(evidence, "10"));

    std::string miss = visit.visit_one("http://blocked.test/x", "anything");
    CHECK(util::contains(miss, "could not be accessed"));

    auto tool = tool_visit(std::make_shared<VisitTool>(cfg, extractor));
    auto obs = tool.handler(json{{"url", json::array({"http://lottery.rt-sample.test/ssq/latest"})},
                                 {"goal", "获取最新一期双色球的开奖号码"}});
    CHECK_FALSE(obs.error);
    auto empty_goal = tool.handler(json{{"url", json::array({"http://x.test/"})}, {"goal", "  "}});
    CHECK(empty_goal.error);
}

TEST_CASE("without an extractor, visit returns capped raw text") {
    VisitConfig cfg;
    cfg.replay = true;
    cfg.pages_dir = testutil::fixtures_dir() / "pages";
    cfg.observation_cap = 64;
    VisitTool visit(cfg, nullptr);
    auto text = visit.visit_one("http://lottery.rt-sample.test/ssq/latest", "goal");
    CHECK(text.size() <= 64);
}

TEST_CASE("system prompt ladder injects the anchor exactly once at second precision") {
    auto anchor = testutil::anchor("2026-01-15T17:45:27+08:00");
    auto at = [&](PromptVariant v) { return build_system_prompt(v, anchor, testutil::assets_dir()); };

    std::string v3 = at(PromptVariant::RealtimeV3);
    CHECK(util::contains(v3, "Current time: 2026-01-15 17:45:27"));
    CHECK(util::contains(v3, "Real-Time Protocol"));
    size_t first = v3.find("2026-01-15 17:45:27");
    CHECK(v3.find("2026-01-15 17:45:27", first + 1) == std::string::npos); // exactly once

    std::string anchor_variant = at(PromptVariant::TimeAnchor);
    CHECK(util::contains(anchor_variant, "Real-Time Protocol"));
    CHECK(util::contains(anchor_variant, "Strict Time Anchor"));
    CHECK(util::contains(anchor_variant, "2026-01-15 17:45:27"));

    std::string base = at(PromptVariant::Base);
    CHECK(util::contains(base, "Current time: 2026-01-15 17:45:27"));
    CHECK_FALSE(util::contains(base, "Real-Time Protocol"));

    // graded ladder: each step adds instruction text
    CHECK(at(PromptVariant::RealtimeV1).size() > base.size());
    CHECK(at(PromptVariant::RealtimeV2).size() > at(PromptVariant::RealtimeV1).size());
    CHECK(v3.size() > at(PromptVariant::RealtimeV2).size());
    CHECK(anchor_variant.size() > v3.size());
}

TEST_CASE("judge parses the three labeled fields") {
    auto v = parse_judge_output("extracted_final_answer: 150分，夏洛特黄蜂\n"
                                "reasoning: 与标准答案一致。\ncorrect: yes\n");
    REQUIRE(v);
    CHECK(v->correct);
    CHECK(util::contains(v->extracted_final_answer, "夏洛特黄蜂"));

    auto none = parse_judge_output("extracted_final_answer: None\nreasoning: 回答没有给出最终答案。\ncorrect: no\n");
    REQUIRE(none);
    CHECK_FALSE(none->correct);
    CHECK(none->extracted_none());

    CHECK_FALSE(parse_judge_output("I think the answer is fine."));
    CHECK_FALSE(parse_judge_output("extracted_final_answer: 42\nreasoning: ...\ncorrect: maybe\n"));

    auto decorated = parse_judge_output("**extracted_final_answer**: \"3705.41\"\n"
                                        "**reasoning**: 数值一致。\n**correct**: \"yes\"\n");
    REQUIRE(decorated);
    CHECK(decorated->correct);
}

TEST_CASE("judge fills the template, re-asks once on malformed output") {
    // first output malformed (missing correct), second parseable
    auto client = agent::ScriptedClient::from_json(json::parse(R"([
        {"text": "extracted_final_answer: 01 20 22 27 30 33 | 10\nreasoning: looks right"},
        {"text": "extracted_final_answer: 01 20 22 27 30 33 | 10\nreasoning: 与标准一致\ncorrect: yes"}
    ])"), "judge");
    auto verdict = judge("最新一期双色球的开奖号码是什么？", "红球01、20、22、27、30、33，蓝球10",
                         "01 20 22 27 30 33 | 10", *client, testutil::assets_dir());
    CHECK(verdict.correct);
    CHECK(verdict.asks == 2);
    CHECK_FALSE(verdict.malformed);

    // persistent garbage -> malformed verdict after exactly two asks
    auto broken = agent::ScriptedClient::from_json(json::parse(R"({
        "sessions": [{"match": "", "repeat_last": true, "turns": [{"text": "garbage"}]}]
    })"), "judge");
    auto bad = judge("q", "r", "a", *broken, testutil::assets_dir());
    CHECK(bad.malformed);
    CHECK_FALSE(bad.correct);
    CHECK(bad.asks == 2);

    CHECK_THROWS_AS(judge("", "r", "a", *client, testutil::assets_dir()), Error);
}

TEST_CASE("scripted judge is deterministic and scores wrong answers no") {
    auto judge_client = transcript_client("judge_replay", "judge");
    auto v1 = judge("最新一期双色球的开奖号码是什么？", "红球01、20、22、27、30、33，蓝球10",
                    "01 20 22 27 30 33 | 10", *judge_client, testutil::assets_dir());
    auto v2 = judge("最新一期双色球的开奖号码是什么？", "红球01、20、22、27、30、33，蓝球10",
                    "01 20 22 27 30 33 | 10", *judge_client, testutil::assets_dir());
    CHECK(v1.correct);
    CHECK(v2.correct);
    CHECK(v1.extracted_final_answer == v2.extracted_final_answer);

    auto wrong = judge("最新一期双色球的开奖号码是什么？", "根据搜索摘要，红球03 07 08 09 18 32",
                       "01 20 22 27 30 33 | 10", *judge_client, testutil::assets_dir());
    CHECK_FALSE(wrong.correct);
}

TEST_CASE("ten canned judge outputs parse to the expected verdicts") {
    struct Case {
        const char* text;
        bool parseable;
        bool correct;
        bool none;
    };
    const Case cases[] = {
        {"extracted_final_answer: 150\nreasoning: same\ncorrect: yes", true, true, false},
        {"extracted_final_answer: 124\nreasoning: differs\ncorrect: no", true, false, false},
        {"extracted_final_answer: None\nreasoning: no final answer\ncorrect: no", true, false, true},
        {"**extracted_final_answer**: 3℃\n**reasoning**: equal\n**correct**: yes", true, true, false},
        {"extracted_final_answer: 3705.41\nreasoning: rounding within tolerance\ncorrect: \"yes\"", true, true,
         false},
        {"extracted_final_answer: 答案是150分\nreasoning: 一致\ncorrect：yes", true, true, false},
        {"extracted_final_answer: x\nreasoning: y\ncorrect: NO", true, false, false},
        {"extracted_final_answer: \"none\"\nreasoning: 无最终答案\ncorrect: no", true, false, true},
        {"reasoning: forgot the extraction\ncorrect: yes", false, false, false},
        {"extracted_final_answer: 5\nreasoning: no verdict follows", false, false, false},
    };
    int parsed_count = 0;
    for (const auto& c : cases) {
        auto v = parse_judge_output(c.text);
        if (c.parseable) {
            REQUIRE(v);
            CHECK(v->correct == c.correct);
            CHECK(v->extracted_none() == c.none);
            ++parsed_count;
        } else {
            CHECK_FALSE(v);
        }
    }
    CHECK(parsed_count == 8);
}

TEST_CASE("aggregate reproduces the published mean-of-dailies consistency") {
    // equal daily counts: 1000 items per day, accuracies 43.6/46.0/46.1/48.4/43.8/43.1
    Dataset ds;
    WorkflowSpec wf;
    wf.id = "wf-x";
    wf.manifest.allowed_hosts = {"x"};
    ds.workflows["wf-x"] = wf;
    const int per_day = 1000;
    const std::vector<std::pair<std::string, int>> days = {
        {"2026-01-10", 436}, {"2026-01-11", 460}, {"2026-01-12", 461},
        {"2026-01-13", 484}, {"2026-01-14", 438}, {"2026-01-15", 431}};
    std::vector<EvalRecord> records;
    for (int i = 0; i < per_day; ++i) {
        TestItem item;
        item.id = util::format("it-%04d", i);
        item.level = i < 500 ? Level::L1 : i < 800 ? Level::L2 : Level::L3;
        item.domain = "Sci & Tech";
        item.workflow_ref = "wf-x";
        if (item.level != Level::L1) item.seed_id = "s";
        ds.items.push_back(item);
    }
    for (const auto& [day, correct_count] : days) {
        for (int i = 0; i < per_day; ++i) {
            EvalRecord r;
            r.item_id = util::format("it-%04d", i);
            r.model = "model-a";
            r.day = day;
            JudgeVerdict v;
            v.correct = i < correct_count;
            r.verdict = v;
            records.push_back(r);
        }
    }
    Report report = aggregate(records, ds);
    CHECK(report.daily["model-a"]["2026-01-10"] == Catch::Approx(43.6).margin(0.001));
    CHECK(report.daily["model-a"]["2026-01-15"] == Catch::Approx(43.1).margin(0.001));
    CHECK(report.total["model-a"] == Catch::Approx(45.2).margin(0.05));

    std::string csv = report.to_csv();
    CHECK(util::starts_with(
        csv, "model,2026-01-10,2026-01-11,2026-01-12,2026-01-13,2026-01-14,2026-01-15,L1,L2,L3,total_avg"));
    CHECK(util::contains(csv, ",45.2"));
}

TEST_CASE("all-correct records give 100.0 everywhere; level means are item-weighted") {
    Dataset ds;
    WorkflowSpec wf;
    wf.id = "wf-x";
    wf.manifest.allowed_hosts = {"x"};
    ds.workflows["wf-x"] = wf;
    // L1: 154 items at 50% correct, L2: 109 at 100%, L3: 59 at 0%
    auto add_records = [&](int count, Level level, int correct_count, std::vector<EvalRecord>& out) {
        for (int i = 0; i < count; ++i) {
            TestItem item;
            item.id = util::format("%s-%03d", to_string(level), i);
            item.level = level;
            item.domain = "Sci & Tech";
            item.workflow_ref = "wf-x";
            if (level != Level::L1) item.seed_id = "s";
            ds.items.push_back(item);
            EvalRecord r;
            r.item_id = item.id;
            r.model = "m";
            r.day = "2026-01-10";
            JudgeVerdict v;
            v.correct = i < correct_count;
            r.verdict = v;
            out.push_back(r);
        }
    };
    std::vector<EvalRecord> records;
    add_records(154, Level::L1, 77, records);
    add_records(109, Level::L2, 109, records);
    add_records(59, Level::L3, 0, records);
    Report report = aggregate(records, ds);
    CHECK(report.level["m"]["L1"] == Catch::Approx(50.0));
    CHECK(report.level["m"]["L2"] == Catch::Approx(100.0));
    CHECK(report.level["m"]["L3"] == Catch::Approx(0.0));
    // overall equals the item-weighted mean
    double expected = 100.0 * (77 + 109) / (154.0 + 109 + 59);
    CHECK(report.total["m"] == Catch::Approx(expected).margin(0.0001));

    std::vector<EvalRecord> all_correct;
    Dataset ds2 = ds;
    add_records(0, Level::L1, 0, all_correct);
    for (auto r : records) {
        r.verdict->correct = true;
        all_correct.push_back(r);
    }
    Report perfect = aggregate(all_correct, ds);
    CHECK(perfect.total["m"] == Catch::Approx(100.0));
    CHECK(perfect.daily["m"]["2026-01-10"] == Catch::Approx(100.0));

    CHECK_THROWS_AS(aggregate({}, ds), Error);
}

TEST_CASE("excluded and no-answer records shape the denominators correctly") {
    Dataset ds;
    WorkflowSpec wf;
    wf.id = "wf-x";
    wf.manifest.allowed_hosts = {"x"};
    ds.workflows["wf-x"] = wf;
    std::vector<EvalRecord> records;
    for (int i = 0; i < 4; ++i) {
        TestItem item;
        item.id = util::format("i%d", i);
        item.level = Level::L1;
        item.domain = "Sci & Tech";
        item.workflow_ref = "wf-x";
        ds.items.push_back(item);
        EvalRecord r;
        r.item_id = item.id;
        r.model = "m";
        r.day = "2026-01-10";
        if (i == 0) {
            JudgeVerdict v;
            v.correct = true;
            r.verdict = v;
        } else if (i == 1) {
            r.no_answer = true; // counts as incorrect
        } else if (i == 2) {
            r.excluded = true; // leaves the denominator
        } else {
            JudgeVerdict v;
            v.correct = false;
            r.verdict = v;
        }
        records.push_back(r);
    }
    Report report = aggregate(records, ds);
    // denominator: 3 (one excluded), correct: 1
    CHECK(report.total["m"] == Catch::Approx(100.0 / 3).margin(0.001));
}

TEST_CASE("classify_failure maps trajectories to the taxonomy") {
    auto classifier = transcript_client("classifier_replay", "classifier");
    JudgeVerdict wrong;
    wrong.correct = false;
    wrong.extracted_final_answer = "124分";

    auto lazy = classify_failure("[Action] search {\"query\":[\"NBA scores\"]}\n[Final Answer] 根据搜索摘要...",
                                 wrong, "最近3天NBA得分最高的球队？", "夏洛特黄蜂 150分", *classifier,
                                 testutil::assets_dir());
    CHECK(lazy.mode == FailureMode::LazyRetrieval);
    CHECK_FALSE(lazy.low_confidence);

    auto temporal = classify_failure("[Think] 以2025年10月28日为基准计算最近3天\n[Final Answer] 波特兰开拓者 122分",
                                     wrong, "该联赛最近3天得分最高的球队？", "夏洛特黄蜂 150分", *classifier,
                                     testutil::assets_dir());
    CHECK(temporal.mode == FailureMode::TemporalConfusion);

    CHECK_THROWS_AS(classify_failure("t", JudgeVerdict{.correct = true}, "q", "a", *classifier,
                                     testutil::assets_dir()),
                    Error);

    // outside-enum output falls back to Logic with the low-confidence mark
    auto stubborn = agent::ScriptedClient::from_json(json::parse(R"({
        "sessions": [{"match": "", "repeat_last": true, "turns": [{"text": "mode: Laziness"}]}]
    })"), "classifier");
    auto fallback = classify_failure("t", wrong, "q", "a", *stubborn, testutil::assets_dir());
    CHECK(fallback.mode == FailureMode::Logic);
    CHECK(fallback.low_confidence);
}

TEST_CASE("failure distribution reproduces published slice percentages") {
    std::vector<FailureMode> modes;
    auto add = [&](FailureMode m, int n) { modes.insert(modes.end(), n, m); };
    add(FailureMode::LazyRetrieval, 20);
    add(FailureMode::SourceQuality, 10);
    add(FailureMode::IncompleteScan, 15);
    add(FailureMode::ParsingFail, 10);
    add(FailureMode::TemporalConfusion, 20);
    add(FailureMode::Hallucination, 15);
    add(FailureMode::Logic, 10);
    auto dist = failure_distribution(modes);
    CHECK(dist[FailureMode::LazyRetrieval].pct == Catch::Approx(20.0));
    CHECK(dist[FailureMode::SourceQuality].pct == Catch::Approx(10.0));
    CHECK(dist[FailureMode::IncompleteScan].pct == Catch::Approx(15.0));
    CHECK(dist[FailureMode::ParsingFail].pct == Catch::Approx(10.0));
    CHECK(dist[FailureMode::TemporalConfusion].pct == Catch::Approx(20.0));
    CHECK(dist[FailureMode::Hallucination].pct == Catch::Approx(15.0));
    CHECK(dist[FailureMode::Logic].pct == Catch::Approx(10.0));
    double sum = 0;
    for (auto& [m, slice] : dist) sum += slice.pct;
    CHECK(sum == Catch::Approx(100.0).margin(0.5));

    auto single = failure_distribution({FailureMode::Hallucination});
    CHECK(single[FailureMode::Hallucination].pct == Catch::Approx(100.0));

    auto each = failure_distribution({FailureMode::LazyRetrieval, FailureMode::SourceQuality,
                                      FailureMode::IncompleteScan, FailureMode::ParsingFail,
                                      FailureMode::TemporalConfusion, FailureMode::Hallucination,
                                      FailureMode::Logic});
    for (auto& [m, slice] : each)
        CHECK(slice.pct == Catch::Approx(100.0 / 7).margin(0.01));

    CHECK_THROWS_AS(failure_distribution({}), Error);
}

TEST_CASE("evaluate_item runs GT and subject simultaneously and judges the answers") {
    Dataset ds = core::load_dataset(testutil::sample_dataset());
    testutil::TempDir tmp;
    engine::WorkflowEngine eng;
    RecordStore store(tmp.path);

    EvalTaskConfig cfg;
    cfg.mode = engine::Mode::Replay;
    cfg.fixture_root = testutil::fixtures_dir();
    cfg.out_dir = tmp.path;
    cfg.assets_dir = testutil::assets_dir();
    cfg.variant = PromptVariant::RealtimeV3;

    EvalClients clients;
    clients.subject = transcript_client("subject_good", "subject");
    clients.judge = transcript_client("judge_replay", "judge");
    clients.search = std::make_shared<SearchClient>(replay_search());

    auto anchor = testutil::sample_anchor();
    const TestItem* item = ds.find_item("item-lottery-l1");
    auto record = evaluate_item(*item, ds, "scripted-good", anchor, eng, clients, cfg, store);

    CHECK(record.gt_answer == "01 20 22 27 30 33 | 10");
    CHECK(record.gt_status == "ok");
    REQUIRE(record.verdict);
    CHECK(record.verdict->correct);
    CHECK(record.skew_ms < 5000);
    CHECK_FALSE(record.excluded);
    CHECK(fs::exists(record.trajectory_ref));
    CHECK(store.exists("scripted-good", anchor.day_label(), item->id));

    SECTION("re-running the key is a no-op") {
        fs::path record_path = store.path_of("scripted-good", anchor.day_label(), item->id);
        std::string before = util::read_file(record_path);
        auto again = evaluate_item(*item, ds, "scripted-good", anchor, eng, clients, cfg, store);
        CHECK(util::read_file(record_path) == before);
        CHECK(again.verdict->correct == record.verdict->correct);
    }
    SECTION("wrong scripted answer is judged no") {
        EvalClients lazy = clients;
        lazy.subject = transcript_client("subject_lazy", "subject");
        auto wrong = evaluate_item(*item, ds, "scripted-lazy", anchor, eng, lazy, cfg, store);
        REQUIRE(wrong.verdict);
        CHECK_FALSE(wrong.verdict->correct);
    }
    SECTION("GT fixture missing excludes the record") {
        AnchorTimestamp other = testutil::anchor("2026-02-01T14:54:09+08:00");
        auto excluded = evaluate_item(*item, ds, "scripted-good", other, eng, clients, cfg, store);
        CHECK(excluded.excluded);
        CHECK_FALSE(excluded.verdict);
        CHECK(util::contains(excluded.excluded_reason, "no ground-truth fixture"));
    }
}

TEST_CASE("records round-trip through the store") {
    testutil::TempDir tmp;
    RecordStore store(tmp.path);
    EvalRecord r;
    r.item_id = "i1";
    r.model = "m1";
    r.day = "2026-01-13";
    r.anchor = testutil::sample_anchor();
    r.agent_answer = "a";
    r.gt_answer = "g";
    r.gt_status = "ok";
    JudgeVerdict v;
    v.correct = true;
    v.extracted_final_answer = "a";
    r.verdict = v;
    r.failure_mode = FailureMode::Logic;
    REQUIRE(store.save_new(r));
    CHECK_FALSE(store.save_new(r)); // idempotent key
    auto back = store.load("m1", "2026-01-13", "i1");
    CHECK(back.item_id == r.item_id);
    CHECK(back.verdict->correct);
    CHECK(back.failure_mode == FailureMode::Logic);
    CHECK(back.anchor.iso() == r.anchor.iso());
}
