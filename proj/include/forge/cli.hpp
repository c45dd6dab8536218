// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "forge/config.hpp"
#include "forge/core.hpp"
#include "forge/harness.hpp"
#include "forge/llm_http.hpp"
#include "forge/repair.hpp"
#include "forge/temporal.hpp"

namespace forge::cli {

inline std::shared_ptr<agent::LlmClient> role_client(const RunConfig& cfg, const std::string& role,
                                                     bool required) {
    if (cfg.clients.contains(role))
        return agent::make_client(cfg.clients[role], role);
    std::string upper = role;
    for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (!util::getenv_or(("FORGE_" + upper + "_ENDPOINT").c_str()).empty())
        return agent::make_client(nlohmann::ordered_json::object(), role);
    if (required)
        throw ConfigError("invalid config: no client configured for role '" + role +
                          "' (set clients." + role + " or FORGE_" + upper + "_ENDPOINT)");
    return nullptr;
}

inline std::shared_ptr<agent::LlmClient> model_client(const RunConfig& cfg, const std::string& label) {
    if (!cfg.models.contains(label))
        throw ConfigError("invalid config: models." + label + " is not configured");
    auto client = agent::make_client(cfg.models[label], "subject");
    return client;
}

/// Deterministic per-subcommand run summary; replay reruns rewrite identical
/// bytes.
inline void write_summary(const RunConfig& cfg, const std::string& command, nlohmann::ordered_json extra,
                          bool ok) {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["ok"] = ok;
    j["mode"] = engine::to_string(cfg.mode);
    j["config_digest"] = cfg.digest();
    if (cfg.mode == engine::Mode::Live)
        j["completed_at"] = agent::now_at_offset(0).iso();
    j["details"] = std::move(extra);
    util::write_file_if_changed(cfg.out_dir / "summary" / (command + ".json"), j.dump(2) + "\n");
}

inline AnchorTimestamp day_anchor(const RunConfig& cfg, const Dataset& dataset, const std::string& day) {
    return civil::parse_anchor(day + " " + cfg.anchor_time, dataset.offset_minutes());
}

// ---------------------------------------------------------------------------
// Subcommand bodies

inline int cmd_generate(RunConfig& cfg, const std::string& url, const std::string& topic,
                        const std::string& fixture_dir) {
    auto generator = role_client(cfg, "generator", true);
    engine::WorkflowEngine eng;
    builder::CandidateStore store(cfg.out_dir);

    builder::SessionConfig sc;
    sc.mode = cfg.mode;
    std::optional<engine::FixtureBundle> fixture;
    if (cfg.mode == engine::Mode::Replay) {
        if (fixture_dir.empty())
            throw ConfigError("invalid config: fixture_root/--fixture is required for replay generation");
        fixture = engine::FixtureBundle::load(fixture_dir);
        sc.fixture = &*fixture;
        sc.anchor = fixture->frozen_clock;
    } else {
        sc.anchor = agent::now_at_offset(civil::parse_offset("+08:00"));
    }
    std::string session_key = util::fnv1a_hex(url + "\n" + topic).substr(0, 12);
    sc.evidence_dir = cfg.out_dir / "evidence" / session_key;

    builder::GenerateOptions opts;
    opts.budget = {cfg.builder_iterations, cfg.max_tokens};
    opts.assets_dir = cfg.assets_dir;
    opts.trajectory_path = cfg.out_dir / "trajectories" / ("generate-" + session_key + ".jsonl");
    if (cfg.mode == engine::Mode::Replay)
        opts.clock = agent::logical_event_clock(sc.anchor);
    // Exemplar pair shown in the generation prompt.
    opts.sample_question = "明天北京的天气预报最高气温是多少？";
    Dataset ds = core::load_dataset(cfg.dataset);
    if (!ds.items.empty())
        if (const WorkflowSpec* wf = ds.find_workflow(ds.items.front().workflow_ref)) {
            opts.sample_question = ds.items.front().question;
            opts.sample_workflow = wf->source;
        }

    auto outcome = builder::generate_candidate(url, topic, *generator, eng, sc, store, opts);
    nlohmann::ordered_json details;
    details["url"] = url;
    details["topic"] = topic;
    details["iterations"] = outcome.trajectory.iterations;
    if (outcome.saved()) {
        details["candidate"] = outcome.candidate->id;
        details["status"] = builder::to_string(outcome.candidate->status);
        std::cout << "saved candidate " << outcome.candidate->id << " ("
                  << builder::to_string(outcome.candidate->status) << ") in " << outcome.trajectory.iterations
                  << " iterations\n";
    } else {
        details["failure"] = outcome.failure_reason;
        std::cout << "generation failed: " << outcome.failure_reason << "\n";
    }
    write_summary(cfg, "generate", details, outcome.saved());
    return outcome.saved() ? 0 : 1;
}

inline int cmd_expand(RunConfig& cfg, const std::string& seed_id, const std::string& hop_file) {
    Dataset ds = core::load_dataset(cfg.dataset);
    const TestItem* seed = ds.find_item(seed_id);
    if (!seed)
        throw Error("seed item not found: " + seed_id);
    auto hop_json = nlohmann::ordered_json::parse(util::read_file(hop_file));
    builder::HopSpec hop;
    hop.seed_id = hop_json.value("seed_id", seed_id);
    hop.replacement = hop_json.value("replacement", "");
    std::string target = hop_json.value("target_level", seed->level == Level::L1 ? "L2" : "L3");
    hop.target_level = level_from_string(target).value_or(Level::L2);
    std::string question = hop_json.at("question").get<std::string>();
    std::string created = hop_json.value("created_at", agent::now_at_offset(ds.offset_minutes()).iso());

    TestItem item = builder::expand_item(*seed, hop, question, created, hop_json.value("id", ""));
    if (ds.find_item(item.id)) {
        std::cout << "item " << item.id << " already exists; nothing to do\n";
        write_summary(cfg, "expand", {{"item", item.id}, {"existed", true}}, true);
        return 0;
    }
    ds.items.push_back(item);
    core::refresh_manifest_counts(ds);
    core::save_dataset(ds, cfg.dataset);
    std::cout << "added " << to_string(item.level) << " item " << item.id << " (workflow "
              << item.workflow_ref << ")\n";
    write_summary(cfg, "expand", {{"item", item.id}, {"level", to_string(item.level)}}, true);
    return 0;
}

inline int cmd_review(RunConfig& cfg, const std::string& action, const std::string& candidate_id,
                      const std::string& note, const std::string& domain, const std::string& validator) {
    builder::CandidateStore store(cfg.out_dir);
    if (action == "next") {
        auto next = builder::review_next(store);
        if (!next) {
            std::cout << "no candidates awaiting review\n";
            return 0;
        }
        std::cout << "candidate:  " << next->id << "\n"
                  << "status:     " << builder::to_string(next->status) << "\n"
                  << "question:   " << next->question << "\n"
                  << "answer:     " << next->answer << "\n"
                  << "screenshot: " << next->screenshot_ref << "\n"
                  << "workflow:   " << (store.dir_of(next->id) / "workflow.py").string() << "\n";
        return 0;
    }
    Dataset ds = core::load_dataset(cfg.dataset);
    builder::ReviewContext ctx{&store, &ds, cfg.dataset};
    builder::ApproveOptions opts;
    opts.domain = domain;
    if (!validator.empty()) opts.validator = validator;
    std::string ts = agent::now_at_offset(ds.offset_minutes()).iso();
    auto decided = builder::review_decide(ctx, candidate_id, action, note, ts, opts);
    std::cout << "candidate " << decided.id << " -> " << builder::to_string(decided.status) << "\n";
    write_summary(cfg, "review", {{"candidate", decided.id}, {"verdict", action}}, true);
    return 0;
}

inline int cmd_repair(RunConfig& cfg, const std::string& item_id, const std::string& fixture_dir) {
    Dataset ds = core::load_dataset(cfg.dataset);
    const TestItem* item = ds.find_item(item_id);
    if (!item)
        throw Error("item not found: " + item_id);
    const WorkflowSpec* wf = ds.find_workflow(item->workflow_ref);
    engine::WorkflowEngine eng;

    std::optional<engine::FixtureBundle> fixture;
    AnchorTimestamp anchor;
    if (cfg.mode == engine::Mode::Replay) {
        if (fixture_dir.empty())
            throw ConfigError("invalid config: --fixture DIR is required for replay repair");
        fixture = engine::FixtureBundle::load(fixture_dir);
        anchor = fixture->frozen_clock;
    } else {
        anchor = agent::now_at_offset(ds.offset_minutes());
    }

    auto result = eng.execute(*wf, anchor, cfg.mode, fixture ? &*fixture : nullptr);
    auto signal = engine::detect_failure(result, *item);
    if (!signal) {
        std::cout << "workflow " << wf->id << " is healthy; nothing to repair\n";
        write_summary(cfg, "repair", {{"item", item_id}, {"repaired", false}, {"healthy", true}}, true);
        return 0;
    }
    auto repairer = role_client(cfg, "repairer", true);
    builder::SessionConfig sc;
    sc.mode = cfg.mode;
    sc.fixture = fixture ? &*fixture : nullptr;
    sc.anchor = anchor;
    repair::RepairOptions opts;
    opts.budget = {cfg.builder_iterations, cfg.max_tokens};
    opts.assets_dir = cfg.assets_dir;
    opts.trajectory_path = cfg.out_dir / "trajectories" / ("repair-" + item_id + ".jsonl");
    if (cfg.mode == engine::Mode::Replay)
        opts.clock = agent::logical_event_clock(anchor);
    opts.reference_answer = fixture ? fixture->expected_answer : "";
    repair::WorkflowHistory history(cfg.out_dir / "workflow_history");
    opts.history = &history;

    auto outcome = repair::repair(*item, *wf, *signal, *repairer, eng, sc, opts);
    nlohmann::ordered_json details;
    details["item"] = item_id;
    details["workflow"] = wf->id;
    details["repaired"] = outcome.repaired();
    if (outcome.repaired()) {
        ds.workflows[wf->id].source = outcome.new_workflow->source;
        core::save_dataset(ds, cfg.dataset);
        details["diff"] = outcome.diff_summary;
        std::cout << "repaired workflow " << wf->id << " (" << outcome.diff_summary << ")\n";
    } else {
        details["reason"] = outcome.reason;
        std::cout << "unrepairable: " << outcome.reason << "\n";
    }
    write_summary(cfg, "repair", details, outcome.repaired());
    return outcome.repaired() ? 0 : 1;
}

inline int cmd_eval(RunConfig& cfg, const std::string& models_csv, const std::string& days_csv) {
    Dataset ds = core::load_dataset(cfg.dataset);
    auto model_labels = util::split(models_csv, ',');
    auto days = util::split(days_csv, ',');
    if (model_labels.empty() || model_labels.front().empty())
        throw ConfigError("invalid config: --models must name at least one configured model");
    if (days.empty() || days.front().empty())
        throw ConfigError("invalid config: --days must list at least one YYYY-MM-DD day");
    auto variant = eval::prompt_variant_from_string(cfg.variant);
    if (!variant)
        throw ConfigError("invalid config: unknown prompt variant '" + cfg.variant + "'");

    engine::WorkflowEngine eng;
    eval::RecordStore store(cfg.out_dir);
    eval::EvalTaskConfig tc;
    tc.mode = cfg.mode;
    tc.fixture_root = cfg.fixture_root;
    tc.out_dir = cfg.out_dir;
    tc.assets_dir = cfg.assets_dir;
    tc.variant = *variant;
    tc.epsilon_s = cfg.epsilon_s;
    tc.subject_budget = {cfg.subject_iterations, cfg.max_tokens};
    tc.repair_budget = {cfg.builder_iterations, cfg.max_tokens};
    tc.observation_cap = cfg.observation_cap;

    auto judge_client = role_client(cfg, "judge", false);
    auto repair_client = role_client(cfg, "repairer", false);
    auto extractor_client = role_client(cfg, "extractor", false);
    auto search_client = make_search_client(cfg);

    std::vector<const TestItem*> items;
    for (const auto& item : ds.items)
        items.push_back(&item);

    int evaluated = 0;
    for (const auto& day : days) {
        AnchorTimestamp anchor = day_anchor(cfg, ds, day);
        auto clients_for = [&](const std::string& label) {
            eval::EvalClients c;
            c.subject = model_client(cfg, label);
            c.judge = judge_client;
            c.repairer = repair_client;
            c.extractor = extractor_client;
            c.search = search_client;
            return c;
        };
        auto records =
            eval::evaluate_batch(items, ds, model_labels, clients_for, anchor, eng, tc, store, cfg.parallelism);
        evaluated += static_cast<int>(records.size());
    }
    nlohmann::ordered_json details;
    details["models"] = model_labels;
    details["days"] = days;
    details["records"] = evaluated;
    details["variant"] = cfg.variant;
    write_summary(cfg, "eval", details, true);
    std::cout << "evaluated " << evaluated << " (item, model, day) records into "
              << (cfg.out_dir / "records").string() << "\n";
    return 0;
}

inline int cmd_judge(RunConfig& cfg, const std::string& records_dir) {
    Dataset ds = core::load_dataset(cfg.dataset);
    eval::RecordStore store(records_dir.empty() ? cfg.out_dir : fs::path(records_dir));
    auto judge_client = role_client(cfg, "judge", true);
    int judged = eval::judge_records(store, ds, *judge_client, cfg.assets_dir);
    std::cout << "judged " << judged << " records\n";
    write_summary(cfg, "judge", {{"judged", judged}}, true);
    return 0;
}

inline int cmd_report(RunConfig& cfg, const std::string& format, const std::string& records_dir) {
    Dataset ds = core::load_dataset(cfg.dataset);
    eval::RecordStore store(records_dir.empty() ? cfg.out_dir : fs::path(records_dir));
    auto records = store.load_all();
    eval::Report report = eval::aggregate(records, ds);
    if (format == "csv") {
        fs::path out = cfg.out_dir / "report.csv";
        util::write_file_if_changed(out, report.to_csv());
        std::cout << report.to_csv();
        std::cout << "wrote " << out.string() << "\n";
    } else {
        std::cout << report.to_table();
    }
    write_summary(cfg, "report", {{"format", format}, {"records", records.size()}}, true);
    return 0;
}

inline int cmd_classify(RunConfig& cfg, const std::string& records_dir) {
    Dataset ds = core::load_dataset(cfg.dataset);
    eval::RecordStore store(records_dir.empty() ? cfg.out_dir : fs::path(records_dir));
    auto classifier = role_client(cfg, "classifier", true);
    int n = eval::classify_records(store, ds, *classifier, cfg.assets_dir, cfg.out_dir / "classifications");
    std::cout << "classified " << n << " failed records\n";
    write_summary(cfg, "classify", {{"classified", n}}, true);
    return 0;
}

inline int cmd_fixture(RunConfig& cfg, const std::string& action, const std::string& workflow_id,
                       const std::string& anchor_text, const std::string& dir) {
    Dataset ds = core::load_dataset(cfg.dataset);
    const WorkflowSpec* wf = ds.find_workflow(workflow_id);
    if (!wf)
        throw Error("workflow not found: " + workflow_id);
    engine::WorkflowEngine eng;
    if (action == "record") {
        AnchorTimestamp anchor = civil::parse_anchor(anchor_text, ds.offset_minutes());
        fs::path out = dir.empty() ? eval::gt_fixture_dir(cfg.fixture_root, workflow_id, anchor.day_label())
                                   : fs::path(dir);
        auto bundle = eng.record_fixture(*wf, anchor, out);
        std::cout << "recorded fixture " << out.string() << "\nexpected answer: " << bundle.expected_answer
                  << "\n";
        write_summary(cfg, "fixture", {{"action", "record"}, {"dir", out.string()}}, true);
        return 0;
    }
    if (action == "replay") {
        if (dir.empty())
            throw ConfigError("invalid config: fixture replay needs --dir");
        auto bundle = engine::FixtureBundle::load(dir);
        auto r1 = eng.execute(*wf, bundle.frozen_clock, engine::Mode::Replay, &bundle);
        auto r2 = eng.execute(*wf, bundle.frozen_clock, engine::Mode::Replay, &bundle);
        bool deterministic = r1.answer == r2.answer && r1.status == r2.status;
        bool matches = bundle.expected_answer.empty() || r1.answer == bundle.expected_answer;
        std::cout << "status: " << engine::to_string(r1.status) << "\nanswer: " << r1.answer
                  << "\ndeterministic: " << (deterministic ? "yes" : "no")
                  << "\nmatches recorded answer: " << (matches ? "yes" : "no") << "\n";
        write_summary(cfg, "fixture",
                      {{"action", "replay"}, {"deterministic", deterministic}, {"matches", matches}},
                      deterministic && matches && r1.ok());
        return deterministic && matches && r1.ok() ? 0 : 1;
    }
    throw Error("unknown fixture action: " + action);
}

// ---------------------------------------------------------------------------
// dispatch

inline int dispatch(int argc, const char* const* argv) {
    CLI::App app{"forge: executable-workflow QA benchmarking toolkit"};
    app.require_subcommand(1);

    std::string config_path = util::getenv_or("FORGE_CONFIG");
    app.add_option("--config", config_path, "Config file (JSON)");
    std::optional<std::string> flag_dataset, flag_fixtures, flag_out, flag_mode, flag_variant, flag_assets;
    app.add_option("--dataset", flag_dataset, "Dataset directory");
    app.add_option("--fixtures", flag_fixtures, "Fixture root directory");
    app.add_option("--out", flag_out, "Output directory");
    app.add_option("--mode", flag_mode, "live or replay")->check(CLI::IsMember({"live", "replay"}));
    app.add_option("--variant", flag_variant, "Subject prompt variant");
    app.add_option("--assets", flag_assets, "Assets directory");

    auto* generate = app.add_subcommand("generate", "Generate a candidate (question, workflow) pair");
    std::string gen_url, gen_topic, gen_fixture;
    generate->add_option("--url", gen_url, "Target page")->required();
    generate->add_option("--topic", gen_topic, "Topic of interest")->required();
    generate->add_option("--fixture", gen_fixture, "Fixture bundle dir (replay)");

    auto* expand = app.add_subcommand("expand", "Expand a seed item one hop (L1->L2, L2->L3)");
    std::string exp_seed, exp_hop;
    expand->add_option("--seed", exp_seed, "Seed item id")->required();
    expand->add_option("--hop", exp_hop, "Hop spec file (JSON)")->required();

    auto* review = app.add_subcommand("review", "Review candidates: next / approve / reject / revise");
    std::string rev_action, rev_id, rev_note, rev_domain, rev_validator;
    review->add_option("action", rev_action, "next|approve|reject|revise")->required();
    review->add_option("candidate", rev_id, "Candidate id");
    review->add_option("--note", rev_note, "Reviewer note");
    review->add_option("--domain", rev_domain, "Domain label (approve)");
    review->add_option("--validator", rev_validator, "Answer validity regex (approve)");

    auto* repair_cmd = app.add_subcommand("repair", "Diagnose and repair a failing workflow");
    std::string rep_item, rep_fixture;
    repair_cmd->add_option("--item", rep_item, "Item id")->required();
    repair_cmd->add_option("--fixture", rep_fixture, "Fixture bundle dir (replay)");

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate subject models against the dataset");
    std::string eval_models, eval_days;
    eval_cmd->add_option("--models", eval_models, "Comma-separated model labels")->required();
    eval_cmd->add_option("--days", eval_days, "Comma-separated YYYY-MM-DD days")->required();

    auto* judge_cmd = app.add_subcommand("judge", "Judge records that have no verdict yet");
    std::string judge_records_dir;
    judge_cmd->add_option("--records", judge_records_dir, "Record store root (default: out dir)");

    auto* report_cmd = app.add_subcommand("report", "Aggregate records into the accuracy report");
    std::string report_format = "table", report_records_dir;
    report_cmd->add_option("--format", report_format, "csv or table")
        ->check(CLI::IsMember({"csv", "table"}));
    report_cmd->add_option("--records", report_records_dir, "Record store root (default: out dir)");

    auto* classify_cmd = app.add_subcommand("classify", "Classify failed records into the 7-mode taxonomy");
    std::string classify_records_dir;
    classify_cmd->add_option("--records", classify_records_dir, "Record store root (default: out dir)");

    auto* fixture_cmd = app.add_subcommand("fixture", "Record or replay ground-truth fixtures");
    std::string fx_action, fx_workflow, fx_anchor, fx_dir;
    fixture_cmd->add_option("action", fx_action, "record|replay")->required();
    fixture_cmd->add_option("--workflow", fx_workflow, "Workflow id")->required();
    fixture_cmd->add_option("--anchor", fx_anchor, "Anchor timestamp (record)");
    fixture_cmd->add_option("--dir", fx_dir, "Fixture bundle directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        RunConfig cfg;
        if (!config_path.empty())
            apply_file(cfg, config_path);
        else if (fs::exists("forge.json"))
            apply_file(cfg, "forge.json");
        if (flag_dataset) cfg.dataset = *flag_dataset;
        if (flag_fixtures) cfg.fixture_root = *flag_fixtures;
        if (flag_out) cfg.out_dir = *flag_out;
        if (flag_mode) cfg.mode = *flag_mode == "live" ? engine::Mode::Live : engine::Mode::Replay;
        if (flag_variant) cfg.variant = *flag_variant;
        if (flag_assets) cfg.assets_dir = *flag_assets;
        apply_env(cfg);
        validate(cfg);

        if (*generate) return cmd_generate(cfg, gen_url, gen_topic, gen_fixture);
        if (*expand) return cmd_expand(cfg, exp_seed, exp_hop);
        if (*review) return cmd_review(cfg, rev_action, rev_id, rev_note, rev_domain, rev_validator);
        if (*repair_cmd) return cmd_repair(cfg, rep_item, rep_fixture);
        if (*eval_cmd) return cmd_eval(cfg, eval_models, eval_days);
        if (*judge_cmd) return cmd_judge(cfg, judge_records_dir);
        if (*report_cmd) return cmd_report(cfg, report_format, report_records_dir);
        if (*classify_cmd) return cmd_classify(cfg, classify_records_dir);
        if (*fixture_cmd) return cmd_fixture(cfg, fx_action, fx_workflow, fx_anchor, fx_dir);
        std::cerr << "unknown subcommand\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace forge::cli
