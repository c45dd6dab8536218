// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "forge/builder.hpp"
#include "forge/core.hpp"
#include "forge/engine.hpp"
#include "forge/eval_tools.hpp"
#include "forge/failure_modes.hpp"
#include "forge/judge.hpp"
#include "forge/repair.hpp"

namespace forge::eval {

using engine::Mode;
using engine::WorkflowEngine;

/// One (item, model, day) evaluation outcome.
struct EvalRecord {
    std::string item_id;
    std::string model;
    std::string day;               // e.g. 2026-01-13
    AnchorTimestamp anchor;
    std::string agent_answer;
    bool no_answer = false;        // subject produced no final answer (counts incorrect)
    std::string trajectory_ref;
    std::string gt_answer;
    std::string gt_status;         // ok | exception | timeout | empty | excluded
    bool excluded = false;         // GT unavailable after the repair policy
    std::string excluded_reason;
    std::optional<JudgeVerdict> verdict;
    std::optional<FailureMode> failure_mode;
    bool failure_low_confidence = false;
    int64_t skew_ms = 0;           // |GT start − agent start|
    double epsilon_s = 5.0;
    std::string variant;

    bool judged() const { return verdict.has_value() || no_answer; }
    bool counted_correct() const { return !excluded && !no_answer && verdict && verdict->correct; }

    json to_json() const {
        json j;
        j["item_id"] = item_id;
        j["model"] = model;
        j["day"] = day;
        j["anchor"] = anchor.iso();
        j["agent_answer"] = agent_answer;
        j["no_answer"] = no_answer;
        j["trajectory_ref"] = trajectory_ref;
        j["gt_answer"] = gt_answer;
        j["gt_status"] = gt_status;
        j["excluded"] = excluded;
        j["excluded_reason"] = excluded_reason;
        if (verdict) {
            j["verdict"] = {{"extracted_final_answer", verdict->extracted_final_answer},
                            {"reasoning", verdict->reasoning},
                            {"correct", verdict->correct ? "yes" : "no"},
                            {"malformed", verdict->malformed}};
        }
        if (failure_mode) {
            j["failure_mode"] = to_string(*failure_mode);
            j["failure_low_confidence"] = failure_low_confidence;
        }
        j["skew_ms"] = skew_ms;
        j["epsilon_s"] = epsilon_s;
        j["variant"] = variant;
        return j;
    }

    static EvalRecord from_json(const json& j) {
        EvalRecord r;
        r.item_id = j.at("item_id").get<std::string>();
        r.model = j.at("model").get<std::string>();
        r.day = j.at("day").get<std::string>();
        r.anchor = civil::parse_anchor(j.at("anchor").get<std::string>());
        r.agent_answer = j.value("agent_answer", "");
        r.no_answer = j.value("no_answer", false);
        r.trajectory_ref = j.value("trajectory_ref", "");
        r.gt_answer = j.value("gt_answer", "");
        r.gt_status = j.value("gt_status", "");
        r.excluded = j.value("excluded", false);
        r.excluded_reason = j.value("excluded_reason", "");
        if (j.contains("verdict")) {
            JudgeVerdict v;
            v.extracted_final_answer = j["verdict"].value("extracted_final_answer", "");
            v.reasoning = j["verdict"].value("reasoning", "");
            v.correct = j["verdict"].value("correct", "no") == "yes";
            v.malformed = j["verdict"].value("malformed", false);
            r.verdict = v;
        }
        if (j.contains("failure_mode")) {
            r.failure_mode = failure_mode_from_string(j["failure_mode"].get<std::string>());
            r.failure_low_confidence = j.value("failure_low_confidence", false);
        }
        r.skew_ms = j.value("skew_ms", static_cast<int64_t>(0));
        r.epsilon_s = j.value("epsilon_s", 5.0);
        r.variant = j.value("variant", "");
        return r;
    }
};

/// Append-only record store with idempotent (item, model, day) keys: writing
/// an existing key is a no-op, so re-running an evaluation changes nothing.
class RecordStore {
public:
    explicit RecordStore(fs::path root) : root_(std::move(root)) {}

    const fs::path& root() const { return root_; }

    fs::path path_of(const std::string& model, const std::string& day, const std::string& item_id) const {
        return root_ / "records" / model / day / (item_id + ".json");
    }

    bool exists(const std::string& model, const std::string& day, const std::string& item_id) const {
        return fs::exists(path_of(model, day, item_id));
    }

    /// Returns false when the key already existed (no bytes touched).
    bool save_new(const EvalRecord& r) {
        std::lock_guard<std::mutex> lock(mu_);
        fs::path p = path_of(r.model, r.day, r.item_id);
        if (fs::exists(p)) return false;
        util::write_file(p, r.to_json().dump(2) + "\n");
        return true;
    }

    /// In-place update for the judge/classify passes (same key, richer record).
    void update(const EvalRecord& r) {
        std::lock_guard<std::mutex> lock(mu_);
        util::write_file_if_changed(path_of(r.model, r.day, r.item_id), r.to_json().dump(2) + "\n");
    }

    EvalRecord load(const std::string& model, const std::string& day, const std::string& item_id) const {
        return EvalRecord::from_json(json::parse(util::read_file(path_of(model, day, item_id))));
    }

    std::vector<EvalRecord> load_all() const {
        std::vector<EvalRecord> out;
        fs::path dir = root_ / "records";
        if (!fs::exists(dir)) return out;
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(dir))
            if (e.path().extension() == ".json") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files)
            out.push_back(EvalRecord::from_json(json::parse(util::read_file(f))));
        return out;
    }

private:
    fs::path root_;
    std::mutex mu_;
};

// ---------------------------------------------------------------------------
// evaluate_item

struct EvalTaskConfig {
    Mode mode = Mode::Replay;
    fs::path fixture_root;        // <root>/wf/<workflow>/<day>/, <root>/search/, <root>/pages/
    fs::path out_dir;
    fs::path assets_dir;
    PromptVariant variant = PromptVariant::RealtimeV3;
    double epsilon_s = 5.0;
    agent::Budget subject_budget{40, 2'000'000};
    agent::Budget repair_budget{20, 1'000'000};
    size_t observation_cap = 8000;
};

struct EvalClients {
    std::shared_ptr<agent::LlmClient> subject;
    std::shared_ptr<agent::LlmClient> judge;      // optional: records stay unjudged without it
    std::shared_ptr<agent::LlmClient> repairer;   // optional: GT failures exclude without it
    std::shared_ptr<agent::LlmClient> extractor;  // optional: visit returns raw capped text
    std::shared_ptr<SearchClient> search;
};

inline fs::path gt_fixture_dir(const fs::path& fixture_root, const std::string& workflow_ref,
                               const std::string& day) {
    return fixture_root / "wf" / workflow_ref / day;
}

/// Ground truth and subject run anchored to the same instant: the workflow
/// executes while the agent researches, starts skew-checked against epsilon.
/// GT failure triggers the one-shot repair policy before the record is
/// excluded. Persistence is idempotent per (item, model, day).
inline EvalRecord evaluate_item(const TestItem& item, const Dataset& dataset, const std::string& model_label,
                                const AnchorTimestamp& anchor, const WorkflowEngine& engine,
                                const EvalClients& clients, const EvalTaskConfig& cfg, RecordStore& store) {
    std::string day = anchor.day_label();
    if (store.exists(model_label, day, item.id))
        return store.load(model_label, day, item.id); // idempotent key: no-op

    const WorkflowSpec* wf = dataset.find_workflow(item.workflow_ref);
    if (!wf)
        throw Error("item " + item.id + " references unknown workflow " + item.workflow_ref);

    EvalRecord record;
    record.item_id = item.id;
    record.model = model_label;
    record.day = day;
    record.anchor = anchor;
    record.epsilon_s = cfg.epsilon_s;
    record.variant = to_string(cfg.variant);

    // Replay fixtures for GT.
    std::optional<engine::FixtureBundle> fixture;
    if (cfg.mode == Mode::Replay) {
        fs::path dir = gt_fixture_dir(cfg.fixture_root, item.workflow_ref, day);
        if (!fs::exists(dir)) {
            record.excluded = true;
            record.gt_status = "excluded";
            record.excluded_reason = "no ground-truth fixture for (" + item.workflow_ref + ", " + day + ")";
            store.save_new(record);
            return record;
        }
        fixture = engine::FixtureBundle::load(dir);
    }

    // Subject toolset.
    agent::Toolset tools;
    tools.register_tool(tool_search(clients.search));
    VisitConfig vc;
    vc.replay = cfg.mode == Mode::Replay;
    vc.pages_dir = cfg.fixture_root / "pages";
    vc.observation_cap = cfg.observation_cap;
    if (cfg.mode == Mode::Live) vc = [&] { auto v = visit_config_from_env(); v.observation_cap = cfg.observation_cap; return v; }();
    auto visit = std::make_shared<VisitTool>(vc, clients.extractor);
    tools.register_tool(tool_visit(visit));

    std::string system_prompt = build_system_prompt(cfg.variant, anchor, cfg.assets_dir);

    // Launch GT and subject simultaneously.
    using steady = std::chrono::steady_clock;
    engine::ExecutionResult gt_result;
    steady::time_point gt_start, agent_start;
    agent::Trajectory trajectory;

    fs::path traj_path = cfg.out_dir / "trajectories" / model_label / day / (item.id + ".jsonl");
    agent::EventClock clock = cfg.mode == Mode::Replay ? agent::logical_event_clock(anchor)
                                                       : agent::wall_event_clock(anchor.offset_minutes);

    std::thread gt_thread([&] {
        gt_start = steady::now();
        gt_result = engine.execute(*wf, anchor, cfg.mode, fixture ? &*fixture : nullptr);
    });
    {
        agent_start = steady::now();
        agent::TrajectoryWriter writer(traj_path, clock);
        agent::LoopOptions lo;
        lo.clock = clock;
        lo.observation_cap = cfg.observation_cap;
        lo.writer = &writer;
        trajectory = agent::run_loop(system_prompt, item.question, tools, *clients.subject, cfg.subject_budget,
                                     std::move(lo));
    }
    gt_thread.join();
    record.skew_ms = std::abs(
        std::chrono::duration_cast<std::chrono::milliseconds>(gt_start - agent_start).count());
    record.trajectory_ref = traj_path.string();

    // GT failure -> repair policy (one attempt), else excluded.
    if (auto signal = engine::detect_failure(gt_result, item)) {
        bool restored = false;
        if (clients.repairer) {
            builder::SessionConfig sc;
            sc.mode = cfg.mode;
            sc.fixture = fixture ? &*fixture : nullptr;
            sc.anchor = anchor;
            repair::RepairOptions ro;
            ro.budget = cfg.repair_budget;
            ro.assets_dir = cfg.assets_dir;
            ro.clock = clock;
            ro.reference_answer = fixture ? fixture->expected_answer : "";
            auto outcome = repair::repair(item, *wf, *signal, *clients.repairer, engine, sc, ro);
            if (outcome.repaired()) {
                gt_result = engine.execute(*outcome.new_workflow, anchor, cfg.mode,
                                           fixture ? &*fixture : nullptr);
                restored = gt_result.ok();
            }
        }
        if (!restored) {
            record.excluded = true;
            record.gt_status = "excluded";
            record.excluded_reason = std::string("ground truth unavailable after repair policy (") +
                                     engine::to_string(signal->kind) + ")";
            store.save_new(record);
            return record;
        }
    }
    record.gt_answer = gt_result.answer;
    record.gt_status = engine::to_string(gt_result.status);

    auto answer = trajectory.final_answer();
    if (!answer || util::trim(*answer).empty()) {
        record.no_answer = true; // counts as incorrect
    } else {
        record.agent_answer = *answer;
        if (clients.judge)
            record.verdict = judge(item.question, record.agent_answer, record.gt_answer, *clients.judge,
                                   cfg.assets_dir);
    }
    if (record.skew_ms >= static_cast<int64_t>(cfg.epsilon_s * 1000)) {
        record.excluded = true;
        record.excluded_reason = util::format("start skew %lld ms breached the %.0fs simultaneity budget",
                                              static_cast<long long>(record.skew_ms), cfg.epsilon_s);
    }
    store.save_new(record);
    return record;
}

/// Runs a batch of (item, model) tasks for one day under a bounded pool.
inline std::vector<EvalRecord> evaluate_batch(const std::vector<const TestItem*>& items,
                                              const Dataset& dataset,
                                              const std::vector<std::string>& model_labels,
                                              const std::function<EvalClients(const std::string&)>& clients_for,
                                              const AnchorTimestamp& anchor, const WorkflowEngine& engine,
                                              const EvalTaskConfig& cfg, RecordStore& store,
                                              int parallelism = 4) {
    struct Task {
        const TestItem* item;
        std::string model;
    };
    std::vector<Task> tasks;
    for (const auto& model : model_labels)
        for (const TestItem* item : items)
            tasks.push_back({item, model});

    std::vector<EvalRecord> results(tasks.size());
    std::vector<std::string> errors(tasks.size());
    std::counting_semaphore<64> slots(std::max(1, std::min(parallelism, 64)));
    std::vector<std::thread> threads;
    threads.reserve(tasks.size());
    for (size_t i = 0; i < tasks.size(); ++i) {
        slots.acquire();
        threads.emplace_back([&, i] {
            try {
                EvalClients clients = clients_for(tasks[i].model);
                results[i] = evaluate_item(*tasks[i].item, dataset, tasks[i].model, anchor, engine, clients,
                                           cfg, store);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
            slots.release();
        });
    }
    for (auto& t : threads) t.join();
    for (size_t i = 0; i < tasks.size(); ++i)
        if (!errors[i].empty())
            throw Error("evaluation task (" + tasks[i].item->id + ", " + tasks[i].model +
                        ") failed: " + errors[i]);
    return results;
}

// ---------------------------------------------------------------------------
// Aggregation

struct Report {
    std::vector<std::string> models;
    std::vector<std::string> days;
    // accuracy percentages; NaN for empty cells
    std::map<std::string, std::map<std::string, double>> daily;  // model -> day -> pct
    std::map<std::string, std::map<std::string, double>> level;  // model -> L1/L2/L3 -> pct
    std::map<std::string, double> total;                         // model -> pct

    static std::string cell(double v) {
        if (std::isnan(v)) return "";
        return util::format("%.1f", v);
    }

    std::string to_csv() const {
        std::string out = "model";
        for (const auto& d : days) out += "," + d;
        out += ",L1,L2,L3,total_avg\n";
        for (const auto& m : models) {
            out += m;
            for (const auto& d : days) {
                auto it = daily.at(m).find(d);
                out += "," + cell(it == daily.at(m).end() ? NAN : it->second);
            }
            for (const char* lv : {"L1", "L2", "L3"}) {
                auto it = level.at(m).find(lv);
                out += "," + cell(it == level.at(m).end() ? NAN : it->second);
            }
            out += "," + cell(total.at(m)) + "\n";
        }
        return out;
    }

    std::string to_table() const {
        std::string csv = to_csv();
        std::string out;
        for (const auto& line : util::split(csv, '\n')) {
            if (line.empty()) continue;
            for (const auto& fieldv : util::split(line, ','))
                out += util::format("%-14s", fieldv.empty() ? "-" : fieldv.c_str());
            out += "\n";
        }
        return out;
    }
};

/// Accuracy aggregation: daily cells are unweighted means over that day's
/// judged items; level cells pool all days; Total Avg is the mean over all
/// (item, day) verdicts. Excluded records leave the denominators.
inline Report aggregate(const std::vector<EvalRecord>& records, const Dataset& dataset) {
    if (records.empty())
        throw Error("aggregate needs a non-empty record set");

    std::set<std::string> model_set, day_set;
    struct Bucket {
        int correct = 0;
        int total = 0;
        double pct() const { return total == 0 ? NAN : 100.0 * correct / total; }
    };
    std::map<std::string, std::map<std::string, Bucket>> daily, level;
    std::map<std::string, Bucket> total;

    for (const auto& r : records) {
        if (r.excluded) continue;
        if (!r.judged()) continue; // unjudged records are not countable yet
        model_set.insert(r.model);
        day_set.insert(r.day);
        int correct = r.counted_correct() ? 1 : 0;
        auto& db = daily[r.model][r.day];
        ++db.total;
        db.correct += correct;
        const TestItem* item = dataset.find_item(r.item_id);
        std::string lv = item ? to_string(item->level) : "L1";
        auto& lb = level[r.model][lv];
        ++lb.total;
        lb.correct += correct;
        auto& tb = total[r.model];
        ++tb.total;
        tb.correct += correct;
    }
    if (model_set.empty())
        throw Error("aggregate: no judged, non-excluded records");

    Report report;
    report.models.assign(model_set.begin(), model_set.end());
    report.days.assign(day_set.begin(), day_set.end());
    for (const auto& m : report.models) {
        for (const auto& [day, bucket] : daily[m])
            report.daily[m][day] = bucket.pct();
        for (const auto& [lv, bucket] : level[m])
            report.level[m][lv] = bucket.pct();
        report.daily.try_emplace(m);
        report.level.try_emplace(m);
        report.total[m] = total[m].pct();
    }
    return report;
}

/// The classify pass: assigns a taxonomy mode to every judged-incorrect,
/// unclassified record. Already-classified records are skipped, so the pass
/// is idempotent. Returns the number of records classified.
inline int classify_records(RecordStore& store, const Dataset& dataset, agent::LlmClient& classifier,
                            const fs::path& assets_dir, const fs::path& classification_dir = {}) {
    int classified = 0;
    for (auto& record : store.load_all()) {
        if (record.excluded || record.failure_mode) continue;
        bool incorrect = record.no_answer || (record.verdict && !record.verdict->correct);
        if (!incorrect) continue;

        std::string trajectory_text;
        if (!record.trajectory_ref.empty() && fs::exists(record.trajectory_ref)) {
            for (const auto& line : util::read_lines(record.trajectory_ref)) {
                if (util::trim(line).empty()) continue;
                json ev = json::parse(line);
                std::string kind = ev.value("kind", "");
                const json& p = ev["payload"];
                if (kind == "model_text") trajectory_text += "[Think] " + p.value("text", "") + "\n";
                if (kind == "tool_call")
                    trajectory_text += "[Action] " + p.value("tool", "") + " " + p["arguments"].dump() + "\n";
                if (kind == "observation")
                    trajectory_text += "[Observation] " + util::truncate_utf8(p.value("content", ""), 2000) + "\n";
                if (kind == "final_answer") trajectory_text += "[Final Answer] " + p.value("text", "") + "\n";
            }
        }
        const TestItem* item = dataset.find_item(record.item_id);
        JudgeVerdict v = record.verdict.value_or([&] {
            JudgeVerdict nv;
            nv.extracted_final_answer = "None";
            nv.correct = false;
            return nv;
        }());
        auto result = classify_failure(util::truncate_utf8(trajectory_text, 20000), v,
                                       item ? item->question : record.item_id, record.gt_answer, classifier,
                                       assets_dir);
        record.failure_mode = result.mode;
        record.failure_low_confidence = result.low_confidence;
        store.update(record);
        if (!classification_dir.empty()) {
            json j;
            j["item_id"] = record.item_id;
            j["model"] = record.model;
            j["day"] = record.day;
            j["mode"] = to_string(result.mode);
            j["low_confidence"] = result.low_confidence;
            j["classifier_output"] = result.raw_output;
            util::write_file_if_changed(classification_dir / record.model / record.day /
                                            (record.item_id + ".json"),
                                        j.dump(2) + "\n");
        }
        ++classified;
    }
    return classified;
}

/// The judge pass for records evaluated without a judge client. Idempotent.
inline int judge_records(RecordStore& store, const Dataset& dataset, agent::LlmClient& judge_client,
                         const fs::path& assets_dir) {
    int judged = 0;
    for (auto& record : store.load_all()) {
        if (record.excluded || record.verdict || record.no_answer) continue;
        if (record.agent_answer.empty() || record.gt_answer.empty()) continue;
        const TestItem* item = dataset.find_item(record.item_id);
        record.verdict = judge(item ? item->question : record.item_id, record.agent_answer, record.gt_answer,
                               judge_client, assets_dir);
        store.update(record);
        ++judged;
    }
    return judged;
}

} // namespace forge::eval
