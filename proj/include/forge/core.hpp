// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/civil_time.hpp"
#include "forge/util.hpp"

namespace forge {

using json = nlohmann::ordered_json;

enum class Level { L1, L2, L3 };

inline const char* to_string(Level l) {
    switch (l) {
    case Level::L1: return "L1";
    case Level::L2: return "L2";
    case Level::L3: return "L3";
    }
    return "?";
}

inline std::optional<Level> level_from_string(std::string_view s) {
    if (s == "L1") return Level::L1;
    if (s == "L2") return Level::L2;
    if (s == "L3") return Level::L3;
    return std::nullopt;
}

/// The closed set of benchmark categories. Unknown labels are validation
/// errors, not warnings.
inline const std::array<std::string, 12>& domain_labels() {
    static const std::array<std::string, 12> kLabels = {
        "Finance & Economy", "Weather & Env.",    "Culture Activities", "Sports Events",
        "Consumer Products", "Sci & Tech",        "Public Safety",      "News & Media",
        "Space & Astronomy", "Energy & Industry", "Transportation",     "Policy & Gov.",
    };
    return kLabels;
}

inline bool is_known_domain(std::string_view d) {
    for (const auto& label : domain_labels())
        if (label == d) return true;
    return false;
}

/// A benchmark question plus the metadata binding it to its workflow.
struct TestItem {
    std::string id;
    std::string question;
    Level level = Level::L1;
    std::string domain;
    std::string workflow_ref;
    std::optional<std::string> seed_id;  // present iff level is L2/L3
    std::string source_url;
    std::optional<std::string> validator; // answer-validity regex, opt-in
    std::string created_at;
};

struct WorkflowManifest {
    std::string entry_point = "main";
    std::vector<std::string> allowed_hosts;
    int timeout_s = 120;
    std::string clock_mode = "injected"; // live | injected
};

/// An executable answer-retrieval script and its execution contract.
struct WorkflowSpec {
    std::string id;
    std::string source;
    WorkflowManifest manifest;
    std::string created_at;
};

struct DatasetManifest {
    std::string timezone = "Asia/Shanghai";
    std::string utc_offset = "+08:00";
    int total = 0;
    std::map<std::string, int> level_counts;  // "L1" -> n
    std::map<std::string, int> domain_counts; // label -> n
};

struct Dataset {
    std::vector<TestItem> items;
    std::map<std::string, WorkflowSpec> workflows;
    DatasetManifest manifest;
    fs::path root;

    const TestItem* find_item(std::string_view id) const {
        for (const auto& it : items)
            if (it.id == id) return &it;
        return nullptr;
    }
    const WorkflowSpec* find_workflow(std::string_view id) const {
        auto it = workflows.find(std::string(id));
        return it == workflows.end() ? nullptr : &it->second;
    }
    int offset_minutes() const { return civil::parse_offset(manifest.utc_offset); }
};

struct Violation {
    std::string item_id;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
    std::string to_string() const {
        std::string out;
        for (const auto& v : violations)
            out += v.item_id + ": " + v.message + "\n";
        return out;
    }
};

struct StatsTable {
    std::map<std::string, int> level_counts;
    std::map<std::string, int> domain_counts;
    int total = 0;
};

class DatasetError : public Error {
public:
    using Error::Error;
};

namespace core {

inline json item_to_json(const TestItem& item) {
    json j;
    j["id"] = item.id;
    j["question"] = item.question;
    j["level"] = to_string(item.level);
    j["domain"] = item.domain;
    j["workflow_ref"] = item.workflow_ref;
    if (item.seed_id) j["seed_id"] = *item.seed_id;
    j["source_url"] = item.source_url;
    if (item.validator) j["validator"] = *item.validator;
    j["created_at"] = item.created_at;
    return j;
}

inline TestItem item_from_json(const json& j) {
    TestItem item;
    item.id = j.at("id").get<std::string>();
    item.question = j.at("question").get<std::string>();
    auto level = level_from_string(j.at("level").get<std::string>());
    if (!level)
        throw DatasetError("unknown level '" + j.at("level").get<std::string>() + "' in item " + item.id);
    item.level = *level;
    item.domain = j.at("domain").get<std::string>();
    item.workflow_ref = j.at("workflow_ref").get<std::string>();
    if (j.contains("seed_id") && !j["seed_id"].is_null())
        item.seed_id = j["seed_id"].get<std::string>();
    item.source_url = j.at("source_url").get<std::string>();
    if (j.contains("validator") && !j["validator"].is_null())
        item.validator = j["validator"].get<std::string>();
    item.created_at = j.value("created_at", "");
    return item;
}

inline json workflow_sidecar_to_json(const WorkflowSpec& wf) {
    json j;
    j["entry_point"] = wf.manifest.entry_point;
    j["allowed_hosts"] = wf.manifest.allowed_hosts;
    j["timeout_s"] = wf.manifest.timeout_s;
    j["clock_mode"] = wf.manifest.clock_mode;
    j["created_at"] = wf.created_at;
    return j;
}

inline WorkflowManifest workflow_manifest_from_json(const json& j) {
    WorkflowManifest m;
    m.entry_point = j.at("entry_point").get<std::string>();
    m.allowed_hosts = j.at("allowed_hosts").get<std::vector<std::string>>();
    m.timeout_s = j.at("timeout_s").get<int>();
    m.clock_mode = j.at("clock_mode").get<std::string>();
    if (m.allowed_hosts.empty())
        throw DatasetError("workflow manifest has empty allowed_hosts");
    if (m.timeout_s <= 0)
        throw DatasetError("workflow manifest has non-positive timeout_s");
    if (m.clock_mode != "live" && m.clock_mode != "injected")
        throw DatasetError("workflow manifest clock_mode must be live or injected");
    return m;
}

/// Structural checks for a single item against its dataset. Violations are
/// report entries, never exceptions.
inline void validate_item_into(const TestItem& item, const Dataset& dataset, ValidationReport& report) {
    auto add = [&](const std::string& msg) { report.violations.push_back({item.id, msg}); };

    if (!is_known_domain(item.domain))
        add("unknown domain: \"" + item.domain + "\"");
    if (item.level == Level::L1 && item.seed_id)
        add("L1 item carries a seed_id");
    if (item.level != Level::L1 && !item.seed_id)
        add("expansion item missing seed");
    if (!dataset.find_workflow(item.workflow_ref))
        add("dangling workflow_ref: " + item.workflow_ref);

    if (item.seed_id) {
        const TestItem* seed = dataset.find_item(*item.seed_id);
        if (!seed) {
            add("seed not found: " + *item.seed_id);
        } else {
            if (static_cast<int>(item.level) != static_cast<int>(seed->level) + 1)
                add("level must be exactly one above its seed");
            if (seed->workflow_ref != item.workflow_ref)
                add("workflow reuse broken: expected " + seed->workflow_ref + ", got " + item.workflow_ref);
            // The seed chain must reach an L1 item in at most two steps.
            const TestItem* cur = seed;
            int steps = 1;
            while (cur && cur->seed_id && steps <= 2) {
                cur = dataset.find_item(*cur->seed_id);
                ++steps;
            }
            if (!cur || cur->level != Level::L1 || steps > 2)
                add("seed chain does not terminate at an L1 item within 2 steps");
        }
    }
}

inline ValidationReport validate_item(const TestItem& item, const Dataset& dataset) {
    ValidationReport report;
    validate_item_into(item, dataset, report);
    return report;
}

inline ValidationReport validate_dataset(const Dataset& dataset) {
    ValidationReport report;
    for (const auto& item : dataset.items)
        validate_item_into(item, dataset, report);
    return report;
}

inline StatsTable dataset_stats(const Dataset& dataset) {
    StatsTable stats;
    for (const auto& item : dataset.items) {
        ++stats.level_counts[to_string(item.level)];
        ++stats.domain_counts[item.domain];
        ++stats.total;
    }
    return stats;
}

struct LoadOptions {
    bool strict = true; // throw on any violation instead of returning it
};

/// Loads a dataset directory: items.jsonl + manifest.json + workflows/
/// (script file with a .json sidecar per workflow). Structural problems are
/// DatasetError with the offending line or id named; in strict mode item
/// invariant violations are errors too.
inline Dataset load_dataset(const fs::path& root, const LoadOptions& opts = {},
                            ValidationReport* report_out = nullptr) {
    Dataset ds;
    ds.root = root;
    fs::path items_path = root / "items.jsonl";
    fs::path manifest_path = root / "manifest.json";
    fs::path workflows_dir = root / "workflows";
    if (!fs::exists(items_path))
        throw DatasetError("missing file: " + items_path.string());
    if (!fs::exists(manifest_path))
        throw DatasetError("missing file: " + manifest_path.string());

    // Workflows first, so item references can be resolved.
    if (fs::exists(workflows_dir)) {
        for (const auto& entry : fs::directory_iterator(workflows_dir)) {
            if (entry.path().extension() != ".py") continue;
            WorkflowSpec wf;
            wf.id = entry.path().stem().string();
            wf.source = util::read_file(entry.path());
            fs::path sidecar = entry.path().parent_path() / (wf.id + ".json");
            if (!fs::exists(sidecar))
                throw DatasetError("workflow " + wf.id + " has no manifest sidecar: " + sidecar.string());
            json j;
            try {
                j = json::parse(util::read_file(sidecar));
            } catch (const std::exception& e) {
                throw DatasetError("malformed workflow manifest " + sidecar.string() + ": " + e.what());
            }
            try {
                wf.manifest = workflow_manifest_from_json(j);
            } catch (const DatasetError& e) {
                throw DatasetError(std::string(e.what()) + " (workflow " + wf.id + ")");
            }
            wf.created_at = j.value("created_at", "");
            ds.workflows.emplace(wf.id, std::move(wf));
        }
    }

    int lineno = 0;
    for (const auto& line : util::read_lines(items_path)) {
        ++lineno;
        if (util::trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const std::exception& e) {
            throw DatasetError(util::format("malformed record at %s line %d: %s", items_path.string().c_str(),
                                            lineno, e.what()));
        }
        try {
            ds.items.push_back(item_from_json(j));
        } catch (const std::exception& e) {
            throw DatasetError(util::format("malformed record at %s line %d: %s", items_path.string().c_str(),
                                            lineno, e.what()));
        }
    }

    json mj;
    try {
        mj = json::parse(util::read_file(manifest_path));
    } catch (const std::exception& e) {
        throw DatasetError("malformed manifest " + manifest_path.string() + ": " + e.what());
    }
    ds.manifest.timezone = mj.value("timezone", "Asia/Shanghai");
    ds.manifest.utc_offset = mj.value("utc_offset", "+08:00");
    const json& counts = mj.at("counts");
    ds.manifest.total = counts.at("total").get<int>();
    for (auto& [k, v] : counts.at("levels").items())
        ds.manifest.level_counts[k] = v.get<int>();
    for (auto& [k, v] : counts.at("domains").items())
        ds.manifest.domain_counts[k] = v.get<int>();

    // Hard structural gates: reference integrity and declared-vs-computed counts.
    for (const auto& item : ds.items) {
        if (!ds.find_workflow(item.workflow_ref))
            throw DatasetError("dangling workflow_ref: item " + item.id + " references " + item.workflow_ref);
        if (item.level != Level::L1 && !item.seed_id)
            throw DatasetError("expansion item missing seed: " + item.id);
    }
    StatsTable stats = dataset_stats(ds);
    if (stats.total != ds.manifest.total)
        throw DatasetError(util::format("manifest/count mismatch: declared total %d, computed %d",
                                        ds.manifest.total, stats.total));
    for (const auto& [k, v] : ds.manifest.level_counts) {
        int computed = stats.level_counts.count(k) ? stats.level_counts.at(k) : 0;
        if (computed != v)
            throw DatasetError(util::format("manifest/count mismatch: level %s declared %d, computed %d",
                                            k.c_str(), v, computed));
    }
    for (const auto& [k, v] : ds.manifest.domain_counts) {
        int computed = stats.domain_counts.count(k) ? stats.domain_counts.at(k) : 0;
        if (computed != v)
            throw DatasetError(util::format("manifest/count mismatch: domain %s declared %d, computed %d",
                                            k.c_str(), v, computed));
    }

    ValidationReport report = validate_dataset(ds);
    if (report_out) *report_out = report;
    if (opts.strict && !report.ok())
        throw DatasetError("dataset validation failed:\n" + report.to_string());
    return ds;
}

/// Writes the dataset in the same layout load_dataset reads. Canonical record
/// serialization, so save-then-load is field-for-field identity and repeated
/// saves are byte-stable.
inline void save_dataset(const Dataset& dataset, const fs::path& root) {
    std::string lines;
    for (const auto& item : dataset.items)
        lines += item_to_json(item).dump() + "\n";
    util::write_file_if_changed(root / "items.jsonl", lines);

    json mj;
    mj["timezone"] = dataset.manifest.timezone;
    mj["utc_offset"] = dataset.manifest.utc_offset;
    json counts;
    counts["total"] = dataset.manifest.total;
    counts["levels"] = dataset.manifest.level_counts;
    counts["domains"] = dataset.manifest.domain_counts;
    mj["counts"] = counts;
    util::write_file_if_changed(root / "manifest.json", mj.dump(2) + "\n");

    for (const auto& [id, wf] : dataset.workflows) {
        util::write_file_if_changed(root / "workflows" / (id + ".py"), wf.source);
        util::write_file_if_changed(root / "workflows" / (id + ".json"),
                                    workflow_sidecar_to_json(wf).dump(2) + "\n");
    }
}

/// Recomputes the manifest counts from the items. Used by the single-writer
/// append path after mutations.
inline void refresh_manifest_counts(Dataset& dataset) {
    StatsTable stats = dataset_stats(dataset);
    dataset.manifest.total = stats.total;
    dataset.manifest.level_counts.clear();
    for (const auto& [k, v] : stats.level_counts) dataset.manifest.level_counts[k] = v;
    dataset.manifest.domain_counts.clear();
    for (const auto& [k, v] : stats.domain_counts) dataset.manifest.domain_counts[k] = v;
}

} // namespace core
} // namespace forge
