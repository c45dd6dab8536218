// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "forge/core.hpp"
#include "forge/engine.hpp"
#include "forge/eval_tools.hpp"
#include "forge/util.hpp"

namespace forge::cli {

/// Effective run configuration. Sources merge as: config file, then
/// command-line flags, then environment variables — the environment wins.
struct RunConfig {
    fs::path dataset = "data/sample";
    fs::path fixture_root = "data/fixtures";
    fs::path out_dir = "out";
    fs::path assets_dir = "assets";
    engine::Mode mode = engine::Mode::Live;
    std::string variant = "realtime_v3";
    double epsilon_s = 5.0;
    std::string anchor_time = "12:00:00"; // time-of-day used to anchor each eval day
    int parallelism = 4;
    int builder_iterations = 20;
    int subject_iterations = 40;
    int64_t max_tokens = 2'000'000;
    size_t observation_cap = 8000;
    nlohmann::ordered_json clients = nlohmann::ordered_json::object(); // role -> spec
    nlohmann::ordered_json models = nlohmann::ordered_json::object();  // label -> subject spec
    nlohmann::ordered_json search = nlohmann::ordered_json::object();

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["dataset"] = dataset.string();
        j["fixture_root"] = fixture_root.string();
        j["out_dir"] = out_dir.string();
        j["assets_dir"] = assets_dir.string();
        j["mode"] = engine::to_string(mode);
        j["variant"] = variant;
        j["epsilon_s"] = epsilon_s;
        j["anchor_time"] = anchor_time;
        j["parallelism"] = parallelism;
        j["budgets"] = {{"builder_iterations", builder_iterations},
                        {"subject_iterations", subject_iterations},
                        {"max_tokens", max_tokens}};
        j["observation_cap"] = observation_cap;
        j["clients"] = clients;
        j["models"] = models;
        j["search"] = search;
        return j;
    }

    std::string digest() const { return util::fnv1a_hex(to_json().dump()); }
};

class ConfigError : public Error {
public:
    using Error::Error;
};

inline void apply_file(RunConfig& cfg, const fs::path& path) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(util::read_file(path));
    } catch (const std::exception& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + std::string(e.what()));
    }
    if (j.contains("dataset")) cfg.dataset = j["dataset"].get<std::string>();
    if (j.contains("fixture_root")) cfg.fixture_root = j["fixture_root"].get<std::string>();
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("assets_dir")) cfg.assets_dir = j["assets_dir"].get<std::string>();
    if (j.contains("mode")) {
        std::string m = j["mode"].get<std::string>();
        if (m != "live" && m != "replay") throw ConfigError("config field mode must be live or replay");
        cfg.mode = m == "live" ? engine::Mode::Live : engine::Mode::Replay;
    }
    if (j.contains("variant")) cfg.variant = j["variant"].get<std::string>();
    if (j.contains("epsilon_s")) cfg.epsilon_s = j["epsilon_s"].get<double>();
    if (j.contains("anchor_time")) cfg.anchor_time = j["anchor_time"].get<std::string>();
    if (j.contains("parallelism")) cfg.parallelism = j["parallelism"].get<int>();
    if (j.contains("observation_cap")) cfg.observation_cap = j["observation_cap"].get<size_t>();
    if (j.contains("budgets")) {
        const auto& b = j["budgets"];
        if (b.contains("builder_iterations")) cfg.builder_iterations = b["builder_iterations"].get<int>();
        if (b.contains("subject_iterations")) cfg.subject_iterations = b["subject_iterations"].get<int>();
        if (b.contains("max_tokens")) cfg.max_tokens = b["max_tokens"].get<int64_t>();
    }
    if (j.contains("clients")) cfg.clients = j["clients"];
    if (j.contains("models")) cfg.models = j["models"];
    if (j.contains("search")) cfg.search = j["search"];
}

/// Environment layer: highest precedence.
inline void apply_env(RunConfig& cfg) {
    auto str = [&](const char* name, auto setter) {
        std::string v = util::getenv_or(name);
        if (!v.empty()) setter(v);
    };
    str("FORGE_DATASET", [&](const std::string& v) { cfg.dataset = v; });
    str("FORGE_FIXTURE_ROOT", [&](const std::string& v) { cfg.fixture_root = v; });
    str("FORGE_OUT_DIR", [&](const std::string& v) { cfg.out_dir = v; });
    str("FORGE_ASSETS_DIR", [&](const std::string& v) { cfg.assets_dir = v; });
    str("FORGE_MODE", [&](const std::string& v) {
        if (v != "live" && v != "replay") throw ConfigError("FORGE_MODE must be live or replay");
        cfg.mode = v == "live" ? engine::Mode::Live : engine::Mode::Replay;
    });
    str("FORGE_VARIANT", [&](const std::string& v) { cfg.variant = v; });
    str("FORGE_EPSILON_S", [&](const std::string& v) { cfg.epsilon_s = std::stod(v); });
    str("FORGE_ANCHOR_TIME", [&](const std::string& v) { cfg.anchor_time = v; });
    str("FORGE_PARALLELISM", [&](const std::string& v) { cfg.parallelism = std::stoi(v); });
}

/// Validates cross-field requirements, naming the offending field.
inline void validate(const RunConfig& cfg) {
    if (cfg.mode == engine::Mode::Replay && cfg.fixture_root.empty())
        throw ConfigError("invalid config: fixture_root is required when mode is replay");
    if (cfg.epsilon_s <= 0)
        throw ConfigError("invalid config: epsilon_s must be positive");
    if (cfg.parallelism <= 0)
        throw ConfigError("invalid config: parallelism must be positive");
}

/// Search client per config + mode.
inline std::shared_ptr<eval::SearchClient> make_search_client(const RunConfig& cfg) {
    eval::SearchConfig sc = eval::search_config_from_env();
    if (cfg.search.contains("endpoint")) sc.endpoint = cfg.search["endpoint"].get<std::string>();
    if (cfg.search.contains("api_key")) sc.api_key = cfg.search["api_key"].get<std::string>();
    if (cfg.mode == engine::Mode::Replay) {
        sc.replay = true;
        sc.fixture_dir = cfg.fixture_root / "search";
    }
    return std::make_shared<eval::SearchClient>(sc);
}

} // namespace forge::cli
