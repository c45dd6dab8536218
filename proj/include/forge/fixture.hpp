// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "forge/civil_time.hpp"
#include "forge/util.hpp"

namespace forge::engine {

/// A recorded execution environment: every page fetched during one live run,
/// the clock it ran under, and the answer it produced. Replaying the bound
/// workflow against the bundle is deterministic by construction.
///
/// On-disk layout:
///   manifest.json        {frozen_clock, expected_answer, workflow_id}
///   snapshots/<h>.html   page bodies keyed by fnv1a(url)
///   request_log.jsonl    ordered fetches {seq, url, status, bytes}
///   screenshot.ppm       rendering of the final visited page
struct FixtureBundle {
    fs::path dir;
    AnchorTimestamp frozen_clock;
    std::string expected_answer;
    std::string workflow_id;
    std::map<std::string, std::string> snapshots; // url -> body

    static std::string snapshot_key(const std::string& url) { return util::fnv1a_hex(url); }

    bool has(const std::string& url) const { return snapshots.count(url) > 0; }

    std::optional<std::string> lookup(const std::string& url) const {
        auto it = snapshots.find(url);
        if (it == snapshots.end()) return std::nullopt;
        return it->second;
    }

    static FixtureBundle load(const fs::path& dir) {
        FixtureBundle b;
        b.dir = dir;
        fs::path manifest = dir / "manifest.json";
        if (!fs::exists(manifest))
            throw Error("fixture bundle has no manifest: " + manifest.string());
        auto j = nlohmann::json::parse(util::read_file(manifest));
        b.frozen_clock = civil::parse_anchor(j.at("frozen_clock").get<std::string>());
        b.expected_answer = j.value("expected_answer", "");
        b.workflow_id = j.value("workflow_id", "");
        fs::path snaps = dir / "snapshots";
        // The manifest's url index maps hashes back to urls.
        if (j.contains("urls")) {
            for (auto& [url, key] : j["urls"].items()) {
                fs::path f = snaps / (key.get<std::string>() + ".html");
                if (fs::exists(f))
                    b.snapshots[url] = util::read_file(f);
            }
        }
        return b;
    }

    void save() const {
        nlohmann::ordered_json j;
        j["frozen_clock"] = frozen_clock.iso();
        j["expected_answer"] = expected_answer;
        j["workflow_id"] = workflow_id;
        nlohmann::ordered_json urls = nlohmann::ordered_json::object();
        for (const auto& [url, body] : snapshots) {
            std::string key = snapshot_key(url);
            urls[url] = key;
            util::write_file_if_changed(dir / "snapshots" / (key + ".html"), body);
        }
        j["urls"] = urls;
        util::write_file_if_changed(dir / "manifest.json", j.dump(2) + "\n");
    }
};

} // namespace forge::engine
