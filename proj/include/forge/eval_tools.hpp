// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "forge/agent.hpp"
#include "forge/assets.hpp"
#include "forge/fixture.hpp"
#include "forge/html.hpp"
#include "forge/http.hpp"

namespace forge::eval {

using agent::json;

/// Query script decides the search locale: any CJK codepoint routes to the
/// zh-CN index, everything else to the provider default. Pure function of the
/// query string.
inline std::string route_locale(const std::string& query) {
    return util::contains_cjk(query) ? "cn" : "default";
}

struct SearchResult {
    int rank = 0; // 1..k
    std::string title;
    std::string snippet;
    std::string url;
    std::string locale;
};

struct SearchConfig {
    std::string endpoint;  // serper-style JSON POST endpoint
    std::string api_key;
    int top_k = 10;
    fs::path fixture_dir;  // replay: <dir>/<fnv(query)>.json
    bool replay = false;
};

/// Top-k web search with automatic locale routing. Live mode posts to a
/// serper-style endpoint; replay mode serves canned result lists keyed by the
/// query hash.
class SearchClient {
public:
    explicit SearchClient(SearchConfig cfg) : cfg_(std::move(cfg)) {}

    std::vector<SearchResult> search_one(const std::string& query) const {
        std::string locale = route_locale(query);
        std::vector<SearchResult> out;
        if (cfg_.replay) {
            fs::path f = cfg_.fixture_dir / (util::fnv1a_hex(query) + ".json");
            if (!fs::exists(f))
                throw Error("search fixture miss for query: " + query);
            json j = json::parse(util::read_file(f));
            int rank = 0;
            for (const auto& r : j.at("results")) {
                if (rank >= cfg_.top_k) break;
                out.push_back({++rank, r.value("title", ""), r.value("snippet", ""), r.value("url", ""), locale});
            }
            return out;
        }
        if (cfg_.endpoint.empty())
            throw Error("no search endpoint configured (FORGE_SEARCH_ENDPOINT)");
        net::Url u = net::parse_url(cfg_.endpoint);
        json body;
        body["q"] = query;
        body["num"] = cfg_.top_k;
        if (locale == "cn") {
            body["gl"] = "cn";
            body["hl"] = "zh-cn";
        }
        httplib::Headers headers{{"X-API-KEY", cfg_.api_key}};
        httplib::Result res;
        auto post = [&](auto& client) {
            client.set_read_timeout(30, 0);
            res = client.Post(u.target, headers, body.dump(), "application/json");
        };
        if (u.scheme == "http") {
            httplib::Client client(u.host, u.port ? u.port : 80);
            post(client);
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
        } else if (u.scheme == "https") {
            httplib::SSLClient client(u.host, u.port ? u.port : 443);
            post(client);
#endif
        } else {
            throw Error("unsupported search endpoint scheme: " + u.scheme);
        }
        if (!res || res->status != 200)
            throw Error(util::format("search provider error (status %d)", res ? res->status : 0));
        json parsed = json::parse(res->body);
        int rank = 0;
        for (const auto& r : parsed.value("organic", json::array())) {
            if (rank >= cfg_.top_k) break;
            out.push_back({++rank, r.value("title", ""), r.value("snippet", ""), r.value("link", ""), locale});
        }
        return out;
    }

    /// 1..8 queries per call; one ranked list per query, order preserved.
    std::vector<std::vector<SearchResult>> search(const std::vector<std::string>& queries) const {
        if (queries.empty() || queries.size() > 8)
            throw Error("search takes between 1 and 8 queries per call");
        std::vector<std::vector<SearchResult>> out;
        for (const auto& q : queries)
            out.push_back(search_one(q));
        return out;
    }

private:
    SearchConfig cfg_;
};

inline SearchConfig search_config_from_env() {
    SearchConfig cfg;
    cfg.endpoint = util::getenv_or("FORGE_SEARCH_ENDPOINT", "https://google.serper.dev/search");
    cfg.api_key = util::getenv_or("FORGE_SEARCH_API_KEY");
    return cfg;
}

/// Renders one query's results the way the trajectory stores them.
inline std::string format_results(const std::string& query, const std::vector<SearchResult>& results) {
    std::string out = "Results for \"" + query + "\" (locale " + (results.empty() ? route_locale(query)
                                                                                  : results.front().locale) +
                      "):\n";
    for (const auto& r : results)
        out += util::format("%d. [%s] %s — %s\n", r.rank, r.title.c_str(), r.snippet.c_str(), r.url.c_str());
    if (results.empty()) out += "(no results)\n";
    return out;
}

inline agent::ToolDescriptor tool_search(std::shared_ptr<SearchClient> client) {
    agent::ToolDescriptor d;
    d.name = "search";
    d.description = "Web search. Takes a list of queries (1-8) and returns the top-10 results per query. "
                    "Chinese queries are routed to the zh-CN index automatically.";
    d.params = {{"query", "array", "The search queries", true}};
    d.handler = [client](const json& args) -> agent::Observation {
        std::vector<std::string> queries;
        for (const auto& q : args.at("query"))
            queries.push_back(q.get<std::string>());
        std::vector<std::vector<SearchResult>> lists;
        try {
            lists = client->search(queries);
        } catch (const std::exception& e) {
            return {std::string("search failed: ") + e.what(), true};
        }
        std::string out;
        for (size_t i = 0; i < queries.size(); ++i)
            out += format_results(queries[i], lists[i]) + "\n";
        return {util::trim(out), false};
    };
    return d;
}

// ---------------------------------------------------------------------------
// Visit: reader fetch + goal-driven extraction

struct VisitConfig {
    std::string reader_endpoint; // prefix prepended to the target url (live)
    fs::path pages_dir;          // replay: <dir>/<fnv(url)>.html
    bool replay = false;
    size_t observation_cap = 8000;
    int timeout_s = 30;
};

inline VisitConfig visit_config_from_env() {
    VisitConfig cfg;
    cfg.reader_endpoint = util::getenv_or("FORGE_READER_ENDPOINT", "https://r.jina.ai/");
    return cfg;
}

/// Fetches pages through the reader path and filters the content against the
/// stated browsing goal with the extractor model, so raw pages never blow the
/// observation budget.
class VisitTool {
public:
    VisitTool(VisitConfig cfg, std::shared_ptr<agent::LlmClient> extractor)
        : cfg_(std::move(cfg)), extractor_(std::move(extractor)) {}

    std::string visit_one(const std::string& url, const std::string& goal) const {
        std::string content;
        if (cfg_.replay) {
            fs::path f = cfg_.pages_dir / (util::fnv1a_hex(url) + ".html");
            if (!fs::exists(f))
                return "Error. The provided webpage content could not be accessed: no snapshot for " + url;
            content = html::to_markdown(util::read_file(f));
        } else {
            auto fetched = net::http_get(cfg_.reader_endpoint + url, cfg_.timeout_s);
            if (!fetched.ok)
                return "Error. The provided webpage content could not be accessed: " +
                       (fetched.error.empty() ? util::format("http status %d", fetched.status) : fetched.error);
            content = util::contains(fetched.content_type, "html") ? html::to_markdown(fetched.body)
                                                                   : fetched.body;
        }
        std::string evidence = extract(content, goal, url);
        return util::truncate_utf8(evidence, cfg_.observation_cap);
    }

    std::string extract(const std::string& content, const std::string& goal, const std::string& url) const {
        if (!extractor_) // no extractor configured: plain capped content
            return content;
        agent::ChatContext ctx;
        ctx.system_prompt =
            "You filter fetched web pages. Given a browsing goal and the raw page content, return only the "
            "passages relevant to the goal, verbatim where possible, including any dates attached to them. "
            "If nothing is relevant, reply exactly: NO RELEVANT EVIDENCE.";
        ctx.user_prompt = "[goal]: " + goal + "\n[url]: " + url + "\n[content]:\n" +
                          util::truncate_utf8(content, 60000);
        ctx.messages.push_back({{"role", "system"}, {"content", ctx.system_prompt}});
        ctx.messages.push_back({{"role", "user"}, {"content", ctx.user_prompt}});
        return extractor_->complete(ctx).text;
    }

private:
    VisitConfig cfg_;
    std::shared_ptr<agent::LlmClient> extractor_;
};

inline agent::ToolDescriptor tool_visit(std::shared_ptr<VisitTool> visit) {
    agent::ToolDescriptor d;
    d.name = "visit";
    d.description = "Visit web pages and extract the evidence relevant to the stated goal. Takes a list of "
                    "urls and the current browsing goal.";
    d.params = {{"url", "array", "Pages to visit", true}, {"goal", "string", "What to extract", true}};
    d.handler = [visit](const json& args) -> agent::Observation {
        std::string goal = args.at("goal").get<std::string>();
        if (util::trim(goal).empty())
            return {"goal must be non-empty", true};
        std::string out;
        for (const auto& u : args.at("url")) {
            std::string url = u.get<std::string>();
            out += "=== " + url + " ===\n" + visit->visit_one(url, goal) + "\n";
        }
        return {util::trim(out), false};
    };
    return d;
}

// ---------------------------------------------------------------------------
// Subject system prompt ladder

enum class PromptVariant { Base, RealtimeV1, RealtimeV2, RealtimeV3, TimeAnchor };

inline std::optional<PromptVariant> prompt_variant_from_string(std::string_view s) {
    if (s == "base") return PromptVariant::Base;
    if (s == "realtime_v1") return PromptVariant::RealtimeV1;
    if (s == "realtime_v2") return PromptVariant::RealtimeV2;
    if (s == "realtime_v3") return PromptVariant::RealtimeV3;
    if (s == "time_anchor") return PromptVariant::TimeAnchor;
    return std::nullopt;
}

inline const char* to_string(PromptVariant v) {
    switch (v) {
    case PromptVariant::Base: return "base";
    case PromptVariant::RealtimeV1: return "realtime_v1";
    case PromptVariant::RealtimeV2: return "realtime_v2";
    case PromptVariant::RealtimeV3: return "realtime_v3";
    case PromptVariant::TimeAnchor: return "time_anchor";
    }
    return "?";
}

/// Builds the subject system prompt with the anchor injected once at second
/// precision. time_anchor is realtime_v3 plus the historical-date warning.
inline std::string build_system_prompt(PromptVariant variant, const AnchorTimestamp& anchor,
                                       const fs::path& assets_dir = {}) {
    const char* file = nullptr;
    switch (variant) {
    case PromptVariant::Base: file = "prompts/subject_base.txt"; break;
    case PromptVariant::RealtimeV1: file = "prompts/subject_realtime_v1.txt"; break;
    case PromptVariant::RealtimeV2: file = "prompts/subject_realtime_v2.txt"; break;
    case PromptVariant::RealtimeV3:
    case PromptVariant::TimeAnchor: file = "prompts/subject_realtime_v3.txt"; break;
    }
    std::string text = assets::fill(assets::load(file, assets_dir), {{"current_time", anchor.wall_clock()}});
    if (variant == PromptVariant::TimeAnchor)
        text += assets::load("prompts/subject_time_anchor_block.txt", assets_dir);
    return text;
}

} // namespace forge::eval
