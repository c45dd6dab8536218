// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "forge/agent.hpp"
#include "forge/http.hpp"
#include "forge/util.hpp"

namespace forge::agent {

struct HttpClientConfig {
    std::string endpoint; // e.g. https://api.example.com/v1/chat/completions
    std::string api_key;
    std::string model;
    double temperature = 0.6;
    std::string role = "subject";
    int timeout_s = 180;
};

/// Chat-completions over HTTP with native function calling. Any provider
/// speaking the common completions wire format works; the endpoint, key and
/// model come from per-role configuration.
class HttpLlmClient : public LlmClient {
public:
    explicit HttpLlmClient(HttpClientConfig config) : config_(std::move(config)) {
        if (config_.endpoint.empty())
            throw Error("llm client for role '" + config_.role + "' has no endpoint configured");
    }

    ModelTurn complete(const ChatContext& ctx) override {
        json body;
        body["model"] = config_.model;
        body["temperature"] = config_.temperature;
        body["messages"] = ctx.messages;
        if (!ctx.tool_schemas.empty())
            body["tools"] = ctx.tool_schemas;

        net::Url u = net::parse_url(config_.endpoint);
        httplib::Headers headers;
        if (!config_.api_key.empty())
            headers.emplace("Authorization", "Bearer " + config_.api_key);

        httplib::Result res;
        auto post = [&](auto& client) {
            client.set_connection_timeout(config_.timeout_s, 0);
            client.set_read_timeout(config_.timeout_s, 0);
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
            throw ClientError("unsupported endpoint scheme: " + u.scheme);
        }
        if (!res)
            throw ClientError("llm transport error: " + httplib::to_string(res.error()));
        if (res->status < 200 || res->status >= 300)
            throw ClientError(util::format("llm endpoint returned status %d: %s", res->status,
                                           util::truncate_utf8(res->body, 500).c_str()));

        json parsed;
        try {
            parsed = json::parse(res->body);
        } catch (const std::exception& e) {
            throw ClientError(std::string("llm response is not valid JSON: ") + e.what());
        }
        return parse_completion(parsed);
    }

    static ModelTurn parse_completion(const json& parsed) {
        ModelTurn turn;
        const json& message = parsed.at("choices").at(0).at("message");
        if (message.contains("content") && message["content"].is_string())
            turn.text = message["content"].get<std::string>();
        if (message.contains("tool_calls")) {
            for (const auto& c : message["tool_calls"]) {
                ToolCallRequest call;
                call.id = c.value("id", "");
                call.name = c.at("function").value("name", "");
                std::string args = c.at("function").value("arguments", "{}");
                call.arguments_raw = args;
                try {
                    call.arguments = json::parse(args);
                    if (!call.arguments.is_object()) call.arguments_valid = false;
                } catch (...) {
                    call.arguments_valid = false;
                }
                turn.tool_calls.push_back(std::move(call));
            }
        }
        if (parsed.contains("usage")) {
            turn.prompt_tokens = parsed["usage"].value("prompt_tokens", 0);
            turn.completion_tokens = parsed["usage"].value("completion_tokens", 0);
        }
        return turn;
    }

    std::string role() const override { return config_.role; }
    std::string model_name() const override { return config_.model; }
    double temperature() const override { return config_.temperature; }

private:
    HttpClientConfig config_;
};

/// Reads FORGE_<ROLE>_{ENDPOINT,API_KEY,MODEL,TEMPERATURE} for a role.
inline HttpClientConfig client_config_from_env(const std::string& role) {
    std::string upper = role;
    for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    HttpClientConfig cfg;
    cfg.role = role;
    cfg.endpoint = util::getenv_or(("FORGE_" + upper + "_ENDPOINT").c_str());
    cfg.api_key = util::getenv_or(("FORGE_" + upper + "_API_KEY").c_str());
    cfg.model = util::getenv_or(("FORGE_" + upper + "_MODEL").c_str(), "unknown");
    std::string temp = util::getenv_or(("FORGE_" + upper + "_TEMPERATURE").c_str());
    if (!temp.empty())
        cfg.temperature = std::stod(temp);
    return cfg;
}

/// Builds a client from a config value: {"transcript": path} replays a canned
/// transcript; otherwise {endpoint, api_key?, model, temperature?} makes an
/// HTTP client. Role env vars fill gaps when fields are omitted.
inline std::shared_ptr<LlmClient> make_client(const json& spec, const std::string& role,
                                              double default_temperature = 0.6) {
    if (spec.is_object() && spec.contains("transcript"))
        return ScriptedClient::from_file(spec["transcript"].get<std::string>(), role,
                                         spec.value("temperature", default_temperature));
    HttpClientConfig cfg = client_config_from_env(role);
    cfg.temperature = default_temperature;
    if (spec.is_object()) {
        if (spec.contains("endpoint")) cfg.endpoint = spec["endpoint"].get<std::string>();
        if (spec.contains("api_key")) cfg.api_key = spec["api_key"].get<std::string>();
        if (spec.contains("model")) cfg.model = spec["model"].get<std::string>();
        if (spec.contains("temperature")) cfg.temperature = spec["temperature"].get<double>();
    }
    return std::make_shared<HttpLlmClient>(std::move(cfg));
}

} // namespace forge::agent
