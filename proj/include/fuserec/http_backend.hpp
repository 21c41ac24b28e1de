// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 fuserec contributors
#pragma once

// Kept out of ragloop.hpp so offline consumers do not pull in the HTTP stack.
// Define CPPHTTPLIB_OPENSSL_SUPPORT before including this header (and link
// OpenSSL) to talk to https endpoints.

#include <cstdlib>
#include <optional>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "fuserec/common.hpp"
#include "fuserec/llm_backend.hpp"

namespace fuserec::rag {

struct HttpBackendConfig {
    std::string endpoint;     // e.g. http://localhost:8080/v1/chat/completions
    std::string model;
    std::string api_key_env;  // name of the env var holding the bearer token
    int timeout_s = 30;
};

/// OpenAI-style chat-completion client. All failures (connect, status, shape)
/// surface as TransportError so the caller's retry/fallback machinery applies.
class HttpChatBackend final : public LlmBackend {
public:
    explicit HttpChatBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
        const auto scheme_end = cfg_.endpoint.find("://");
        if (scheme_end == std::string::npos)
            throw ConfigError("http backend: endpoint must include a scheme: " + cfg_.endpoint);
        const auto path_start = cfg_.endpoint.find('/', scheme_end + 3);
        base_ = path_start == std::string::npos ? cfg_.endpoint : cfg_.endpoint.substr(0, path_start);
        path_ = path_start == std::string::npos ? "/" : cfg_.endpoint.substr(path_start);
    }

    std::string label() const override { return "http:" + cfg_.model + "@" + base_; }

    std::string complete(const std::string& prompt, double temperature, int max_tokens,
                         std::optional<std::uint64_t> seed) override {
        nlohmann::ordered_json body;
        body["model"] = cfg_.model;
        body["messages"] = nlohmann::ordered_json::array(
            {nlohmann::ordered_json{{"role", "user"}, {"content", prompt}}});
        body["temperature"] = temperature;
        body["max_tokens"] = max_tokens;
        if (seed) body["seed"] = *seed;

        httplib::Client client(base_);
        client.set_connection_timeout(cfg_.timeout_s);
        client.set_read_timeout(cfg_.timeout_s);
        httplib::Headers headers;
        if (!cfg_.api_key_env.empty()) {
            const char* key = std::getenv(cfg_.api_key_env.c_str());
            if (!key || !*key)
                throw TransportError("http backend: env var " + cfg_.api_key_env + " is unset");
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }

        auto res = client.Post(path_, headers, body.dump(), "application/json");
        if (!res) throw TransportError("http backend: request failed: " + httplib::to_string(res.error()));
        if (res->status != 200)
            throw TransportError("http backend: status " + std::to_string(res->status) + ": " + res->body);
        const auto j = nlohmann::json::parse(res->body, nullptr, false);
        if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty() ||
            !j["choices"][0].contains("message") || !j["choices"][0]["message"].contains("content"))
            throw TransportError("http backend: unexpected response shape");
        return j["choices"][0]["message"]["content"].get<std::string>();
    }

private:
    HttpBackendConfig cfg_;
    std::string base_;
    std::string path_;
};

}  // namespace fuserec::rag
