#pragma once

// OpenAI-compatible chat-completions and embeddings over HTTP(S) with bearer
// auth and bounded retry. Split from gateway.hpp so mock-only builds do not
// pull in the HTTP stack.

#include <algorithm>
#include <chrono>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "gapcheck/gateway.hpp"

namespace gapcheck {

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
    double multiplier = 2.0;
};

struct OpenAiConfig {
    std::string base_url;     // e.g. https://api.openai.com/v1 or http://127.0.0.1:8080/v1
    std::string api_key;      // may be empty for unauthenticated local endpoints
    RetryPolicy retry;
    std::chrono::seconds timeout{120};
};

class OpenAiBackend : public Backend {
  public:
    explicit OpenAiBackend(OpenAiConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.base_url.empty()) throw ConfigError("OpenAiBackend: base_url must be set");
        split_base_url();
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
        if (origin_.rfind("https://", 0) == 0)
            throw ConfigError("OpenAiBackend: built without TLS support; https base URLs unavailable");
#endif
    }

    CompletionResponse complete(const CompletionRequest& req) override {
        json messages = json::array();
        for (const auto& m : req.messages)
            messages.push_back(json{{"role", m.role}, {"content", m.text}});
        const json payload = {{"model", req.model_id},
                              {"messages", std::move(messages)},
                              {"temperature", req.temperature},
                              {"max_tokens", req.max_tokens}};
        const json body = post_with_retry("/chat/completions", payload);
        try {
            const json& choice = body.at("choices").at(0);
            CompletionResponse resp;
            resp.text = choice.at("message").value("content", "");
            resp.finish_reason = finish_reason_from_string(choice.value("finish_reason", "stop"));
            resp.provider_meta["model"] = body.value("model", req.model_id);
            if (body.contains("id")) resp.provider_meta["id"] = body.value("id", "");
            return resp;
        } catch (const json::exception& e) {
            throw ProviderError(std::string("malformed chat-completions response: ") + e.what());
        }
    }

    std::vector<std::vector<double>> embed(const std::string& model_id,
                                           const std::vector<std::string>& texts) override {
        const json payload = {{"model", model_id}, {"input", texts}};
        const json body = post_with_retry("/embeddings", payload);
        try {
            std::vector<std::vector<double>> out(texts.size());
            std::vector<bool> seen(texts.size(), false);
            for (const auto& item : body.at("data")) {
                const size_t idx = item.at("index").get<size_t>();
                if (idx >= out.size()) throw ProviderError("embeddings response index out of range");
                out[idx] = item.at("embedding").get<std::vector<double>>();
                seen[idx] = true;
            }
            if (std::find(seen.begin(), seen.end(), false) != seen.end())
                throw ProviderError("embeddings response missing entries");
            return out;
        } catch (const json::exception& e) {
            throw ProviderError(std::string("malformed embeddings response: ") + e.what());
        }
    }

    std::string name() const override { return "openai-compatible"; }

  private:
    void split_base_url() {
        std::string url = cfg_.base_url;
        while (!url.empty() && url.back() == '/') url.pop_back();
        const size_t scheme_end = url.find("://");
        if (scheme_end == std::string::npos)
            throw ConfigError("OpenAiBackend: base_url must start with http:// or https://");
        const size_t path_start = url.find('/', scheme_end + 3);
        if (path_start == std::string::npos) {
            origin_ = url;
            path_prefix_.clear();
        } else {
            origin_ = url.substr(0, path_start);
            path_prefix_ = url.substr(path_start);
        }
    }

    json post_with_retry(const std::string& endpoint_path, const json& payload) {
        const std::string path = path_prefix_ + endpoint_path;
        const std::string body = payload.dump();
        std::chrono::milliseconds backoff = cfg_.retry.initial_backoff;
        std::string last_error;

        for (int attempt = 1; attempt <= cfg_.retry.max_attempts; ++attempt) {
            httplib::Client client(origin_);
            client.set_connection_timeout(cfg_.timeout);
            client.set_read_timeout(cfg_.timeout);
            httplib::Headers headers;
            if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

            auto res = client.Post(path, headers, body, "application/json");
            if (res) {
                if (res->status == 200) {
                    try {
                        return json::parse(res->body);
                    } catch (const json::exception& e) {
                        throw ProviderError(std::string("provider returned unparseable JSON: ") + e.what());
                    }
                }
                if (res->status == 401 || res->status == 403)
                    throw AuthError("provider rejected credentials (HTTP " + std::to_string(res->status) + ")");
                if (res->status == 429 || res->status >= 500) {
                    last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
                } else {
                    throw ProviderError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 500));
                }
            } else {
                last_error = "transport error: " + httplib::to_string(res.error());
            }
            if (attempt < cfg_.retry.max_attempts) {
                std::this_thread::sleep_for(backoff);
                backoff = std::chrono::milliseconds(
                    static_cast<long long>(static_cast<double>(backoff.count()) * cfg_.retry.multiplier));
            }
        }
        throw ProviderError("exhausted " + std::to_string(cfg_.retry.max_attempts) + " attempts against " +
                            origin_ + path + "; last error: " + last_error);
    }

    OpenAiConfig cfg_;
    std::string origin_;
    std::string path_prefix_;
};

} // namespace gapcheck
