#pragma once

// Provider-agnostic access to chat-completion and text-embedding endpoints,
// with content-addressed response caching and a deterministic scripted mock
// backend for offline runs.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gapcheck/errors.hpp"
#include "gapcheck/sha256.hpp"
#include "gapcheck/text.hpp"

namespace gapcheck {

using json = nlohmann::json;

enum class Endpoint { chat_completions, embeddings };

inline const char* to_string(Endpoint e) {
    return e == Endpoint::chat_completions ? "chat_completions" : "embeddings";
}

struct Message {
    std::string role; // system | user | assistant
    std::string text;
};

struct CompletionRequest {
    std::string model_id;
    std::vector<Message> messages;
    double temperature = 0.0;
    int max_tokens = 1024;
    // Distinguishes repeated stochastic draws of an otherwise identical
    // request; part of the cache key so N-sample runs do not collapse to 1.
    int sample_index = 0;

    void validate() const {
        if (messages.empty()) throw ContractViolation("CompletionRequest: messages must be non-empty");
        const std::string& first = messages.front().role;
        if (first != "system" && first != "user")
            throw ContractViolation("CompletionRequest: first message role must be system or user");
        for (const auto& m : messages) {
            if (m.role != "system" && m.role != "user" && m.role != "assistant")
                throw ContractViolation("CompletionRequest: unknown role '" + m.role + "'");
        }
        if (temperature < 0.0 || temperature > 2.0)
            throw ContractViolation("CompletionRequest: temperature must be in [0, 2]");
        if (max_tokens <= 0) throw ContractViolation("CompletionRequest: max_tokens must be positive");
        if (sample_index < 0) throw ContractViolation("CompletionRequest: sample_index must be non-negative");
        if (model_id.empty()) throw ContractViolation("CompletionRequest: model_id must be non-empty");
    }
};

enum class FinishReason { stop, length, error };

inline const char* to_string(FinishReason r) {
    switch (r) {
        case FinishReason::stop: return "stop";
        case FinishReason::length: return "length";
        default: return "error";
    }
}

inline FinishReason finish_reason_from_string(const std::string& s) {
    if (s == "stop") return FinishReason::stop;
    if (s == "length") return FinishReason::length;
    return FinishReason::error;
}

struct CompletionResponse {
    std::string text;
    FinishReason finish_reason = FinishReason::stop;
    std::map<std::string, std::string> provider_meta;
};

// ---------------------------------------------------------------------------
// Canonical request bodies and cache keys
// ---------------------------------------------------------------------------

/// Canonical JSON body for a completion request: fixed field order (nlohmann
/// objects are key-sorted), structural fields trimmed, message text verbatim.
inline json canonical_completion_body(const CompletionRequest& req) {
    json messages = json::array();
    for (const auto& m : req.messages) {
        messages.push_back(json{{"role", to_lower(trim(m.role))}, {"text", m.text}});
    }
    return json{{"max_tokens", req.max_tokens},
                {"messages", std::move(messages)},
                {"model", trim(req.model_id)},
                {"temperature", req.temperature}};
}

/// Canonical JSON body for embedding a single text (embeddings are cached
/// per (model_id, text), so batch composition never changes keys).
inline json canonical_embedding_body(const std::string& model_id, const std::string& text) {
    return json{{"model", trim(model_id)}, {"text", text}};
}

/// Content-addressed key: digest of (endpoint kind, canonical body bytes,
/// sample_index). Stable across platforms and process restarts.
inline std::string cache_key(Endpoint endpoint, const std::string& canonical_body, int sample_index) {
    Sha256 h;
    h.update("gapcheck.v1");
    h.update("\x1f", 1);
    h.update(to_string(endpoint));
    h.update("\x1f", 1);
    h.update(canonical_body);
    h.update("\x1f", 1);
    h.update(std::to_string(sample_index));
    return h.hex_digest();
}

inline std::string completion_cache_key(const CompletionRequest& req) {
    return cache_key(Endpoint::chat_completions, canonical_completion_body(req).dump(), req.sample_index);
}

inline std::string embedding_cache_key(const std::string& model_id, const std::string& text) {
    return cache_key(Endpoint::embeddings, canonical_embedding_body(model_id, text).dump(), 0);
}

inline std::string iso8601_utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// ---------------------------------------------------------------------------
// Response cache
// ---------------------------------------------------------------------------

/// In-memory cache with an optional on-disk directory. Disk entries are one
/// JSON file per key holding the canonical request alongside the response so
/// cached traffic can be audited. Concurrent readers, serialized writers;
/// last-writer-wins is benign because values for a key are identical by
/// construction.
class ResponseCache {
  public:
    ResponseCache() = default;

    explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
        if (!dir_.empty()) std::filesystem::create_directories(dir_);
    }

    std::optional<json> get(const std::string& key) const {
        {
            std::shared_lock lock(mutex_);
            auto it = memory_.find(key);
            if (it != memory_.end()) return it->second;
        }
        if (dir_.empty()) return std::nullopt;
        const auto path = entry_path(key);
        std::ifstream in(path);
        if (!in) return std::nullopt;
        json entry;
        try {
            in >> entry;
        } catch (const json::exception&) {
            return std::nullopt; // unreadable entry treated as a miss
        }
        if (!entry.is_object() || entry.value("key", "") != key)
            throw ContractViolation("cache entry at " + path.string() + " does not match its key");
        {
            std::unique_lock lock(mutex_);
            memory_[key] = entry;
        }
        return entry;
    }

    void put(const std::string& key, json entry) {
        if (entry.value("key", "") != key)
            throw ContractViolation("cache put: entry key field does not match key");
        {
            std::unique_lock lock(mutex_);
            memory_[key] = entry;
        }
        if (dir_.empty()) return;
        const auto path = entry_path(key);
        const auto tmp = path.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::trunc);
            if (!out) throw IoError("cannot write cache entry " + tmp);
            out << entry.dump() << '\n';
        }
        std::filesystem::rename(tmp, path);
    }

    /// All entries currently visible (memory plus disk); for audits and tests.
    std::vector<json> entries() const {
        std::map<std::string, json> merged;
        if (!dir_.empty() && std::filesystem::exists(dir_)) {
            for (const auto& de : std::filesystem::directory_iterator(dir_)) {
                if (de.path().extension() != ".json") continue;
                std::ifstream in(de.path());
                json entry;
                try {
                    in >> entry;
                } catch (const json::exception&) {
                    continue;
                }
                merged[entry.value("key", de.path().stem().string())] = std::move(entry);
            }
        }
        {
            std::shared_lock lock(mutex_);
            for (const auto& [k, v] : memory_) merged[k] = v;
        }
        std::vector<json> out;
        out.reserve(merged.size());
        for (auto& [k, v] : merged) out.push_back(std::move(v));
        return out;
    }

    const std::filesystem::path& directory() const { return dir_; }

  private:
    std::filesystem::path entry_path(const std::string& key) const { return dir_ / (key + ".json"); }

    std::filesystem::path dir_;
    mutable std::shared_mutex mutex_;
    mutable std::map<std::string, json> memory_;
};

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

class Backend {
  public:
    virtual ~Backend() = default;
    virtual CompletionResponse complete(const CompletionRequest& req) = 0;
    virtual std::vector<std::vector<double>> embed(const std::string& model_id,
                                                   const std::vector<std::string>& texts) = 0;
    virtual std::string name() const = 0;
};

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

/// Deterministic text->vector function used by the mock backend.
///
/// Definition (fixed; tests hand-compute against it):
///   1. lowercase the text; tokens are maximal runs of ASCII alphanumerics
///      (bytes >= 0x80 count as token characters so non-ASCII words survive);
///   2. if no token is found, the whole trimmed lowercased text is one token;
///   3. start from the zero vector of dimension `dim` and, for each token,
///      add 1.0 at index fnv1a64(token) % dim;
///   4. L2-normalize.
/// The result is never the zero vector for input that is non-empty after
/// trimming.
inline std::vector<double> hash_embed(std::string_view text, int dim) {
    if (dim <= 0) throw ContractViolation("hash_embed: dimension must be positive");
    std::vector<double> v(static_cast<size_t>(dim), 0.0);
    const std::string lowered = to_lower(text);
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : lowered) {
        if (std::isalnum(c) || c >= 0x80) {
            current.push_back(static_cast<char>(c));
        } else if (!current.empty()) {
            tokens.push_back(current);
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(current);
    if (tokens.empty()) {
        const std::string whole = trim(lowered);
        if (whole.empty()) throw EmptyInput("hash_embed: text empty after trimming");
        tokens.push_back(whole);
    }
    for (const auto& t : tokens) v[fnv1a64(t) % static_cast<uint64_t>(dim)] += 1.0;
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
}

/// One scripted reply. A rule matches when every listed substring occurs in
/// the concatenated message texts, the sample_index (if set) is equal, and
/// the exact cache key (if set) is equal. Rules are checked in file order;
/// the first match wins.
struct MockRule {
    std::optional<std::string> key;   // exact completion cache key (hex)
    std::vector<std::string> matches; // substrings that must all occur in the prompt
    std::optional<int> sample_index;  // exact sample index
    std::string response;
    FinishReason finish_reason = FinishReason::stop;
};

struct MockScript {
    std::vector<MockRule> completions;
    int embedding_dim = 64;

    MockScript& reply(std::string substring, std::string response) {
        MockRule r;
        if (!substring.empty()) r.matches.push_back(std::move(substring));
        r.response = std::move(response);
        completions.push_back(std::move(r));
        return *this;
    }

    MockScript& reply_for_sample(std::string substring, int sample_index, std::string response) {
        MockRule r;
        if (!substring.empty()) r.matches.push_back(std::move(substring));
        r.sample_index = sample_index;
        r.response = std::move(response);
        completions.push_back(std::move(r));
        return *this;
    }

    MockScript& reply_for(std::vector<std::string> substrings, std::optional<int> sample_index,
                          std::string response) {
        MockRule r;
        r.matches = std::move(substrings);
        r.sample_index = sample_index;
        r.response = std::move(response);
        completions.push_back(std::move(r));
        return *this;
    }

    json to_json() const {
        json rules = json::array();
        for (const auto& r : completions) {
            json jr = json::object();
            if (r.key) jr["key"] = *r.key;
            if (r.matches.size() == 1) jr["match"] = r.matches.front();
            else if (!r.matches.empty()) jr["match"] = r.matches;
            if (r.sample_index) jr["sample_index"] = *r.sample_index;
            jr["response"] = r.response;
            if (r.finish_reason != FinishReason::stop) jr["finish_reason"] = to_string(r.finish_reason);
            rules.push_back(std::move(jr));
        }
        return json{{"completions", std::move(rules)}, {"embedding", json{{"type", "hash_bag"}, {"dim", embedding_dim}}}};
    }

    static MockScript from_json(const json& j) {
        MockScript s;
        if (j.contains("embedding")) {
            const auto& emb = j.at("embedding");
            if (emb.value("type", "hash_bag") != "hash_bag")
                throw ConfigError("mock script: unknown embedding type " + emb.value("type", ""));
            s.embedding_dim = emb.value("dim", 64);
        }
        for (const auto& jr : j.value("completions", json::array())) {
            MockRule r;
            if (jr.contains("key")) r.key = jr.at("key").get<std::string>();
            if (jr.contains("match")) {
                const auto& m = jr.at("match");
                if (m.is_string()) r.matches.push_back(m.get<std::string>());
                else r.matches = m.get<std::vector<std::string>>();
            }
            if (jr.contains("sample_index")) r.sample_index = jr.at("sample_index").get<int>();
            r.response = jr.at("response").get<std::string>();
            r.finish_reason = finish_reason_from_string(jr.value("finish_reason", "stop"));
            s.completions.push_back(std::move(r));
        }
        return s;
    }

    static MockScript from_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open mock script " + path.string());
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw ConfigError("mock script " + path.string() + ": " + e.what());
        }
        return from_json(j);
    }
};

/// Scripted offline backend. Never touches the network; an unscripted
/// completion raises ScriptMiss rather than fabricating output. Embeddings
/// come from the deterministic hash embedder above.
class MockBackend : public Backend {
  public:
    explicit MockBackend(MockScript script) : script_(std::move(script)) {}

    CompletionResponse complete(const CompletionRequest& req) override {
        const std::string key = completion_cache_key(req);
        std::string all_text;
        for (const auto& m : req.messages) {
            all_text += m.text;
            all_text += '\n';
        }
        for (const auto& rule : script_.completions) {
            if (rule.key && *rule.key != key) continue;
            if (rule.sample_index && *rule.sample_index != req.sample_index) continue;
            bool all_found = true;
            for (const auto& needle : rule.matches) {
                if (all_text.find(needle) == std::string::npos) {
                    all_found = false;
                    break;
                }
            }
            if (!all_found) continue;
            CompletionResponse resp;
            resp.text = rule.response;
            resp.finish_reason = rule.finish_reason;
            resp.provider_meta["backend"] = "mock";
            return resp;
        }
        throw ScriptMiss("mock backend has no scripted reply for key " + key + " (sample_index " +
                         std::to_string(req.sample_index) + ", prompt starts: '" +
                         normalize_ws(all_text).substr(0, 80) + "')");
    }

    std::vector<std::vector<double>> embed(const std::string&, const std::vector<std::string>& texts) override {
        std::vector<std::vector<double>> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(hash_embed(t, script_.embedding_dim));
        return out;
    }

    std::string name() const override { return "mock"; }

    const MockScript& script() const { return script_; }

  private:
    MockScript script_;
};

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

struct GatewayConfig {
    std::filesystem::path cache_dir; // empty -> in-memory cache only
    int max_parallel = 4;            // bound on in-flight provider calls
};

struct GatewayStats {
    long provider_calls = 0;
    long cache_hits = 0;
};

/// Front door for all model traffic. Consults the content-addressed cache,
/// then the backend; stores every provider response. Safe for concurrent use.
class Gateway {
  public:
    Gateway(std::shared_ptr<Backend> backend, GatewayConfig cfg = {})
        : backend_(std::move(backend)),
          cache_(cfg.cache_dir),
          semaphore_(std::max(1, cfg.max_parallel)) {
        if (!backend_) throw ContractViolation("Gateway: backend must not be null");
    }

    CompletionResponse complete(const CompletionRequest& req) {
        req.validate();
        const json body = canonical_completion_body(req);
        const std::string key = cache_key(Endpoint::chat_completions, body.dump(), req.sample_index);
        if (auto entry = cache_.get(key)) {
            cache_hits_.fetch_add(1);
            return response_from_entry(*entry);
        }
        CompletionResponse resp;
        {
            semaphore_.acquire();
            struct Release {
                std::counting_semaphore<>& s;
                ~Release() { s.release(); }
            } release{semaphore_};
            provider_calls_.fetch_add(1);
            resp = backend_->complete(req);
        }
        if (resp.finish_reason == FinishReason::stop && resp.text.empty())
            throw ProviderError("backend returned empty text with finish_reason=stop");
        json entry = {{"key", key},
                      {"endpoint", to_string(Endpoint::chat_completions)},
                      {"sample_index", req.sample_index},
                      {"request", body},
                      {"response",
                       {{"text", resp.text},
                        {"finish_reason", to_string(resp.finish_reason)},
                        {"provider_meta", resp.provider_meta}}},
                      {"created_at", iso8601_utc_now()}};
        cache_.put(key, std::move(entry));
        return resp;
    }

    /// One vector per input text, uniform dimension, cached per (model, text).
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts, const std::string& model_id) {
        if (texts.empty()) throw EmptyInput("embed: texts must be non-empty");
        for (const auto& t : texts)
            if (trim(t).empty()) throw EmptyInput("embed: every text must be non-empty after trimming");

        std::vector<std::vector<double>> out(texts.size());
        std::vector<size_t> misses;
        std::vector<std::string> keys(texts.size());
        for (size_t i = 0; i < texts.size(); ++i) {
            keys[i] = embedding_cache_key(model_id, texts[i]);
            if (auto entry = cache_.get(keys[i])) {
                cache_hits_.fetch_add(1);
                out[i] = (*entry).at("response").at("vector").get<std::vector<double>>();
            } else {
                misses.push_back(i);
            }
        }
        if (!misses.empty()) {
            std::vector<std::string> miss_texts;
            miss_texts.reserve(misses.size());
            for (size_t i : misses) miss_texts.push_back(texts[i]);
            std::vector<std::vector<double>> vecs;
            {
                semaphore_.acquire();
                struct Release {
                    std::counting_semaphore<>& s;
                    ~Release() { s.release(); }
                } release{semaphore_};
                provider_calls_.fetch_add(1);
                vecs = backend_->embed(model_id, miss_texts);
            }
            if (vecs.size() != miss_texts.size())
                throw ProviderError("embedding backend returned " + std::to_string(vecs.size()) +
                                    " vectors for " + std::to_string(miss_texts.size()) + " inputs");
            for (size_t j = 0; j < misses.size(); ++j) {
                validate_embedding(vecs[j], vecs[0].size());
                json entry = {{"key", keys[misses[j]]},
                              {"endpoint", to_string(Endpoint::embeddings)},
                              {"sample_index", 0},
                              {"request", canonical_embedding_body(model_id, texts[misses[j]])},
                              {"response", {{"vector", vecs[j]}}},
                              {"created_at", iso8601_utc_now()}};
                cache_.put(keys[misses[j]], std::move(entry));
                out[misses[j]] = std::move(vecs[j]);
            }
        }
        size_t dim = out.front().size();
        for (const auto& v : out)
            if (v.size() != dim) throw ProviderError("embedding dimensions differ across cache generations");
        return out;
    }

    GatewayStats stats() const { return {provider_calls_.load(), cache_hits_.load()}; }

    const ResponseCache& cache() const { return cache_; }
    Backend& backend() { return *backend_; }

  private:
    static void validate_embedding(const std::vector<double>& v, size_t expected_dim) {
        if (v.empty() || v.size() != expected_dim)
            throw ProviderError("embedding backend returned vectors of unequal dimension");
        bool all_zero = true;
        for (double x : v)
            if (x != 0.0) {
                all_zero = false;
                break;
            }
        if (all_zero) throw ProviderError("embedding backend returned an all-zero vector");
    }

    static CompletionResponse response_from_entry(const json& entry) {
        const json& r = entry.at("response");
        CompletionResponse resp;
        resp.text = r.at("text").get<std::string>();
        resp.finish_reason = finish_reason_from_string(r.value("finish_reason", "stop"));
        if (r.contains("provider_meta"))
            resp.provider_meta = r.at("provider_meta").get<std::map<std::string, std::string>>();
        return resp;
    }

    std::shared_ptr<Backend> backend_;
    ResponseCache cache_;
    std::counting_semaphore<> semaphore_;
    std::atomic<long> provider_calls_{0};
    std::atomic<long> cache_hits_{0};
};

} // namespace gapcheck
