// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 fuserec contributors
#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fuserec/common.hpp"
#include "fuserec/corpus.hpp"
#include "fuserec/embedding.hpp"
#include "fuserec/fusion.hpp"
#include "fuserec/llm_backend.hpp"
#include "fuserec/profiles.hpp"
#include "fuserec/ragloop.hpp"

namespace fuserec::harness {

enum class PipelineMode { RetrievalOnly, ManualRerank, LlmRerank };
enum class BackendKind { Mock, Replay, Http, Failing };
enum class ColdStartPolicy { Error, Random };
enum class ProfileFallback { Error, Manual };

inline const char* pipeline_name(PipelineMode m) {
    switch (m) {
        case PipelineMode::RetrievalOnly: return "retrieval_only";
        case PipelineMode::ManualRerank: return "manual_rerank";
        case PipelineMode::LlmRerank: return "llm_rerank";
    }
    return "?";
}

struct EmbeddingSource {
    emb::Modality modality = emb::Modality::Textual;
    std::string path;
    std::string variant;  // opaque encoder label, e.g. "st" or "resnet50-avg"
};

struct HttpSettings {
    std::string endpoint;
    std::string model;
    std::string api_key_env;
    int timeout_s = 30;
};

/// Everything a run needs; defaults follow the benchmark settings
/// (N=50, k=10, temperature=0.7). The seed must be given explicitly.
struct RunConfig {
    // [data]
    std::string ratings_path;
    std::string movies_path;
    std::string tags_path;       // optional
    std::string augmented_path;  // optional
    corpus::RatingScale scale;
    double train_frac = 0.7;

    // [filter]
    bool filter_enabled = false;
    std::int64_t filter_min = 20;
    std::int64_t filter_max = 100;
    bool filter_keep = true;  // keep the band (default reading) vs drop it

    // [embeddings]
    std::vector<EmbeddingSource> embeddings;

    // [fusion]
    fusion::FusionKind fusion_kind = fusion::FusionKind::concat();
    bool pca_scale = false;  // per-feature standardization before PCA

    // [profile]
    profiles::ProfileStrategy profile = profiles::ProfileStrategy::Temporal;
    double alpha = 1.0;
    double rating_threshold = 4.0;
    profiles::TimeMode time_mode = profiles::TimeMode::Standardized;
    ColdStartPolicy cold_start = ColdStartPolicy::Error;

    // [pipeline]
    PipelineMode pipeline = PipelineMode::RetrievalOnly;
    int retrieval_n = 50;
    int top_k = 10;
    bool explainable = false;

    // [prompt]
    rag::ProfileCaps caps;

    // [backend]
    BackendKind backend = BackendKind::Mock;
    HttpSettings http;
    std::string replay_path;
    double temperature = 0.7;
    int max_tokens = 200;
    rag::RetryPolicy retry;
    ProfileFallback profile_fallback = ProfileFallback::Error;

    // [eval]
    std::size_t eval_users = 120;
    double relevance_threshold = 4.0;
    std::int64_t tau_tail = 2;

    // [run]
    std::uint64_t seed = 0;
    std::string output_dir;

    std::string fusion_label() const {
        switch (fusion_kind.type) {
            case fusion::FusionType::Concat: return "concat";
            case fusion::FusionType::Avg: return "avg";
            case fusion::FusionType::Pca: return "pca_" + std::to_string(fusion_kind.target_dim);
            case fusion::FusionType::Cca: return "cca_" + std::to_string(2 * fusion_kind.per_view_dim);
        }
        return "?";
    }
};

namespace detail {

struct RawConfig {
    // section.key -> (value token, was quoted)
    std::map<std::string, std::pair<std::string, bool>> values;
    std::string origin;
};

inline std::string strip(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline RawConfig parse_raw(const std::string& text, const std::string& origin) {
    RawConfig raw;
    raw.origin = origin;
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = origin + ":" + std::to_string(lineno);
        // strip comments (respecting quotes)
        bool in_quotes = false;
        std::string body;
        for (char c : line) {
            if (c == '"') in_quotes = !in_quotes;
            if (c == '#' && !in_quotes) break;
            body += c;
        }
        body = strip(body);
        if (body.empty()) continue;
        if (body.front() == '[') {
            if (body.back() != ']') throw ConfigError(where + ": malformed section header");
            section = strip(body.substr(1, body.size() - 2));
            if (section.empty()) throw ConfigError(where + ": empty section name");
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        const std::string key = strip(body.substr(0, eq));
        std::string value = strip(body.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": empty key");
        if (section.empty()) throw ConfigError(where + ": key outside any [section]");
        bool quoted = false;
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            quoted = true;
            value = value.substr(1, value.size() - 2);
        }
        const std::string full = section + "." + key;
        if (raw.values.count(full)) throw ConfigError(where + ": duplicate key " + full);
        raw.values[full] = {value, quoted};
    }
    return raw;
}

/// Typed access with consumed-key tracking; leftovers are reported as unknown.
class Reader {
public:
    explicit Reader(RawConfig raw) : raw_(std::move(raw)) {}

    bool has(const std::string& key) const { return raw_.values.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback = "") {
        auto it = raw_.values.find(key);
        if (it == raw_.values.end()) return fallback;
        consumed_.insert(key);
        return it->second.first;
    }

    bool get_bool(const std::string& key, bool fallback) {
        auto it = raw_.values.find(key);
        if (it == raw_.values.end()) return fallback;
        consumed_.insert(key);
        const auto& v = it->second.first;
        if (v == "true") return true;
        if (v == "false") return false;
        throw ConfigError(raw_.origin + ": " + key + " expects true/false, got '" + v + "'");
    }

    std::int64_t get_int(const std::string& key, std::int64_t fallback) {
        auto it = raw_.values.find(key);
        if (it == raw_.values.end()) return fallback;
        consumed_.insert(key);
        const auto& v = it->second.first;
        char* end = nullptr;
        const long long parsed = std::strtoll(v.c_str(), &end, 10);
        if (v.empty() || end != v.c_str() + v.size())
            throw ConfigError(raw_.origin + ": " + key + " expects an integer, got '" + v + "'");
        return parsed;
    }

    double get_double(const std::string& key, double fallback) {
        auto it = raw_.values.find(key);
        if (it == raw_.values.end()) return fallback;
        consumed_.insert(key);
        const auto& v = it->second.first;
        char* end = nullptr;
        const double parsed = std::strtod(v.c_str(), &end);
        if (v.empty() || end != v.c_str() + v.size())
            throw ConfigError(raw_.origin + ": " + key + " expects a number, got '" + v + "'");
        return parsed;
    }

    void require(const std::string& key) const {
        if (!has(key)) throw ConfigError(raw_.origin + ": missing required key " + key);
    }

    void fail_on_unknown() const {
        std::vector<std::string> unknown;
        for (const auto& [key, _] : raw_.values)
            if (!consumed_.count(key)) unknown.push_back(key);
        if (!unknown.empty())
            throw ConfigError(raw_.origin + ": unknown config key(s): " + join(unknown, ", "));
    }

private:
    RawConfig raw_;
    std::set<std::string> consumed_;
};

inline std::string resolve_path(const std::string& base_dir, const std::string& p) {
    if (p.empty()) return p;
    std::filesystem::path fp(p);
    if (fp.is_absolute() || base_dir.empty()) return p;
    return (std::filesystem::path(base_dir) / fp).lexically_normal().string();
}

}  // namespace detail

inline RunConfig parse_config_text(const std::string& text, const std::string& origin,
                                   const std::string& base_dir) {
    detail::Reader r(detail::parse_raw(text, origin));
    RunConfig cfg;

    r.require("data.ratings");
    r.require("data.movies");
    cfg.ratings_path = detail::resolve_path(base_dir, r.get_string("data.ratings"));
    cfg.movies_path = detail::resolve_path(base_dir, r.get_string("data.movies"));
    cfg.tags_path = detail::resolve_path(base_dir, r.get_string("data.tags"));
    cfg.augmented_path = detail::resolve_path(base_dir, r.get_string("data.augmented"));
    cfg.scale.min = r.get_double("data.rating_min", cfg.scale.min);
    cfg.scale.max = r.get_double("data.rating_max", cfg.scale.max);
    cfg.train_frac = r.get_double("data.train_frac", cfg.train_frac);

    cfg.filter_enabled = r.get_bool("filter.enabled", cfg.filter_enabled);
    cfg.filter_min = r.get_int("filter.min", cfg.filter_min);
    cfg.filter_max = r.get_int("filter.max", cfg.filter_max);
    const std::string mode = r.get_string("filter.mode", "keep");
    if (mode != "keep" && mode != "drop")
        throw ConfigError(origin + ": filter.mode must be keep or drop, got '" + mode + "'");
    cfg.filter_keep = mode == "keep";

    const std::pair<const char*, emb::Modality> modalities[] = {
        {"textual", emb::Modality::Textual},
        {"visual", emb::Modality::Visual},
        {"audio", emb::Modality::Audio},
    };
    for (const auto& [name, modality] : modalities) {
        const std::string path = r.get_string(std::string("embeddings.") + name);
        const std::string variant = r.get_string(std::string("embeddings.") + name + "_variant");
        if (!path.empty())
            cfg.embeddings.push_back({modality, detail::resolve_path(base_dir, path), variant});
        else if (!variant.empty())
            throw ConfigError(origin + ": embeddings." + std::string(name) + "_variant given without a path");
    }
    if (cfg.embeddings.empty()) throw ConfigError(origin + ": [embeddings] must name at least one file");

    const std::string fkind = r.get_string("fusion.kind", "concat");
    const int pca_dim = static_cast<int>(r.get_int("fusion.pca_dim", 128));
    const int cca_per_view = static_cast<int>(r.get_int("fusion.cca_per_view_dim", 32));
    const double cca_ridge = r.get_double("fusion.cca_ridge", 1e-3);
    cfg.pca_scale = r.get_bool("fusion.pca_scale", false);
    if (fkind == "concat") cfg.fusion_kind = fusion::FusionKind::concat();
    else if (fkind == "avg") cfg.fusion_kind = fusion::FusionKind::avg();
    else if (fkind == "pca") cfg.fusion_kind = fusion::FusionKind::pca(pca_dim);
    else if (fkind == "cca") cfg.fusion_kind = fusion::FusionKind::cca(cca_per_view, cca_ridge);
    else throw ConfigError(origin + ": fusion.kind must be concat|avg|pca|cca, got '" + fkind + "'");
    if (cfg.fusion_kind.type == fusion::FusionType::Cca && cfg.embeddings.size() != 2)
        throw ConfigError(origin + ": cca fusion needs exactly 2 embedding files, got " +
                          std::to_string(cfg.embeddings.size()));

    const std::string strategy = r.get_string("profile.strategy", "temporal");
    if (strategy == "random") cfg.profile = profiles::ProfileStrategy::Random;
    else if (strategy == "average") cfg.profile = profiles::ProfileStrategy::Average;
    else if (strategy == "temporal") cfg.profile = profiles::ProfileStrategy::Temporal;
    else throw ConfigError(origin + ": profile.strategy must be random|average|temporal");
    cfg.alpha = r.get_double("profile.alpha", cfg.alpha);
    cfg.rating_threshold = r.get_double("profile.rating_threshold", cfg.rating_threshold);
    const std::string tmode = r.get_string("profile.time_mode", "standardized");
    if (tmode == "standardized") cfg.time_mode = profiles::TimeMode::Standardized;
    else if (tmode == "raw") cfg.time_mode = profiles::TimeMode::Raw;
    else throw ConfigError(origin + ": profile.time_mode must be standardized|raw");
    const std::string cold = r.get_string("profile.cold_start", "error");
    if (cold == "error") cfg.cold_start = ColdStartPolicy::Error;
    else if (cold == "random") cfg.cold_start = ColdStartPolicy::Random;
    else throw ConfigError(origin + ": profile.cold_start must be error|random");

    const std::string pmode = r.get_string("pipeline.mode", "retrieval_only");
    if (pmode == "retrieval_only") cfg.pipeline = PipelineMode::RetrievalOnly;
    else if (pmode == "manual_rerank") cfg.pipeline = PipelineMode::ManualRerank;
    else if (pmode == "llm_rerank") cfg.pipeline = PipelineMode::LlmRerank;
    else throw ConfigError(origin + ": pipeline.mode must be retrieval_only|manual_rerank|llm_rerank");
    cfg.retrieval_n = static_cast<int>(r.get_int("pipeline.n", 50));
    cfg.top_k = static_cast<int>(r.get_int("pipeline.k", 10));
    cfg.explainable = r.get_bool("pipeline.explainable", false);
    if (cfg.retrieval_n < 1) throw ConfigError(origin + ": pipeline.n must be >= 1");
    if (cfg.top_k < 1) throw ConfigError(origin + ": pipeline.k must be >= 1");
    if (cfg.top_k > cfg.retrieval_n)
        throw ConfigError(origin + ": pipeline.k (" + std::to_string(cfg.top_k) +
                          ") must not exceed pipeline.n (" + std::to_string(cfg.retrieval_n) + ")");

    cfg.caps.max_genres = static_cast<std::size_t>(r.get_int("prompt.max_genres", 5));
    cfg.caps.max_tags = static_cast<std::size_t>(r.get_int("prompt.max_tags", 10));
    cfg.caps.max_top_items = static_cast<std::size_t>(r.get_int("prompt.max_top_items", 20));

    const std::string bkind = r.get_string("backend.kind", "mock");
    if (bkind == "mock") cfg.backend = BackendKind::Mock;
    else if (bkind == "replay") cfg.backend = BackendKind::Replay;
    else if (bkind == "http") cfg.backend = BackendKind::Http;
    else if (bkind == "failing") cfg.backend = BackendKind::Failing;
    else throw ConfigError(origin + ": backend.kind must be mock|replay|http|failing");
    cfg.http.endpoint = r.get_string("backend.endpoint");
    cfg.http.model = r.get_string("backend.model");
    cfg.http.api_key_env = r.get_string("backend.api_key_env");
    cfg.http.timeout_s = static_cast<int>(r.get_int("backend.timeout_s", 30));
    cfg.replay_path = detail::resolve_path(base_dir, r.get_string("backend.replay_path"));
    cfg.temperature = r.get_double("backend.temperature", 0.7);
    cfg.max_tokens = static_cast<int>(r.get_int("backend.max_tokens", 200));
    cfg.retry.attempts = static_cast<int>(r.get_int("backend.retries", 3));
    cfg.retry.initial_backoff_ms = static_cast<int>(r.get_int("backend.backoff_ms", 1000));
    const std::string pfall = r.get_string("backend.profile_fallback", "error");
    if (pfall == "error") cfg.profile_fallback = ProfileFallback::Error;
    else if (pfall == "manual") cfg.profile_fallback = ProfileFallback::Manual;
    else throw ConfigError(origin + ": backend.profile_fallback must be error|manual");
    if (cfg.backend == BackendKind::Replay && cfg.replay_path.empty())
        throw ConfigError(origin + ": backend.kind = replay requires backend.replay_path");
    if (cfg.backend == BackendKind::Http && cfg.http.endpoint.empty())
        throw ConfigError(origin + ": backend.kind = http requires backend.endpoint");

    cfg.eval_users = static_cast<std::size_t>(r.get_int("eval.users", 120));
    cfg.relevance_threshold = r.get_double("eval.relevance_threshold", 4.0);
    cfg.tau_tail = r.get_int("eval.tau_tail", 2);

    r.require("run.seed");
    cfg.seed = static_cast<std::uint64_t>(r.get_int("run.seed", 0));
    r.require("run.output");
    cfg.output_dir = detail::resolve_path(base_dir, r.get_string("run.output"));

    if (!(cfg.train_frac > 0.0 && cfg.train_frac < 1.0))
        throw ConfigError(origin + ": data.train_frac must lie strictly between 0 and 1");
    if (cfg.eval_users < 1) throw ConfigError(origin + ": eval.users must be >= 1");

    r.fail_on_unknown();
    return cfg;
}

inline RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path, std::filesystem::path(path).parent_path().string());
}

/// Check that every referenced input file exists.
inline void validate_files(const RunConfig& cfg) {
    auto check = [](const std::string& p, const std::string& what) {
        if (!p.empty() && !std::filesystem::exists(p))
            throw ConfigError(what + " file not found: " + p);
    };
    check(cfg.ratings_path, "ratings");
    check(cfg.movies_path, "movies");
    check(cfg.tags_path, "tags");
    check(cfg.augmented_path, "augmented descriptions");
    for (const auto& e : cfg.embeddings) check(e.path, "embeddings");
    if (cfg.backend == BackendKind::Replay) check(cfg.replay_path, "replay store");
}

/// Canonical text rendering: the manifest's config hash is taken over this.
inline std::string render_canonical(const RunConfig& cfg) {
    std::string out;
    auto kv = [&out](const std::string& k, const std::string& v) { out += k + "=" + v + "\n"; };
    kv("data.ratings", cfg.ratings_path);
    kv("data.movies", cfg.movies_path);
    kv("data.tags", cfg.tags_path);
    kv("data.augmented", cfg.augmented_path);
    kv("data.rating_min", format_sig6(cfg.scale.min));
    kv("data.rating_max", format_sig6(cfg.scale.max));
    kv("data.train_frac", format_sig6(cfg.train_frac));
    kv("filter.enabled", cfg.filter_enabled ? "true" : "false");
    kv("filter.min", std::to_string(cfg.filter_min));
    kv("filter.max", std::to_string(cfg.filter_max));
    kv("filter.mode", cfg.filter_keep ? "keep" : "drop");
    for (const auto& e : cfg.embeddings)
        kv(std::string("embeddings.") + emb::modality_name(e.modality), e.path + "|" + e.variant);
    kv("fusion.kind", cfg.fusion_label());
    kv("fusion.pca_scale", cfg.pca_scale ? "true" : "false");
    kv("fusion.cca_ridge", format_sig6(cfg.fusion_kind.ridge));
    kv("profile.strategy", profiles::profile_name(cfg.profile));
    kv("profile.alpha", format_sig6(cfg.alpha));
    kv("profile.rating_threshold", format_sig6(cfg.rating_threshold));
    kv("profile.time_mode", cfg.time_mode == profiles::TimeMode::Standardized ? "standardized" : "raw");
    kv("profile.cold_start", cfg.cold_start == ColdStartPolicy::Error ? "error" : "random");
    kv("pipeline.mode", pipeline_name(cfg.pipeline));
    kv("pipeline.k", std::to_string(cfg.top_k));
    kv("pipeline.explainable", cfg.explainable ? "true" : "false");
    kv("prompt.max_genres", std::to_string(cfg.caps.max_genres));
    kv("prompt.max_tags", std::to_string(cfg.caps.max_tags));
    kv("prompt.max_top_items", std::to_string(cfg.caps.max_top_items));
    kv("backend.kind", std::to_string(static_cast<int>(cfg.backend)));
    kv("backend.endpoint", cfg.http.endpoint);
    kv("backend.model", cfg.http.model);
    kv("backend.replay_path", cfg.replay_path);
    kv("backend.temperature", format_sig6(cfg.temperature));
    kv("backend.max_tokens", std::to_string(cfg.max_tokens));
    kv("eval.users", std::to_string(cfg.eval_users));
    kv("eval.relevance_threshold", format_sig6(cfg.relevance_threshold));
    kv("eval.tau_tail", std::to_string(cfg.tau_tail));
    kv("run.seed", std::to_string(cfg.seed));
    // pipeline.n is deliberately absent: depth sweeps share upstream checkpoints
    return out;
}

/// Hash over the canonical rendering; mismatches invalidate checkpoints.
inline std::string config_hash(const RunConfig& cfg) {
    return rag::hex64(rag::fnv1a64("fuserec-config-v1\n" + render_canonical(cfg)));
}

}  // namespace fuserec::harness
