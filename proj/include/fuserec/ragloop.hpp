// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 fuserec contributors
#pragma once

#include <algorithm>
#include <chrono>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "fuserec/common.hpp"
#include "fuserec/corpus.hpp"
#include "fuserec/llm_backend.hpp"
#include "fuserec/retrieval.hpp"

namespace fuserec::rag {

enum class Provenance { Manual, LlmGenerated };
enum class RerankSource { Llm, FallbackKnn };

/// Length caps keep re-rank prompts bounded.
struct ProfileCaps {
    std::size_t max_genres = 5;
    std::size_t max_tags = 10;
    std::size_t max_top_items = 20;
};

/// Retries apply to transport errors only; parse failures are content and are
/// handled by the kNN fallback instead.
struct RetryPolicy {
    int attempts = 3;
    int initial_backoff_ms = 1000;
    double multiplier = 2.0;
};

struct UserProfileDoc {
    UserId user_id = 0;
    std::vector<std::string> genres;                    // ranked, capped
    std::vector<std::string> tags;                      // ranked, capped
    std::vector<std::pair<std::string, double>> top_items;  // (title, rating)
    std::string taste_synopsis;
    Provenance provenance = Provenance::Manual;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["user_id"] = user_id;
        j["genres"] = genres;
        j["tags"] = tags;
        auto items = nlohmann::ordered_json::array();
        for (const auto& [title, rating] : top_items) items.push_back({title, rating});
        j["top_items"] = items;
        j["taste_synopsis"] = taste_synopsis;
        j["provenance"] = provenance == Provenance::Manual ? "manual" : "llm";
        return j;
    }
};

struct RerankResult {
    UserId user_id = 0;
    std::vector<ItemId> ranked_items;  // a k-permutation of the candidate ids
    std::map<ItemId, std::string> explanations;
    RerankSource source = RerankSource::FallbackKnn;
    std::string raw_response;
    std::vector<std::string> defects;  // logged parse/transport defect classes
};

namespace detail {

inline std::string call_with_retries(LlmBackend& backend, const std::string& prompt, double temperature,
                                     int max_tokens, std::optional<std::uint64_t> seed,
                                     const RetryPolicy& retry) {
    double backoff = retry.initial_backoff_ms;
    for (int attempt = 0;; ++attempt) {
        try {
            return backend.complete(prompt, temperature, max_tokens, seed);
        } catch (const TransportError&) {
            if (attempt + 1 >= retry.attempts) throw;
            if (backoff > 0)
                std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(backoff)));
            backoff *= retry.multiplier;
        }
    }
}

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

/// First balanced [...] region that parses as a JSON array. Bracket matching
/// is string-aware so ids inside quoted text do not derail the scan.
inline std::optional<nlohmann::json> first_json_array(const std::string& text) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '[') continue;
        int depth = 0;
        bool in_str = false, esc = false;
        for (std::size_t j = i; j < text.size(); ++j) {
            const char c = text[j];
            if (in_str) {
                if (esc) esc = false;
                else if (c == '\\') esc = true;
                else if (c == '"') in_str = false;
            } else if (c == '"') {
                in_str = true;
            } else if (c == '[') {
                ++depth;
            } else if (c == ']') {
                if (--depth == 0) {
                    auto parsed = nlohmann::json::parse(text.substr(i, j - i + 1), nullptr, false);
                    if (!parsed.is_discarded() && parsed.is_array()) return parsed;
                    break;  // malformed region; resume scanning at the next '['
                }
            }
        }
    }
    return std::nullopt;
}

inline bool as_item_id(const nlohmann::json& elem, ItemId& out, std::string* why,
                       std::vector<std::string>& defects) {
    if (elem.is_number_integer() || elem.is_number_unsigned()) {
        out = elem.get<ItemId>();
        return true;
    }
    if (elem.is_object() && elem.contains("id") &&
        (elem["id"].is_number_integer() || elem["id"].is_number_unsigned())) {
        out = elem["id"].get<ItemId>();
        if (why && elem.contains("why") && elem["why"].is_string()) *why = elem["why"].get<std::string>();
        return true;
    }
    if (elem.is_string()) {
        // LLMs occasionally quote the ids; accept fully-numeric strings.
        const std::string s = trim(elem.get<std::string>());
        char* end = nullptr;
        const long long v = std::strtoll(s.c_str(), &end, 10);
        if (!s.empty() && end == s.c_str() + s.size()) {
            out = v;
            defects.push_back("string_id_coerced");
            return true;
        }
    }
    defects.push_back("non_integer_entry_dropped");
    return false;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Metadata augmentation
// ---------------------------------------------------------------------------

inline std::string augmentation_prompt(const corpus::ItemMeta& meta) {
    if (meta.title.empty()) throw ConfigError("augment_description: item title is empty");
    if (meta.genres.empty())
        return "Given the title " + meta.title +
               ", write a short paragraph summarizing the film's plot, themes, and style.";
    return "Given the title " + meta.title + " and genres " + join(meta.genres, ", ") +
           ", write a short paragraph summarizing the film's plot, themes, and style.";
}

/// Ask the backend for an enriched description. Transport errors and empty
/// completions are retried; exhaustion raises AugmentationFailed.
inline std::string augment_description(const corpus::ItemMeta& meta, LlmBackend& backend,
                                       double temperature = 0.7, int max_tokens = 200,
                                       std::optional<std::uint64_t> seed = std::nullopt,
                                       const RetryPolicy& retry = {}) {
    const std::string prompt = augmentation_prompt(meta);
    double backoff = retry.initial_backoff_ms;
    for (int attempt = 0; attempt < retry.attempts; ++attempt) {
        try {
            const std::string text = detail::trim(backend.complete(prompt, temperature, max_tokens, seed));
            if (!text.empty()) return text;
        } catch (const TransportError&) {
        }
        if (attempt + 1 < retry.attempts && backoff > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(backoff)));
        backoff *= retry.multiplier;
    }
    throw AugmentationFailed("no usable completion for item " + std::to_string(meta.item_id) + " after " +
                             std::to_string(retry.attempts) + " attempts");
}

// ---------------------------------------------------------------------------
// User profile documents
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> ranked_by_count(const std::map<std::string, std::int64_t>& counts,
                                                std::size_t cap) {
    std::vector<std::pair<std::string, std::int64_t>> v(counts.begin(), counts.end());
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        return std::tie(b.second, a.first) < std::tie(a.second, b.first);  // count desc, name asc
    });
    std::vector<std::string> out;
    for (const auto& [name, _] : v) {
        if (out.size() == cap) break;
        out.push_back(name);
    }
    return out;
}

inline std::string take(const std::vector<std::string>& v, std::size_t n, const std::string& sep) {
    std::vector<std::string> head(v.begin(), v.begin() + std::min(n, v.size()));
    return join(head, sep);
}

}  // namespace detail

/// Rule-based profile: genres/tags ranked by positive-interaction frequency,
/// top items by rating (ties by recency), synopsis from a fixed template.
inline UserProfileDoc build_manual_profile(const std::vector<corpus::Interaction>& train,
                                           const std::map<ItemId, corpus::ItemMeta>& meta, UserId u,
                                           const ProfileCaps& caps = {}, double rating_threshold = 4.0) {
    std::vector<corpus::Interaction> rows;
    for (const auto& it : train)
        if (it.user_id == u) rows.push_back(it);
    if (rows.empty()) throw DataError("build_manual_profile: unknown user " + std::to_string(u));

    std::map<std::string, std::int64_t> genre_counts, tag_counts;
    for (const auto& it : rows) {
        if (it.rating < rating_threshold) continue;
        auto m = meta.find(it.item_id);
        if (m == meta.end()) continue;
        for (const auto& g : m->second.genres) ++genre_counts[g];
        for (const auto& t : m->second.tags) ++tag_counts[t];
    }

    std::sort(rows.begin(), rows.end(), [](const corpus::Interaction& a, const corpus::Interaction& b) {
        // rating desc, then newer first, then item id for a total order
        return std::tie(b.rating, b.timestamp, a.item_id) < std::tie(a.rating, a.timestamp, b.item_id);
    });

    UserProfileDoc doc;
    doc.user_id = u;
    doc.provenance = Provenance::Manual;
    doc.genres = detail::ranked_by_count(genre_counts, caps.max_genres);
    doc.tags = detail::ranked_by_count(tag_counts, caps.max_tags);
    for (const auto& it : rows) {
        if (doc.top_items.size() == caps.max_top_items) break;
        auto m = meta.find(it.item_id);
        doc.top_items.emplace_back(m == meta.end() ? "item " + std::to_string(it.item_id) : m->second.title,
                                   it.rating);
    }

    std::string synopsis = doc.genres.empty() ? "Watches a broad mix of genres."
                                              : "Prefers " + detail::take(doc.genres, 3, ", ") + " titles.";
    if (!doc.tags.empty()) synopsis += " Often tagged: " + detail::take(doc.tags, 3, ", ") + ".";
    if (!doc.top_items.empty()) {
        std::vector<std::string> titles;
        for (const auto& [title, _] : doc.top_items) {
            if (titles.size() == 3) break;
            titles.push_back(title);
        }
        synopsis += " Standout picks: " + join(titles, "; ") + ".";
    }
    doc.taste_synopsis = synopsis;
    return doc;
}

inline std::string profile_synopsis_prompt(const std::vector<std::pair<std::string, double>>& top_items) {
    std::string prompt = "A movie viewer rated these films (title: rating):\n";
    for (const auto& [title, rating] : top_items)
        prompt += title + ": " + format_sig6(rating) + "\n";
    prompt += "Write one short sentence describing this viewer's movie tastes.";
    return prompt;
}

/// Same structured fields as the manual profile, but the synopsis comes from
/// the backend. Transport exhaustion propagates; callers may substitute the
/// manual profile when configured to.
inline UserProfileDoc build_llm_profile(const std::vector<corpus::Interaction>& train,
                                        const std::map<ItemId, corpus::ItemMeta>& meta, UserId u,
                                        LlmBackend& backend, const ProfileCaps& caps = {},
                                        double rating_threshold = 4.0, double temperature = 0.7,
                                        int max_tokens = 200,
                                        std::optional<std::uint64_t> seed = std::nullopt,
                                        const RetryPolicy& retry = {}) {
    UserProfileDoc doc = build_manual_profile(train, meta, u, caps, rating_threshold);
    doc.provenance = Provenance::LlmGenerated;
    doc.taste_synopsis = detail::trim(detail::call_with_retries(
        backend, profile_synopsis_prompt(doc.top_items), temperature, max_tokens, seed, retry));
    return doc;
}

// ---------------------------------------------------------------------------
// Re-rank prompt assembly and response parsing
// ---------------------------------------------------------------------------

inline std::string compose_rerank_prompt(const UserProfileDoc& profile,
                                         const retrieval::CandidateList& candidates,
                                         const std::map<ItemId, corpus::ItemMeta>& meta, int k,
                                         bool explain) {
    if (candidates.entries.empty()) throw ConfigError("compose_rerank_prompt: empty candidate list");
    if (k < 1 || static_cast<std::size_t>(k) > candidates.entries.size())
        throw ConfigError("compose_rerank_prompt: k=" + std::to_string(k) + " exceeds candidate count " +
                          std::to_string(candidates.entries.size()));
    std::string prompt = "USER PROFILE:\n" + profile.to_json().dump() + "\nCANDIDATES:\n";
    for (const auto& [id, _] : candidates.entries) {
        prompt += std::to_string(id);
        auto m = meta.find(id);
        if (m != meta.end()) {
            prompt += " | " + m->second.title + " | " + join(m->second.genres, "|");
            const auto& desc =
                m->second.augmented_description ? m->second.augmented_description : m->second.description;
            if (desc) prompt += " | " + *desc;
        } else {
            prompt += " | item " + std::to_string(id) + " | ";
        }
        prompt += "\n";
    }
    prompt += "TASK: Given this profile and the following candidate movies, return your top-" +
              std::to_string(k) + " recommendations as a JSON array of item IDs.";
    if (explain)
        prompt += " Respond with a JSON array of objects, one per item, shaped "
                  "[{\"id\": <int>, \"why\": <string>}, ...].";
    return prompt;
}

/// Total function: every response, including garbage, maps to a k-permutation
/// of the candidate ids (padding from kNN order, or full kNN fallback).
inline RerankResult parse_llm_ranking(const std::string& response,
                                      const retrieval::CandidateList& candidates, int k) {
    RerankResult result;
    result.user_id = candidates.user_id;
    result.raw_response = response;

    std::vector<ItemId> knn_order;
    std::set<ItemId> candidate_ids;
    for (const auto& [id, _] : candidates.entries) {
        knn_order.push_back(id);
        candidate_ids.insert(id);
    }
    const auto k_eff = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0)), knn_order.size());

    const auto array = detail::first_json_array(response);
    std::set<ItemId> used;
    if (array) {
        result.source = RerankSource::Llm;
        for (const auto& elem : *array) {
            if (result.ranked_items.size() == k_eff) {
                result.defects.push_back("overlong_list_truncated");
                break;
            }
            ItemId id = 0;
            std::string why;
            if (!detail::as_item_id(elem, id, &why, result.defects)) continue;
            if (!candidate_ids.count(id)) {
                result.defects.push_back("unknown_id_dropped");
                continue;
            }
            if (!used.insert(id).second) {
                result.defects.push_back("duplicate_dropped");
                continue;
            }
            result.ranked_items.push_back(id);
            if (!why.empty()) result.explanations[id] = why;
        }
        if (result.ranked_items.size() < k_eff) result.defects.push_back("padded_from_knn");
    } else {
        result.source = RerankSource::FallbackKnn;
        result.defects.push_back("no_json_array");
    }
    for (ItemId id : knn_order) {
        if (result.ranked_items.size() == k_eff) break;
        if (used.insert(id).second) result.ranked_items.push_back(id);
    }
    return result;
}

/// One backend call (with transport retries) followed by robust parsing.
inline RerankResult rerank(const UserProfileDoc& profile, const retrieval::CandidateList& candidates,
                           const std::map<ItemId, corpus::ItemMeta>& meta, LlmBackend& backend, int k,
                           bool explain, double temperature = 0.7, int max_tokens = 200,
                           std::optional<std::uint64_t> seed = std::nullopt, const RetryPolicy& retry = {}) {
    const std::string prompt = compose_rerank_prompt(profile, candidates, meta, k, explain);
    std::string response;
    try {
        response = detail::call_with_retries(backend, prompt, temperature, max_tokens, seed, retry);
    } catch (const TransportError& e) {
        RerankResult result = parse_llm_ranking("", candidates, k);
        result.defects = {std::string("transport_exhausted: ") + e.what()};
        result.source = RerankSource::FallbackKnn;
        return result;
    }
    return parse_llm_ranking(response, candidates, k);
}

}  // namespace fuserec::rag
