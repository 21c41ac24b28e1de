// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 fuserec contributors
#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fuserec/binio.hpp"
#include "fuserec/common.hpp"

namespace fuserec::metrics {

struct GroundTruth {
    UserId user_id = 0;
    std::set<ItemId> relevant;  // test items at/above the relevance threshold
};

struct UserMetrics {
    double recall = 0;
    double ndcg = 0;
    double map = 0;
    double mrr = 0;
};

struct AggregateMetrics {
    double recall = 0;
    double ndcg = 0;
    double map = 0;
    double mrr = 0;
    double coverage = 0;
    double novelty = 0;
    double tail_frac = 0;
};

/// Per-user and aggregate results plus the knobs that produced them.
struct MetricReport {
    std::map<UserId, UserMetrics> per_user;
    AggregateMetrics aggregate;
    std::size_t users_evaluated = 0;
    std::size_t users_skipped = 0;  // empty ground truth; excluded from averages

    // config echo
    int k = 0;
    int n = 0;
    std::string fusion;
    std::string profile;
    std::string pipeline;
    std::uint64_t seed = 0;
};

inline double recall_at_k(const std::vector<ItemId>& recommended, const std::set<ItemId>& relevant, int k) {
    if (relevant.empty()) return 0.0;
    std::size_t hits = 0;
    const std::size_t depth = std::min<std::size_t>(recommended.size(), static_cast<std::size_t>(k));
    for (std::size_t r = 0; r < depth; ++r)
        if (relevant.count(recommended[r])) ++hits;
    return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

/// Binary-relevance nDCG with log2(rank+1) discount.
inline double ndcg_at_k(const std::vector<ItemId>& recommended, const std::set<ItemId>& relevant, int k) {
    if (relevant.empty()) return 0.0;
    double dcg = 0;
    const std::size_t depth = std::min<std::size_t>(recommended.size(), static_cast<std::size_t>(k));
    for (std::size_t r = 0; r < depth; ++r)
        if (relevant.count(recommended[r])) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    const std::size_t ideal = std::min<std::size_t>(static_cast<std::size_t>(k), relevant.size());
    double idcg = 0;
    for (std::size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    return idcg > 0 ? dcg / idcg : 0.0;
}

/// Mean of precision at hit ranks, normalized by min(k, |relevant|).
inline double map_at_k(const std::vector<ItemId>& recommended, const std::set<ItemId>& relevant, int k) {
    if (relevant.empty()) return 0.0;
    double sum = 0;
    std::size_t hits = 0;
    const std::size_t depth = std::min<std::size_t>(recommended.size(), static_cast<std::size_t>(k));
    for (std::size_t r = 0; r < depth; ++r) {
        if (relevant.count(recommended[r])) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(r + 1);
        }
    }
    const auto norm = std::min<std::size_t>(static_cast<std::size_t>(k), relevant.size());
    return norm > 0 ? sum / static_cast<double>(norm) : 0.0;
}

/// Reciprocal rank of the first hit within the top k, 0 when there is none.
inline double mrr(const std::vector<ItemId>& recommended, const std::set<ItemId>& relevant, int k) {
    const std::size_t depth = std::min<std::size_t>(recommended.size(), static_cast<std::size_t>(k));
    for (std::size_t r = 0; r < depth; ++r)
        if (relevant.count(recommended[r])) return 1.0 / static_cast<double>(r + 1);
    return 0.0;
}

/// Fraction of the catalog appearing in any recommendation list.
inline double coverage(const std::map<UserId, std::vector<ItemId>>& rec_lists, std::size_t catalog_size) {
    if (catalog_size == 0) throw ConfigError("coverage: catalog_size must be >= 1");
    std::set<ItemId> unioned;
    for (const auto& [_, list] : rec_lists) unioned.insert(list.begin(), list.end());
    return static_cast<double>(unioned.size()) / static_cast<double>(catalog_size);
}

/// Popularity distribution from training counts, floored at 1/total so that
/// zero-count items never produce -log2(0).
inline std::map<ItemId, double> popularity_from_counts(const std::map<ItemId, std::int64_t>& train_counts,
                                                       std::int64_t total_train) {
    std::map<ItemId, double> p;
    const double floor_p = 1.0 / static_cast<double>(total_train);
    for (const auto& [id, c] : train_counts)
        p[id] = std::max(static_cast<double>(c) / static_cast<double>(total_train), floor_p);
    return p;
}

/// Mean self-information -log2 p(i) over all recommended slots (multiset).
inline double novelty(const std::map<UserId, std::vector<ItemId>>& rec_lists,
                      const std::map<ItemId, double>& popularity, double floor_p) {
    double sum = 0;
    std::size_t slots = 0;
    for (const auto& [_, list] : rec_lists) {
        for (ItemId id : list) {
            auto it = popularity.find(id);
            const double p = it == popularity.end() ? floor_p : it->second;
            sum += -std::log2(p);
            ++slots;
        }
    }
    return slots > 0 ? sum / static_cast<double>(slots) : 0.0;
}

/// Share of recommended slots whose item has train_count strictly below tau.
inline double tail_fraction(const std::map<UserId, std::vector<ItemId>>& rec_lists,
                            const std::map<ItemId, std::int64_t>& train_counts, std::int64_t tau_tail) {
    if (tau_tail < 0) throw ConfigError("tail_fraction: tau_tail must be >= 0");
    std::size_t tail = 0, slots = 0;
    for (const auto& [_, list] : rec_lists) {
        for (ItemId id : list) {
            auto it = train_counts.find(id);
            const std::int64_t c = it == train_counts.end() ? 0 : it->second;
            if (c < tau_tail) ++tail;
            ++slots;
        }
    }
    return slots > 0 ? static_cast<double>(tail) / static_cast<double>(slots) : 0.0;
}

/// Per-user accuracy metrics; nullopt when the ground truth is empty (the user
/// is skipped and tallied, never scored zero).
inline std::optional<UserMetrics> evaluate_user(const std::vector<ItemId>& recommended,
                                                const std::set<ItemId>& relevant, int k) {
    if (relevant.empty()) return std::nullopt;
    UserMetrics m;
    m.recall = recall_at_k(recommended, relevant, k);
    m.ndcg = ndcg_at_k(recommended, relevant, k);
    m.map = map_at_k(recommended, relevant, k);
    m.mrr = mrr(recommended, relevant, k);
    return m;
}

/// Unweighted mean over evaluated users plus catalog-level metrics.
inline MetricReport aggregate_report(const std::map<UserId, std::vector<ItemId>>& rec_lists,
                                     const std::map<UserId, GroundTruth>& truths, int k,
                                     std::size_t catalog_size,
                                     const std::map<ItemId, std::int64_t>& train_counts,
                                     std::int64_t total_train, std::int64_t tau_tail) {
    MetricReport report;
    report.k = k;
    std::map<UserId, std::vector<ItemId>> evaluated_lists;
    for (const auto& [user, list] : rec_lists) {
        auto t = truths.find(user);
        const std::set<ItemId> empty;
        auto maybe = evaluate_user(list, t == truths.end() ? empty : t->second.relevant, k);
        if (!maybe) {
            ++report.users_skipped;
            continue;
        }
        report.per_user.emplace(user, *maybe);
        evaluated_lists.emplace(user, list);
        ++report.users_evaluated;
    }
    for (const auto& [_, m] : report.per_user) {
        report.aggregate.recall += m.recall;
        report.aggregate.ndcg += m.ndcg;
        report.aggregate.map += m.map;
        report.aggregate.mrr += m.mrr;
    }
    if (report.users_evaluated > 0) {
        const auto n = static_cast<double>(report.users_evaluated);
        report.aggregate.recall /= n;
        report.aggregate.ndcg /= n;
        report.aggregate.map /= n;
        report.aggregate.mrr /= n;
    }
    // Beyond-accuracy metrics run over every user's list, skipped or not.
    const double floor_p = total_train > 0 ? 1.0 / static_cast<double>(total_train) : 1.0;
    report.aggregate.coverage = coverage(rec_lists, catalog_size);
    report.aggregate.novelty =
        total_train > 0 ? novelty(rec_lists, popularity_from_counts(train_counts, total_train), floor_p) : 0.0;
    report.aggregate.tail_frac = tail_fraction(rec_lists, train_counts, tau_tail);
    return report;
}

// ---------------------------------------------------------------------------
// CSV export (fixed column order, 6 significant digits)
// ---------------------------------------------------------------------------

inline constexpr const char* kPerUserHeader = "user,recall,ndcg,map,mrr";
inline constexpr const char* kAggregateHeader =
    "fusion,profile,pipeline,seed,k,n,users_evaluated,users_skipped,"
    "recall,ndcg,map,mrr,coverage,novelty,tail_frac";

inline std::string per_user_csv(const MetricReport& report) {
    std::string out = std::string(kPerUserHeader) + "\n";
    for (const auto& [user, m] : report.per_user) {
        out += std::to_string(user) + "," + format_sig6(m.recall) + "," + format_sig6(m.ndcg) + "," +
               format_sig6(m.map) + "," + format_sig6(m.mrr) + "\n";
    }
    return out;
}

inline std::string aggregate_csv_row(const MetricReport& r) {
    const auto& a = r.aggregate;
    return r.fusion + "," + r.profile + "," + r.pipeline + "," + std::to_string(r.seed) + "," +
           std::to_string(r.k) + "," + std::to_string(r.n) + "," + std::to_string(r.users_evaluated) +
           "," + std::to_string(r.users_skipped) + "," + format_sig6(a.recall) + "," +
           format_sig6(a.ndcg) + "," + format_sig6(a.map) + "," + format_sig6(a.mrr) + "," +
           format_sig6(a.coverage) + "," + format_sig6(a.novelty) + "," + format_sig6(a.tail_frac);
}

inline std::string aggregate_csv(const std::vector<MetricReport>& reports) {
    std::string out = std::string(kAggregateHeader) + "\n";
    for (const auto& r : reports) out += aggregate_csv_row(r) + "\n";
    return out;
}

}  // namespace fuserec::metrics
