// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 fuserec contributors
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "fuserec/common.hpp"
#include "fuserec/csv.hpp"
#include "fuserec/rng.hpp"

namespace fuserec::corpus {

struct RatingScale {
    double min = 0.5;
    double max = 5.0;
};

struct Interaction {
    UserId user_id = 0;
    ItemId item_id = 0;
    double rating = 0.0;
    std::int64_t timestamp = 0;  // seconds since epoch, > 0

    friend bool operator==(const Interaction&, const Interaction&) = default;
};

struct ItemMeta {
    ItemId item_id = 0;
    std::string title;
    std::vector<std::string> genres;
    std::vector<std::string> tags;
    std::optional<std::string> description;
    std::optional<std::string> augmented_description;
    bool metadata_missing = false;  // set when the source carries no genre info
};

enum class Stratum { Head, MidTail, LongTail };

struct PopularityStratum {
    ItemId item_id = 0;
    Stratum stratum = Stratum::LongTail;
    std::int64_t train_count = 0;
};

struct SplitDataset {
    std::vector<Interaction> train;
    std::vector<Interaction> test;
    std::set<UserId> users;
    std::set<ItemId> items;
    std::vector<UserId> dropped_users;  // users with < 2 rows or an empty test slice
};

namespace detail {

inline bool parse_int(const std::string& s, std::int64_t& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    errno = 0;
    long long v = std::strtoll(s.c_str(), &end, 10);
    if (errno != 0 || end != s.c_str() + s.size()) return false;
    out = v;
    return true;
}

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    errno = 0;
    double v = std::strtod(s.c_str(), &end);
    if (errno != 0 || end != s.c_str() + s.size()) return false;
    out = v;
    return true;
}

inline bool chrono_less(const Interaction& a, const Interaction& b) {
    // Timestamp ties broken by ascending item id: total order for reproducible splits.
    return std::tie(a.timestamp, a.item_id) < std::tie(b.timestamp, b.item_id);
}

}  // namespace detail

/// Parse a ratings CSV (`userId,movieId,rating,timestamp` with header).
/// Malformed rows and out-of-scale ratings are hard errors naming the row.
inline std::vector<Interaction> load_ratings(const std::string& path, const RatingScale& scale = {}) {
    std::vector<Interaction> log;
    std::set<std::tuple<UserId, ItemId, std::int64_t>> seen;
    csv::for_each_row(path, [&](std::size_t lineno, const std::vector<std::string>& f) {
        if (f.size() != 4) throw DataError(path + ": malformed row " + std::to_string(lineno) +
                                           " (expected 4 fields, got " + std::to_string(f.size()) + ")");
        Interaction it;
        double rating;
        if (!detail::parse_int(f[0], it.user_id) || !detail::parse_int(f[1], it.item_id) ||
            !detail::parse_double(f[2], rating) || !detail::parse_int(f[3], it.timestamp))
            throw DataError(path + ": malformed row " + std::to_string(lineno));
        if (it.timestamp <= 0)
            throw DataError(path + ": row " + std::to_string(lineno) + ": timestamp must be positive");
        if (rating < scale.min || rating > scale.max)
            throw DataError(path + ": row " + std::to_string(lineno) + ": rating " + std::to_string(rating) +
                            " outside scale [" + std::to_string(scale.min) + ", " + std::to_string(scale.max) + "]");
        it.rating = rating;
        if (!seen.emplace(it.user_id, it.item_id, it.timestamp).second)
            throw DataError(path + ": row " + std::to_string(lineno) +
                            ": duplicate (user, item, timestamp) triple");
        log.push_back(it);
    });
    return log;
}

/// Parse an item metadata CSV (`movieId,title,genres`, genres pipe-separated).
inline std::map<ItemId, ItemMeta> load_item_meta(const std::string& path) {
    std::map<ItemId, ItemMeta> meta;
    csv::for_each_row(path, [&](std::size_t lineno, const std::vector<std::string>& f) {
        if (f.size() < 3) throw DataError(path + ": malformed row " + std::to_string(lineno));
        ItemMeta m;
        if (!detail::parse_int(f[0], m.item_id))
            throw DataError(path + ": malformed row " + std::to_string(lineno));
        m.title = f[1];
        const std::string& genres = f[2];
        if (genres.empty() || genres == "(no genres listed)") {
            m.metadata_missing = true;
        } else {
            std::size_t start = 0;
            while (start <= genres.size()) {
                std::size_t bar = genres.find('|', start);
                if (bar == std::string::npos) {
                    m.genres.push_back(genres.substr(start));
                    break;
                }
                m.genres.push_back(genres.substr(start, bar - start));
                start = bar + 1;
            }
        }
        if (meta.count(m.item_id))
            throw DataError(path + ": row " + std::to_string(lineno) + ": duplicate item id");
        meta.emplace(m.item_id, std::move(m));
    });
    return meta;
}

/// Merge a tags CSV (`userId,movieId,tag,timestamp`) into item metadata.
/// Unknown item ids are ignored (tag files can cover a wider catalog).
inline void load_tags(const std::string& path, std::map<ItemId, ItemMeta>& meta) {
    csv::for_each_row(path, [&](std::size_t lineno, const std::vector<std::string>& f) {
        if (f.size() != 4) throw DataError(path + ": malformed row " + std::to_string(lineno));
        ItemId item;
        std::int64_t uid, ts;
        if (!detail::parse_int(f[0], uid) || !detail::parse_int(f[1], item) || !detail::parse_int(f[3], ts))
            throw DataError(path + ": malformed row " + std::to_string(lineno));
        auto it = meta.find(item);
        if (it != meta.end()) it->second.tags.push_back(f[2]);
    });
}

/// Apply augmented descriptions from a JSON Lines file:
/// one `{"id": <int>, "description": <string>, "rationale": <string|null>}` per line.
inline void load_augmented_descriptions(const std::string& path, std::map<ItemId, ItemMeta>& meta) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j.contains("description") ||
            !j["id"].is_number_integer() || !j["description"].is_string())
            throw DataError(path + ": malformed record at line " + std::to_string(lineno));
        auto it = meta.find(j["id"].get<ItemId>());
        if (it != meta.end()) it->second.augmented_description = j["description"].get<std::string>();
    }
}

/// Keep users whose interaction count c satisfies min <= c <= max
/// (or drop that band instead when keep_band is false).
inline std::vector<Interaction> filter_users_by_activity(const std::vector<Interaction>& log,
                                                         std::int64_t min_count, std::int64_t max_count,
                                                         bool keep_band = true) {
    if (min_count > max_count) throw ConfigError("activity filter: min > max");
    std::map<UserId, std::int64_t> counts;
    for (const auto& it : log) ++counts[it.user_id];
    std::vector<Interaction> out;
    out.reserve(log.size());
    for (const auto& it : log) {
        const std::int64_t c = counts[it.user_id];
        const bool in_band = c >= min_count && c <= max_count;
        if (in_band == keep_band) out.push_back(it);
    }
    return out;
}

/// Chronological per-user split: first ceil(train_frac * n_u) rows (sorted by
/// timestamp, ties by item id) go to train, the rest to test. Users whose test
/// slice would be empty, or with fewer than 2 rows, are dropped and reported.
inline SplitDataset chronological_split(const std::vector<Interaction>& log, double train_frac) {
    if (!(train_frac > 0.0 && train_frac < 1.0))
        throw ConfigError("train_frac must lie strictly between 0 and 1");
    std::map<UserId, std::vector<Interaction>> per_user;
    for (const auto& it : log) per_user[it.user_id].push_back(it);

    SplitDataset split;
    for (auto& [user, rows] : per_user) {
        if (rows.size() < 2) {
            split.dropped_users.push_back(user);
            continue;
        }
        std::sort(rows.begin(), rows.end(), detail::chrono_less);
        const auto n = rows.size();
        auto n_train = static_cast<std::size_t>(std::ceil(train_frac * static_cast<double>(n)));
        if (n_train >= n) {
            split.dropped_users.push_back(user);
            continue;
        }
        split.users.insert(user);
        for (std::size_t i = 0; i < n; ++i) {
            (i < n_train ? split.train : split.test).push_back(rows[i]);
            split.items.insert(rows[i].item_id);
        }
    }
    return split;
}

inline std::map<ItemId, std::int64_t> train_counts(const std::vector<Interaction>& train) {
    std::map<ItemId, std::int64_t> counts;
    for (const auto& it : train) ++counts[it.item_id];
    return counts;
}

/// Stratify a catalog by training popularity: top 10% Head, next 40% MidTail,
/// remainder LongTail. Boundaries use floor(0.10 * |catalog|) and
/// floor(0.50 * |catalog|); ranking ties break by ascending item id.
inline std::vector<PopularityStratum> annotate_popularity(const std::vector<Interaction>& train,
                                                          const std::set<ItemId>& catalog) {
    if (catalog.empty()) throw ConfigError("annotate_popularity: empty catalog");
    const auto counts = train_counts(train);
    std::vector<PopularityStratum> ranked;
    ranked.reserve(catalog.size());
    for (ItemId id : catalog) {
        auto it = counts.find(id);
        ranked.push_back({id, Stratum::LongTail, it == counts.end() ? 0 : it->second});
    }
    std::sort(ranked.begin(), ranked.end(), [](const PopularityStratum& a, const PopularityStratum& b) {
        return std::tie(b.train_count, a.item_id) < std::tie(a.train_count, b.item_id);
    });
    const std::size_t n = ranked.size();
    const std::size_t head_end = n / 10;  // floor(0.10 * |catalog|)
    const std::size_t mid_end = n / 2;    // floor(0.50 * |catalog|)
    for (std::size_t i = 0; i < n; ++i)
        ranked[i].stratum = i < head_end ? Stratum::Head : (i < mid_end ? Stratum::MidTail : Stratum::LongTail);
    std::sort(ranked.begin(), ranked.end(),
              [](const PopularityStratum& a, const PopularityStratum& b) { return a.item_id < b.item_id; });
    return ranked;
}

/// Sample n evaluation users uniformly without replacement, deterministic per seed.
inline std::set<UserId> sample_eval_users(const SplitDataset& split, std::size_t n, std::uint64_t seed) {
    if (n > split.users.size())
        throw ConfigError("sample_eval_users: n exceeds user count (" + std::to_string(n) + " > " +
                          std::to_string(split.users.size()) + ")");
    std::vector<UserId> ids(split.users.begin(), split.users.end());
    rng::Prng prng(rng::derive_seed(seed, 0x65766C75u /* stream tag */));
    std::set<UserId> out;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(prng.below(ids.size() - i));
        std::swap(ids[i], ids[j]);
        out.insert(ids[i]);
    }
    return out;
}

}  // namespace fuserec::corpus
