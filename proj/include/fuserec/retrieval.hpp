// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 fuserec contributors
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <set>
#include <tuple>
#include <vector>

#include "fuserec/common.hpp"
#include "fuserec/fusion.hpp"
#include "fuserec/profiles.hpp"

namespace fuserec::retrieval {

/// Exact cosine index: L2-normalized item vectors in ascending id order.
struct CosineIndex {
    std::vector<ItemId> ids;
    Eigen::MatrixXd unit_vectors;  // one row per id, unit L2 norm
    std::set<ItemId> zero_norm_ids;

    std::size_t size() const { return ids.size(); }
};

struct CandidateList {
    UserId user_id = 0;
    std::vector<std::pair<ItemId, double>> entries;  // (item, cosine score), scores non-increasing
    int depth = 0;                                   // the requested N
};

inline CosineIndex build_index(const fusion::FusedSpace& space) {
    if (space.item_vectors.empty()) throw DataError("build_index: empty fused space");
    CosineIndex index;
    index.ids.reserve(space.item_vectors.size());
    for (const auto& [id, v] : space.item_vectors) {
        if (v.norm() == 0.0) {
            index.zero_norm_ids.insert(id);
            continue;
        }
        index.ids.push_back(id);
    }
    if (index.ids.empty()) throw DataError("build_index: all item vectors have zero norm");
    index.unit_vectors.resize(static_cast<Eigen::Index>(index.ids.size()), space.dim());
    for (std::size_t r = 0; r < index.ids.size(); ++r) {
        const auto& v = space.item_vectors.at(index.ids[r]);
        index.unit_vectors.row(static_cast<Eigen::Index>(r)) = v.transpose() / v.norm();
    }
    return index;
}

/// Exact top-n by cosine score over the index minus `exclude`;
/// ties broken by ascending item id. Scores are clamped into [-1, 1].
inline CandidateList query_topn(const CosineIndex& index, const profiles::UserVector& user, int n,
                                const std::set<ItemId>& exclude) {
    if (n < 1) throw ConfigError("query_topn: n must be >= 1");
    const double norm = user.vec.norm();
    if (norm == 0.0) throw DataError("query_topn: zero-norm user vector for user " + std::to_string(user.user_id));
    const Eigen::VectorXd scores = index.unit_vectors * (user.vec / norm);

    std::vector<std::pair<ItemId, double>> scored;
    scored.reserve(index.ids.size());
    for (std::size_t r = 0; r < index.ids.size(); ++r) {
        const ItemId id = index.ids[r];
        if (exclude.count(id)) continue;
        const double s = std::clamp(scores(static_cast<Eigen::Index>(r)), -1.0, 1.0);
        scored.emplace_back(id, s);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return std::tie(b.second, a.first) < std::tie(a.second, b.first);
    });
    if (scored.size() > static_cast<std::size_t>(n)) scored.resize(static_cast<std::size_t>(n));

    CandidateList out;
    out.user_id = user.user_id;
    out.depth = n;
    out.entries = std::move(scored);
    return out;
}

}  // namespace fuserec::retrieval
