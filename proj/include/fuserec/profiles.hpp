// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 fuserec contributors
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "fuserec/common.hpp"
#include "fuserec/corpus.hpp"
#include "fuserec/fusion.hpp"
#include "fuserec/rng.hpp"

namespace fuserec::profiles {

enum class ProfileStrategy { Random, Average, Temporal };

inline const char* profile_name(ProfileStrategy s) {
    switch (s) {
        case ProfileStrategy::Random: return "random";
        case ProfileStrategy::Average: return "average";
        case ProfileStrategy::Temporal: return "temporal";
    }
    return "?";
}

/// How the logistic recency weight reads timestamps: standardized converts a
/// user's times to z-scores before applying alpha, raw uses epoch seconds.
enum class TimeMode { Standardized, Raw };

struct UserVector {
    UserId user_id = 0;
    Eigen::VectorXd vec;
    int support = 0;  // contributing items (0 for the random baseline)
};

/// Items the user rated at or above the threshold in the training slice.
inline std::set<ItemId> positive_items(const std::vector<corpus::Interaction>& train, UserId u,
                                       double threshold) {
    std::set<ItemId> out;
    for (const auto& it : train)
        if (it.user_id == u && it.rating >= threshold) out.insert(it.item_id);
    return out;
}

namespace detail {
/// Positive items with the timestamp of the user's latest positive interaction.
inline std::map<ItemId, std::int64_t> positive_items_with_time(
    const std::vector<corpus::Interaction>& train, UserId u, double threshold) {
    std::map<ItemId, std::int64_t> out;
    for (const auto& it : train)
        if (it.user_id == u && it.rating >= threshold) {
            auto [pos, inserted] = out.emplace(it.item_id, it.timestamp);
            if (!inserted && it.timestamp > pos->second) pos->second = it.timestamp;
        }
    return out;
}
}  // namespace detail

/// Mean of the fused vectors of the user's positive items present in the space.
inline UserVector build_average(const fusion::FusedSpace& space,
                                const std::vector<corpus::Interaction>& train, UserId u,
                                double threshold) {
    UserVector uv;
    uv.user_id = u;
    uv.vec = Eigen::VectorXd::Zero(space.dim());
    for (ItemId i : positive_items(train, u, threshold)) {
        auto it = space.item_vectors.find(i);
        if (it == space.item_vectors.end()) continue;
        uv.vec += it->second;
        ++uv.support;
    }
    if (uv.support == 0)
        throw ColdStartUser("user " + std::to_string(u) + " has no positive items in the fused space");
    uv.vec /= static_cast<double>(uv.support);
    return uv;
}

/// Recency-weighted mean: w = 1 / (1 + exp(-alpha * (time - t_mean))), with times
/// standardized per user (sigma floored at 1 second) unless TimeMode::Raw.
inline UserVector build_temporal(const fusion::FusedSpace& space,
                                 const std::vector<corpus::Interaction>& train, UserId u,
                                 double threshold, double alpha,
                                 TimeMode mode = TimeMode::Standardized) {
    if (!(alpha > 0)) throw ConfigError("build_temporal: alpha must be positive");
    std::vector<std::pair<const Eigen::VectorXd*, double>> contributing;  // (z_i, time)
    for (const auto& [item, ts] : detail::positive_items_with_time(train, u, threshold)) {
        auto it = space.item_vectors.find(item);
        if (it != space.item_vectors.end())
            contributing.emplace_back(&it->second, static_cast<double>(ts));
    }
    if (contributing.empty())
        throw ColdStartUser("user " + std::to_string(u) + " has no positive items in the fused space");

    double t_mean = 0;
    for (const auto& [_, t] : contributing) t_mean += t;
    t_mean /= static_cast<double>(contributing.size());

    double scale = 1.0;
    if (mode == TimeMode::Standardized) {
        double var = 0;
        for (const auto& [_, t] : contributing) var += (t - t_mean) * (t - t_mean);
        var /= static_cast<double>(contributing.size());
        scale = std::max(std::sqrt(var), 1.0);  // sigma floor: 1 second
    }

    UserVector uv;
    uv.user_id = u;
    uv.support = static_cast<int>(contributing.size());
    uv.vec = Eigen::VectorXd::Zero(space.dim());
    double weight_sum = 0;
    for (const auto& [z, t] : contributing) {
        const double w = 1.0 / (1.0 + std::exp(-alpha * (t - t_mean) / scale));
        uv.vec += *z * w;
        weight_sum += w;
    }
    uv.vec /= weight_sum;
    return uv;
}

/// Seeded standard-normal baseline vector; sub-seeded per user so distinct
/// users get distinct vectors under the same run seed.
inline UserVector build_random(UserId u, int dim, std::uint64_t seed) {
    if (dim < 1) throw ConfigError("build_random: dim must be >= 1");
    UserVector uv;
    uv.user_id = u;
    uv.support = 0;
    uv.vec = Eigen::VectorXd(dim);
    rng::Prng prng(rng::derive_seed(seed, 0x757276ull ^ static_cast<std::uint64_t>(u)));
    for (int i = 0; i < dim; ++i) uv.vec(i) = prng.normal();
    return uv;
}

}  // namespace fuserec::profiles
