// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 fuserec contributors
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace fuserec::rng {

// std::mt19937_64 output is pinned by the standard; the distributions are not.
// All sampling here is hand-rolled on top of the raw 64-bit stream so that
// identical seeds give identical draws on every platform.

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Derive an independent sub-stream seed from (seed, stream id).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    s ^= stream * 0xD6E8FEB86659FD93ull;
    std::uint64_t b = splitmix64(s);
    return a ^ (b + 0x2545F4914F6CDD1Dull);
}

class Prng {
public:
    explicit Prng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next() { return eng_(); }

    /// Uniform double in [0, 1) using the top 53 bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /// Unbiased uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        // Largest multiple of n that fits in 64 bits; reject the overhang.
        const std::uint64_t rem = (std::uint64_t(0) - n) % n;  // 2^64 mod n
        const std::uint64_t limit = std::uint64_t(0) - rem;    // 2^64 - rem
        std::uint64_t x;
        do {
            x = eng_();
        } while (limit != 0 && x >= limit);
        return x % n;
    }

    /// Standard normal via Box-Muller (second value cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace fuserec::rng
