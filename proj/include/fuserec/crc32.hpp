// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 fuserec contributors
#pragma once

#include <array>
#include <cstdint>
#include <cstddef>

namespace fuserec {

// CRC-32 (IEEE 802.3, zlib-compatible): poly 0xEDB88320, init/xorout 0xFFFFFFFF.
namespace detail {
inline const std::array<std::uint32_t, 256>& crc32_table() {
    static const std::array<std::uint32_t, 256> table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    return table;
}
}  // namespace detail

inline std::uint32_t crc32(const char* data, std::size_t size, std::uint32_t seed = 0) {
    const auto& table = detail::crc32_table();
    std::uint32_t c = seed ^ 0xFFFFFFFFu;
    for (std::size_t i = 0; i < size; ++i)
        c = table[(c ^ static_cast<std::uint8_t>(data[i])) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

}  // namespace fuserec
