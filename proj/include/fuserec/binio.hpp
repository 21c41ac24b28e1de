// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 fuserec contributors
#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "fuserec/common.hpp"

namespace fuserec::binio {

// Little-endian encoding helpers shared by the EMB1/FUS1/FSP1 file formats.

inline void put_u16(std::vector<char>& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

inline void put_u32(std::vector<char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::vector<char>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f32(std::vector<char>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

inline void put_f64(std::vector<char>& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

/// Bounds-checked little-endian reader over an in-memory buffer.
class Reader {
public:
    Reader(const char* data, std::size_t size, std::string context)
        : data_(data), size_(size), context_(std::move(context)) {}

    std::size_t remaining() const { return size_ - pos_; }
    std::size_t pos() const { return pos_; }

    void need(std::size_t n) const {
        if (pos_ + n > size_) throw DataError(context_ + ": truncated file");
    }

    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint8_t>(data_[pos_]) |
                          (static_cast<std::uint16_t>(static_cast<std::uint8_t>(data_[pos_ + 1])) << 8);
        pos_ += 2;
        return v;
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }

    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    double f64() {
        std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    std::array<char, 4> magic() {
        need(4);
        std::array<char, 4> m;
        std::memcpy(m.data(), data_ + pos_, 4);
        pos_ += 4;
        return m;
    }

private:
    const char* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
    std::string context_;
};

inline std::vector<char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    in.seekg(0, std::ios::end);
    std::streamoff n = in.tellg();
    in.seekg(0, std::ios::beg);
    std::vector<char> buf(static_cast<std::size_t>(n));
    if (n > 0) in.read(buf.data(), n);
    if (!in) throw DataError("failed reading file: " + path);
    return buf;
}

/// Atomic write: temp file in the same directory, then rename.
inline void write_file_atomic(const std::string& path, const char* data, std::size_t size) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open file for writing: " + tmp);
        if (size > 0) out.write(data, static_cast<std::streamsize>(size));
        if (!out) throw DataError("failed writing file: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw DataError("failed renaming " + tmp + " -> " + path);
}

inline void write_file_atomic(const std::string& path, const std::vector<char>& buf) {
    write_file_atomic(path, buf.data(), buf.size());
}

inline void write_file_atomic(const std::string& path, const std::string& text) {
    write_file_atomic(path, text.data(), text.size());
}

}  // namespace fuserec::binio
