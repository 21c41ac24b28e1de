// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 fuserec contributors
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fuserec/binio.hpp"
#include "fuserec/common.hpp"
#include "fuserec/crc32.hpp"

namespace fuserec::emb {

enum class Modality { Textual, Visual, Audio };

inline const char* modality_name(Modality m) {
    switch (m) {
        case Modality::Textual: return "textual";
        case Modality::Visual: return "visual";
        case Modality::Audio: return "audio";
    }
    return "?";
}

/// Modality plus a free-form variant label (encoder name, pooling scheme, ...).
struct ModalityTag {
    Modality name = Modality::Textual;
    std::string variant;

    std::string describe() const {
        return variant.empty() ? modality_name(name) : std::string(modality_name(name)) + "/" + variant;
    }
    friend bool operator==(const ModalityTag&, const ModalityTag&) = default;
};

/// Id-indexed per-modality vectors. All vectors share `dim`; components are
/// finite by construction (non-finite input is rejected, never zero-filled).
struct EmbeddingMatrix {
    ModalityTag modality;
    int dim = 0;
    std::map<ItemId, std::vector<float>> entries;
};

namespace detail {
inline void check_finite(const std::vector<float>& v, const std::string& where) {
    for (float x : v)
        if (!std::isfinite(x)) throw DataError(where + ": non-finite component");
}
}  // namespace detail

// ---------------------------------------------------------------------------
// JSONL format: one `{"id": <int>, "vec": [<float>...]}` object per line.
// ---------------------------------------------------------------------------

inline EmbeddingMatrix load_embeddings_jsonl(const std::string& path, const ModalityTag& modality) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    EmbeddingMatrix m;
    m.modality = modality;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = path + ": line " + std::to_string(lineno);
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j.contains("vec") ||
            !j["id"].is_number_integer() || !j["vec"].is_array())
            throw DataError(where + ": expected {\"id\": <int>, \"vec\": [...]}");
        const ItemId id = j["id"].get<ItemId>();
        std::vector<float> vec;
        vec.reserve(j["vec"].size());
        for (const auto& x : j["vec"]) {
            if (!x.is_number()) throw DataError(where + ": non-numeric vector component");
            const double d = x.get<double>();
            if (!std::isfinite(d)) throw DataError(where + ": non-finite component");
            vec.push_back(static_cast<float>(d));
        }
        detail::check_finite(vec, where);
        if (m.entries.empty() && m.dim == 0) {
            m.dim = static_cast<int>(vec.size());
            if (m.dim == 0) throw DataError(where + ": empty vector");
        } else if (static_cast<int>(vec.size()) != m.dim) {
            throw DataError(where + ": dimension mismatch (expected " + std::to_string(m.dim) + ", got " +
                            std::to_string(vec.size()) + ")");
        }
        if (!m.entries.emplace(id, std::move(vec)).second)
            throw DataError(where + ": duplicate id " + std::to_string(id));
    }
    return m;
}

inline void save_embeddings_jsonl(const EmbeddingMatrix& m, const std::string& path) {
    std::string out;
    for (const auto& [id, vec] : m.entries) {
        nlohmann::json j;
        j["id"] = id;
        // float -> double is exact, so the shortest-round-trip dump reloads bit-identically
        j["vec"] = std::vector<double>(vec.begin(), vec.end());
        out += j.dump();
        out += '\n';
    }
    binio::write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// EMB1 binary format (little-endian):
//   magic "EMB1" | u16 version=1 | u16 dim | u64 count
//   count records of (u64 item_id, dim x f32)
//   u32 CRC-32 over the record bytes
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t kEmb1Version = 1;

inline void save_embeddings_binary(const EmbeddingMatrix& m, const std::string& path) {
    if (m.dim < 1 || m.dim > 65535)
        throw DataError("EMB1 requires 1 <= dim <= 65535, got " + std::to_string(m.dim));
    std::vector<char> payload;
    payload.reserve(m.entries.size() * (8 + 4 * static_cast<std::size_t>(m.dim)));
    for (const auto& [id, vec] : m.entries) {
        binio::put_u64(payload, static_cast<std::uint64_t>(id));
        for (float x : vec) binio::put_f32(payload, x);
    }
    std::vector<char> file;
    file.reserve(16 + payload.size() + 4);
    file.insert(file.end(), {'E', 'M', 'B', '1'});
    binio::put_u16(file, kEmb1Version);
    binio::put_u16(file, static_cast<std::uint16_t>(m.dim));
    binio::put_u64(file, m.entries.size());
    file.insert(file.end(), payload.begin(), payload.end());
    binio::put_u32(file, crc32(payload.data(), payload.size()));
    binio::write_file_atomic(path, file);
}

inline EmbeddingMatrix load_embeddings_binary(const std::string& path, const ModalityTag& modality = {}) {
    const auto buf = binio::read_file(path);
    binio::Reader r(buf.data(), buf.size(), path);
    const auto magic = r.magic();
    if (std::string(magic.data(), 4) != "EMB1") throw DataError(path + ": bad magic (expected EMB1)");
    const auto version = r.u16();
    if (version != kEmb1Version)
        throw DataError(path + ": unsupported EMB1 version " + std::to_string(version));
    EmbeddingMatrix m;
    m.modality = modality;
    m.dim = r.u16();
    if (m.dim == 0) throw DataError(path + ": dim must be positive");
    const std::uint64_t count = r.u64();
    const std::size_t record_size = 8 + 4 * static_cast<std::size_t>(m.dim);
    if (r.remaining() != count * record_size + 4) throw DataError(path + ": truncated file");
    const std::size_t payload_begin = r.pos();
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto id = static_cast<ItemId>(r.u64());
        std::vector<float> vec(static_cast<std::size_t>(m.dim));
        for (auto& x : vec) x = r.f32();
        detail::check_finite(vec, path + ": record " + std::to_string(i));
        if (!m.entries.emplace(id, std::move(vec)).second)
            throw DataError(path + ": duplicate id " + std::to_string(id));
    }
    const std::uint32_t stored = r.u32();
    const std::uint32_t actual = crc32(buf.data() + payload_begin, count * record_size);
    if (stored != actual) throw DataError(path + ": checksum mismatch");
    return m;
}

// ---------------------------------------------------------------------------
// Id alignment across modalities
// ---------------------------------------------------------------------------

struct AlignResult {
    std::set<ItemId> ids;                    // the common id set
    std::vector<EmbeddingMatrix> matrices;   // inputs restricted to `ids`
    std::vector<std::size_t> dropped;        // per input, how many entries fell away
};

/// Restrict >= 2 matrices to their id intersection. Items missing a modality
/// are dropped, never zero-imputed. Empty intersection is a hard error.
inline AlignResult align_ids(const std::vector<EmbeddingMatrix>& ms) {
    if (ms.size() < 2) throw ConfigError("align_ids requires at least 2 matrices");
    std::set<ItemId> common;
    for (const auto& [id, _] : ms[0].entries) common.insert(id);
    for (std::size_t i = 1; i < ms.size(); ++i) {
        std::set<ItemId> next;
        for (const auto& [id, _] : ms[i].entries)
            if (common.count(id)) next.insert(id);
        common.swap(next);
    }
    if (common.empty()) {
        std::string sizes;
        for (const auto& m : ms)
            sizes += m.modality.describe() + "=" + std::to_string(m.entries.size()) + " ";
        throw DataError("align_ids: empty id intersection across modalities (" + sizes + ")");
    }
    AlignResult out;
    out.ids = std::move(common);
    for (const auto& m : ms) {
        EmbeddingMatrix r;
        r.modality = m.modality;
        r.dim = m.dim;
        for (ItemId id : out.ids) r.entries.emplace(id, m.entries.at(id));
        out.dropped.push_back(m.entries.size() - r.entries.size());
        out.matrices.push_back(std::move(r));
    }
    return out;
}

}  // namespace fuserec::emb
