// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 fuserec contributors
#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "fuserec/common.hpp"
#include "fuserec/rng.hpp"

namespace fuserec::rag {

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

/// Text-completion backend contract. Implementations either return the
/// completion text or throw TransportError; content-level problems (garbage
/// output, wrong shape) are the caller's business, not the backend's.
class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual std::string label() const = 0;
    virtual std::string complete(const std::string& prompt, double temperature, int max_tokens,
                                 std::optional<std::uint64_t> seed) = 0;
};

/// Deterministic offline backend: the completion is a pure function of
/// (prompt, seed). Re-rank prompts get a deterministically shuffled id array;
/// everything else gets a digest-stamped paragraph.
class MockBackend final : public LlmBackend {
public:
    explicit MockBackend(std::uint64_t default_seed = 0) : default_seed_(default_seed) {}

    std::string label() const override { return "mock"; }

    std::string complete(const std::string& prompt, double /*temperature*/, int /*max_tokens*/,
                         std::optional<std::uint64_t> seed) override {
        const std::uint64_t s = rng::derive_seed(seed.value_or(default_seed_), fnv1a64(prompt));
        const auto candidates = extract_candidate_ids(prompt);
        if (!candidates.empty() && prompt.find("\nTASK:") != std::string::npos)
            return rerank_response(prompt, candidates, s);
        return generic_response(prompt, s);
    }

private:
    static std::vector<std::int64_t> extract_candidate_ids(const std::string& prompt) {
        std::vector<std::int64_t> ids;
        const auto block = prompt.find("CANDIDATES:\n");
        if (block == std::string::npos) return ids;
        std::size_t pos = block + 12;
        while (pos < prompt.size()) {
            const auto eol = prompt.find('\n', pos);
            const std::string line = prompt.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
            if (line.rfind("TASK:", 0) == 0) break;
            const auto bar = line.find(" | ");
            if (bar != std::string::npos) {
                char* end = nullptr;
                const long long v = std::strtoll(line.c_str(), &end, 10);
                if (end == line.c_str() + bar) ids.push_back(v);
            }
            if (eol == std::string::npos) break;
            pos = eol + 1;
        }
        return ids;
    }

    static int extract_k(const std::string& prompt) {
        const auto pos = prompt.rfind("top-");
        if (pos == std::string::npos) return 10;
        const int k = std::atoi(prompt.c_str() + pos + 4);
        return k > 0 ? k : 10;
    }

    std::string rerank_response(const std::string& prompt, std::vector<std::int64_t> ids,
                                std::uint64_t s) const {
        rng::Prng prng(s);
        prng.shuffle(ids);
        const auto k = std::min<std::size_t>(ids.size(), static_cast<std::size_t>(extract_k(prompt)));
        const bool explain = prompt.find("\"why\"") != std::string::npos;
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < k; ++i) {
            if (explain) {
                nlohmann::ordered_json obj;
                obj["id"] = ids[i];
                obj["why"] = "matches the stated profile (mock rationale " + hex64(s).substr(0, 8) + ")";
                arr.push_back(obj);
            } else {
                arr.push_back(ids[i]);
            }
        }
        return "Here are my picks: " + arr.dump() + "\nEnjoy!";
    }

    std::string generic_response(const std::string& prompt, std::uint64_t s) const {
        // Echo back the subject when the prompt follows the augmentation template.
        std::string subject;
        const auto t0 = prompt.find("the title ");
        if (t0 != std::string::npos) {
            auto t1 = prompt.find(" and genres ", t0);
            if (t1 == std::string::npos) t1 = prompt.find(",", t0);
            if (t1 != std::string::npos) subject = prompt.substr(t0 + 10, t1 - t0 - 10);
        }
        std::string out;
        if (!subject.empty())
            out = subject + " unfolds as a deterministic stand-in synopsis covering plot, themes, and style";
        else
            out = "Deterministic stand-in completion covering the requested summary";
        out += " (digest " + hex64(s) + ").";
        return out;
    }

    std::uint64_t default_seed_;
};

/// Replays recorded completions from a JSONL store of
/// `{"prompt_hash": <16-hex fnv1a64>, "response": <string>}`. A miss is a
/// transport error, so the caller's retry/fallback path is exercised in CI.
class ReplayBackend final : public LlmBackend {
public:
    explicit ReplayBackend(const std::string& path) : path_(path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open replay store: " + path);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.contains("prompt_hash") || !j.contains("response"))
                throw DataError(path + ": malformed replay record at line " + std::to_string(lineno));
            responses_[j["prompt_hash"].get<std::string>()] = j["response"].get<std::string>();
        }
    }

    static std::string prompt_hash(const std::string& prompt) { return hex64(fnv1a64(prompt)); }

    /// Append a (prompt, response) pair to a replay store.
    static void record(const std::string& path, const std::string& prompt, const std::string& response) {
        nlohmann::ordered_json j;
        j["prompt_hash"] = prompt_hash(prompt);
        j["response"] = response;
        std::ofstream out(path, std::ios::app);
        if (!out) throw DataError("cannot open replay store for append: " + path);
        out << j.dump() << "\n";
    }

    std::string label() const override { return "replay:" + path_; }

    std::string complete(const std::string& prompt, double, int, std::optional<std::uint64_t>) override {
        auto it = responses_.find(prompt_hash(prompt));
        if (it == responses_.end())
            throw TransportError("replay store has no response for prompt hash " + prompt_hash(prompt));
        return it->second;
    }

private:
    std::string path_;
    std::unordered_map<std::string, std::string> responses_;
};

/// Wraps an arbitrary callable; handy for test stubs.
class FunctionBackend final : public LlmBackend {
public:
    using Fn = std::function<std::string(const std::string&)>;
    explicit FunctionBackend(Fn fn, std::string label = "function") : fn_(std::move(fn)), label_(std::move(label)) {}

    std::string label() const override { return label_; }
    std::string complete(const std::string& prompt, double, int, std::optional<std::uint64_t>) override {
        return fn_(prompt);
    }

private:
    Fn fn_;
    std::string label_;
};

/// Always throws TransportError; used to exercise the kNN fallback path.
class FailingBackend final : public LlmBackend {
public:
    std::string label() const override { return "failing"; }
    std::string complete(const std::string&, double, int, std::optional<std::uint64_t>) override {
        throw TransportError("backend configured to fail");
    }
};

}  // namespace fuserec::rag
