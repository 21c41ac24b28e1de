// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 fuserec contributors
#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace fuserec {

using ItemId = std::int64_t;
using UserId = std::int64_t;

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent input data (CSV rows, JSONL records, binary files).
class DataError : public Error {
public:
    using Error::Error;
};

/// Invalid or contradictory run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A user has no positive items inside the fused space.
class ColdStartUser : public Error {
public:
    using Error::Error;
};

/// LLM backend could not be reached (network, replay miss, etc).
class TransportError : public Error {
public:
    using Error::Error;
};

/// Metadata augmentation produced no usable text after retries.
class AugmentationFailed : public Error {
public:
    using Error::Error;
};

/// A pipeline stage aborted; carries the stage name for diagnostics.
class StageError : public Error {
public:
    StageError(const std::string& stage, const std::string& what)
        : Error("stage '" + stage + "' failed: " + what), stage_(stage) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

/// Fixed CSV float formatting: 6 significant digits.
inline std::string format_sig6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace fuserec
