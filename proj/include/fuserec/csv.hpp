// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 fuserec contributors
#pragma once

#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "fuserec/common.hpp"

namespace fuserec::csv {

/// Split one CSV line into fields. Handles RFC 4180 quoting: fields may be
/// wrapped in double quotes, with embedded commas and doubled quotes.
inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

inline std::string quote_field(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

/// Stream a CSV file line by line. Calls `row(line_number, fields)` for every
/// non-empty line after the header. Line numbers are 1-based including the header.
inline void for_each_row(const std::string& path,
                         const std::function<void(std::size_t, const std::vector<std::string>&)>& row) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    std::string line;
    std::size_t lineno = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!saw_header) {
            saw_header = true;  // header row skipped; format is fixed per interface
            continue;
        }
        if (line.empty() || line == "\r") continue;
        row(lineno, split_line(line));
    }
    if (!saw_header) throw DataError(path + ": missing header row");
}

}  // namespace fuserec::csv
