// Copyright (c) 2026, homesynth contributors
// SPDX-License-Identifier: Apache-2.0
//
// Flat `key = value` text files (configs and sidecar metadata) and a few
// text helpers shared by the file formats.

#pragma once

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "homesynth/error.hpp"

namespace homesynth {

using KeyValues = std::map<std::string, std::string>;

inline std::string trim(std::string_view s) {
    const auto* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Shortest decimal text that parses back to the identical double.
inline std::string format_double(double v) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

/// Parses the whole string as a finite double; nullopt-style failure via bool.
inline bool parse_double(std::string_view text, double& out) {
    const std::string s = trim(text);
    if (s.empty()) return false;
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) return false;
    out = v;
    return true;
}

inline bool parse_int(std::string_view text, long long& out) {
    const std::string s = trim(text);
    if (s.empty()) return false;
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size() || errno == ERANGE) return false;
    out = v;
    return true;
}

/// 64-bit FNV-1a, used for run-directory names and checkpoint ids.
inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline KeyValues parse_key_values(std::istream& in, const std::string& source) {
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw UsageError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(std::string_view(t).substr(0, eq));
        if (key.empty()) throw UsageError(source + ":" + std::to_string(lineno) + ": empty key");
        if (kv.contains(key)) throw UsageError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        kv[key] = trim(std::string_view(t).substr(eq + 1));
    }
    return kv;
}

inline KeyValues read_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return parse_key_values(in, path);
}

inline void write_key_values(const std::string& path, const KeyValues& kv) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
    if (!out) throw DataError("write failed: " + path);
}

}  // namespace homesynth
