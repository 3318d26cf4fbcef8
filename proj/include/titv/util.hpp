// SPDX-License-Identifier: Apache-2.0
//
// Small shared helpers: number formatting/parsing, file I/O, digests.

#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "titv/errors.hpp"

namespace titv {

/// Shortest text with 17 significant digits; parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, end);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    const char* first = s.data();
    if (!s.empty() && s.front() == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw FormatError("not a number: '" + std::string(s) + "'");
    return v;
}

inline std::int64_t parse_int(std::string_view s) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw FormatError("not an integer: '" + std::string(s) + "'");
    return v;
}

/// JSON array of doubles with NaN stored as null.
inline nlohmann::json json_doubles(const std::vector<double>& xs) {
    nlohmann::json out = nlohmann::json::array();
    for (double x : xs) {
        if (std::isnan(x)) out.push_back(nullptr);
        else out.push_back(x);
    }
    return out;
}

inline std::vector<double> doubles_from_json(const nlohmann::json& j) {
    std::vector<double> out;
    for (const auto& v : j) out.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
    return out;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing '" + path + "'");
}

/// 64-bit FNV-1a, hex encoded.
inline std::string digest(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xF];
    return out;
}

} // namespace titv
