#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "dkoop/error.hpp"
#include "dkoop/trajectory.hpp"

namespace dkoop::io {

using json = nlohmann::ordered_json;

// Dense matrix as {"rows", "cols", "data"} with row-major values. nlohmann prints the
// shortest representation that parses back to the same double, so round trips are exact.
inline json mat_to_json(const Mat& m) {
    json data = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Mat mat_from_json(const json& j) {
    try {
        const auto rows = j.at("rows").get<Eigen::Index>();
        const auto cols = j.at("cols").get<Eigen::Index>();
        const json& data = j.at("data");
        if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows * cols))
            throw DataError("matrix document: data length does not match shape");
        Mat m(rows, cols);
        std::size_t i = 0;
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) {
                if (!data[i].is_number()) throw DataError("matrix document: non-numeric entry");
                m(r, c) = data[i++].get<double>();
            }
        return m;
    } catch (const json::exception& e) {
        throw DataError(std::string("matrix document: ") + e.what());
    }
}

inline Vec vec_from_json(const json& j) {
    Mat m = mat_from_json(j);
    if (m.cols() != 1) throw DataError("vector document: expected a single column");
    return m.col(0);
}

inline void check_header(const json& doc, std::string_view format, int version) {
    if (!doc.contains("format") || doc["format"] != format)
        throw DataError("document is not a '" + std::string(format) + "' document");
    if (!doc.contains("version") || doc["version"] != version)
        throw DataError("incompatible " + std::string(format) + " version (expected " + std::to_string(version) + ")");
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw DataError("failed writing '" + path + "'");
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(what + ": " + e.what());
    }
}

/// 64-bit FNV-1a, rendered as 16 hex digits.
inline std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    return out;
}

}  // namespace dkoop::io
