#pragma once

// Trajectory CSV: optional leading "# key=value" comment lines, then the header
// "t,h1,h2,q" and one row per sample k with t = k * Ts. The final row carries the
// terminal state x_T; it has no input sample, so its q field is "nan".

#include <charconv>
#include <cmath>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dkoop/error.hpp"
#include "dkoop/serialize.hpp"
#include "dkoop/trajectory.hpp"

namespace dkoop::io {

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    if (s == "nan") return std::nan("");
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw DataError("csv: cannot parse number '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string trajectory_header(Eigen::Index n, Eigen::Index m) {
    std::string h = "t";
    for (Eigen::Index i = 0; i < n; ++i) h += ",h" + std::to_string(i + 1);
    if (m == 1) {
        h += ",q";
    } else {
        for (Eigen::Index i = 0; i < m; ++i) h += ",q" + std::to_string(i + 1);
    }
    return h;
}

inline std::string trajectory_to_csv(const Trajectory& tr, const std::vector<std::pair<std::string, std::string>>& meta = {}) {
    tr.validate();
    std::string out;
    for (const auto& [k, v] : meta) out += "# " + k + "=" + v + "\n";
    out += trajectory_header(tr.n_states(), tr.n_inputs()) + "\n";
    for (Eigen::Index k = 0; k < tr.X.cols(); ++k) {
        out += format_double(static_cast<double>(k) * tr.Ts);
        for (Eigen::Index i = 0; i < tr.n_states(); ++i) out += "," + format_double(tr.X(i, k));
        for (Eigen::Index i = 0; i < tr.n_inputs(); ++i)
            out += "," + (k < tr.length() ? format_double(tr.U(i, k)) : std::string("nan"));
        out += "\n";
    }
    return out;
}

struct CsvTrajectory {
    Trajectory traj;
    std::vector<std::pair<std::string, std::string>> meta;
};

inline CsvTrajectory trajectory_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    CsvTrajectory res;
    std::vector<std::vector<double>> rows;
    std::size_t width = 0;
    Eigen::Index n = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto body = line.substr(line.find_first_not_of("# "));
            const auto eq = body.find('=');
            if (eq != std::string::npos) res.meta.emplace_back(body.substr(0, eq), body.substr(eq + 1));
            continue;
        }
        const auto fields = split_fields(line);
        if (!header_seen) {
            if (fields.size() < 3 || fields[0] != "t") throw DataError("trajectory csv: bad header '" + line + "'");
            width = fields.size();
            for (const auto f : fields)
                if (!f.empty() && f[0] == 'h') ++n;
            if (n < 1 || static_cast<std::size_t>(n) + 1 >= width) throw DataError("trajectory csv: bad header '" + line + "'");
            header_seen = true;
            continue;
        }
        if (fields.size() != width) throw DataError("trajectory csv: row with " + std::to_string(fields.size()) + " fields");
        std::vector<double> row;
        row.reserve(width);
        for (const auto f : fields) row.push_back(parse_double(f));
        rows.push_back(std::move(row));
    }
    if (!header_seen || rows.size() < 2) throw DataError("trajectory csv: need a header and at least two rows");
    const Eigen::Index m = static_cast<Eigen::Index>(width) - 1 - n;
    const Eigen::Index T = static_cast<Eigen::Index>(rows.size()) - 1;
    Trajectory& tr = res.traj;
    tr.X.resize(n, T + 1);
    tr.U.resize(m, T);
    for (Eigen::Index k = 0; k <= T; ++k) {
        const auto& r = rows[static_cast<std::size_t>(k)];
        for (Eigen::Index i = 0; i < n; ++i) tr.X(i, k) = r[static_cast<std::size_t>(1 + i)];
        if (k < T)
            for (Eigen::Index i = 0; i < m; ++i) tr.U(i, k) = r[static_cast<std::size_t>(1 + n + i)];
    }
    tr.Ts = rows[1][0] - rows[0][0];
    try {
        tr.validate();
    } catch (const PreconditionError& e) {
        throw DataError(std::string("trajectory csv: ") + e.what());
    }
    return res;
}

}  // namespace dkoop::io
