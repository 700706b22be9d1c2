#pragma once

// Line-oriented text helpers shared by the dataset, checkpoint and curve writers.

#include "gapalign/core.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace gapalign::text {

namespace fs = std::filesystem;

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

/// Fixed 17 significant digits (exact round-trip, stable width class).
inline std::string format_double17(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

/// One content line with its 1-based physical line number.
struct Line {
    std::size_t number;
    std::string text;
};

/// Non-blank, non-comment ('#') lines of a text file.
inline std::vector<Line> read_content_lines(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
    std::vector<Line> out;
    std::string raw;
    std::size_t n = 0;
    while (std::getline(in, raw)) {
        ++n;
        const auto t = trim(raw);
        if (t.empty() || t.front() == '#') continue;
        out.push_back({n, std::string(t)});
    }
    return out;
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

/// Split on any of `seps`, keeping empty fields so "1,,2" is caught as malformed.
inline std::vector<std::string_view> split(std::string_view s, std::string_view seps) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find_first_of(seps, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Whitespace-separated tokens.
inline std::vector<std::string_view> tokens(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        const std::size_t j = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
        if (i > j) out.push_back(s.substr(j, i - j));
    }
    return out;
}

inline bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
    if (s.empty()) return false;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

/// "file:line: message" formatted data error.
inline Error data_error(const fs::path& file, std::size_t line, const std::string& msg) {
    return Error(ErrorCode::data, file.filename().string() + ":" + std::to_string(line) + ": " + msg);
}

/// Rows of comma-separated doubles; every value must be finite.
inline Matrix read_real_csv(const fs::path& path) {
    const auto lines = read_content_lines(path);
    std::vector<std::vector<double>> rows;
    rows.reserve(lines.size());
    for (const auto& ln : lines) {
        std::vector<double> row;
        for (auto field : split(ln.text, ",")) {
            double v = 0.0;
            if (!parse_double(field, v))
                throw data_error(path, ln.number, "not a number: '" + std::string(field) + "'");
            if (!std::isfinite(v)) throw data_error(path, ln.number, "non-finite value");
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw data_error(path, ln.number,
                             "dimension mismatch: expected " + std::to_string(rows.front().size()) +
                                 " values, found " + std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    const auto cols = rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size());
    Matrix m(static_cast<Eigen::Index>(rows.size()), cols);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), j) = rows[i][j];
    return m;
}

inline std::string matrix_csv(const Matrix& m) {
    std::string out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            out += format_double(m(i, j));
        }
        out += '\n';
    }
    return out;
}

}  // namespace gapalign::text
