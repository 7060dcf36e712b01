#pragma once
#include <mfedch/errors.hpp>
#include <Eigen/Core>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace mfedch {
namespace csv {

inline std::string_view trim(std::string_view s)
{
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> read_lines(const std::string& path)
{
    std::ifstream in(path);
    if (!in) fail(ErrorKind::parse, "cannot open '" + path + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    // Trailing blank lines are not rows.
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    return lines;
}

inline std::string location(const std::string& path, std::size_t row, std::size_t col)
{
    return path + ":row " + std::to_string(row + 1) + ":col " + std::to_string(col + 1);
}

inline double parse_double(std::string_view cell, const std::string& path,
                           std::size_t row, std::size_t col)
{
    cell = trim(cell);
    double value = 0.0;
    const auto* first = cell.data();
    const auto* last = cell.data() + cell.size();
    if (!cell.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (cell.empty() || ec != std::errc{} || ptr != last) {
        fail(ErrorKind::parse, "non-numeric cell '" + std::string(cell) + "' at " +
                                   location(path, row, col));
    }
    return value;
}

/*
 * Reads a numeric CSV (no header, comma delimiter) as a rows x cols matrix.
 * Every row must have the same number of cells.
 */
inline Eigen::MatrixXd read_matrix(const std::string& path)
{
    const auto lines = read_lines(path);
    std::vector<std::vector<double>> rows;
    rows.reserve(lines.size());
    for (std::size_t r = 0; r < lines.size(); ++r) {
        std::vector<double> row;
        std::string_view rest = lines[r];
        std::size_t c = 0;
        while (true) {
            const auto comma = rest.find(',');
            row.push_back(parse_double(rest.substr(0, comma), path, r, c));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
            ++c;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            fail(ErrorKind::parse, path + ":row " + std::to_string(r + 1) + " has " +
                                       std::to_string(row.size()) + " cells, expected " +
                                       std::to_string(rows.front().size()));
        }
        rows.push_back(std::move(row));
    }
    const auto nrows = static_cast<Eigen::Index>(rows.size());
    const auto ncols = rows.empty() ? Eigen::Index{0} : static_cast<Eigen::Index>(rows.front().size());
    Eigen::MatrixXd out(nrows, ncols);
    for (Eigen::Index r = 0; r < nrows; ++r)
        for (Eigen::Index c = 0; c < ncols; ++c)
            out(r, c) = rows[r][c];
    return out;
}

inline std::vector<int> read_labels(const std::string& path)
{
    const auto lines = read_lines(path);
    std::vector<int> labels;
    labels.reserve(lines.size());
    for (std::size_t r = 0; r < lines.size(); ++r) {
        const auto cell = trim(lines[r]);
        int value = 0;
        const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
        if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) {
            fail(ErrorKind::parse, "non-integer label '" + std::string(cell) + "' at " +
                                       location(path, r, 0));
        }
        labels.push_back(value);
    }
    return labels;
}

// 17 significant digits: every double round-trips exactly.
inline std::string format_double(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline void write_matrix(const std::string& path, const Eigen::MatrixXd& m)
{
    std::ofstream out(path);
    if (!out) fail(ErrorKind::usage, "cannot write '" + path + "'");
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out << ',';
            out << format_double(m(r, c));
        }
        out << '\n';
    }
}

inline void write_labels(const std::string& path, const std::vector<int>& labels)
{
    std::ofstream out(path);
    if (!out) fail(ErrorKind::usage, "cannot write '" + path + "'");
    for (int l : labels) out << l << '\n';
}

} // namespace csv
} // namespace mfedch
