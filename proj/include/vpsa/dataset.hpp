#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vpsa/errors.hpp"

namespace vpsa {

struct Dataset {
    Eigen::MatrixXd features;  // d x m
    Eigen::VectorXd labels;    // m
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline double parse_double(const std::string& cell, std::size_t line_no) {
    std::size_t begin = cell.find_first_not_of(" \t\r");
    if (begin == std::string::npos)
        throw ConfigError("dataset: empty numeric cell on line " + std::to_string(line_no));
    std::size_t end = cell.find_last_not_of(" \t\r") + 1;
    double value = 0.0;
    const char* first = cell.data() + begin;
    const char* last = cell.data() + end;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw ConfigError("dataset: cannot parse '" + cell + "' on line " + std::to_string(line_no));
    return value;
}

}  // namespace detail

// Loads a dataset of k feature columns plus one trailing label column. A
// header row is required. Rows violating |z| <= radius or |w| <= radius are
// rejected, with their line numbers collected into the error.
inline Dataset load_dataset_csv(const std::string& path, double radius) {
    std::ifstream in(path);
    if (!in) throw IoError("dataset: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw ConfigError("dataset: missing header row in " + path);
    const std::size_t columns = detail::split_csv_line(line).size();
    if (columns < 2) throw ConfigError("dataset: need at least one feature and one label column");
    const std::size_t k = columns - 1;

    std::vector<Eigen::VectorXd> rows;
    std::vector<double> labels;
    std::vector<std::size_t> rejected;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != columns)
            throw ConfigError("dataset: line " + std::to_string(line_no) + " has " +
                              std::to_string(cells.size()) + " cells, expected " +
                              std::to_string(columns));
        Eigen::VectorXd z(static_cast<Eigen::Index>(k));
        for (std::size_t c = 0; c < k; ++c)
            z[static_cast<Eigen::Index>(c)] = detail::parse_double(cells[c], line_no);
        const double w = detail::parse_double(cells[k], line_no);
        if (z.norm() > radius || std::abs(w) > radius) {
            rejected.push_back(line_no);
            continue;
        }
        rows.push_back(std::move(z));
        labels.push_back(w);
    }
    if (!rejected.empty()) {
        std::ostringstream msg;
        msg << "dataset: rows violating |z| <= R or |w| <= R at lines:";
        for (auto r : rejected) msg << ' ' << r;
        throw ConfigError(msg.str());
    }
    if (rows.empty()) throw ConfigError("dataset: no data rows in " + path);

    Dataset d;
    d.features.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(rows.size()));
    d.labels.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        d.features.col(static_cast<Eigen::Index>(i)) = rows[i];
        d.labels[static_cast<Eigen::Index>(i)] = labels[i];
    }
    return d;
}

}  // namespace vpsa
