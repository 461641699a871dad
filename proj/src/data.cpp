#include "co2/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <vector>

namespace co2 {

void validate(const PointCloud& cloud) {
    if (cloud.n() < 1 || cloud.d() < 1)
        throw std::runtime_error("point cloud is empty");
    if (!cloud.points.allFinite())
        throw std::runtime_error("point cloud contains NaN or Inf");
}

DiscreteDistribution make_distribution(const PointCloud& cloud, Vector weights) {
    if (weights.size() != cloud.n())
        throw std::runtime_error("weight vector length does not match point count");
    if ((weights.array() < 0.0).any())
        throw std::runtime_error("negative weight in distribution");
    const double total = weights.sum();
    if (std::abs(total - 1.0) > 1e-12)
        throw std::runtime_error("weights sum to " + std::to_string(total) + ", expected 1");
    if ((weights.array() > 0.0).count() == 0)
        throw std::runtime_error("distribution has empty support");
    return DiscreteDistribution{&cloud, std::move(weights)};
}

namespace {

// Strict numeric cell parse; leading/trailing spaces tolerated.
bool parse_cell(const std::string& cell, double& out) {
    std::size_t a = cell.find_first_not_of(" \t\r");
    if (a == std::string::npos) return false;
    std::size_t b = cell.find_last_not_of(" \t\r");
    const char* first = cell.data() + a;
    const char* last = cell.data() + b + 1;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && std::isfinite(out);
}

void split_line(const std::string& line, std::vector<std::string>& cells) {
    cells.clear();
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            cells.push_back(line.substr(start));
            return;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

bool blank(const std::string& line) {
    return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

PointCloud load_csv(const std::string& path, bool has_header) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);

    std::vector<std::vector<double>> rows;
    std::vector<std::string> cells;
    std::string line;
    std::size_t lineno = 0;
    bool skipped_header = !has_header;
    std::size_t width = 0;

    while (std::getline(in, line)) {
        ++lineno;
        if (blank(line)) continue;
        if (!skipped_header) {
            skipped_header = true;
            continue;
        }
        split_line(line, cells);
        if (width == 0) width = cells.size();
        if (cells.size() != width)
            throw std::runtime_error(path + ": row " + std::to_string(lineno) + " has " +
                                     std::to_string(cells.size()) + " columns, expected " +
                                     std::to_string(width));
        std::vector<double> row(width);
        for (std::size_t c = 0; c < width; ++c) {
            if (!parse_cell(cells[c], row[c]))
                throw std::runtime_error(path + ": non-numeric cell at row " +
                                         std::to_string(lineno) + ", column " +
                                         std::to_string(c + 1));
        }
        rows.push_back(std::move(row));
    }
    if (in.bad()) throw std::runtime_error("I/O error reading " + path);
    if (rows.empty()) throw std::runtime_error(path + ": no rows");

    PointCloud cloud;
    cloud.points.resize(static_cast<Index>(rows.size()), static_cast<Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < width; ++j)
            cloud.points(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    validate(cloud);
    return cloud;
}

std::pair<PointCloud, StandardizationStats> standardize(const PointCloud& cloud) {
    validate(cloud);
    const Index n = cloud.n(), d = cloud.d();
    if (n < 2) throw std::runtime_error("standardize needs at least 2 points");

    StandardizationStats stats;
    stats.mean = cloud.points.colwise().mean();
    Matrix centered = cloud.points.rowwise() - stats.mean.transpose();
    // Population convention: variance divides by n.
    Vector var = centered.array().square().colwise().mean();
    stats.stddev.resize(d);

    PointCloud out;
    out.points.resize(n, d);
    for (Index j = 0; j < d; ++j) {
        const double sd = std::sqrt(var[j]);
        if (sd < 1e-12 * (1.0 + std::abs(stats.mean[j]))) {
            stats.stddev[j] = 1.0;
            out.points.col(j).setZero();
        } else {
            stats.stddev[j] = sd;
            out.points.col(j) = centered.col(j) / sd;
        }
    }
    return {std::move(out), std::move(stats)};
}

PointCloud destandardize(const PointCloud& cloud, const StandardizationStats& stats) {
    if (cloud.d() != stats.mean.size())
        throw std::runtime_error("standardization stats dimension mismatch");
    PointCloud out;
    out.points = (cloud.points.array().rowwise() * stats.stddev.transpose().array()).rowwise() +
                 stats.mean.transpose().array();
    return out;
}

DiscreteDistribution uniform(const PointCloud& cloud) {
    validate(cloud);
    return DiscreteDistribution{&cloud, Vector::Constant(cloud.n(), 1.0 / double(cloud.n()))};
}

}  // namespace co2
