#pragma once

#include "co2/common.hpp"

#include <string>
#include <utility>

namespace co2 {

// Row-major point set: n samples in d dimensions. All coordinates finite.
struct PointCloud {
    Matrix points;

    Index n() const { return points.rows(); }
    Index d() const { return points.cols(); }
};

// Convex weights over a PointCloud. The cloud is referenced, not owned; the
// caller keeps it alive. Weights are stored dense, support is derived as
// {i : w_i > 0}; eliminated atoms carry literal zeros.
struct DiscreteDistribution {
    const PointCloud* cloud = nullptr;
    Vector weights;

    Index n() const { return weights.size(); }
};

struct StandardizationStats {
    Vector mean;
    Vector stddev;  // strictly positive; constant columns recorded as 1
};

// Validates finiteness and shape; throws on NaN/Inf or empty input.
void validate(const PointCloud& cloud);

// Checks weights >= 0, |sum - 1| <= 1e-12, nonempty support; throws otherwise.
DiscreteDistribution make_distribution(const PointCloud& cloud, Vector weights);

// Comma-separated, UTF-8, optional single header row. Blank lines are
// skipped; ragged or non-numeric rows raise with the offending row/column.
PointCloud load_csv(const std::string& path, bool has_header);

// Centers each column and divides by its population stddev (divide by n).
// Constant columns become all zeros with stddev recorded as 1. Requires n >= 2.
std::pair<PointCloud, StandardizationStats> standardize(const PointCloud& cloud);

// Inverse of standardize given the recorded stats.
PointCloud destandardize(const PointCloud& cloud, const StandardizationStats& stats);

DiscreteDistribution uniform(const PointCloud& cloud);

}  // namespace co2
