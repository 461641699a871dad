#pragma once

#include "co2/common.hpp"
#include "co2/data.hpp"
#include "co2/lowrank.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace co2 {

// Linear functionals a reduction must conserve: the all-ones column is always
// present, eigenvector columns and optionally the kernel diagonal follow.
struct MomentSystem {
    Matrix basis;  // n x p, finite entries, p <= n
    Index n() const { return basis.rows(); }
    Index p() const { return basis.cols(); }
};

struct Coreset {
    const PointCloud* parent = nullptr;
    std::vector<Index> indices;  // ascending
    Vector weights;              // aligned with indices, > 0, sums to 1
    std::string method;
    Index m_target = 0;
    std::uint64_t seed = 0;
    // Quadratic compression error recorded by the pipeline; NaN until set.
    double quad_value = std::numeric_limits<double>::quiet_NaN();
};

// Scatter coreset weights back to a length-n vector (zeros off support).
Vector full_weights(const Coreset& c, Index n);

// Copy of the parent rows on the support, in index order.
PointCloud coreset_points(const Coreset& c);

// Support reduction to at most m = U.cols()+1 points conserving total mass
// and the moments U^T w exactly. The elimination phase also conserves the
// k_diag moment; the final step releases it in the direction that cannot
// increase sum(k_diag * w), which is what the sign step is for.
// lambda is carried for diagnostics only and does not affect the result.
Coreset recombine(const DiscreteDistribution& input, const Matrix& U,
                  const Vector& k_diag, const Vector& lambda);

// One elimination pass conserving mass and the top m_max-1 factor columns
// (k_diag intentionally excluded), evaluating quad(w - w_input) after every
// step. Stops before the first step whose error exceeds tau and returns the
// iterate preceding it; with tau large enough the pass runs to support
// ~ m_max. quad receives the full-length signed difference vector.
// *crossed reports whether the threshold was hit (nullptr to ignore).
Coreset sweep(const DiscreteDistribution& input, const PsdFactor& factor,
              const std::function<double(const Vector&)>& quad, Index m_max,
              double tau, bool* crossed = nullptr);

}  // namespace co2
