#pragma once

#include "co2/common.hpp"
#include "co2/data.hpp"

namespace co2 {

// k(x,y) = exp(-|x-y|^2 / epsilon). The bandwidth sits in the denominator of
// the squared distance so the same epsilon doubles as the transport
// regularizer; there is deliberately no separate sigma.
struct GaussianKernel {
    double epsilon;
};

struct GramMatrix {
    Matrix entries;  // symmetric, unit diagonal
    double epsilon;
    const PointCloud* cloud = nullptr;

    Index n() const { return entries.rows(); }
};

double kernel_eval(const GaussianKernel& k, const Eigen::Ref<const Vector>& x,
                   const Eigen::Ref<const Vector>& y);

GramMatrix gram(const GaussianKernel& k, const PointCloud& cloud);

// w' K w with w = weights(a) - weights(b). Values in (-1e-10, 0) are clamped
// to 0 (roundoff); anything more negative raises: the input was not PSD.
double mmd_sq(const GramMatrix& K, const DiscreteDistribution& a,
              const DiscreteDistribution& b);

// Raw w' K w, no clamping.
double quad_form(const Eigen::Ref<const Matrix>& K, const Eigen::Ref<const Vector>& w);

// Probabilistic PSD check: v' K v >= -1e-8 |v|^2 for `probes` random v.
bool psd_probe(const Eigen::Ref<const Matrix>& K, int probes, std::uint64_t seed);

// Pairwise squared Euclidean distances between row sets, exactly symmetric
// when a and b alias. Shared by Gram construction and transport costs.
Matrix squared_distances(const Matrix& a, const Matrix& b);

}  // namespace co2
