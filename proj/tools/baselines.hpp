#pragma once

#include "co2/co2.hpp"

namespace co2 {

// Greedy kernel herding on a symmetric score matrix M: step t+1 picks the
// unselected index maximizing rowmean(M)_i - sum_{j selected} M(i,j) / (t+1).
// Ties go to the lowest index. Returns the m picks in selection order.
std::vector<Index> herd_indices(const Matrix& M, Index m);

// Herding baseline on the n*pi kernel underlying the form, uniform weights
// 1/m. Callers wanting optimized weights pass the result to refine_weights.
Coreset kernel_herding(const DiscreteDistribution& data,
                       const SinkhornQuadraticForm& form, Index m);

// m distinct indices drawn uniformly without replacement, uniform weights.
Coreset random_coreset(const DiscreteDistribution& data, Index m,
                       std::uint64_t seed);

}  // namespace co2
