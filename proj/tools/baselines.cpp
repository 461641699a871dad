#include "baselines.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

namespace co2 {

std::vector<Index> herd_indices(const Matrix& M, Index m) {
    const Index n = M.rows();
    if (M.cols() != n) {
        throw UsageError("herd_indices: score matrix must be square");
    }
    if (m < 1 || m > n) {
        throw UsageError("herd_indices: m must lie in [1, n]");
    }

    const Vector mu = M.rowwise().mean();
    Vector penalty = Vector::Zero(n);
    std::vector<char> used(static_cast<std::size_t>(n), 0);
    std::vector<Index> picks;
    picks.reserve(static_cast<std::size_t>(m));

    for (Index t = 0; t < m; ++t) {
        double best = -std::numeric_limits<double>::infinity();
        Index arg = -1;
        for (Index i = 0; i < n; ++i) {
            if (used[static_cast<std::size_t>(i)]) continue;
            const double score = mu(i) - penalty(i) / static_cast<double>(t + 1);
            if (score > best) {
                best = score;
                arg = i;
            }
        }
        used[static_cast<std::size_t>(arg)] = 1;
        picks.push_back(arg);
        penalty += M.col(arg);
    }
    return picks;
}

Coreset kernel_herding(const DiscreteDistribution& data,
                       const SinkhornQuadraticForm& form, Index m) {
    const Index n = data.n();
    if (form.n() != n) {
        throw UsageError("kernel_herding: form was built for a different sample size");
    }
    const Matrix score = static_cast<double>(n) * form.plan.plan;
    std::vector<Index> idx = herd_indices(score, m);
    std::sort(idx.begin(), idx.end());

    Coreset c;
    c.parent = data.cloud;
    c.indices = std::move(idx);
    c.weights = Vector::Constant(m, 1.0 / static_cast<double>(m));
    c.method = "herding";
    c.m_target = m;
    return c;
}

Coreset random_coreset(const DiscreteDistribution& data, Index m,
                       std::uint64_t seed) {
    const Index n = data.n();
    if (m < 1 || m > n) {
        throw UsageError("random_coreset: m must lie in [1, n]");
    }

    std::vector<Index> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), Index{0});
    std::mt19937_64 rng(seed);
    for (Index i = 0; i < m; ++i) {
        std::uniform_int_distribution<Index> pick(i, n - 1);
        std::swap(pool[static_cast<std::size_t>(i)],
                  pool[static_cast<std::size_t>(pick(rng))]);
    }
    std::vector<Index> idx(pool.begin(), pool.begin() + m);
    std::sort(idx.begin(), idx.end());

    Coreset c;
    c.parent = data.cloud;
    c.indices = std::move(idx);
    c.weights = Vector::Constant(m, 1.0 / static_cast<double>(m));
    c.method = "random";
    c.m_target = m;
    c.seed = seed;
    return c;
}

}  // namespace co2
