#include "co2/recombination.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace co2 {

namespace {

// Entries of a unit-infinity-norm direction below this count as zero in the
// ratio tests.
constexpr double kDirTol = 1e-13;
// Largest conserved-moment violation tolerated for a direction before the
// rank-revealing fallback takes over.
constexpr double kOrthoTol = 1e-11;
// Weights below this after a step indicate a defect, not roundoff.
constexpr double kNegTol = -1e-8;

std::string rank_tag(Index rank, Index cols) {
    return "[rank " + std::to_string(static_cast<long long>(rank)) + "/" +
           std::to_string(static_cast<long long>(cols)) + "]";
}

// Zeroes every coordinate within roundoff of the boundary and returns their
// positions (ascending). The caller removes them from the active set.
std::vector<Index> boundary_zeros(Vector& w) {
    const double ztol = 1e-14 * std::max(1.0, w.maxCoeff());
    if (w.minCoeff() < kNegTol) {
        throw std::runtime_error(
            "recombination: negative weight beyond tolerance (internal defect)");
    }
    std::vector<Index> drop;
    for (Index i = 0; i < w.size(); ++i) {
        if (w(i) <= ztol) {
            w(i) = 0.0;
            drop.push_back(i);
        }
    }
    return drop;
}

void compact(std::vector<Index>& idx, Vector& w, Matrix* a, const std::vector<Index>& drop) {
    if (drop.empty()) {
        return;
    }
    const Index live = static_cast<Index>(idx.size());
    const Index kept = live - static_cast<Index>(drop.size());
    std::vector<Index> new_idx;
    new_idx.reserve(kept);
    Vector new_w(kept);
    Matrix new_a;
    if (a) {
        new_a.resize(kept, a->cols());
    }
    std::size_t di = 0;
    Index out = 0;
    for (Index i = 0; i < live; ++i) {
        if (di < drop.size() && drop[di] == i) {
            ++di;
            continue;
        }
        new_idx.push_back(idx[i]);
        new_w(out) = w(i);
        if (a) {
            new_a.row(out) = a->row(i);
        }
        ++out;
    }
    idx = std::move(new_idx);
    w = std::move(new_w);
    if (a) {
        *a = std::move(new_a);
    }
}

struct ElimResult {
    std::vector<Index> idx;
    Vector w;
    Index block_rank = 0;
    bool crossed = false;
    double err = 0.0;
};

// Repeatedly steps the weights along directions orthogonal to the conserved
// block until the support matches the block rank, zeroing one coordinate (or
// several, on ties) per step. With err_fn set, the error is evaluated after
// every step and the iterate preceding the first crossing of tau is returned.
ElimResult eliminate(const Vector& w0, const Matrix& block,
                     const std::function<double(const Vector&)>* err_fn, double tau) {
    const Index n = w0.size();

    // One orthonormalization of the conserved span; the rank cut keeps the
    // direction solves well conditioned when columns are dependent.
    Eigen::JacobiSVD<Matrix> svd(block, Eigen::ComputeThinU);
    const Vector& sv = svd.singularValues();
    const double top = sv.size() > 0 ? sv(0) : 0.0;
    const double cut =
        static_cast<double>(std::max(block.rows(), block.cols())) *
        std::numeric_limits<double>::epsilon() * top;
    Index rank = 0;
    while (rank < sv.size() && sv(rank) > cut) {
        ++rank;
    }
    if (rank < 1) {
        throw std::runtime_error("recombination: conserved system has rank 0");
    }
    const Matrix q = svd.matrixU().leftCols(rank);

    std::vector<Index> idx;
    for (Index i = 0; i < n; ++i) {
        if (w0(i) > 0.0) {
            idx.push_back(i);
        }
    }
    Index live = static_cast<Index>(idx.size());
    Vector w(live);
    Matrix a(live, rank);
    for (Index i = 0; i < live; ++i) {
        w(i) = w0(idx[i]);
        a.row(i) = q.row(idx[i]);
    }

    Matrix gram = a.transpose() * a;
    Eigen::LLT<Matrix> llt(gram);
    bool llt_ok = llt.info() == Eigen::Success;
    int steps_since_refresh = 0;
    auto refresh = [&]() {
        gram.noalias() = a.transpose() * a;
        llt.compute(gram);
        llt_ok = llt.info() == Eigen::Success;
        steps_since_refresh = 0;
    };

    // Projection of the pivot axis onto the orthogonal complement of the
    // conserved basis restricted to the active set.
    Vector qj, t, u;
    auto primary_direction = [&](Index j) -> bool {
        if (!llt_ok) {
            return false;
        }
        qj = a.row(j).transpose();
        t = llt.solve(qj);
        u.noalias() = a * t;
        u = -u;
        u(j) += 1.0;
        const double scale = u.cwiseAbs().maxCoeff();
        if (!(scale > 1e-12)) {
            return false;
        }
        u /= scale;
        const double viol = (a.transpose() * u).cwiseAbs().maxCoeff();
        return viol <= kOrthoTol;
    };
    auto fallback_direction = [&]() -> bool {
        Eigen::ColPivHouseholderQR<Matrix> qr(a);
        const Index r = qr.rank();
        if (live <= r) {
            return false;
        }
        u = qr.householderQ() * Vector::Unit(live, r);
        u /= u.cwiseAbs().maxCoeff();
        return true;
    };

    ElimResult out;
    out.block_rank = rank;

    std::vector<Index> prev_idx;
    Vector prev_w;
    double prev_err = 0.0;
    Vector scatter(n);
    std::vector<Index> order;

    while (live > rank) {
        if (err_fn) {
            prev_idx = idx;
            prev_w = w;
        }

        // Pivots are tried from the lightest weight up; the projected axis
        // direction usually eliminates the pivot itself.
        order.resize(live);
        std::iota(order.begin(), order.end(), Index{0});
        std::sort(order.begin(), order.end(), [&](Index x, Index y) {
            return w(x) < w(y) || (w(x) == w(y) && x < y);
        });
        bool have_dir = false;
        for (Index attempt = 0; attempt < 4 && attempt < live; ++attempt) {
            if (primary_direction(order[attempt])) {
                have_dir = true;
                break;
            }
        }
        if (!have_dir && !fallback_direction()) {
            break;
        }

        double a_pos = std::numeric_limits<double>::infinity();
        double a_neg = std::numeric_limits<double>::infinity();
        Index k_pos = -1;
        Index k_neg = -1;
        for (Index i = 0; i < live; ++i) {
            if (u(i) > kDirTol) {
                const double r = w(i) / u(i);
                if (r < a_pos) {
                    a_pos = r;
                    k_pos = i;
                }
            } else if (u(i) < -kDirTol) {
                const double r = w(i) / -u(i);
                if (r < a_neg) {
                    a_neg = r;
                    k_neg = i;
                }
            }
        }
        if (!std::isfinite(a_pos) && !std::isfinite(a_neg)) {
            break;
        }
        double alpha;
        Index k_star;
        if (a_neg < a_pos) {
            u = -u;
            alpha = a_neg;
            k_star = k_neg;
        } else {
            alpha = a_pos;
            k_star = k_pos;
        }

        w -= alpha * u;
        w(k_star) = 0.0;
        const std::vector<Index> drop = boundary_zeros(w);

        if (drop.size() == 1 && llt_ok && steps_since_refresh < 128) {
            qj = a.row(drop[0]).transpose();
            llt.rankUpdate(qj, -1.0);
            if (llt.info() != Eigen::Success) {
                llt_ok = false;
            }
            ++steps_since_refresh;
            compact(idx, w, &a, drop);
        } else {
            compact(idx, w, &a, drop);
            refresh();
        }
        live = static_cast<Index>(idx.size());
        if (!llt_ok && steps_since_refresh > 0) {
            refresh();
        }

        if (err_fn) {
            scatter.setZero();
            for (Index i = 0; i < live; ++i) {
                scatter(idx[i]) = w(i);
            }
            scatter -= w0;
            const double e = (*err_fn)(scatter);
            if (e > tau) {
                idx = std::move(prev_idx);
                w = std::move(prev_w);
                out.crossed = true;
                out.err = prev_err;
                break;
            }
            prev_err = e;
            out.err = e;
        }
    }

    out.idx = std::move(idx);
    out.w = std::move(w);
    return out;
}

Coreset assemble(const DiscreteDistribution& input, std::vector<Index> idx, Vector w,
                 std::string method, Index m_target) {
    Coreset c;
    c.parent = input.cloud;
    c.indices = std::move(idx);
    c.weights = std::move(w);
    c.method = std::move(method);
    c.m_target = m_target;
    return c;
}

}  // namespace

Vector full_weights(const Coreset& c, Index n) {
    Vector w = Vector::Zero(n);
    for (std::size_t i = 0; i < c.indices.size(); ++i) {
        const Index j = c.indices[i];
        if (j < 0 || j >= n) {
            throw std::runtime_error("full_weights: support index out of range");
        }
        w(j) = c.weights(static_cast<Index>(i));
    }
    return w;
}

PointCloud coreset_points(const Coreset& c) {
    if (!c.parent) {
        throw std::runtime_error("coreset_points: coreset has no parent cloud");
    }
    PointCloud out;
    out.points.resize(static_cast<Index>(c.indices.size()), c.parent->d());
    for (std::size_t i = 0; i < c.indices.size(); ++i) {
        out.points.row(static_cast<Index>(i)) = c.parent->points.row(c.indices[i]);
    }
    return out;
}

Coreset recombine(const DiscreteDistribution& input, const Matrix& U,
                  const Vector& k_diag, const Vector& lambda) {
    if (!input.cloud) {
        throw std::runtime_error("recombine: distribution has no point cloud");
    }
    const Index n = input.n();
    if (U.rows() != n) {
        throw std::runtime_error("recombine: moment matrix rows do not match the distribution");
    }
    if (k_diag.size() != n) {
        throw std::runtime_error("recombine: diagonal length does not match the distribution");
    }
    if (U.cols() < 1) {
        throw UsageError("recombine: at least one moment column is required (m >= 2)");
    }
    if (!U.allFinite() || !k_diag.allFinite()) {
        throw std::runtime_error("recombine: non-finite moment data");
    }
    (void)lambda;  // diagnostics only

    const Index m = U.cols() + 1;
    Matrix block(n, U.cols() + 2);
    block.col(0).setOnes();
    block.middleCols(1, U.cols()) = U;
    block.col(U.cols() + 1) = k_diag;

    ElimResult r = eliminate(input.weights, block, nullptr, 0.0);
    std::vector<Index> idx = std::move(r.idx);
    Vector w = std::move(r.w);

    // Terminal reductions drop the k_diag column from the conserved system
    // and step against the orientation that would raise the k_diag moment.
    while (static_cast<Index>(idx.size()) > m) {
        const Index live = static_cast<Index>(idx.size());
        Matrix af(live, m);
        af.col(0).setOnes();
        for (Index i = 0; i < live; ++i) {
            af.row(i).tail(m - 1) = U.row(idx[i]);
        }
        Eigen::JacobiSVD<Matrix> svd(af, Eigen::ComputeFullU);
        Vector u = svd.matrixU().col(live - 1);
        u /= u.cwiseAbs().maxCoeff();
        double orient = 0.0;
        for (Index i = 0; i < live; ++i) {
            orient += u(i) * k_diag(idx[i]);
        }
        if (orient < 0.0) {
            u = -u;
        }
        double alpha = std::numeric_limits<double>::infinity();
        Index k_star = -1;
        for (Index i = 0; i < live; ++i) {
            if (u(i) > kDirTol) {
                const double ratio = w(i) / u(i);
                if (ratio < alpha) {
                    alpha = ratio;
                    k_star = i;
                }
            }
        }
        if (k_star < 0) {
            throw std::runtime_error("recombination: no admissible terminal step (internal defect)");
        }
        w -= alpha * u;
        w(k_star) = 0.0;
        compact(idx, w, nullptr, boundary_zeros(w));
    }

    std::string method = "recombination";
    if (r.block_rank < block.cols()) {
        method += rank_tag(r.block_rank, block.cols());
    }
    return assemble(input, std::move(idx), std::move(w), std::move(method), m);
}

Coreset sweep(const DiscreteDistribution& input, const PsdFactor& factor,
              const std::function<double(const Vector&)>& quad, Index m_max,
              double tau, bool* crossed) {
    if (!input.cloud) {
        throw std::runtime_error("sweep: distribution has no point cloud");
    }
    if (m_max < 2) {
        throw UsageError("sweep: m_max must be at least 2");
    }
    if (!(tau >= 0.0)) {
        throw UsageError("sweep: tau must be nonnegative");
    }
    if (!quad) {
        throw UsageError("sweep: quadratic-form evaluator is required");
    }
    const Index n = input.n();
    if (factor.U.rows() != n) {
        throw std::runtime_error("sweep: factor rows do not match the distribution");
    }

    const Index cols = std::min<Index>(m_max - 1, factor.U.cols());
    Matrix block(n, 1 + cols);
    block.col(0).setOnes();
    block.rightCols(cols) = factor.U.leftCols(cols);

    ElimResult r = eliminate(input.weights, block, &quad, tau);
    if (crossed) {
        *crossed = r.crossed;
    }

    std::string method = "sweep";
    if (r.block_rank < block.cols()) {
        method += rank_tag(r.block_rank, block.cols());
    }
    const Index support = static_cast<Index>(r.idx.size());
    Coreset c = assemble(input, std::move(r.idx), std::move(r.w), std::move(method), support);
    c.quad_value = r.err;
    return c;
}

}  // namespace co2
