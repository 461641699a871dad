#include "co2/co2.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace co2 {

namespace {

// Eigenvalues this close to 1 belong to the mass direction, which
// recombination conserves exactly; the exact-G transform excludes them.
constexpr double kUnitEigCut = 1.0 - 1e-8;

double clamp_quadratic(double q) {
    if (q >= 0.0) {
        return q;
    }
    if (q >= -1e-10) {
        return 0.0;
    }
    throw std::runtime_error("quadratic form: value " + std::to_string(q) +
                             " is not numerically PSD");
}

double transform_exact(double lambda) { return lambda / (1.0 - lambda * lambda); }

}  // namespace

void validate(const Co2Config& config, Index n) {
    if (n < 1) {
        throw UsageError("co2: the distribution is empty");
    }
    if (!std::isfinite(config.epsilon) || config.epsilon <= 0.0) {
        throw UsageError("co2: epsilon must be positive and finite");
    }
    if (config.theta < 2) {
        throw UsageError("co2: theta must be at least 2");
    }
    if (config.m && config.tau) {
        throw UsageError("co2: m and tau are mutually exclusive");
    }
    if (config.m) {
        if (*config.m < 1) {
            throw UsageError("co2: m must be positive");
        }
        if (*config.m > n) {
            throw UsageError("co2: m must not exceed the sample size");
        }
        if (*config.m == 1 && n > 1) {
            throw UsageError("co2: m must be at least 2");
        }
    } else if (config.tau) {
        if (std::isnan(*config.tau) || *config.tau < 0.0) {
            throw UsageError("co2: tau must be nonnegative");
        }
    }
    if (config.beta != 0.0 && !(config.beta > 0.0 && config.beta < 1.0)) {
        throw UsageError("co2: beta must lie in (0,1)");
    }
    if (config.m_max != 0 && (config.m_max < 2 || config.m_max > n)) {
        throw UsageError("co2: m_max must lie in [2, n]");
    }
    if (!(config.sinkhorn_tol > 0.0)) {
        throw UsageError("co2: sinkhorn tolerance must be positive");
    }
    if (config.sinkhorn_max_iter < 1) {
        throw UsageError("co2: sinkhorn max iterations must be positive");
    }
    if (config.tau_draws < 1000) {
        throw UsageError("co2: tau draws must be at least 1000");
    }
}

double resolve_beta(const Co2Config& config, Index n) {
    if (config.beta > 0.0) {
        return config.beta;
    }
    const double b = 1.0 / std::log(static_cast<double>(std::max<Index>(n, 2)));
    // 1/log n leaves (0,1) for n <= e; use a midrange level there.
    return (b > 0.0 && b < 1.0) ? b : 0.5;
}

Index resolve_m_max(const Co2Config& config, Index n) {
    if (config.m_max != 0) {
        return std::min<Index>(config.m_max, n);
    }
    if (n <= 2) {
        return n;
    }
    const Index guess = static_cast<Index>(std::ceil(2.0 * std::sqrt(static_cast<double>(n))));
    return std::clamp<Index>(guess, Index{2}, n);
}

double SinkhornQuadraticForm::operator()(const Vector& w) const {
    if (w.size() != plan.n()) {
        throw std::runtime_error("quadratic form: vector length does not match");
    }
    const double nn = static_cast<double>(plan.n());
    double q;
    if (mode == Mode::xi_fast) {
        q = 0.5 * epsilon * nn * nn * w.dot(plan.plan * w);
    } else {
        const Vector c = eig.U.transpose() * w;
        double acc = 0.0;
        for (Index i = 0; i < eig.lambda.size(); ++i) {
            const double l = eig.lambda(i);
            if (l < kUnitEigCut) {
                acc += transform_exact(l) * c(i) * c(i);
            }
        }
        q = 0.5 * epsilon * nn * acc;
        if (tail_remainder) {
            const double fast = nn * w.dot(plan.plan * w);
            double factored = 0.0;
            for (Index i = 0; i < eig.lambda.size(); ++i) {
                factored += eig.lambda(i) * c(i) * c(i);
            }
            const double tail = 0.5 * epsilon * nn * (fast - factored);
            if (tail > 0.0) {
                q += tail;
            }
        }
    }
    return clamp_quadratic(q);
}

Vector SinkhornQuadraticForm::diagonal() const {
    const double nn = static_cast<double>(plan.n());
    if (mode == Mode::xi_fast) {
        return (0.5 * epsilon * nn * nn) * plan.plan.diagonal();
    }
    Vector d = Vector::Zero(plan.n());
    for (Index j = 0; j < eig.lambda.size(); ++j) {
        const double l = eig.lambda(j);
        if (l < kUnitEigCut) {
            d += transform_exact(l) * eig.U.col(j).cwiseAbs2();
        }
    }
    return (0.5 * epsilon * nn) * d;
}

Matrix SinkhornQuadraticForm::restricted(const std::vector<Index>& support) const {
    const Index s = static_cast<Index>(support.size());
    const double nn = static_cast<double>(plan.n());
    if (mode == Mode::xi_fast) {
        const double scale = 0.5 * epsilon * nn * nn;
        Matrix out(s, s);
        for (Index i = 0; i < s; ++i) {
            for (Index j = 0; j < s; ++j) {
                out(i, j) = scale * plan.plan(support[i], support[j]);
            }
        }
        return out;
    }
    Matrix us(s, eig.U.cols());
    for (Index i = 0; i < s; ++i) {
        us.row(i) = eig.U.row(support[i]);
    }
    Vector dvals(eig.lambda.size());
    for (Index j = 0; j < eig.lambda.size(); ++j) {
        const double l = eig.lambda(j);
        dvals(j) = l < kUnitEigCut ? transform_exact(l) : 0.0;
    }
    Matrix out = (0.5 * epsilon * nn) * (us * dvals.asDiagonal() * us.transpose());
    Matrix sym = 0.5 * (out + out.transpose());
    return sym;
}

Vector SinkhornQuadraticForm::cross(const std::vector<Index>& support, const Vector& w_full) const {
    if (w_full.size() != plan.n()) {
        throw std::runtime_error("quadratic form: vector length does not match");
    }
    const Index s = static_cast<Index>(support.size());
    const double nn = static_cast<double>(plan.n());
    Vector out(s);
    if (mode == Mode::xi_fast) {
        const double scale = 0.5 * epsilon * nn * nn;
        for (Index i = 0; i < s; ++i) {
            out(i) = scale * plan.plan.row(support[i]).dot(w_full);
        }
        return out;
    }
    Vector c = eig.U.transpose() * w_full;
    for (Index j = 0; j < eig.lambda.size(); ++j) {
        const double l = eig.lambda(j);
        c(j) *= l < kUnitEigCut ? transform_exact(l) : 0.0;
    }
    for (Index i = 0; i < s; ++i) {
        out(i) = 0.5 * epsilon * nn * eig.U.row(support[i]).dot(c);
    }
    return out;
}

SinkhornQuadraticForm kernel_selection(const DiscreteDistribution& data, const Co2Config& config) {
    const Index n = data.n();
    validate(config, n);

    SinkhornQuadraticForm form;
    form.mode = config.use_exact_G ? SinkhornQuadraticForm::Mode::G_exact
                                   : SinkhornQuadraticForm::Mode::xi_fast;
    form.epsilon = config.epsilon;
    form.plan = self_plan(data, config.epsilon, config.sinkhorn_tol, config.sinkhorn_max_iter);

    const Index base = config.m ? *config.m : resolve_m_max(config, n);
    const Index width = std::min<Index>(config.theta * base, n);
    const Index rank = std::min<Index>(base, width);
    const Matrix npi = static_cast<double>(n) * form.plan.plan;
    form.eig = nystrom(dense_handle(npi), rank, width, split_seed(config.seed, stream::sketch));
    return form;
}

namespace {

Coreset identity_coreset(const DiscreteDistribution& data, Index m_target, std::uint64_t seed) {
    Coreset c;
    c.parent = data.cloud;
    for (Index i = 0; i < data.n(); ++i) {
        if (data.weights(i) > 0.0) {
            c.indices.push_back(i);
        }
    }
    c.weights.resize(static_cast<Index>(c.indices.size()));
    for (std::size_t i = 0; i < c.indices.size(); ++i) {
        c.weights(static_cast<Index>(i)) = data.weights(c.indices[i]);
    }
    c.method = "co2";
    c.m_target = m_target;
    c.seed = seed;
    c.quad_value = 0.0;
    return c;
}

// Keeps any rank-deficiency annotation from the reduction step.
std::string with_co2_tag(const std::string& inner) {
    const auto pos = inner.find('[');
    return pos == std::string::npos ? std::string("co2") : "co2" + inner.substr(pos);
}

}  // namespace

Coreset compress(const DiscreteDistribution& data, const Co2Config& config) {
    const Index n = data.n();
    validate(config, n);

    if ((config.m && *config.m >= n) || n == 1) {
        return identity_coreset(data, config.m ? *config.m : Index{1}, config.seed);
    }

    SinkhornQuadraticForm form = kernel_selection(data, config);
    return compress(data, config, form);
}

Coreset compress(const DiscreteDistribution& data, const Co2Config& config,
                 const SinkhornQuadraticForm& form) {
    const Index n = data.n();
    validate(config, n);
    if (form.n() != n) {
        throw UsageError("compress: form was built for a different sample size");
    }

    if ((config.m && *config.m >= n) || n == 1) {
        return identity_coreset(data, config.m ? *config.m : Index{1}, config.seed);
    }

    Coreset c;
    if (config.m) {
        const Index m = *config.m;
        const Index cols = std::min<Index>(m - 1, form.eig.U.cols());
        c = recombine(data, form.eig.U.leftCols(cols), form.diagonal(), form.eig.lambda);
        c.m_target = m;
    } else {
        const Index m_max = resolve_m_max(config, n);
        double tau;
        if (config.tau) {
            tau = *config.tau;
        } else {
            PsdFactor scaled = form.eig;
            for (Index j = 0; j < scaled.lambda.size(); ++j) {
                const double l = scaled.lambda(j);
                if (form.mode == SinkhornQuadraticForm::Mode::xi_fast) {
                    scaled.lambda(j) = 0.5 * config.epsilon * l;
                } else {
                    scaled.lambda(j) = l < kUnitEigCut ? 0.5 * config.epsilon * transform_exact(l) : 0.0;
                }
            }
            tau = select_tau(scaled, resolve_beta(config, n), n, config.tau_draws,
                             split_seed(config.seed, stream::tau));
        }
        const std::function<double(const Vector&)> quad = [&form](const Vector& d) {
            return form(d);
        };
        bool crossed = false;
        c = sweep(data, form.eig, quad, m_max, tau, &crossed);
        if (!crossed) {
            const Index cols = std::min<Index>(m_max - 1, form.eig.U.cols());
            c = recombine(data, form.eig.U.leftCols(cols), form.diagonal(), form.eig.lambda);
            c.m_target = m_max;
        }
    }

    c.method = with_co2_tag(c.method);
    c.seed = config.seed;
    const Vector diff = full_weights(c, n) - data.weights;
    c.quad_value = form(diff);
    return c;
}

double select_tau(const PsdFactor& eig, double beta, Index n, Index draws, std::uint64_t seed) {
    if (n < 1) {
        throw UsageError("select_tau: sample size must be positive");
    }
    if (!(beta > 0.0 && beta < 1.0)) {
        throw UsageError("select_tau: beta must lie in (0,1)");
    }
    if (draws < 1000) {
        throw UsageError("select_tau: at least 1000 draws are required");
    }
    const Index r = eig.lambda.size();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> sims(static_cast<std::size_t>(draws));
    for (auto& s : sims) {
        double acc = 0.0;
        for (Index i = 0; i < r; ++i) {
            const double z = gauss(rng);
            acc += eig.lambda(i) * z * z;
        }
        s = acc;
    }
    std::sort(sims.begin(), sims.end());
    std::size_t k = static_cast<std::size_t>(std::floor(beta * static_cast<double>(draws)));
    if (k >= sims.size()) {
        k = sims.size() - 1;
    }
    return sims[k] / static_cast<double>(n);
}

namespace {

// Euclidean projection onto the probability simplex.
Vector project_simplex(const Vector& v) {
    const Index s = v.size();
    std::vector<double> u(v.data(), v.data() + s);
    std::sort(u.begin(), u.end(), std::greater<double>());
    double cumsum = 0.0;
    double theta = u[0] - 1.0;
    for (Index i = 0; i < s; ++i) {
        cumsum += u[static_cast<std::size_t>(i)];
        const double t = (cumsum - 1.0) / static_cast<double>(i + 1);
        if (u[static_cast<std::size_t>(i)] - t > 0.0) {
            theta = t;
        }
    }
    return (v.array() - theta).max(0.0).matrix();
}

// Minimizes u'Qu - 2b'u over the simplex from the feasible start u by
// projected gradient with exact line search on the quadratic. Descent only:
// the objective never increases.
Vector simplex_quadratic_descent(const Matrix& Q, const Vector& b, Vector u) {
    const Index s = u.size();
    if (s == 1) {
        u(0) = 1.0;
        return u;
    }
    const double L = 2.0 * Q.cwiseAbs().rowwise().sum().maxCoeff();
    if (!(L > 0.0)) {
        // Zero block of a PSD matrix forces b = 0 too: objective is flat.
        return u;
    }
    auto f = [&](const Vector& x) { return x.dot(Q * x) - 2.0 * b.dot(x); };
    double f_cur = f(u);
    Vector g(s), d(s), trial(s);
    for (int iter = 0; iter < 500; ++iter) {
        g = 2.0 * (Q * u - b);
        d = project_simplex(u - g / L) - u;
        if (d.cwiseAbs().maxCoeff() < 1e-15) {
            break;
        }
        const double gd = g.dot(d);
        const double curv = d.dot(Q * d);
        double t;
        if (curv > 0.0) {
            t = std::clamp(-gd / (2.0 * curv), 0.0, 1.0);
        } else {
            t = gd < 0.0 ? 1.0 : 0.0;
        }
        if (t <= 0.0) {
            break;
        }
        trial = u + t * d;
        const double f_new = f(trial);
        if (f_new >= f_cur) {
            break;
        }
        const bool converged = (f_cur - f_new) < 1e-12 * std::max(1.0, std::abs(f_cur));
        u = trial;
        f_cur = f_new;
        if (converged) {
            break;
        }
    }
    return u;
}

Coreset refine_core(const Coreset& coreset, const Matrix& Q, const Vector& b) {
    if (coreset.indices.empty()) {
        throw std::runtime_error("refine_weights: empty coreset");
    }
    const Vector u = simplex_quadratic_descent(Q, b, coreset.weights);
    Coreset out;
    out.parent = coreset.parent;
    std::vector<double> kept;
    for (Index i = 0; i < u.size(); ++i) {
        if (u(i) > 0.0) {
            out.indices.push_back(coreset.indices[static_cast<std::size_t>(i)]);
            kept.push_back(u(i));
        }
    }
    out.weights = Eigen::Map<const Vector>(kept.data(), static_cast<Index>(kept.size()));
    out.method = coreset.method + "+refined";
    out.m_target = coreset.m_target;
    out.seed = coreset.seed;
    return out;
}

}  // namespace

Coreset refine_weights(const Coreset& coreset, const SinkhornQuadraticForm& form) {
    if (!coreset.parent) {
        throw std::runtime_error("refine_weights: coreset has no parent cloud");
    }
    const Index n = form.n();
    if (coreset.parent->n() != n) {
        throw std::runtime_error("refine_weights: form size does not match the coreset parent");
    }
    const Matrix Q = form.restricted(coreset.indices);
    const Vector b = form.cross(coreset.indices, form.plan.weights);
    Coreset out = refine_core(coreset, Q, b);
    const Vector diff = full_weights(out, n) - form.plan.weights;
    out.quad_value = form(diff);
    return out;
}

Coreset refine_weights(const Coreset& coreset, const GramMatrix& gram) {
    if (!coreset.parent) {
        throw std::runtime_error("refine_weights: coreset has no parent cloud");
    }
    const Index n = gram.n();
    if (coreset.parent->n() != n) {
        throw std::runtime_error("refine_weights: Gram size does not match the coreset parent");
    }
    const Index s = static_cast<Index>(coreset.indices.size());
    Matrix Q(s, s);
    for (Index i = 0; i < s; ++i) {
        for (Index j = 0; j < s; ++j) {
            Q(i, j) = gram.entries(coreset.indices[static_cast<std::size_t>(i)],
                                   coreset.indices[static_cast<std::size_t>(j)]);
        }
    }
    const Vector w0 = Vector::Constant(n, 1.0 / static_cast<double>(n));
    Vector b(s);
    for (Index i = 0; i < s; ++i) {
        b(i) = gram.entries.row(coreset.indices[static_cast<std::size_t>(i)]).dot(w0);
    }
    Coreset out = refine_core(coreset, Q, b);
    const Vector diff = full_weights(out, n) - w0;
    out.quad_value = quad_form(gram.entries, diff);
    return out;
}

Vector hutchinson_diag(const MatrixHandle& op, Index probes, std::uint64_t seed) {
    if (!op.apply || op.n <= 0) {
        throw std::runtime_error("hutchinson_diag: operator is empty");
    }
    if (probes < 1) {
        throw UsageError("hutchinson_diag: probes must be at least 1");
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> coin(0, 1);
    Vector acc = Vector::Zero(op.n);
    Matrix z(op.n, 1);
    for (Index p = 0; p < probes; ++p) {
        for (Index i = 0; i < op.n; ++i) {
            z(i, 0) = coin(rng) == 0 ? -1.0 : 1.0;
        }
        const Matrix az = op.apply(z);
        acc += z.col(0).cwiseProduct(az.col(0));
    }
    return acc / static_cast<double>(probes);
}

double quad_approx_error(const DiscreteDistribution& data, const Coreset& coreset,
                         const Co2Config& config, const SinkhornQuadraticForm* form) {
    if (coreset.parent != data.cloud) {
        throw std::runtime_error("quad_approx_error: coreset is not over the data's cloud");
    }
    const Index n = data.n();
    const Vector diff = full_weights(coreset, n) - data.weights;
    if (diff.cwiseAbs().maxCoeff() == 0.0) {
        // Identical measures: the divergence is exactly zero.
        return std::numeric_limits<double>::infinity();
    }

    const PointCloud sub = coreset_points(coreset);
    const Vector wsub = coreset.weights / coreset.weights.sum();
    const DiscreteDistribution nu = make_distribution(sub, wsub);
    const double S =
        divergence(data, nu, config.epsilon, config.sinkhorn_tol, config.sinkhorn_max_iter);
    if (S < 1e-12) {
        return std::numeric_limits<double>::infinity();
    }
    const double q = form ? (*form)(diff) : kernel_selection(data, config)(diff);
    return std::abs(S - q) / S;
}

}  // namespace co2
