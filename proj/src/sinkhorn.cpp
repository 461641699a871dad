#include "co2/sinkhorn.hpp"

#include "co2/kernels.hpp"

#include <cmath>
#include <limits>

namespace co2 {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Vector log_weights(const Vector& w) {
    Vector lw(w.size());
    for (Index i = 0; i < w.size(); ++i) lw[i] = w[i] > 0.0 ? std::log(w[i]) : kNegInf;
    return lw;
}

// Stable logsumexp; -inf entries drop out, all -inf yields -inf.
double lse(const Vector& t) {
    const double m = t.maxCoeff();
    if (!std::isfinite(m)) return kNegInf;
    return m + std::log((t.array() - m).exp().sum());
}

bool same_measure(const DiscreteDistribution& a, const DiscreteDistribution& b) {
    return a.cloud == b.cloud && a.weights.size() == b.weights.size() &&
           a.weights == b.weights;
}

void check_problem(const SinkhornProblem& p, double tol, int max_iter) {
    if (p.epsilon <= 0.0) throw UsageError("sinkhorn: epsilon must be positive");
    if (tol <= 0.0) throw UsageError("sinkhorn: tol must be positive");
    if (max_iter < 1) throw UsageError("sinkhorn: max_iter must be at least 1");
    if (p.source.cloud == nullptr || p.target.cloud == nullptr)
        throw std::runtime_error("sinkhorn: distribution without a cloud");
    if (p.source.cloud->d() != p.target.cloud->d())
        throw std::runtime_error("sinkhorn: source and target dimension mismatch");
}

// One half-update: out_i = -eps * lse_j(lw_j + (pot_j - C(:,i)) / eps).
// Columns of C are traversed, so callers pass the transposed cost when the
// potential being refreshed lives on the row side.
void lse_update(const Matrix& cost_cols, const Vector& lw, const Vector& pot,
                double eps, Vector& out, Vector& scratch) {
    for (Index i = 0; i < cost_cols.cols(); ++i) {
        scratch = lw.array() + (pot - cost_cols.col(i)).array() / eps;
        out[i] = -eps * lse(scratch);
    }
}

}  // namespace

SinkhornSolution solve(const SinkhornProblem& problem, double tol, int max_iter,
                       std::vector<double>* residual_trace) {
    check_problem(problem, tol, max_iter);
    const double eps = problem.epsilon;
    const double stop = tol * std::min(1.0, eps);
    const Vector& a = problem.source.weights;
    const Vector& b = problem.target.weights;
    const Index n1 = a.size(), n2 = b.size();
    if (residual_trace) residual_trace->clear();

    SinkhornSolution sol;
    sol.epsilon = eps;
    sol.anchored_at = 0;

    if (same_measure(problem.source, problem.target)) {
        // Symmetric self-problem: the alternating scheme oscillates, the
        // averaged update contracts with factor <= 1/2.
        const Matrix cost =
            squared_distances(problem.source.cloud->points, problem.source.cloud->points);
        const Vector la = log_weights(a);
        Vector phi = Vector::Zero(n1), t(n1), scratch(n1);
        double r = std::numeric_limits<double>::infinity();
        int it = 0;
        while (it < max_iter) {
            lse_update(cost, la, phi, eps, t, scratch);
            t = 0.5 * (phi + t);
            r = (t - phi).cwiseAbs().maxCoeff();
            phi.swap(t);
            ++it;
            if (residual_trace) residual_trace->push_back(r);
            if (r < stop) break;
        }
        if (r >= stop)
            throw SinkhornError("sinkhorn: no convergence after " + std::to_string(it) +
                                    " iterations, residual " + std::to_string(r),
                                r, it);
        sol.phi = phi;
        sol.psi = std::move(phi);
        sol.iterations = it;
        sol.residual = r;
        sol.ot_value = 2.0 * sol.phi.dot(a);
        return sol;
    }

    const Matrix cost =
        squared_distances(problem.source.cloud->points, problem.target.cloud->points);
    const Matrix cost_t = cost.transpose();
    const Vector la = log_weights(a), lb = log_weights(b);
    Vector phi = Vector::Zero(n1), psi = Vector::Zero(n2);
    Vector psi_new(n2), phi_new(n1), scratch1(n1), scratch2(n2);
    double r = std::numeric_limits<double>::infinity();
    int it = 0;
    while (it < max_iter) {
        lse_update(cost, la, phi, eps, psi_new, scratch1);
        const double dpsi = (psi_new - psi).cwiseAbs().maxCoeff();
        psi.swap(psi_new);
        lse_update(cost_t, lb, psi, eps, phi_new, scratch2);
        const double dphi = (phi_new - phi).cwiseAbs().maxCoeff();
        phi.swap(phi_new);
        ++it;
        r = std::max(dpsi, dphi);
        if (residual_trace) residual_trace->push_back(r);
        if (r < stop) break;
    }
    if (r >= stop)
        throw SinkhornError("sinkhorn: no convergence after " + std::to_string(it) +
                                " iterations, residual " + std::to_string(r),
                            r, it);

    // Gauge fix: potentials are unique up to (phi + c, psi - c); pin the
    // representative with phi[0] = psi[0] so outputs are reproducible.
    const double shift = 0.5 * (psi[0] - phi[0]);
    phi.array() += shift;
    psi.array() -= shift;
    sol.phi = std::move(phi);
    sol.psi = std::move(psi);
    sol.iterations = it;
    sol.residual = r;
    sol.ot_value = sol.phi.dot(a) + sol.psi.dot(b);
    return sol;
}

double marginal_residual(const SinkhornProblem& problem, const SinkhornSolution& sol) {
    const Matrix cost =
        squared_distances(problem.source.cloud->points, problem.target.cloud->points);
    const double eps = problem.epsilon;
    const Vector& a = problem.source.weights;
    const Vector& b = problem.target.weights;
    double worst = 0.0;
    // Density marginals of exp((phi + psi - c)/eps) d(mu x nu): each must be 1.
    for (Index j = 0; j < b.size(); ++j) {
        double s = 0.0;
        for (Index i = 0; i < a.size(); ++i)
            s += a[i] * std::exp((sol.phi[i] + sol.psi[j] - cost(i, j)) / eps);
        worst = std::max(worst, std::abs(s - 1.0));
    }
    for (Index i = 0; i < a.size(); ++i) {
        double s = 0.0;
        for (Index j = 0; j < b.size(); ++j)
            s += b[j] * std::exp((sol.phi[i] + sol.psi[j] - cost(i, j)) / eps);
        worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
}

double divergence_from_terms(double ot_cross, double ot_self_mu, double ot_self_nu) {
    double s = ot_cross - 0.5 * (ot_self_mu + ot_self_nu);
    if (s < 0.0 && s >= -1e-7) s = 0.0;
    return s;
}

double divergence(const DiscreteDistribution& mu, const DiscreteDistribution& nu,
                  double epsilon, double tol, int max_iter) {
    const SinkhornSolution cross = solve({mu, nu, epsilon}, tol, max_iter);
    const SinkhornSolution self_mu = solve({mu, mu, epsilon}, tol, max_iter);
    const SinkhornSolution self_nu = solve({nu, nu, epsilon}, tol, max_iter);
    return divergence_from_terms(cross.ot_value, self_mu.ot_value, self_nu.ot_value);
}

SelfPlan self_plan(const DiscreteDistribution& mu, double epsilon, double tol,
                   int max_iter) {
    const SinkhornSolution sol = solve({mu, mu, epsilon}, tol, max_iter);
    const Matrix cost = squared_distances(mu.cloud->points, mu.cloud->points);
    const Vector la = log_weights(mu.weights);
    const Index n = mu.n();

    SelfPlan sp;
    sp.weights = mu.weights;
    sp.epsilon = epsilon;
    sp.plan.resize(n, n);
    for (Index i = 0; i < n; ++i) {
        sp.plan(i, i) = std::exp(2.0 * (la[i] + sol.phi[i] / epsilon));
        for (Index j = i + 1; j < n; ++j) {
            const double v = std::exp(la[i] + la[j] +
                                      (sol.phi[i] + sol.phi[j] - cost(i, j)) / epsilon);
            sp.plan(i, j) = v;
            sp.plan(j, i) = v;
        }
    }
    return sp;
}

}  // namespace co2
