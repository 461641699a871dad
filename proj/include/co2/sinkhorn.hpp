#pragma once

#include "co2/common.hpp"
#include "co2/data.hpp"

#include <vector>

namespace co2 {

// Entropically regularized transport between two weighted clouds under the
// squared Euclidean cost, regularizer epsilon.
struct SinkhornProblem {
    DiscreteDistribution source;
    DiscreteDistribution target;
    double epsilon;
};

struct SinkhornSolution {
    Vector phi;  // source potential, cost units
    Vector psi;  // target potential
    double ot_value;   // phi . a + psi . b
    int iterations;
    double residual;   // final sup-norm potential change
    Index anchored_at; // gauge fixed so phi[x0] = psi[x0], x0 = index 0
    double epsilon;

    // Scalings are derived, never stored, so the sign convention cannot drift.
    Vector scaling_u() const { return (-phi / epsilon).array().exp(); }
    Vector scaling_v() const { return (-psi / epsilon).array().exp(); }
};

struct SinkhornError : std::runtime_error {
    double residual;
    int iterations;
    SinkhornError(const std::string& what, double r, int it)
        : std::runtime_error(what), residual(r), iterations(it) {}
};

// Symmetric PSD self-transport plan: pi_ij = a_i a_j exp((phi_i+phi_j-c_ij)/eps).
// Row sums reproduce the weights, total mass 1, eigenvalues of n*pi in [0,1]
// with the top equal to 1 for uniform weights.
struct SelfPlan {
    Matrix plan;
    Vector weights;
    double epsilon;

    Index n() const { return plan.rows(); }
};

// Log-domain solve. Source == target (same cloud object, same weights) takes
// the damped symmetric route phi <- (phi + T(phi))/2 with psi = phi; anything
// else alternates full updates. Convergence is declared when the sup-norm
// potential change drops below tol * min(1, epsilon), which bounds the
// marginal residual by 10 * tol. Throws SinkhornError past max_iter.
// residual_trace, when given, receives the per-iteration sup-norm changes.
SinkhornSolution solve(const SinkhornProblem& problem, double tol = 1e-9,
                       int max_iter = 10000,
                       std::vector<double>* residual_trace = nullptr);

// Max deviation of either plan marginal from 1 under the given potentials.
double marginal_residual(const SinkhornProblem& problem, const SinkhornSolution& sol);

// Debiased divergence: OT(mu,nu) - (OT(mu,mu) + OT(nu,nu)) / 2, clamped to 0
// when within -1e-7 of 0.
double divergence(const DiscreteDistribution& mu, const DiscreteDistribution& nu,
                  double epsilon, double tol = 1e-9, int max_iter = 10000);

// Assembles the divergence from already-solved OT values, same clamp policy.
// Lets callers reuse a self-problem solution across several comparisons.
double divergence_from_terms(double ot_cross, double ot_self_mu, double ot_self_nu);

SelfPlan self_plan(const DiscreteDistribution& mu, double epsilon, double tol = 1e-9,
                   int max_iter = 10000);

}  // namespace co2
