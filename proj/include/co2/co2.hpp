#pragma once

#include "co2/common.hpp"
#include "co2/data.hpp"
#include "co2/kernels.hpp"
#include "co2/lowrank.hpp"
#include "co2/recombination.hpp"
#include "co2/sinkhorn.hpp"

#include <cstdint>
#include <optional>

namespace co2 {

struct Co2Config {
    double epsilon = 1.0;
    // Fixed-size mode when m is set, threshold mode otherwise; m and tau are
    // mutually exclusive. In threshold mode a missing tau is selected from
    // the beta quantile.
    std::optional<Index> m;
    std::optional<double> tau;
    double beta = 0.0;   // quantile level for tau selection; <= 0 resolves to 1/log n
    Index theta = 3;     // sketch oversampling, >= 2
    Index m_max = 0;     // sweep cap in tau mode; 0 resolves to ceil(2*sqrt(n)), clamped to [2, n]
    std::uint64_t seed = 0;
    double sinkhorn_tol = 1e-9;
    Index sinkhorn_max_iter = 10000;
    bool use_exact_G = false;  // spectral (I - pi^2)^{-1} path instead of the fast plan form
    Index tau_draws = 100000;  // Monte-Carlo draws for the tau quantile
};

void validate(const Co2Config& config, Index n);
double resolve_beta(const Co2Config& config, Index n);
Index resolve_m_max(const Co2Config& config, Index n);

// Quadratic compression error q(w) on signed weight vectors w (sum 0 in
// intended use). Built by kernel_selection from one symmetric Sinkhorn solve.
struct SinkhornQuadraticForm {
    enum class Mode { xi_fast, G_exact };

    Mode mode = Mode::xi_fast;
    SelfPlan plan;    // transport plan of the self-problem; reference weights
    PsdFactor eig;    // eigenpairs of n*plan
    double epsilon = 1.0;
    // Adds the fast-form value on the unfactored complement to G_exact.
    // Off by default; restricted()/cross() ignore it.
    bool tail_remainder = false;

    Index n() const { return plan.n(); }

    // xi_fast: (epsilon/2) * n * w' (n pi) w.
    // G_exact: (epsilon/2) * n * sum over lambda_i < 1-1e-8 of
    //          lambda_i/(1-lambda_i^2) * <w, u_i>^2.
    // Values in [-1e-10, 0) clamp to 0; below that throws (not PSD).
    double operator()(const Vector& w) const;

    // Diagonal of the representing matrix M; fed to recombination as k_diag,
    // where only its signs and relative order matter.
    Vector diagonal() const;

    // Representing-matrix blocks for support-restricted optimization:
    // restricted(s) = M[s, s], cross(s, w) = M[s, :] w.
    Matrix restricted(const std::vector<Index>& support) const;
    Vector cross(const std::vector<Index>& support, const Vector& w_full) const;
};

// Solves the symmetric self-problem at config.epsilon and factors n*plan with
// sketch width theta*m (theta*m_max in tau mode), both clamped to n.
SinkhornQuadraticForm kernel_selection(const DiscreteDistribution& data, const Co2Config& config);

// Fixed-m mode: recombination over the top m-1 factor eigenvectors with the
// form's diagonal. Tau mode: sweep at threshold tau (selected via select_tau
// when not given); if the threshold never binds, falls back to the fixed-size
// reduction at m_max. Records quad(w_coreset - w_input) on the result.
Coreset compress(const DiscreteDistribution& data, const Co2Config& config);

// Same, over a form already produced by kernel_selection with a config of
// matching epsilon and size parameters; skips the Sinkhorn solve and sketch.
Coreset compress(const DiscreteDistribution& data, const Co2Config& config,
                 const SinkhornQuadraticForm& form);

// Empirical beta-quantile of sum_i lambda_i * chi2_1 over the factor's
// eigenvalues (taken as given), divided by n.
double select_tau(const PsdFactor& eig, double beta, Index n, Index draws, std::uint64_t seed);

// Minimizes q(w - w_reference) over the simplex on the coreset's support by
// projected gradient with exact line search. Never increases q; exact-zero
// weights are dropped from the support. The reference weights are the form's
// plan weights; the Gram overload measures against the uniform distribution.
Coreset refine_weights(const Coreset& coreset, const SinkhornQuadraticForm& form);
Coreset refine_weights(const Coreset& coreset, const GramMatrix& gram);

// Rademacher-probe estimate of diag(A): mean over probes of z .* (A z).
Vector hutchinson_diag(const MatrixHandle& op, Index probes, std::uint64_t seed);

// |S - q| / S for S the true divergence between data and coreset and q the
// configured quadratic form at w_coreset - w_input. Returns +infinity when
// S < 1e-12. Pass a prebuilt form to skip re-running kernel selection.
double quad_approx_error(const DiscreteDistribution& data, const Coreset& coreset,
                         const Co2Config& config,
                         const SinkhornQuadraticForm* form = nullptr);

}  // namespace co2
