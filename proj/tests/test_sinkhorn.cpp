#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"

#include "co2/kernels.hpp"
#include "co2/sinkhorn.hpp"

#include <Eigen/Eigenvalues>

namespace {

using co2::Index;
using co2::Matrix;
using co2::Vector;

// Straight-line alternating log-domain iteration, written independently of
// the library (no damping, no gauge fixing, plain two-loop logsumexp).
// Iterates until the potentials move less than `tol` in sup norm and returns
// the dual value phi.a + psi.b.
struct OracleResult {
    Vector phi;
    Vector psi;
    double value;
};

OracleResult oracle_sinkhorn(const Matrix& cost, const Vector& a, const Vector& b,
                             double epsilon, double tol, int iters) {
    const Index n = a.size();
    const Index m = b.size();
    Vector phi = Vector::Zero(n);
    Vector psi = Vector::Zero(m);
    for (int it = 0; it < iters; ++it) {
        double delta = 0.0;
        for (Index i = 0; i < n; ++i) {
            double mx = -1e300;
            std::vector<double> terms(static_cast<std::size_t>(m));
            for (Index j = 0; j < m; ++j) {
                terms[static_cast<std::size_t>(j)] =
                    std::log(b(j)) + (psi(j) - cost(i, j)) / epsilon;
                mx = std::max(mx, terms[static_cast<std::size_t>(j)]);
            }
            double s = 0.0;
            for (double t : terms) s += std::exp(t - mx);
            const double next = -epsilon * (mx + std::log(s));
            delta = std::max(delta, std::abs(next - phi(i)));
            phi(i) = next;
        }
        for (Index j = 0; j < m; ++j) {
            double mx = -1e300;
            std::vector<double> terms(static_cast<std::size_t>(n));
            for (Index i = 0; i < n; ++i) {
                terms[static_cast<std::size_t>(i)] =
                    std::log(a(i)) + (phi(i) - cost(i, j)) / epsilon;
                mx = std::max(mx, terms[static_cast<std::size_t>(i)]);
            }
            double s = 0.0;
            for (double t : terms) s += std::exp(t - mx);
            const double next = -epsilon * (mx + std::log(s));
            delta = std::max(delta, std::abs(next - psi(j)));
            psi(j) = next;
        }
        if (delta < tol) break;
    }
    return {phi, psi, phi.dot(a) + psi.dot(b)};
}

co2::PointCloud random_cloud(Index n, Index d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    co2::PointCloud pc;
    pc.points.resize(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) pc.points(i, j) = normal(rng);
    return pc;
}

Vector random_simplex(Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.1, 1.0);
    Vector w(n);
    for (Index i = 0; i < n; ++i) w(i) = unif(rng);
    w /= w.sum();
    return w;
}

}  // namespace

TEST_CASE("solve matches an independent fixed-point oracle on 2x2") {
    co2::PointCloud pa = random_cloud(2, 2, 11);
    co2::PointCloud pb = random_cloud(2, 2, 22);
    const co2::DiscreteDistribution mu = co2::make_distribution(pa, random_simplex(2, 33));
    const co2::DiscreteDistribution nu = co2::make_distribution(pb, random_simplex(2, 44));

    for (double eps : {0.5, 1.0, 5.0}) {
        const co2::SinkhornSolution sol = co2::solve({mu, nu, eps}, 1e-12, 100000);
        const Matrix cost = co2::squared_distances(pa.points, pb.points);
        const OracleResult ora =
            oracle_sinkhorn(cost, mu.weights, nu.weights, eps, 1e-15, 200000);
        CHECK(sol.ot_value == doctest::Approx(ora.value).epsilon(1e-10));
        CHECK(co2::marginal_residual({mu, nu, eps}, sol) < 1e-10);
    }
}

TEST_CASE("solve matches the oracle on dense n<=5 problems") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        const Index n = 2 + static_cast<Index>(seed % 4);
        const Index m = 2 + static_cast<Index>((seed * 7) % 4);
        co2::PointCloud pa = random_cloud(n, 3, seed * 100);
        co2::PointCloud pb = random_cloud(m, 3, seed * 100 + 1);
        const co2::DiscreteDistribution mu =
            co2::make_distribution(pa, random_simplex(n, seed * 100 + 2));
        const co2::DiscreteDistribution nu =
            co2::make_distribution(pb, random_simplex(m, seed * 100 + 3));

        const double eps = 0.3 + 0.5 * static_cast<double>(seed % 3);
        const co2::SinkhornSolution sol = co2::solve({mu, nu, eps}, 1e-11, 200000);
        const Matrix cost = co2::squared_distances(pa.points, pb.points);
        const OracleResult ora =
            oracle_sinkhorn(cost, mu.weights, nu.weights, eps, 1e-14, 500000);
        CHECK(sol.ot_value == doctest::Approx(ora.value).epsilon(1e-8));
    }
}

TEST_CASE("potentials are anchored at index zero") {
    co2::PointCloud pa = random_cloud(4, 2, 5);
    co2::PointCloud pb = random_cloud(3, 2, 6);
    const co2::DiscreteDistribution mu = co2::make_distribution(pa, random_simplex(4, 7));
    const co2::DiscreteDistribution nu = co2::make_distribution(pb, random_simplex(3, 8));
    const co2::SinkhornSolution sol = co2::solve({mu, nu, 1.0});
    CHECK(sol.anchored_at == 0);
    CHECK(sol.phi(0) == doctest::Approx(sol.psi(0)).epsilon(1e-12));
}

TEST_CASE("gauge choice does not move the transport value") {
    // The dual value must agree between the anchored solution and the raw
    // oracle potentials, which use a different gauge.
    co2::PointCloud pa = random_cloud(3, 2, 15);
    co2::PointCloud pb = random_cloud(4, 2, 16);
    const co2::DiscreteDistribution mu = co2::make_distribution(pa, random_simplex(3, 17));
    const co2::DiscreteDistribution nu = co2::make_distribution(pb, random_simplex(4, 18));
    const co2::SinkhornSolution sol = co2::solve({mu, nu, 2.0}, 1e-12, 100000);
    const Matrix cost = co2::squared_distances(pa.points, pb.points);
    const OracleResult ora =
        oracle_sinkhorn(cost, mu.weights, nu.weights, 2.0, 1e-15, 200000);
    const double shift = sol.phi(1) - ora.phi(1);
    // Same solution up to the additive gauge constant.
    for (Index i = 0; i < 3; ++i)
        CHECK(std::abs((sol.phi(i) - ora.phi(i)) - shift) < 1e-8);
    for (Index j = 0; j < 4; ++j)
        CHECK(std::abs((sol.psi(j) - ora.psi(j)) + shift) < 1e-8);
}

TEST_CASE("marginal residual obeys the stopping-rule bound") {
    co2::PointCloud pa = random_cloud(12, 3, 25);
    co2::PointCloud pb = random_cloud(9, 3, 26);
    const co2::DiscreteDistribution mu = co2::make_distribution(pa, random_simplex(12, 27));
    const co2::DiscreteDistribution nu = co2::make_distribution(pb, random_simplex(9, 28));
    for (double tol : {1e-6, 1e-8, 1e-10}) {
        const co2::SinkhornProblem prob{mu, nu, 0.7};
        const co2::SinkhornSolution sol = co2::solve(prob, tol, 200000);
        CHECK(co2::marginal_residual(prob, sol) <= 10.0 * tol);
    }
}

TEST_CASE("residual trace decreases toward convergence") {
    co2::PointCloud pa = random_cloud(10, 2, 35);
    const co2::DiscreteDistribution mu = co2::uniform(pa);
    co2::PointCloud pb = random_cloud(8, 2, 36);
    const co2::DiscreteDistribution nu = co2::uniform(pb);
    std::vector<double> trace;
    co2::solve({mu, nu, 1.0}, 1e-10, 100000, &trace);
    REQUIRE(trace.size() >= 2);
    CHECK(trace.back() < trace.front());
    CHECK(trace.back() < 1e-10);
}

TEST_CASE("a zero-weight atom changes nothing") {
    co2::PointCloud pa = random_cloud(5, 2, 45);
    co2::PointCloud pb = random_cloud(4, 2, 46);

    // Same support plus one dead atom at the end.
    co2::PointCloud pa_ext;
    pa_ext.points.resize(6, 2);
    pa_ext.points.topRows(5) = pa.points;
    pa_ext.points.row(5) = pa.points.row(0);

    Vector w = random_simplex(5, 47);
    Vector w_ext(6);
    w_ext.head(5) = w;
    w_ext(5) = 0.0;

    const co2::DiscreteDistribution mu = co2::make_distribution(pa, w);
    const co2::DiscreteDistribution mu_ext = co2::make_distribution(pa_ext, w_ext);
    const co2::DiscreteDistribution nu = co2::uniform(pb);

    const double d1 = co2::divergence(mu, nu, 1.0, 1e-10, 100000);
    const double d2 = co2::divergence(mu_ext, nu, 1.0, 1e-10, 100000);
    CHECK(d1 == doctest::Approx(d2).epsilon(1e-9));
}

TEST_CASE("hitting max_iter raises with the residual attached") {
    co2::PointCloud pa = random_cloud(10, 2, 55);
    co2::PointCloud pb = random_cloud(10, 2, 56);
    const co2::DiscreteDistribution mu = co2::uniform(pa);
    const co2::DiscreteDistribution nu = co2::uniform(pb);
    try {
        co2::solve({mu, nu, 0.05}, 1e-14, 3);
        FAIL("expected SinkhornError");
    } catch (const co2::SinkhornError& e) {
        CHECK(e.iterations == 3);
        CHECK(e.residual > 0.0);
    }
}

TEST_CASE("single-atom divergence recovers the squared distance") {
    co2::PointCloud pa, pb;
    pa.points.resize(1, 3);
    pb.points.resize(1, 3);
    pa.points << 0.0, 1.0, 2.0;
    pb.points << 1.0, -1.0, 2.5;
    const double expected = (pa.points.row(0) - pb.points.row(0)).squaredNorm();
    for (double eps : {0.1, 1.0, 10.0}) {
        const double s =
            co2::divergence(co2::uniform(pa), co2::uniform(pb), eps, 1e-12, 1000);
        CHECK(s == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("self_plan solves the symmetric problem") {
    co2::PointCloud pc = random_cloud(14, 2, 65);
    Vector w = random_simplex(14, 66);
    const co2::DiscreteDistribution mu = co2::make_distribution(pc, w);
    const co2::SelfPlan sp = co2::self_plan(mu, 0.8, 1e-11, 200000);

    REQUIRE(sp.n() == 14);
    CHECK(sp.epsilon == 0.8);
    // Symmetry is exact by construction; marginals only up to the tolerance.
    CHECK((sp.plan - sp.plan.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((sp.plan.rowwise().sum() - w).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(sp.plan.sum() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(sp.plan.minCoeff() > 0.0);
}

TEST_CASE("n*plan has spectrum in [0,1] with top exactly 1 for uniform weights") {
    co2::PointCloud pc = random_cloud(20, 3, 75);
    const co2::DiscreteDistribution mu = co2::uniform(pc);
    const co2::SelfPlan sp = co2::self_plan(mu, 1.5, 1e-11, 200000);
    const Matrix npi = 20.0 * sp.plan;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(npi);
    const Vector lam = eig.eigenvalues();
    CHECK(lam.minCoeff() > -1e-9);
    CHECK(lam.maxCoeff() == doctest::Approx(1.0).epsilon(1e-7));
    // The top eigenvector of the doubly stochastic scaling is the flat one.
    const Vector top = eig.eigenvectors().col(19);
    const Vector flat = Vector::Constant(20, 1.0 / std::sqrt(20.0));
    CHECK(std::abs(std::abs(top.dot(flat)) - 1.0) < 1e-6);
}

TEST_CASE("divergence is symmetric and nonnegative on distinct clouds") {
    co2::PointCloud pa = random_cloud(6, 2, 85);
    co2::PointCloud pb = random_cloud(7, 2, 86);
    const co2::DiscreteDistribution mu = co2::uniform(pa);
    const co2::DiscreteDistribution nu = co2::uniform(pb);
    const double ab = co2::divergence(mu, nu, 1.0, 1e-11, 200000);
    const double ba = co2::divergence(nu, mu, 1.0, 1e-11, 200000);
    CHECK(ab >= 0.0);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-9));
}

TEST_CASE("divergence_from_terms applies the same clamp as divergence") {
    CHECK(co2::divergence_from_terms(1.0, 0.5, 0.5) == doctest::Approx(0.5));
    CHECK(co2::divergence_from_terms(1.0, 1.0, 1.0 + 1e-8) == 0.0);
    CHECK(co2::divergence_from_terms(1.0, 2.0, 2.0) < 0.0);
}
