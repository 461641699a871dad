#include <cmath>

#include "doctest.h"

#include "co2/data.hpp"
#include "co2/kernels.hpp"

namespace {

co2::PointCloud line_cloud() {
    co2::PointCloud pc;
    pc.points.resize(3, 1);
    pc.points << 0.0, 1.0, 2.0;
    return pc;
}

}  // namespace

TEST_CASE("kernel_eval matches hand-computed exponentials") {
    co2::Vector x(2), y(2);
    x << 0.0, 0.0;
    y << 1.0, 0.0;
    // exp(-1) and exp(-4), written out so a regression cannot hide behind
    // the same std::exp call the implementation uses.
    CHECK(co2::kernel_eval(co2::GaussianKernel{1.0}, x, y) ==
          doctest::Approx(0.36787944117144233).epsilon(1e-15));
    y << 2.0, 0.0;
    CHECK(co2::kernel_eval(co2::GaussianKernel{1.0}, x, y) ==
          doctest::Approx(0.018315638888734179).epsilon(1e-15));
    // Scaling epsilon by 4 brings the previous pair back to exp(-1).
    CHECK(co2::kernel_eval(co2::GaussianKernel{4.0}, x, y) ==
          doctest::Approx(0.36787944117144233).epsilon(1e-15));
}

TEST_CASE("gram is symmetric with unit diagonal") {
    const co2::PointCloud pc = line_cloud();
    const co2::GramMatrix K = co2::gram(co2::GaussianKernel{2.0}, pc);
    REQUIRE(K.n() == 3);
    CHECK(K.epsilon == 2.0);
    CHECK(K.cloud == &pc);
    for (co2::Index i = 0; i < 3; ++i) {
        CHECK(K.entries(i, i) == 1.0);
        for (co2::Index j = 0; j < 3; ++j) CHECK(K.entries(i, j) == K.entries(j, i));
    }
    CHECK(K.entries(0, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
    CHECK(K.entries(0, 2) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
    CHECK(co2::psd_probe(K.entries, 32, 7));
}

TEST_CASE("squared_distances is exactly symmetric on aliased input") {
    co2::PointCloud pc;
    pc.points.resize(4, 3);
    pc.points.setRandom();
    const co2::Matrix D = co2::squared_distances(pc.points, pc.points);
    for (co2::Index i = 0; i < 4; ++i) {
        CHECK(D(i, i) == 0.0);
        for (co2::Index j = 0; j < 4; ++j) {
            CHECK(D(i, j) == D(j, i));
            const double direct = (pc.points.row(i) - pc.points.row(j)).squaredNorm();
            CHECK(D(i, j) == doctest::Approx(direct).epsilon(1e-12));
        }
    }
}

TEST_CASE("mmd_sq of two single points is 2 - 2k(x,y)") {
    co2::PointCloud pc;
    pc.points.resize(2, 1);
    pc.points << 0.0, 1.0;
    const co2::GramMatrix K = co2::gram(co2::GaussianKernel{1.0}, pc);

    co2::Vector wa(2), wb(2);
    wa << 1.0, 0.0;
    wb << 0.0, 1.0;
    const co2::DiscreteDistribution a = co2::make_distribution(pc, wa);
    const co2::DiscreteDistribution b = co2::make_distribution(pc, wb);
    // 2 - 2 exp(-1)
    CHECK(co2::mmd_sq(K, a, b) == doctest::Approx(1.2642411176571153).epsilon(1e-14));
    CHECK(co2::mmd_sq(K, a, a) == 0.0);
}

TEST_CASE("mmd_sq clamps roundoff negatives and rejects real ones") {
    co2::PointCloud pc;
    pc.points.resize(2, 1);
    pc.points << 0.0, 1.0;
    co2::Vector wa(2), wb(2);
    wa << 1.0, 0.0;
    wb << 0.0, 1.0;
    const co2::DiscreteDistribution a = co2::make_distribution(pc, wa);
    const co2::DiscreteDistribution b = co2::make_distribution(pc, wb);

    // Hand-built entries drive the quadratic form slightly negative: the
    // value 2 - 2 * (1 + 5e-13) = -1e-12 must clamp to zero.
    co2::GramMatrix K;
    K.epsilon = 1.0;
    K.cloud = &pc;
    K.entries.resize(2, 2);
    K.entries << 1.0, 1.0 + 5e-13, 1.0 + 5e-13, 1.0;
    CHECK(co2::mmd_sq(K, a, b) == 0.0);

    // 2 - 4 = -2 is far past roundoff and must raise.
    K.entries << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS(co2::mmd_sq(K, a, b));
}

TEST_CASE("quad_form evaluates w^T K w") {
    co2::Matrix K(2, 2);
    K << 2.0, 1.0, 1.0, 3.0;
    co2::Vector w(2);
    w << 1.0, -1.0;
    CHECK(co2::quad_form(K, w) == doctest::Approx(3.0).epsilon(1e-15));
}
