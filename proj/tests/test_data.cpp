#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"

#include "co2/data.hpp"

namespace {

namespace fs = std::filesystem;

// Writes content to a throwaway file and removes it on scope exit.
struct TempCsv {
    fs::path path;
    explicit TempCsv(const std::string& name, const std::string& content)
        : path(fs::temp_directory_path() / name) {
        std::ofstream f(path);
        f << content;
    }
    ~TempCsv() { std::error_code ec; fs::remove(path, ec); }
};

}  // namespace

TEST_CASE("load_csv parses plain numeric rows") {
    TempCsv f("co2_test_plain.csv", "1.0,2.0\n3.5,-4.25\n\n0,1e-3\n");
    const co2::PointCloud pc = co2::load_csv(f.path.string(), false);
    REQUIRE(pc.n() == 3);
    REQUIRE(pc.d() == 2);
    CHECK(pc.points(0, 0) == 1.0);
    CHECK(pc.points(1, 1) == -4.25);
    CHECK(pc.points(2, 1) == 1e-3);
}

TEST_CASE("load_csv skips a header row when asked") {
    TempCsv f("co2_test_header.csv", "x,y\n1,2\n3,4\n");
    const co2::PointCloud pc = co2::load_csv(f.path.string(), true);
    REQUIRE(pc.n() == 2);
    CHECK(pc.points(0, 0) == 1.0);
    CHECK_THROWS(co2::load_csv(f.path.string(), false));
}

TEST_CASE("load_csv reports the offending row and column") {
    TempCsv ragged("co2_test_ragged.csv", "1,2\n3\n");
    CHECK_THROWS_WITH_AS(co2::load_csv(ragged.path.string(), false),
                         doctest::Contains("row 2"), std::runtime_error);

    TempCsv bad("co2_test_nonnum.csv", "1,2\n3,oops\n");
    try {
        co2::load_csv(bad.path.string(), false);
        FAIL("expected an error");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row 2") != std::string::npos);
        CHECK(msg.find("column 2") != std::string::npos);
    }
}

TEST_CASE("load_csv rejects a missing file and an empty file") {
    CHECK_THROWS(co2::load_csv("/nonexistent/co2_nope.csv", false));
    TempCsv f("co2_test_empty.csv", "");
    CHECK_THROWS(co2::load_csv(f.path.string(), false));
}

TEST_CASE("validate rejects non-finite coordinates") {
    co2::PointCloud pc;
    pc.points.resize(2, 2);
    pc.points << 1.0, 2.0, 3.0, std::nan("");
    CHECK_THROWS(co2::validate(pc));
    pc.points(1, 1) = 4.0;
    CHECK_NOTHROW(co2::validate(pc));
}

TEST_CASE("make_distribution enforces convex weights") {
    co2::PointCloud pc;
    pc.points.resize(3, 1);
    pc.points << 0.0, 1.0, 2.0;

    co2::Vector w(3);
    w << 0.5, 0.5, 0.0;
    const co2::DiscreteDistribution d = co2::make_distribution(pc, w);
    CHECK(d.cloud == &pc);
    CHECK(d.weights(2) == 0.0);

    w << 0.6, 0.5, 0.0;
    CHECK_THROWS(co2::make_distribution(pc, w));
    w << 0.5, 0.6, -0.1;
    CHECK_THROWS(co2::make_distribution(pc, w));
    w << 0.0, 0.0, 0.0;
    CHECK_THROWS(co2::make_distribution(pc, w));
}

TEST_CASE("uniform puts weight 1/n on every point") {
    co2::PointCloud pc;
    pc.points.resize(4, 2);
    pc.points.setRandom();
    const co2::DiscreteDistribution d = co2::uniform(pc);
    REQUIRE(d.n() == 4);
    for (co2::Index i = 0; i < 4; ++i) CHECK(d.weights(i) == doctest::Approx(0.25));
}

TEST_CASE("standardize centers and scales, destandardize inverts") {
    co2::PointCloud pc;
    pc.points.resize(5, 3);
    pc.points << 1, 10, 7,
                 2, 20, 7,
                 3, 30, 7,
                 4, 40, 7,
                 5, 50, 7;

    const auto [std_pc, stats] = co2::standardize(pc);
    for (co2::Index j = 0; j < 2; ++j) {
        CHECK(std_pc.points.col(j).mean() == doctest::Approx(0.0).epsilon(1e-12));
        const double var = std_pc.points.col(j).squaredNorm() / 5.0;
        CHECK(var == doctest::Approx(1.0).epsilon(1e-12));
    }
    // Constant column: all zeros, recorded stddev 1 so the inverse is exact.
    CHECK(std_pc.points.col(2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(stats.stddev(2) == 1.0);

    const co2::PointCloud back = co2::destandardize(std_pc, stats);
    CHECK((back.points - pc.points).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("standardize requires at least two points") {
    co2::PointCloud pc;
    pc.points.resize(1, 2);
    pc.points << 1.0, 2.0;
    CHECK_THROWS(co2::standardize(pc));
}
