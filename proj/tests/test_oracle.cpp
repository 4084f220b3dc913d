#include <cmath>

#include "doctest.h"
#include <Eigen/Eigenvalues>

#include "rrgs/oracle.hpp"

using namespace rrgs;

TEST_CASE("twopass_covariance basics") {
    CHECK_THROWS_AS(oracle::twopass_covariance({}), InvalidParameterError);

    auto [m1, k1] = oracle::twopass_covariance({Vec3(1, 2, 3)});
    CHECK(k1.cwiseAbs().maxCoeff() == 0.0);

    auto [m2, k2] = oracle::twopass_covariance({Vec3(0, 0, 0), Vec3(2, 0, 0)});
    CHECK((m2 - Vec3(1, 0, 0)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(k2(0, 0) == doctest::Approx(1.0));

    Rng rng(21);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<Vec3> pts(rng.uniform_int(2, 40));
        for (auto& p : pts) p = rng.uniform_vec3(-4, 4);
        const auto [m, k] = oracle::twopass_covariance(pts);
        CHECK((k - k.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        Eigen::SelfAdjointEigenSolver<Mat3> es(k);
        CHECK(es.eigenvalues().minCoeff() > -1e-12);
    }
}

TEST_CASE("finite_diff_gradient on a quadratic") {
    const oracle::FiniteDiffConfig fd{1e-5, 1e-8, 1e-12};
    auto f = [](const std::vector<double>& x) {
        double s = 0;
        for (double v : x) s += v * v;
        return s;
    };
    const auto g = oracle::finite_diff_gradient(f, {1.0, 2.0, 3.0}, fd);
    CHECK(std::abs(g[0] - 2.0) < 1e-8);
    CHECK(std::abs(g[1] - 4.0) < 1e-8);
    CHECK(std::abs(g[2] - 6.0) < 1e-8);

    auto constant = [](const std::vector<double>&) { return 7.5; };
    for (double v : oracle::finite_diff_gradient(constant, {1.0, -2.0}, fd)) CHECK(v == 0.0);
}

TEST_CASE("finite_diff_gradient names the bad coordinate") {
    const oracle::FiniteDiffConfig fd{1e-5, 1e-8, 1e-12};
    auto f = [](const std::vector<double>& x) {
        return x[1] > 0.5 ? std::nan("") : x[0];
    };
    try {
        oracle::finite_diff_gradient(f, {0.0, 0.5}, fd);
        FAIL("expected NumericalDegeneracyError");
    } catch (const NumericalDegeneracyError& e) {
        CHECK(std::string(e.what()).find("coordinate 1") != std::string::npos);
    }
}

TEST_CASE("reference_blend mirrors the hand expansions") {
    const Vec3 bg(0.2, 0.4, 0.6);
    CHECK((oracle::reference_blend({}, bg) - bg).cwiseAbs().maxCoeff() == 0.0);

    const double a1 = 0.7;
    const Vec3 c1(1, 0, 0);
    const Vec3 one = oracle::reference_blend({{a1, c1}}, bg);
    const Vec3 expect1 = (1 - std::exp(-a1)) * c1 + std::exp(-a1) * bg;
    CHECK((one - expect1).cwiseAbs().maxCoeff() < 1e-15);

    const double a2 = 0.3;
    const Vec3 c2(0, 1, 0);
    const Vec3 two = oracle::reference_blend({{a1, c1}, {a2, c2}}, bg);
    const Vec3 expect2 = (1 - std::exp(-a1)) * c1 +
                         std::exp(-a1) * (1 - std::exp(-a2)) * c2 +
                         std::exp(-a1 - a2) * bg;
    CHECK((two - expect2).cwiseAbs().maxCoeff() < 1e-12);
}
