#include <cmath>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "rrgs/core_types.hpp"

using namespace rrgs;

namespace {

Camera test_camera() {
    return make_lookat_camera(Vec3(0, 0, -4.0), Vec3::Zero(), Vec3(0, 1, 0), 100.0, 100.0, 64, 64);
}

Vec4 axis_angle_quat(const Vec3& axis, double angle) {
    const Vec3 a = axis.normalized();
    const double h = 0.5 * angle;
    return {std::cos(h), a.x() * std::sin(h), a.y() * std::sin(h), a.z() * std::sin(h)};
}

}  // namespace

TEST_CASE("build_covariance identity") {
    const Mat3 cov = build_covariance(Vec3(1, 1, 1), Vec4(1, 0, 0, 0));
    CHECK((cov - Mat3::Identity()).cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("build_covariance axis-aligned scaling squares") {
    const Mat3 cov = build_covariance(Vec3(2, 1, 1), Vec4(1, 0, 0, 0));
    Mat3 expected = Mat3::Identity();
    expected(0, 0) = 4.0;
    CHECK((cov - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("build_covariance 90 degrees about z swaps x/y variances") {
    const Vec4 q = axis_angle_quat(Vec3(0, 0, 1), M_PI / 2.0);
    const Mat3 cov = build_covariance(Vec3(1, 2, 3), q);
    // Explicit R S S^T R^T product as the oracle.
    const Mat3 r = quat_to_rotation(q);
    const Mat3 expected = r * Vec3(1, 4, 9).asDiagonal() * r.transpose();
    CHECK((cov - expected).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(cov(0, 0) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(cov(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cov(2, 2) == doctest::Approx(9.0).epsilon(1e-12));
}

TEST_CASE("build_covariance rejects non-positive scales") {
    CHECK_THROWS_AS(build_covariance(Vec3(0, 1, 1), Vec4(1, 0, 0, 0)), InvalidParameterError);
    CHECK_THROWS_AS(build_covariance(Vec3(1, -0.1, 1), Vec4(1, 0, 0, 0)), InvalidParameterError);
}

TEST_CASE("quaternion double cover: q and -q give the same covariance") {
    Rng rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        const Vec4 q = rng.unit_quaternion();
        const Vec3 s(rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0));
        const Mat3 a = build_covariance(s, q);
        const Mat3 b = build_covariance(s, Vec4(-q));
        CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("covariance eigenvalues are the squared scales") {
    Rng rng(8);
    for (int rep = 0; rep < 20; ++rep) {
        const Vec3 s(rng.uniform(0.2, 3.0), rng.uniform(0.2, 3.0), rng.uniform(0.2, 3.0));
        const Mat3 cov = build_covariance(s, rng.unit_quaternion());
        Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
        Vec3 expected = s.cwiseProduct(s);
        std::sort(expected.data(), expected.data() + 3);
        CHECK((es.eigenvalues() - expected).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("on-axis isotropic projection gives (f/d)^2 I plus dilation") {
    Camera cam = test_camera();
    Gaussian3D g;
    g.position = Vec3(0, 0, 0);  // depth 4 on the optical axis
    const auto pg = project_gaussian(g, cam);
    REQUIRE(pg.has_value());
    const double f_over_d = 100.0 / 4.0;
    Mat2 expected = (f_over_d * f_over_d) * Mat2::Identity();
    expected(0, 0) += kCovDilation;
    expected(1, 1) += kCovDilation;
    CHECK((pg->cov_px - expected).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(pg->mean_px.x() == doctest::Approx(32.0));
    CHECK(pg->mean_px.y() == doctest::Approx(32.0));
    CHECK(pg->depth == doctest::Approx(4.0));
}

TEST_CASE("gaussian behind the camera is culled") {
    Camera cam = test_camera();
    Gaussian3D g;
    g.position = Vec3(0, 0, -8.0);  // behind the eye at z=-4
    CHECK_FALSE(project_gaussian(g, cam).has_value());
}

TEST_CASE("off-axis generic projection matches the numeric J M J^T oracle") {
    Camera cam = test_camera();
    Rng rng(9);
    for (int rep = 0; rep < 20; ++rep) {
        Gaussian3D g;
        g.position = rng.uniform_vec3(-0.8, 0.8);
        g.scale = Vec3(rng.uniform(0.1, 0.6), rng.uniform(0.1, 0.6), rng.uniform(0.1, 0.6));
        g.rotation = rng.unit_quaternion();
        const auto pg = project_gaussian(g, cam);
        REQUIRE(pg.has_value());

        // Independent oracle: assemble J and M numerically and multiply.
        const Mat3 w = cam.rotation();
        const Vec3 t = w * g.position + cam.translation();
        Eigen::Matrix<double, 2, 3> jac;
        jac << cam.fx / t.z(), 0, -cam.fx * t.x() / (t.z() * t.z()),
            0, cam.fy / t.z(), -cam.fy * t.y() / (t.z() * t.z());
        const Mat3 m = w * build_covariance(g.scale, g.rotation) * w.transpose();
        Mat2 expected = jac * m * jac.transpose();
        expected(0, 0) += kCovDilation;
        expected(1, 1) += kCovDilation;
        CHECK((pg->cov_px - expected).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("projection is invariant under rigid re-parameterization") {
    // Moving the world by X and the camera by X^-1 leaves the output fixed.
    Camera cam = test_camera();
    Rng rng(10);
    for (int rep = 0; rep < 10; ++rep) {
        Gaussian3D g;
        g.position = rng.uniform_vec3(-0.5, 0.5);
        g.scale = Vec3(rng.uniform(0.1, 0.5), rng.uniform(0.1, 0.5), rng.uniform(0.1, 0.5));
        g.rotation = rng.unit_quaternion();

        const Vec4 xq = rng.unit_quaternion();
        const Mat3 xr = quat_to_rotation(xq);
        const Vec3 xt = rng.uniform_vec3(-1.0, 1.0);

        Gaussian3D g2 = g;
        g2.position = xr * g.position + xt;
        // Quaternion product xq * q rotates the Gaussian frame.
        const Vec4& a = xq;
        const Vec4& b = g.rotation;
        g2.rotation = Vec4(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
                           a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
                           a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
                           a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]);

        Camera cam2 = cam;
        Mat4 xinv = Mat4::Identity();
        xinv.topLeftCorner<3, 3>() = xr.transpose();
        xinv.topRightCorner<3, 1>() = -xr.transpose() * xt;
        cam2.world_to_camera = cam.world_to_camera * xinv;

        const auto p1 = project_gaussian(g, cam);
        const auto p2 = project_gaussian(g2, cam2);
        REQUIRE(p1.has_value());
        REQUIRE(p2.has_value());
        CHECK((p1->mean_px - p2->mean_px).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((p1->cov_px - p2->cov_px).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(p1->depth == doctest::Approx(p2->depth).epsilon(1e-9));
    }
}

TEST_CASE("eval_density examples") {
    ProjectedGaussian pg;
    pg.mean_px = Vec2(10, 20);
    pg.cov_px = Mat2::Identity();
    pg.cov_inv = Mat2::Identity();

    CHECK(eval_density(pg, Vec2(10, 20)) == doctest::Approx(1.0));
    CHECK(eval_density(pg, Vec2(10 + std::sqrt(2.0), 20)) ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

    ProjectedGaussian aniso;
    aniso.mean_px = Vec2(0, 0);
    aniso.cov_px << 4, 0, 0, 1;
    aniso.cov_inv << 0.25, 0, 0, 1;
    // Quadratic form: 1/2 (4/4 + 1/1) = 1.
    CHECK(eval_density(aniso, Vec2(2, 1)) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("eval_density rejects a singular covariance") {
    ProjectedGaussian pg;
    pg.cov_px = Mat2::Zero();
    CHECK_THROWS_AS(eval_density(pg, Vec2(0, 0)), NumericalDegeneracyError);
}

TEST_CASE("camera validation") {
    Camera cam = test_camera();
    CHECK_NOTHROW(cam.validate());
    cam.fx = -1.0;
    CHECK_THROWS_AS(cam.validate(), InvalidParameterError);
    Camera bad = test_camera();
    bad.world_to_camera(0, 1) += 0.01;  // breaks orthonormality
    CHECK_THROWS_AS(bad.validate(), InvalidParameterError);
}
