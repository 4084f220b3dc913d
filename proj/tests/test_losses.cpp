#include <cmath>

#include <Eigen/SVD>

#include "doctest.h"
#include "rrgs/losses.hpp"
#include "rrgs/oracle.hpp"
#include "rrgs/spectral.hpp"

using namespace rrgs;

namespace {

std::vector<RayGroup> one_group(const std::vector<int>& members) {
    RayGroup g;
    g.row = 0;
    g.col = 0;
    g.members = members;
    g.weights.assign(members.size(), 0.0);
    return {g};
}

Mat3 random_rotation(Rng& rng) {
    const Vec4 q = rng.unit_quaternion();
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

// Independent Procrustes oracle: SVD of the cross covariance with a
// determinant correction (Kabsch).
Mat3 svd_procrustes(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
    Mat3 h = Mat3::Zero();
    for (size_t i = 0; i < from.size(); ++i) h += from[i] * to[i].transpose();
    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 d = Mat3::Identity();
    d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() > 0 ? 1.0 : -1.0;
    return svd.matrixV() * d * svd.matrixU().transpose();
}

}  // namespace

TEST_CASE("mcr: identical displacements cost almost nothing") {
    std::vector<Vec3> pos_t = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    std::vector<Vec3> pos_dt = pos_t;
    const Vec3 d(0.3, 0.2, -0.1);
    for (auto& p : pos_dt) p += d;
    const RegTerm term = mcr_loss(one_group({0, 1, 2}), pos_t, pos_dt, 1e-8, 1e-4);
    CHECK(term.value < 1e-7);  // only the epsilon guard keeps it from exact zero
    CHECK(term.qualifying == 3);
}

TEST_CASE("mcr: opposite displacements cost about one each") {
    std::vector<Vec3> pos_t = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
    std::vector<Vec3> pos_dt = {Vec3(0.5, 0, 0), Vec3(0.5, 0, 0)};
    // d0 = (0.5,0,0), d1 = (-0.5,0,0): the mean displacement vanishes.
    const RegTerm term = mcr_loss(one_group({0, 1}), pos_t, pos_dt, 1e-8, 1e-4);
    CHECK(term.value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("mcr: members below the motion threshold are excluded") {
    std::vector<Vec3> pos_t = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
    std::vector<Vec3> pos_dt = pos_t;
    pos_dt[0] += Vec3(0.2, 0, 0);
    pos_dt[1] += Vec3(5e-5, 0, 0);  // static under the 1e-4 threshold
    const RegTerm term = mcr_loss(one_group({0, 1}), pos_t, pos_dt, 1e-8, 1e-4);
    CHECK(term.qualifying == 1);
}

TEST_CASE("mcr: no qualifying pairs means zero loss and zero gradients") {
    std::vector<Vec3> pos_t = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
    const RegTerm term = mcr_loss(one_group({0, 1}), pos_t, pos_t, 1e-8, 1e-4);
    CHECK(term.value == 0.0);
    CHECK(term.qualifying == 0);
    for (const auto& g : term.d_pos_t) CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mcr scale invariance") {
    Rng rng(50);
    for (int rep = 0; rep < 10; ++rep) {
        const int n = 6;
        std::vector<Vec3> pos_t(n), pos_dt(n);
        const Vec3 base = rng.normal_vec3(1.0).normalized() * rng.uniform(10.0, 20.0);
        for (int i = 0; i < n; ++i) {
            pos_t[i] = rng.uniform_vec3(-2, 2);
            pos_dt[i] = pos_t[i] + base + rng.normal_vec3(0.05 * base.norm());
        }
        const auto groups = one_group({0, 1, 2, 3, 4, 5});
        const double v1 = mcr_loss(groups, pos_t, pos_dt, 1e-8, 1e-4).value;

        const double c = rng.uniform(0.5, 2.0);
        std::vector<Vec3> scaled(n);
        for (int i = 0; i < n; ++i) scaled[i] = pos_t[i] + c * (pos_dt[i] - pos_t[i]);
        const double v2 = mcr_loss(groups, pos_t, scaled, 1e-8, 1e-4).value;
        CHECK(std::abs(v1 - v2) < 1e-9);
    }
}

TEST_CASE("mcr gradients flow into the group mean") {
    // A member below the motion threshold still receives gradient through
    // the mean displacement.
    std::vector<Vec3> pos_t = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)};
    std::vector<Vec3> pos_dt = pos_t;
    pos_dt[0] += Vec3(0.4, 0.1, 0);
    pos_dt[1] += Vec3(0.3, -0.2, 0.1);
    const RegTerm term = mcr_loss(one_group({0, 1, 2}), pos_t, pos_dt, 1e-8, 1e-4);
    CHECK(term.qualifying == 2);
    CHECK(term.d_pos_dt[2].cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("sr: rigid motion leaves the spectrum unchanged") {
    Rng rng(51);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = rng.uniform_int(2, 12);
        std::vector<Vec3> pos_t(n);
        std::vector<int> members(n);
        for (int i = 0; i < n; ++i) {
            pos_t[i] = rng.uniform_vec3(-2, 2);
            members[i] = i;
        }
        const Mat3 rot = random_rotation(rng);
        const Vec3 shift = rng.uniform_vec3(-3, 3);
        std::vector<Vec3> pos_dt(n);
        for (int i = 0; i < n; ++i) pos_dt[i] = rot * pos_t[i] + shift;
        const RegTerm term = sr_loss(one_group(members), pos_t, pos_dt, 1.0);
        CHECK(term.value < 1e-9);
    }
}

TEST_CASE("sr: uniform dilation quadratic-branch hand value") {
    // Construct a group whose covariance eigenvalues at time t are
    // (0.01, 0.02, 0.03); dilation by 2 about the centroid scales them by 4.
    std::vector<Vec3> pos_t;
    const Vec3 sigma(std::sqrt(0.01), std::sqrt(0.02), std::sqrt(0.03));
    for (const double sx : {-1.0, 1.0})
        for (const double sy : {-1.0, 1.0})
            for (const double sz : {-1.0, 1.0})
                pos_t.push_back(Vec3(sx * sigma[0], sy * sigma[1], sz * sigma[2]));
    std::vector<int> members(8);
    for (int i = 0; i < 8; ++i) members[i] = i;

    std::vector<Vec3> pos_dt(8);
    for (int i = 0; i < 8; ++i) pos_dt[i] = 2.0 * pos_t[i];

    const RegTerm term = sr_loss(one_group(members), pos_t, pos_dt, 1.0);
    // Residuals (0.03, 0.06, 0.09): 0.5*(0.03^2 + 0.06^2 + 0.09^2) = 0.00063.
    CHECK(term.value == doctest::Approx(0.00063).epsilon(1e-9));
}

TEST_CASE("sr: singleton groups are skipped") {
    std::vector<Vec3> pos = {Vec3(0, 0, 0), Vec3(1, 1, 1)};
    std::vector<RayGroup> groups = one_group({0});
    const RegTerm term = sr_loss(groups, pos, pos, 1.0);
    CHECK(term.value == 0.0);
    CHECK(term.qualifying == 0);
}

TEST_CASE("sr gradient matches finite differences on random groups") {
    Rng rng(52);
    const oracle::FiniteDiffConfig fd{1e-6, 1e-4, 1e-8};
    double max_err = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
        const int n = rng.uniform_int(3, 20);
        std::vector<Vec3> pos_t(n), pos_dt(n);
        std::vector<int> members(n);
        for (int i = 0; i < n; ++i) {
            pos_t[i] = rng.uniform_vec3(-2, 2);
            pos_dt[i] = pos_t[i] + rng.uniform_vec3(-0.3, 0.3);
            members[i] = i;
        }
        const auto groups = one_group(members);
        const RegTerm term = sr_loss(groups, pos_t, pos_dt, 1.0);

        for (int i = 0; i < n; ++i) {
            for (int k = 0; k < 3; ++k) {
                auto probe_t = [&](double h) {
                    auto p = pos_t;
                    p[i][k] += h;
                    return sr_loss(groups, p, pos_dt, 1.0).value;
                };
                auto probe_dt = [&](double h) {
                    auto p = pos_dt;
                    p[i][k] += h;
                    return sr_loss(groups, pos_t, p, 1.0).value;
                };
                const double nt = (probe_t(fd.h) - probe_t(-fd.h)) / (2 * fd.h);
                const double ndt = (probe_dt(fd.h) - probe_dt(-fd.h)) / (2 * fd.h);
                max_err = std::max(max_err, oracle::graded_error(term.d_pos_t[i][k], nt, fd));
                max_err = std::max(max_err, oracle::graded_error(term.d_pos_dt[i][k], ndt, fd));
            }
        }
    }
    CHECK(max_err < 1e-4);
}

TEST_CASE("procrustes recovers a known rotation") {
    Rng rng(53);
    for (int rep = 0; rep < 20; ++rep) {
        const Mat3 rot = random_rotation(rng);
        std::vector<Vec3> from(8), to(8);
        for (int i = 0; i < 8; ++i) {
            from[i] = rng.uniform_vec3(-1, 1);
            to[i] = rot * from[i];
        }
        const Mat3 estimated = procrustes_rotation(from, to);
        CHECK((estimated - rot).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(std::abs(estimated.determinant() - 1.0) < 1e-12);
    }
}

TEST_CASE("procrustes agrees with the SVD oracle under noise") {
    Rng rng(54);
    for (int rep = 0; rep < 20; ++rep) {
        const Mat3 rot = random_rotation(rng);
        std::vector<Vec3> from(10), to(10);
        for (int i = 0; i < 10; ++i) {
            from[i] = rng.uniform_vec3(-1, 1);
            to[i] = rot * from[i] + rng.normal_vec3(0.05);
        }
        const Mat3 mine = procrustes_rotation(from, to);
        const Mat3 svd = svd_procrustes(from, to);
        CHECK((mine - svd).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("arap: exactly zero under exact translation, tiny under rotation") {
    // Dyadic coordinates and a dyadic offset keep pairwise differences
    // bitwise equal across time, so the identity rotation is an exact fixed
    // point of the quaternion solve and the loss is exactly 0.
    Rng rng(55);
    const int n = 20;
    std::vector<Vec3> pos_t(n);
    for (auto& p : pos_t) p = dyadic(rng.uniform_vec3(-2, 2));
    const Vec3 shift = dyadic(Vec3(0.31, -0.12, 0.07));
    std::vector<Vec3> pos_dt(n);
    for (int i = 0; i < n; ++i) pos_dt[i] = pos_t[i] + shift;

    const auto knn = knn_groups(pos_t, 5);
    const RegTerm term = arap_loss(neighborhoods_from_knn(knn), pos_t, pos_dt);
    CHECK(term.value == 0.0);

    // General rigid motion: zero up to roundoff.
    const Mat3 rot = random_rotation(rng);
    for (int i = 0; i < n; ++i) pos_dt[i] = rot * pos_t[i] + shift;
    const RegTerm rigid = arap_loss(neighborhoods_from_knn(knn), pos_t, pos_dt);
    CHECK(rigid.value < 1e-9);
}

TEST_CASE("arap: positive under anisotropic stretch") {
    Rng rng(56);
    const int n = 15;
    std::vector<Vec3> pos_t(n), pos_dt(n);
    for (int i = 0; i < n; ++i) {
        pos_t[i] = rng.uniform_vec3(-1, 1);
        pos_dt[i] = Vec3(2.0 * pos_t[i].x(), pos_t[i].y(), pos_t[i].z());
    }
    const auto knn = knn_groups(pos_t, 4);
    CHECK(arap_loss(neighborhoods_from_knn(knn), pos_t, pos_dt).value > 1e-3);
}

TEST_CASE("arap residuals match an independent recomputation with oracle SVD") {
    Rng rng(57);
    const int n = 12;
    std::vector<Vec3> pos_t(n), pos_dt(n);
    for (int i = 0; i < n; ++i) {
        pos_t[i] = rng.uniform_vec3(-1, 1);
        pos_dt[i] = pos_t[i] + rng.normal_vec3(0.02);
    }
    const auto knn = knn_groups(pos_t, 4);
    const auto neighborhoods = neighborhoods_from_knn(knn);
    const RegTerm term = arap_loss(neighborhoods, pos_t, pos_dt);

    double expected = 0.0;
    long pairs = 0;
    for (const auto& nb : neighborhoods) {
        std::vector<Vec3> from, to;
        for (int j : nb.others) {
            from.push_back(pos_t[j] - pos_t[nb.center]);
            to.push_back(pos_dt[j] - pos_dt[nb.center]);
        }
        const Mat3 rot = svd_procrustes(from, to);
        for (size_t j = 0; j < from.size(); ++j) {
            expected += (to[j] - rot * from[j]).squaredNorm();
            ++pairs;
        }
    }
    expected /= double(pairs);
    CHECK(term.value == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("arap gradient matches finite differences (rotation detached)") {
    // With R frozen the analytic gradient is exact for the detached
    // objective; verify against finite differences of that same objective.
    Rng rng(58);
    const int n = 8;
    std::vector<Vec3> pos_t(n), pos_dt(n);
    for (int i = 0; i < n; ++i) {
        pos_t[i] = rng.uniform_vec3(-1, 1);
        pos_dt[i] = pos_t[i] + rng.normal_vec3(0.05);
    }
    const auto neighborhoods = neighborhoods_from_knn(knn_groups(pos_t, 3));
    const RegTerm term = arap_loss(neighborhoods, pos_t, pos_dt);

    // Recompute the frozen rotations once.
    std::vector<Mat3> rotations;
    for (const auto& nb : neighborhoods) {
        std::vector<Vec3> from, to;
        for (int j : nb.others) {
            from.push_back(pos_t[j] - pos_t[nb.center]);
            to.push_back(pos_dt[j] - pos_dt[nb.center]);
        }
        rotations.push_back(procrustes_rotation(from, to));
    }
    long pairs = term.qualifying;
    auto detached = [&](const std::vector<Vec3>& pt, const std::vector<Vec3>& pdt) {
        double total = 0.0;
        for (size_t g = 0; g < neighborhoods.size(); ++g) {
            const auto& nb = neighborhoods[g];
            for (int j : nb.others) {
                const Vec3 resid = (pdt[j] - pdt[nb.center]) -
                                   rotations[g] * (pt[j] - pt[nb.center]);
                total += resid.squaredNorm();
            }
        }
        return total / double(pairs);
    };

    const double h = 1e-6;
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k) {
            auto pt = pos_t;
            pt[i][k] += h;
            double up = detached(pt, pos_dt);
            pt[i][k] -= 2 * h;
            double dn = detached(pt, pos_dt);
            CHECK(std::abs(term.d_pos_t[i][k] - (up - dn) / (2 * h)) < 1e-6);

            auto pdt = pos_dt;
            pdt[i][k] += h;
            up = detached(pos_t, pdt);
            pdt[i][k] -= 2 * h;
            dn = detached(pos_t, pdt);
            CHECK(std::abs(term.d_pos_dt[i][k] - (up - dn) / (2 * h)) < 1e-6);
        }
    }
}

TEST_CASE("photometric: identical images cost zero") {
    Image img(16, 16);
    Rng rng(59);
    for (auto& v : img.data) v = rng.uniform();
    const PhotometricResult res = photometric_loss(img, img, 0.2);
    CHECK(res.value == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(res.l1 == 0.0);
    CHECK(res.ssim == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("photometric: constant offset, pure l1") {
    Image a(16, 16), b(16, 16);
    for (auto& v : a.data) v = 0.5;
    for (auto& v : b.data) v = 0.6;
    const PhotometricResult res = photometric_loss(a, b, 0.0);
    CHECK(res.value == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("photometric rejects size mismatches") {
    CHECK_THROWS_AS(photometric_loss(Image(16, 16), Image(16, 17), 0.2),
                    InvalidParameterError);
}

TEST_CASE("photometric image gradient matches finite differences") {
    Rng rng(60);
    Image rendered(14, 14), target(14, 14);
    for (auto& v : rendered.data) v = rng.uniform();
    for (auto& v : target.data) v = rng.uniform();
    const double lambda = 0.35;
    const PhotometricResult res = photometric_loss(rendered, target, lambda);

    const double h = 1e-6;
    Rng pick(61);
    for (int probe = 0; probe < 60; ++probe) {
        const size_t i = size_t(pick.uniform_int(0, int(rendered.data.size()) - 1));
        Image plus = rendered, minus = rendered;
        plus.data[i] += h;
        minus.data[i] -= h;
        const double numeric = (photometric_loss(plus, target, lambda).value -
                                photometric_loss(minus, target, lambda).value) /
                               (2 * h);
        CHECK(std::abs(res.d_image.data[i] - numeric) < 1e-4 * std::max(1.0, std::abs(numeric)));
    }
}

TEST_CASE("total objective combinations") {
    LossWeights w;
    w.lambda_dssim = 0.2;
    w.lambda_mcr = 0.005;
    w.lambda_sr = 1.0;
    w.lambda_arap = 0.0;
    const LossReport r = total_objective(0.5, 0.25, 2.0, 0.125, 7.0, w);
    CHECK(r.total == doctest::Approx(0.8 * 0.5 + 0.2 * 0.25 + 0.005 * 2.0 + 1.0 * 0.125)
                         .epsilon(1e-12));

    LossWeights zero;
    zero.lambda_dssim = 0.0;
    zero.lambda_mcr = 0.0;
    zero.lambda_sr = 0.0;
    zero.lambda_arap = 0.0;
    CHECK(total_objective(0.5, 0.9, 1.0, 1.0, 1.0, zero).total == doctest::Approx(0.5));
}

TEST_CASE("timestep pair sampling stays inside the clamped interval") {
    Rng rng(62);
    for (int rep = 0; rep < 1000; ++rep) {
        const double t2 = sample_timestep_pair(0.0, 0.5, 1.0, rng);
        CHECK(t2 >= 0.0);
        CHECK(t2 <= 0.5);
    }
    // m -> 0 degenerates to t.
    CHECK(sample_timestep_pair(0.3, 0.0, 1.0, rng) == 0.3);
}

TEST_CASE("timestep pair sampling is uniform on the clamped interval") {
    // Kolmogorov-Smirnov against the uniform CDF on [0, 0.5] for t=0, m=0.5.
    Rng rng(63);
    const int draws = 100000;
    std::vector<double> samples(draws);
    for (auto& s : samples) s = sample_timestep_pair(0.0, 0.5, 1.0, rng);
    std::sort(samples.begin(), samples.end());
    double d_stat = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double cdf = samples[i] / 0.5;
        d_stat = std::max(d_stat, std::abs(cdf - double(i + 1) / draws));
        d_stat = std::max(d_stat, std::abs(cdf - double(i) / draws));
    }
    // KS critical value for p = 0.01 is about 1.63 / sqrt(n).
    CHECK(d_stat < 1.63 / std::sqrt(double(draws)));
}
