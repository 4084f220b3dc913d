#include "rrgs/verify.hpp"

#include <cmath>
#include <functional>

#include "json.hpp"
#include "rrgs/core_types.hpp"
#include "rrgs/grouping.hpp"
#include "rrgs/losses.hpp"
#include "rrgs/oracle.hpp"
#include "rrgs/rasterizer.hpp"
#include "rrgs/spectral.hpp"
#include "rrgs/streaming_stats.hpp"

namespace rrgs {

namespace {

using oracle::FiniteDiffConfig;

CheckResult make_result(const std::string& name, double max_error, double tol) {
    return {name, max_error, tol, max_error < tol};
}

std::vector<Vec3> unflatten3(const std::vector<double>& x) {
    std::vector<Vec3> v(x.size() / 3);
    for (size_t i = 0; i < v.size(); ++i) v[i] = Vec3(x[i * 3], x[i * 3 + 1], x[i * 3 + 2]);
    return v;
}

std::vector<double> flatten3(const std::vector<Vec3>& v) {
    std::vector<double> x(v.size() * 3);
    for (size_t i = 0; i < v.size(); ++i)
        for (int k = 0; k < 3; ++k) x[i * 3 + k] = v[i][k];
    return x;
}

CheckResult check_welford() {
    Rng rng(101);
    double max_err = 0.0;
    for (int rep = 0; rep < 300; ++rep) {
        const int n = rng.uniform_int(1, 100);
        std::vector<Vec3> pts(n);
        GroupStats stats(false);
        for (auto& p : pts) {
            p = rng.uniform_vec3(-10.0, 10.0);
            stats.update(p);
        }
        const auto [mean, cov] = stats.finalize();
        const auto [mean2, cov2] = oracle::twopass_covariance(pts);
        max_err = std::max(max_err, (cov - cov2).cwiseAbs().maxCoeff());
        max_err = std::max(max_err, (mean - mean2).cwiseAbs().maxCoeff());
    }
    return make_result("welford_vs_twopass", max_err, 1e-10);
}

CheckResult check_covariance_gradient(bool inject_sign_flip) {
    Rng rng(202);
    const FiniteDiffConfig fd{1e-6, 1e-5, 1e-8};
    double max_err = 0.0;
    for (const int n : {2, 3, 5, 10, 30}) {
        for (int variant = 0; variant < 2; ++variant) {
            std::vector<Vec3> pts(n);
            for (auto& p : pts) p = rng.uniform_vec3(-5.0, 5.0);
            Mat3 a;
            if (variant == 0) {
                a.setIdentity();  // L = trace(K)
            } else {
                for (int r = 0; r < 3; ++r)
                    for (int c = 0; c < 3; ++c) a(r, c) = rng.normal();
                a = Mat3(0.5 * (a + a.transpose()));
            }

            GroupStats stats;
            for (const auto& p : pts) stats.update(p);
            auto analytic = stats.covariance_backward(a);
            if (inject_sign_flip)
                for (auto& g : analytic) g = -g;

            const auto loss = [&](const std::vector<double>& x) {
                const auto [m, k] = oracle::twopass_covariance(unflatten3(x));
                return (a.array() * k.array()).sum();
            };
            const auto numeric = oracle::finite_diff_gradient(loss, flatten3(pts), fd);
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < 3; ++k)
                    max_err = std::max(max_err, oracle::graded_error(analytic[i][k],
                                                                     numeric[size_t(i) * 3 + k],
                                                                     fd));
        }
    }
    return make_result("covariance_gradient", max_err, 1e-5);
}

CheckResult check_eigenvalue_gradient() {
    Rng rng(303);
    const FiniteDiffConfig fd{1e-6, 1e-5, 1e-8};
    double max_err = 0.0;
    for (int rep = 0; rep < 40; ++rep) {
        Mat3 k;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) k(r, c) = rng.normal();
        k = Mat3(0.5 * (k + k.transpose()));
        const EigenResult res = eig3_sym(k);
        if (res.eigenvalues[1] - res.eigenvalues[0] < 1e-3 ||
            res.eigenvalues[2] - res.eigenvalues[1] < 1e-3)
            continue;  // the identity only holds cleanly for separated spectra
        const Vec3 cot(rng.normal(), rng.normal(), rng.normal());
        const Mat3 analytic = eigenvalue_backward(res, cot);

        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                auto eval = [&](double delta) {
                    Mat3 kp = k;
                    kp(r, c) += delta;
                    kp(c, r) = kp(r, c);  // keep symmetric perturbations
                    const EigenResult e = eig3_sym(kp);
                    return cot.dot(e.eigenvalues);
                };
                double numeric = (eval(fd.h) - eval(-fd.h)) / (2.0 * fd.h);
                if (r != c) numeric *= 0.5;  // symmetric perturbation hits both entries
                max_err = std::max(max_err, oracle::graded_error(analytic(r, c), numeric, fd));
            }
        }
    }
    return make_result("eigenvalue_gradient", max_err, 1e-5);
}

std::vector<RayGroup> random_groups(Rng& rng, int n_positions, int group_count, int min_size,
                                    int max_size) {
    std::vector<RayGroup> groups;
    for (int g = 0; g < group_count; ++g) {
        RayGroup rg;
        rg.row = g;
        rg.col = 0;
        const int size = rng.uniform_int(min_size, max_size);
        std::vector<int> pool(n_positions);
        for (int i = 0; i < n_positions; ++i) pool[i] = i;
        for (int j = 0; j < size && !pool.empty(); ++j) {
            const int pick = rng.uniform_int(0, int(pool.size()) - 1);
            rg.members.push_back(pool[pick]);
            pool.erase(pool.begin() + pick);
        }
        rg.weights.assign(rg.members.size(), 0.0);
        groups.push_back(std::move(rg));
    }
    return groups;
}

CheckResult check_mcr_gradient() {
    Rng rng(404);
    const FiniteDiffConfig fd{1e-6, 1e-4, 1e-8};
    const double eps = 1e-8, thresh = 1e-4;
    double max_err = 0.0;
    for (int rep = 0; rep < 6; ++rep) {
        const int n = 12;
        std::vector<Vec3> pos_t(n), pos_dt(n);
        for (int i = 0; i < n; ++i) {
            pos_t[i] = rng.uniform_vec3(-2.0, 2.0);
            pos_dt[i] = pos_t[i] + rng.uniform_vec3(-0.5, 0.5);
        }
        const auto groups = random_groups(rng, n, 4, 2, 6);
        const RegTerm term = mcr_loss(groups, pos_t, pos_dt, eps, thresh);

        auto loss_t = [&](const std::vector<double>& x) {
            return mcr_loss(groups, unflatten3(x), pos_dt, eps, thresh).value;
        };
        auto loss_dt = [&](const std::vector<double>& x) {
            return mcr_loss(groups, pos_t, unflatten3(x), eps, thresh).value;
        };
        const auto num_t = oracle::finite_diff_gradient(loss_t, flatten3(pos_t), fd);
        const auto num_dt = oracle::finite_diff_gradient(loss_dt, flatten3(pos_dt), fd);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < 3; ++k) {
                max_err = std::max(max_err, oracle::graded_error(term.d_pos_t[i][k],
                                                                 num_t[size_t(i) * 3 + k], fd));
                max_err = std::max(max_err, oracle::graded_error(term.d_pos_dt[i][k],
                                                                 num_dt[size_t(i) * 3 + k], fd));
            }
    }
    return make_result("mcr_gradient", max_err, 1e-4);
}

CheckResult check_sr_gradient() {
    Rng rng(505);
    const FiniteDiffConfig fd{1e-6, 1e-4, 1e-8};
    const double delta = 1.0;
    double max_err = 0.0;
    for (int rep = 0; rep < 6; ++rep) {
        const int n = 16;
        std::vector<Vec3> pos_t(n), pos_dt(n);
        for (int i = 0; i < n; ++i) {
            pos_t[i] = rng.uniform_vec3(-2.0, 2.0);
            pos_dt[i] = pos_t[i] + rng.uniform_vec3(-0.4, 0.4);
        }
        const auto groups = random_groups(rng, n, 3, 3, 8);
        const RegTerm term = sr_loss(groups, pos_t, pos_dt, delta);

        auto loss_t = [&](const std::vector<double>& x) {
            return sr_loss(groups, unflatten3(x), pos_dt, delta).value;
        };
        auto loss_dt = [&](const std::vector<double>& x) {
            return sr_loss(groups, pos_t, unflatten3(x), delta).value;
        };
        const auto num_t = oracle::finite_diff_gradient(loss_t, flatten3(pos_t), fd);
        const auto num_dt = oracle::finite_diff_gradient(loss_dt, flatten3(pos_dt), fd);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < 3; ++k) {
                max_err = std::max(max_err, oracle::graded_error(term.d_pos_t[i][k],
                                                                 num_t[size_t(i) * 3 + k], fd));
                max_err = std::max(max_err, oracle::graded_error(term.d_pos_dt[i][k],
                                                                 num_dt[size_t(i) * 3 + k], fd));
            }
    }
    return make_result("sr_gradient", max_err, 1e-4);
}

// Small random scene shared by the render checks.
struct TestScene {
    GaussianSet set;
    FrameState frame;
    Camera cam;
    Image target;
};

TestScene make_render_scene(Rng& rng, int n, int size) {
    TestScene ts;
    ts.set.resize(n);
    for (auto& g : ts.set) {
        g.position = rng.uniform_vec3(-0.6, 0.6);
        g.scale = Vec3(rng.uniform(0.08, 0.25), rng.uniform(0.08, 0.25), rng.uniform(0.08, 0.25));
        g.rotation = rng.unit_quaternion();
        g.opacity = rng.uniform(0.3, 1.0);
        g.color = rng.uniform_vec3(0.1, 0.9);
    }
    ts.frame = frame_from_set(ts.set);
    ts.cam = make_lookat_camera(Vec3(0, 0, -3.0), Vec3::Zero(), Vec3(0, 1, 0), 1.4 * size,
                                1.4 * size, size, size);
    ts.target = Image(size, size);
    for (auto& v : ts.target.data) v = rng.uniform();
    return ts;
}

CheckResult check_render_gradient() {
    Rng rng(606);
    TestScene ts = make_render_scene(rng, 10, 24);
    const double lambda = 0.2;
    RenderOptions opts;

    const RenderOutput out = render(ts.frame, ts.set, ts.cam, opts);
    const PhotometricResult photo = photometric_loss(out.image, ts.target, lambda);
    const ParamGradients grads = render_backward(out, ts.frame, ts.set, ts.cam, photo.d_image);

    auto eval = [&](const FrameState& f, const GaussianSet& s) {
        return photometric_loss(render(f, s, ts.cam, opts).image, ts.target, lambda).value;
    };

    const FiniteDiffConfig fd_pos{1e-5, 1e-3, 1e-8};
    const FiniteDiffConfig fd_op{1e-6, 1e-3, 1e-8};
    double max_err = 0.0;
    for (size_t i = 0; i < ts.set.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            auto probe = [&](double h) {
                FrameState f = ts.frame;
                f.positions[i][k] += h;
                return eval(f, ts.set);
            };
            const double num = (probe(fd_pos.h) - probe(-fd_pos.h)) / (2 * fd_pos.h);
            max_err = std::max(max_err,
                               oracle::graded_error(grads.d_position[i][k], num, fd_pos));
        }
        for (int k = 0; k < 3; ++k) {
            auto probe = [&](double h) {
                FrameState f = ts.frame;
                f.scales[i][k] += h;
                return eval(f, ts.set);
            };
            const double num = (probe(fd_pos.h) - probe(-fd_pos.h)) / (2 * fd_pos.h);
            max_err = std::max(max_err, oracle::graded_error(grads.d_scale[i][k], num, fd_pos));
        }
        for (int k = 0; k < 4; ++k) {
            auto probe = [&](double h) {
                FrameState f = ts.frame;
                f.rotations[i][k] += h;
                return eval(f, ts.set);
            };
            const double num = (probe(fd_pos.h) - probe(-fd_pos.h)) / (2 * fd_pos.h);
            max_err = std::max(max_err, oracle::graded_error(grads.d_rotation[i][k], num, fd_pos));
        }
        {
            auto probe = [&](double h) {
                FrameState f = ts.frame;
                f.opacities[i] += h;
                return eval(f, ts.set);
            };
            const double num = (probe(fd_op.h) - probe(-fd_op.h)) / (2 * fd_op.h);
            max_err = std::max(max_err, oracle::graded_error(grads.d_opacity[i], num, fd_op));
        }
        for (int k = 0; k < 3; ++k) {
            auto probe = [&](double h) {
                GaussianSet s = ts.set;
                s[i].color[k] += h;
                return eval(ts.frame, s);
            };
            const double num = (probe(fd_pos.h) - probe(-fd_pos.h)) / (2 * fd_pos.h);
            max_err = std::max(max_err, oracle::graded_error(grads.d_color[i][k], num, fd_pos));
        }
    }
    return make_result("render_gradient", max_err, 1e-3);
}

CheckResult check_blend_vs_reference() {
    Rng rng(707);
    TestScene ts = make_render_scene(rng, 12, 16);
    RenderOptions opts;
    opts.background = Vec3(0.2, 0.1, 0.3);
    const RenderOutput out = render(ts.frame, ts.set, ts.cam, opts);

    double max_err = 0.0;
    for (int r = 0; r < 16; ++r) {
        for (int c = 0; c < 16; ++c) {
            std::vector<std::pair<double, Vec3>> frags;
            for (const Fragment& f : out.fragments_at(r, c))
                frags.emplace_back(f.alpha, ts.set[f.gaussian].color);
            const Vec3 expected = oracle::reference_blend(frags, opts.background);
            max_err = std::max(max_err,
                               (expected - out.image.pixel(r, c)).cwiseAbs().maxCoeff());
        }
    }
    return make_result("blend_vs_reference", max_err, 1e-12);
}

}  // namespace

std::vector<CheckResult> run_verification(const VerifyOptions& opts) {
    std::vector<CheckResult> results;
    results.push_back(check_welford());
    results.push_back(check_covariance_gradient(opts.inject_fault == "covariance_gradient"));
    results.push_back(check_eigenvalue_gradient());
    results.push_back(check_mcr_gradient());
    results.push_back(check_sr_gradient());
    results.push_back(check_render_gradient());
    results.push_back(check_blend_vs_reference());
    return results;
}

std::string verification_report_json(const std::vector<CheckResult>& results) {
    nlohmann::json j;
    j["checks"] = nlohmann::json::array();
    for (const auto& r : results) {
        nlohmann::json c;
        c["name"] = r.name;
        c["max_error"] = r.max_error;
        c["tolerance"] = r.tolerance;
        c["pass"] = r.pass;
        j["checks"].push_back(c);
    }
    j["all_pass"] = all_passed(results);
    return j.dump(2);
}

bool all_passed(const std::vector<CheckResult>& results) {
    for (const auto& r : results)
        if (!r.pass) return false;
    return true;
}

}  // namespace rrgs
