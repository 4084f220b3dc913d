#include "rrgs/rasterizer.hpp"

#include <algorithm>
#include <cmath>

namespace rrgs {

namespace {

struct Candidate {
    double depth;
    int source;
    int proj;
};

struct FragGrad {
    Vec2 d_mean = Vec2::Zero();
    Mat2 d_cov = Mat2::Zero();
    double d_opacity = 0.0;
    Vec3 d_color = Vec3::Zero();
};

// Pixels whose center lies farther than this radius from the projected mean
// cannot reach alpha_min: the quadratic form is at least |d|^2 / lambda_max.
double cull_radius(double opacity, double alpha_min, double lambda_max) {
    const double log_ratio = std::log(opacity / alpha_min);
    if (log_ratio <= 0.0) return -1.0;
    return std::sqrt(2.0 * log_ratio * lambda_max);
}

// d(rotation)/d(q_j) for a unit quaternion (w,x,y,z).
Mat3 rotation_partial(const Vec4& q, int j) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 d;
    switch (j) {
        case 0:
            d << 0, -z, y, z, 0, -x, -y, x, 0;
            break;
        case 1:
            d << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
            break;
        case 2:
            d << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
            break;
        default:
            d << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
            break;
    }
    return 2.0 * d;
}

}  // namespace

void ParamGradients::resize_zero(size_t n) {
    d_position.assign(n, Vec3::Zero());
    d_scale.assign(n, Vec3::Zero());
    d_rotation.assign(n, Vec4::Zero());
    d_opacity.assign(n, 0.0);
    d_color.assign(n, Vec3::Zero());
}

void ParamGradients::accumulate(const ParamGradients& other) {
    for (size_t i = 0; i < d_position.size(); ++i) {
        d_position[i] += other.d_position[i];
        d_scale[i] += other.d_scale[i];
        d_rotation[i] += other.d_rotation[i];
        d_opacity[i] += other.d_opacity[i];
        d_color[i] += other.d_color[i];
    }
}

std::vector<std::pair<int, double>> sort_fragments(std::vector<std::pair<int, double>> fragments) {
    std::sort(fragments.begin(), fragments.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        return a.first < b.first;
    });
    return fragments;
}

RenderOutput render(const FrameState& frame, const GaussianSet& set, const Camera& cam,
                    const RenderOptions& opts) {
    cam.validate();
    const int n = int(set.size());
    if (int(frame.size()) != n)
        throw InvalidParameterError("render: frame and set sizes differ");
    for (const auto& p : frame.positions)
        if (!p.allFinite()) throw InvalidParameterError("render: non-finite frame position");

    const int width = cam.width, height = cam.height;
    RenderOutput out;
    out.image = Image(width, height);
    out.background = opts.background;
    out.options = opts;
    out.projected_of_source.assign(n, -1);
    out.fragments.assign(size_t(width) * height, {});
    out.final_transmittance.assign(size_t(width) * height, 1.0);

    // Project every Gaussian; keep results in source order.
    std::vector<std::optional<ProjectedGaussian>> proj(n);
    parallel_for(n, [&](int i) {
        Gaussian3D g;
        g.position = frame.positions[i];
        g.scale = frame.scales[i];
        g.rotation = frame.rotations[i];
        g.opacity = frame.opacities[i];
        g.color = set[i].color;
        proj[i] = project_gaussian(g, cam);
        if (proj[i]) proj[i]->source_index = i;
    });
    out.projected.reserve(n);
    for (int i = 0; i < n; ++i) {
        if (proj[i]) {
            out.projected_of_source[i] = int(out.projected.size());
            out.projected.push_back(*proj[i]);
        }
    }

    // Bin visible Gaussians into the image rows their footprint can touch.
    struct Bin {
        int proj;
        int c0, c1;
    };
    std::vector<std::vector<Bin>> row_bins(height);
    std::vector<std::pair<int, int>> row_range(out.projected.size(), {0, -1});
    for (int p = 0; p < int(out.projected.size()); ++p) {
        const auto& pg = out.projected[p];
        const double o = frame.opacities[pg.source_index];
        const double radius = cull_radius(o, opts.alpha_min, pg.lambda_max);
        if (radius < 0.0) continue;
        int r0 = int(std::floor(pg.mean_px.y() - radius - 0.5)) - 1;
        int r1 = int(std::ceil(pg.mean_px.y() + radius - 0.5)) + 1;
        int c0 = int(std::floor(pg.mean_px.x() - radius - 0.5)) - 1;
        int c1 = int(std::ceil(pg.mean_px.x() + radius - 0.5)) + 1;
        r0 = std::max(r0, 0);
        r1 = std::min(r1, height - 1);
        c0 = std::max(c0, 0);
        c1 = std::min(c1, width - 1);
        if (r0 > r1 || c0 > c1) continue;
        for (int r = r0; r <= r1; ++r) row_bins[r].push_back({p, c0, c1});
    }

    parallel_for(height, [&](int row) {
        std::vector<Candidate> cands;
        for (int col = 0; col < width; ++col) {
            const Vec2 x(col + 0.5, row + 0.5);
            cands.clear();
            for (const Bin& b : row_bins[row]) {
                if (col < b.c0 || col > b.c1) continue;
                const auto& pg = out.projected[b.proj];
                cands.push_back({pg.depth, pg.source_index, b.proj});
            }
            std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
                if (a.depth != b.depth) return a.depth < b.depth;
                return a.source < b.source;
            });

            Vec3 color = Vec3::Zero();
            double transmittance = 1.0;
            auto& frag_list = out.fragments[size_t(row) * width + col];
            for (const Candidate& cand : cands) {
                const auto& pg = out.projected[cand.proj];
                const double density = eval_density(pg, x);
                const double alpha = frame.opacities[cand.source] * density;
                if (alpha < opts.alpha_min) continue;
                const double decay = std::exp(-alpha);
                const double weight = transmittance * (1.0 - decay);
                color += weight * set[cand.source].color;
                if (opts.retain_fragments)
                    frag_list.push_back({cand.source, alpha, transmittance, weight});
                transmittance *= decay;
                if (transmittance < opts.transmittance_floor) break;
            }
            out.final_transmittance[size_t(row) * width + col] = transmittance;
            out.image.set_pixel(row, col, color + transmittance * opts.background);
        }
    });
    return out;
}

ParamGradients render_backward(const RenderOutput& out, const FrameState& frame,
                               const GaussianSet& set, const Camera& cam,
                               const Image& dL_dimage) {
    if (!out.options.retain_fragments)
        throw ContractViolationError("render_backward: fragment records were not retained");
    if (!dL_dimage.same_size(out.image))
        throw InvalidParameterError("render_backward: cotangent image size mismatch");

    const int width = out.image.width, height = out.image.height;
    const int n = int(set.size());
    const int np = int(out.projected.size());

    // Phase 1: per-pixel, per-fragment gradients in projected-Gaussian screen
    // space. Each pixel owns its slot, so this parallelizes cleanly.
    std::vector<std::vector<FragGrad>> pixel_grads(size_t(width) * height);
    parallel_for(height, [&](int row) {
        for (int col = 0; col < width; ++col) {
            const size_t pix = size_t(row) * width + col;
            const auto& frags = out.fragments[pix];
            if (frags.empty()) continue;
            auto& grads = pixel_grads[pix];
            grads.resize(frags.size());

            const Vec3 g = dL_dimage.pixel(row, col);
            const Vec2 x(col + 0.5, row + 0.5);
            // Suffix color: everything composited behind fragment i plus the
            // background term. Built back-to-front.
            Vec3 suffix = out.final_transmittance[pix] * out.background;
            for (int i = int(frags.size()) - 1; i >= 0; --i) {
                const Fragment& f = frags[i];
                const int proj_idx = out.projected_of_source[f.gaussian];
                const auto& pg = out.projected[proj_idx];
                const Vec3& c = set[f.gaussian].color;
                const double o = frame.opacities[f.gaussian];
                const double decay = std::exp(-f.alpha);
                const double density = f.alpha / o;

                FragGrad& fg = grads[i];
                fg.d_color = g * f.weight;
                const double d_alpha =
                    g.dot(f.transmittance * decay * c - suffix);
                fg.d_opacity = d_alpha * density;
                const double d_density = d_alpha * o;

                const Vec2 d = x - pg.mean_px;
                const Vec2 v = pg.cov_inv * d;
                fg.d_mean = d_density * density * v;
                fg.d_cov = d_density * density * 0.5 * (v * v.transpose());

                suffix += f.weight * c;
            }
        }
    });

    // Phase 2: deterministic reduction in row-major pixel order.
    std::vector<Vec2> acc_mean(np, Vec2::Zero());
    std::vector<Mat2> acc_cov(np, Mat2::Zero());
    std::vector<double> acc_opacity(np, 0.0);
    std::vector<Vec3> acc_color(np, Vec3::Zero());
    for (size_t pix = 0; pix < pixel_grads.size(); ++pix) {
        const auto& frags = out.fragments[pix];
        const auto& grads = pixel_grads[pix];
        for (size_t i = 0; i < grads.size(); ++i) {
            const int p = out.projected_of_source[frags[i].gaussian];
            acc_mean[p] += grads[i].d_mean;
            acc_cov[p] += grads[i].d_cov;
            acc_opacity[p] += grads[i].d_opacity;
            acc_color[p] += grads[i].d_color;
        }
    }

    // Phase 3: chain screen-space gradients through projection and covariance
    // construction. One projected entry per source, so writes are disjoint.
    ParamGradients result;
    result.resize_zero(n);
    const Mat3 W = cam.rotation();
    parallel_for(np, [&](int p) {
        const auto& pg = out.projected[p];
        const int src = pg.source_index;
        result.d_opacity[src] = acc_opacity[p];
        result.d_color[src] = acc_color[p];

        const Vec3 t = pg.t_cam;
        const double tz = t.z(), inv_z = 1.0 / tz;
        Eigen::Matrix<double, 2, 3> J;
        J << cam.fx * inv_z, 0.0, -cam.fx * t.x() * inv_z * inv_z,
            0.0, cam.fy * inv_z, -cam.fy * t.y() * inv_z * inv_z;

        const Mat2 gc = 0.5 * (acc_cov[p] + acc_cov[p].transpose());
        const Mat3 sigma = build_covariance(frame.scales[src], frame.rotations[src]);
        const Mat3 cam_cov = W * sigma * W.transpose();

        // Screen mean path: d(mean)/d(t) equals J.
        Vec3 d_t = J.transpose() * acc_mean[p];

        // Covariance path through both M and the t-dependent Jacobian.
        const Mat3 d_cam_cov = J.transpose() * gc * J;
        const Eigen::Matrix<double, 2, 3> d_J = 2.0 * gc * J * cam_cov;
        const double inv_z2 = inv_z * inv_z;
        d_t.x() += d_J(0, 2) * (-cam.fx * inv_z2);
        d_t.y() += d_J(1, 2) * (-cam.fy * inv_z2);
        d_t.z() += d_J(0, 0) * (-cam.fx * inv_z2) + d_J(1, 1) * (-cam.fy * inv_z2) +
                   d_J(0, 2) * (2.0 * cam.fx * t.x() * inv_z2 * inv_z) +
                   d_J(1, 2) * (2.0 * cam.fy * t.y() * inv_z2 * inv_z);

        result.d_position[src] = W.transpose() * d_t;

        const Mat3 d_sigma = W.transpose() * d_cam_cov * W;

        // Sigma = R diag(s^2) R^T.
        const Vec4& q_raw = frame.rotations[src];
        const double q_norm = q_raw.norm();
        const Vec4 q = q_raw / q_norm;
        const Mat3 R = quat_to_rotation(q_raw);
        const Vec3& s = frame.scales[src];
        const Mat3 d_diag = R.transpose() * d_sigma * R;
        for (int k = 0; k < 3; ++k) result.d_scale[src][k] = 2.0 * s[k] * d_diag(k, k);

        const Mat3 d_R = 2.0 * d_sigma * R * s.cwiseProduct(s).asDiagonal();
        Vec4 d_q_hat;
        for (int j = 0; j < 4; ++j)
            d_q_hat[j] = (d_R.array() * rotation_partial(q, j).array()).sum();
        result.d_rotation[src] = (d_q_hat - q * q.dot(d_q_hat)) / q_norm;
    });
    return result;
}

}  // namespace rrgs
