#include "rrgs/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "rrgs/spectral.hpp"
#include "rrgs/streaming_stats.hpp"

namespace rrgs {

namespace {

void check_positions(const std::vector<RayGroup>& groups, size_t n) {
    for (const auto& g : groups)
        for (int m : g.members)
            if (m < 0 || size_t(m) >= n)
                throw InvalidParameterError("loss: group member index out of range");
}

// Symmetric 4x4 Jacobi eigendecomposition. Rotations are applied only to
// strictly nonzero off-diagonal entries, so zero rows stay exactly zero; this
// keeps the identity-rotation fixed point of the Procrustes problem exact.
void jacobi4_sym(Eigen::Matrix4d A, Eigen::Vector4d& evals, Eigen::Matrix4d& evecs) {
    evecs.setIdentity();
    for (int sweep = 0; sweep < 30; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < 4; ++p)
            for (int q = p + 1; q < 4; ++q) off += A(p, q) * A(p, q);
        if (off == 0.0) break;
        for (int p = 0; p < 4; ++p) {
            for (int q = p + 1; q < 4; ++q) {
                const double apq = A(p, q);
                if (apq == 0.0) continue;
                const double tau = (A(q, q) - A(p, p)) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (int k = 0; k < 4; ++k) {
                    const double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < 4; ++k) {
                    const double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < 4; ++k) {
                    const double vkp = evecs(k, p), vkq = evecs(k, q);
                    evecs(k, p) = c * vkp - s * vkq;
                    evecs(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    for (int k = 0; k < 4; ++k) evals[k] = A(k, k);
}

}  // namespace

RegTerm mcr_loss(const std::vector<RayGroup>& groups, const std::vector<Vec3>& pos_t,
                 const std::vector<Vec3>& pos_dt, double epsilon, double motion_threshold) {
    if (!(epsilon > 0.0)) throw InvalidParameterError("mcr_loss: epsilon must be positive");
    if (pos_t.size() != pos_dt.size())
        throw InvalidParameterError("mcr_loss: frame sizes differ");
    check_positions(groups, pos_t.size());

    RegTerm out;
    out.d_pos_t.assign(pos_t.size(), Vec3::Zero());
    out.d_pos_dt.assign(pos_t.size(), Vec3::Zero());

    double total = 0.0;
    long pairs = 0;
    std::vector<std::vector<Vec3>> group_d_disp;
    group_d_disp.reserve(groups.size());
    std::vector<const RayGroup*> group_ptr;

    for (const auto& g : groups) {
        const int m = int(g.members.size());
        if (m == 0) continue;
        std::vector<Vec3> disp(m);
        Vec3 mean_disp = Vec3::Zero();
        for (int j = 0; j < m; ++j) {
            disp[j] = pos_dt[g.members[j]] - pos_t[g.members[j]];
            mean_disp += disp[j];
        }
        mean_disp /= double(m);
        const double mean_norm = mean_disp.norm();

        std::vector<Vec3> d_disp(m, Vec3::Zero());
        Vec3 d_mean = Vec3::Zero();
        bool any = false;
        for (int j = 0; j < m; ++j) {
            const double norm_j = disp[j].norm();
            if (!(norm_j > motion_threshold)) continue;
            any = true;
            ++pairs;
            const double dot = disp[j].dot(mean_disp);
            const double denom = norm_j * mean_norm + epsilon;
            total += 1.0 - dot / denom;

            // d(1 - u/v) = -(du v - u dv) / v^2
            const double inv_v = 1.0 / denom;
            const double uv2 = dot * inv_v * inv_v;
            const Vec3 unit_j = disp[j] / norm_j;
            const Vec3 unit_mean = mean_norm > 1e-300 ? Vec3(mean_disp / mean_norm)
                                                      : Vec3(Vec3::Zero());
            d_disp[j] += -(mean_disp * inv_v - uv2 * mean_norm * unit_j);
            d_mean += -(disp[j] * inv_v - uv2 * norm_j * unit_mean);
        }
        if (!any) continue;
        for (int j = 0; j < m; ++j) d_disp[j] += d_mean / double(m);
        group_d_disp.push_back(std::move(d_disp));
        group_ptr.push_back(&g);
    }

    out.qualifying = pairs;
    if (pairs == 0) return out;

    const double scale = 1.0 / double(pairs);
    out.value = total * scale;
    for (size_t gi = 0; gi < group_ptr.size(); ++gi) {
        const RayGroup& g = *group_ptr[gi];
        for (size_t j = 0; j < g.members.size(); ++j) {
            const Vec3 grad = group_d_disp[gi][j] * scale;
            out.d_pos_dt[g.members[j]] += grad;   // d = mu_dt - mu_t
            out.d_pos_t[g.members[j]] -= grad;
        }
    }
    return out;
}

RegTerm sr_loss(const std::vector<RayGroup>& groups, const std::vector<Vec3>& pos_t,
                const std::vector<Vec3>& pos_dt, double huber_delta) {
    if (pos_t.size() != pos_dt.size())
        throw InvalidParameterError("sr_loss: frame sizes differ");
    check_positions(groups, pos_t.size());

    RegTerm out;
    out.d_pos_t.assign(pos_t.size(), Vec3::Zero());
    out.d_pos_dt.assign(pos_t.size(), Vec3::Zero());

    long qualifying = 0;
    for (const auto& g : groups)
        if (g.members.size() > 1) ++qualifying;
    out.qualifying = qualifying;
    if (qualifying == 0) return out;
    const double scale = 1.0 / double(qualifying);

    double total = 0.0;
    for (const auto& g : groups) {
        if (g.members.size() <= 1) continue;
        GroupStats stats_t, stats_dt;
        for (int idx : g.members) {
            stats_t.update(pos_t[idx]);
            stats_dt.update(pos_dt[idx]);
        }
        const auto [mean_t, cov_t] = stats_t.finalize();
        const auto [mean_dt, cov_dt] = stats_dt.finalize();
        const EigenResult eig_t = eig3_sym(cov_t);
        const EigenResult eig_dt = eig3_sym(cov_dt);

        Vec3 d_sig_t = Vec3::Zero(), d_sig_dt = Vec3::Zero();
        for (int r = 0; r < 3; ++r) {
            total += huber(eig_t.eigenvalues[r], eig_dt.eigenvalues[r], huber_delta);
            const double h = huber_grad(eig_t.eigenvalues[r], eig_dt.eigenvalues[r], huber_delta);
            d_sig_t[r] = h * scale;
            d_sig_dt[r] = -h * scale;
        }
        const Mat3 d_cov_t = eigenvalue_backward(eig_t, d_sig_t);
        const Mat3 d_cov_dt = eigenvalue_backward(eig_dt, d_sig_dt);
        const auto member_grads_t = stats_t.covariance_backward(d_cov_t);
        const auto member_grads_dt = stats_dt.covariance_backward(d_cov_dt);
        for (size_t j = 0; j < g.members.size(); ++j) {
            out.d_pos_t[g.members[j]] += member_grads_t[j];
            out.d_pos_dt[g.members[j]] += member_grads_dt[j];
        }
    }
    out.value = total * scale;
    return out;
}

std::vector<Neighborhood> neighborhoods_from_knn(const KnnGroups& knn) {
    std::vector<Neighborhood> out;
    out.reserve(knn.neighbors.size());
    for (size_t i = 0; i < knn.neighbors.size(); ++i)
        out.push_back({int(i), knn.neighbors[i]});
    return out;
}

std::vector<Neighborhood> neighborhoods_from_ray_groups(const std::vector<RayGroup>& groups) {
    std::vector<Neighborhood> out;
    for (const auto& g : groups) {
        if (g.members.size() < 2) continue;
        for (size_t j = 0; j < g.members.size(); ++j) {
            Neighborhood nb;
            nb.center = g.members[j];
            for (size_t l = 0; l < g.members.size(); ++l)
                if (l != j) nb.others.push_back(g.members[l]);
            out.push_back(std::move(nb));
        }
    }
    return out;
}

Mat3 procrustes_rotation(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
    if (from.size() != to.size())
        throw InvalidParameterError("procrustes_rotation: size mismatch");
    Mat3 h = Mat3::Zero();
    for (size_t i = 0; i < from.size(); ++i) h += from[i] * to[i].transpose();

    // Davenport's quaternion matrix: the unit quaternion maximizing
    // sum (R v).w is the eigenvector of the largest eigenvalue.
    Eigen::Matrix4d nmat;
    const double trace = h.trace();
    nmat(0, 0) = trace;
    nmat(0, 1) = nmat(1, 0) = h(1, 2) - h(2, 1);
    nmat(0, 2) = nmat(2, 0) = h(2, 0) - h(0, 2);
    nmat(0, 3) = nmat(3, 0) = h(0, 1) - h(1, 0);
    nmat(1, 1) = 2.0 * h(0, 0) - trace;
    nmat(2, 2) = 2.0 * h(1, 1) - trace;
    nmat(3, 3) = 2.0 * h(2, 2) - trace;
    nmat(1, 2) = nmat(2, 1) = h(0, 1) + h(1, 0);
    nmat(1, 3) = nmat(3, 1) = h(0, 2) + h(2, 0);
    nmat(2, 3) = nmat(3, 2) = h(1, 2) + h(2, 1);

    Eigen::Vector4d evals;
    Eigen::Matrix4d evecs;
    jacobi4_sym(nmat, evals, evecs);
    int best = 0;
    for (int k = 1; k < 4; ++k)
        if (evals[k] > evals[best]) best = k;

    Vec4 q = evecs.col(best);
    if (q[0] < 0.0) q = -q;
    return quat_to_rotation(q);
}

RegTerm arap_loss(const std::vector<Neighborhood>& neighborhoods, const std::vector<Vec3>& pos_t,
                  const std::vector<Vec3>& pos_dt) {
    if (pos_t.size() != pos_dt.size())
        throw InvalidParameterError("arap_loss: frame sizes differ");

    RegTerm out;
    out.d_pos_t.assign(pos_t.size(), Vec3::Zero());
    out.d_pos_dt.assign(pos_t.size(), Vec3::Zero());

    long total_pairs = 0;
    for (const auto& nb : neighborhoods) total_pairs += long(nb.others.size());
    out.qualifying = total_pairs;
    if (total_pairs == 0) return out;
    const double scale = 1.0 / double(total_pairs);

    double total = 0.0;
    std::vector<Vec3> spokes_t, spokes_dt;
    for (const auto& nb : neighborhoods) {
        if (nb.others.empty()) continue;
        const Vec3& center_t = pos_t[nb.center];
        const Vec3& center_dt = pos_dt[nb.center];
        spokes_t.clear();
        spokes_dt.clear();
        for (int j : nb.others) {
            spokes_t.push_back(pos_t[j] - center_t);
            spokes_dt.push_back(pos_dt[j] - center_dt);
        }
        const Mat3 rot = procrustes_rotation(spokes_t, spokes_dt);
        for (size_t j = 0; j < nb.others.size(); ++j) {
            const Vec3 residual = spokes_dt[j] - rot * spokes_t[j];
            total += residual.squaredNorm();
            // Rotation detached: gradients only through the positions.
            const Vec3 g_dt = 2.0 * scale * residual;
            const Vec3 g_t = -(rot.transpose() * g_dt);
            out.d_pos_dt[nb.others[j]] += g_dt;
            out.d_pos_dt[nb.center] -= g_dt;
            out.d_pos_t[nb.others[j]] += g_t;
            out.d_pos_t[nb.center] -= g_t;
        }
    }
    out.value = total * scale;
    return out;
}

// ---------------------------------------------------------------------------
// Photometric loss
// ---------------------------------------------------------------------------

namespace {

constexpr int kWin = 11;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, kWin>& gaussian_window() {
    static const std::array<double, kWin> w = [] {
        std::array<double, kWin> k{};
        const double sigma = 1.5;
        double sum = 0.0;
        for (int i = 0; i < kWin; ++i) {
            const double d = i - (kWin - 1) / 2.0;
            k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
            sum += k[i];
        }
        for (auto& v : k) v /= sum;
        return k;
    }();
    return w;
}

// Valid-mode separable correlation of one channel with the Gaussian window.
// in: H x W plane, out: (H - kWin + 1) x (W - kWin + 1).
struct Plane {
    int width = 0, height = 0;
    std::vector<double> v;
    Plane() = default;
    Plane(int w, int h) : width(w), height(h), v(size_t(w) * h, 0.0) {}
    double& at(int r, int c) { return v[size_t(r) * width + c]; }
    double at(int r, int c) const { return v[size_t(r) * width + c]; }
};

Plane filter_valid(const Plane& in) {
    const auto& g = gaussian_window();
    Plane rows(in.width, in.height - kWin + 1);
    for (int r = 0; r < rows.height; ++r)
        for (int c = 0; c < in.width; ++c) {
            double acc = 0.0;
            for (int d = 0; d < kWin; ++d) acc += g[d] * in.at(r + d, c);
            rows.at(r, c) = acc;
        }
    Plane out(in.width - kWin + 1, rows.height);
    for (int r = 0; r < out.height; ++r)
        for (int c = 0; c < out.width; ++c) {
            double acc = 0.0;
            for (int d = 0; d < kWin; ++d) acc += g[d] * rows.at(r, c + d);
            out.at(r, c) = acc;
        }
    return out;
}

// Adjoint of filter_valid: scatters window-grid values back onto the image grid.
Plane filter_valid_adjoint(const Plane& w, int full_width, int full_height) {
    const auto& g = gaussian_window();
    Plane cols(full_width, w.height);
    for (int r = 0; r < w.height; ++r)
        for (int c = 0; c < w.width; ++c) {
            const double val = w.at(r, c);
            for (int d = 0; d < kWin; ++d) cols.at(r, c + d) += g[d] * val;
        }
    Plane out(full_width, full_height);
    for (int r = 0; r < w.height; ++r)
        for (int c = 0; c < full_width; ++c) {
            const double val = cols.at(r, c);
            for (int d = 0; d < kWin; ++d) out.at(r + d, c) += g[d] * val;
        }
    return out;
}

Plane channel_plane(const Image& img, int ch) {
    Plane p(img.width, img.height);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) p.at(r, c) = img.at(r, c, ch);
    return p;
}

struct SsimChannel {
    double mean_ssim = 0.0;
    // Per-window partials needed for the backward pass.
    Plane d_mu_x, d_v1, d_v12;
    int windows = 0;
};

SsimChannel ssim_channel(const Plane& x, const Plane& y, bool with_grad) {
    const Plane mu_x = filter_valid(x);
    const Plane mu_y = filter_valid(y);

    Plane x2(x.width, x.height), y2(x.width, x.height), xy(x.width, x.height);
    for (size_t i = 0; i < x.v.size(); ++i) {
        x2.v[i] = x.v[i] * x.v[i];
        y2.v[i] = y.v[i] * y.v[i];
        xy.v[i] = x.v[i] * y.v[i];
    }
    const Plane v1 = filter_valid(x2);
    const Plane v2 = filter_valid(y2);
    const Plane v12 = filter_valid(xy);

    SsimChannel out;
    out.windows = mu_x.width * mu_x.height;
    if (with_grad) {
        out.d_mu_x = Plane(mu_x.width, mu_x.height);
        out.d_v1 = Plane(mu_x.width, mu_x.height);
        out.d_v12 = Plane(mu_x.width, mu_x.height);
    }

    double total = 0.0;
    for (int r = 0; r < mu_x.height; ++r) {
        for (int c = 0; c < mu_x.width; ++c) {
            const double mx = mu_x.at(r, c), my = mu_y.at(r, c);
            const double var_x = v1.at(r, c) - mx * mx;
            const double var_y = v2.at(r, c) - my * my;
            const double cov_xy = v12.at(r, c) - mx * my;
            const double a1 = 2.0 * mx * my + kC1;
            const double a2 = 2.0 * cov_xy + kC2;
            const double b1 = mx * mx + my * my + kC1;
            const double b2 = var_x + var_y + kC2;
            const double s = (a1 * a2) / (b1 * b2);
            total += s;
            if (with_grad) {
                const double ds_da1 = a2 / (b1 * b2);
                const double ds_da2 = a1 / (b1 * b2);
                const double ds_db1 = -s / b1;
                const double ds_db2 = -s / b2;
                // sigma_x^2 = v1 - mu_x^2, sigma_xy = v12 - mu_x mu_y
                out.d_mu_x.at(r, c) = ds_da1 * 2.0 * my + ds_db1 * 2.0 * mx +
                                      ds_db2 * (-2.0 * mx) + ds_da2 * 2.0 * (-my);
                out.d_v1.at(r, c) = ds_db2;
                out.d_v12.at(r, c) = ds_da2 * 2.0;
            }
        }
    }
    out.mean_ssim = total / double(out.windows);
    return out;
}

}  // namespace

PhotometricResult photometric_loss(const Image& rendered, const Image& target,
                                   double lambda_dssim) {
    if (!rendered.same_size(target))
        throw InvalidParameterError("photometric_loss: image dimensions differ");
    if (rendered.width < kWin || rendered.height < kWin)
        throw InvalidParameterError("photometric_loss: image smaller than the SSIM window");

    PhotometricResult out;
    out.d_image = Image(rendered.width, rendered.height);

    // L1 term.
    const double inv_count = 1.0 / double(rendered.data.size());
    double l1 = 0.0;
    for (size_t i = 0; i < rendered.data.size(); ++i) {
        const double diff = rendered.data[i] - target.data[i];
        l1 += std::abs(diff);
        const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        out.d_image.data[i] = (1.0 - lambda_dssim) * sign * inv_count;
    }
    l1 *= inv_count;
    out.l1 = l1;

    // DSSIM term.
    double mean_ssim = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
        const Plane x = channel_plane(rendered, ch);
        const Plane y = channel_plane(target, ch);
        SsimChannel sc = ssim_channel(x, y, lambda_dssim != 0.0);
        mean_ssim += sc.mean_ssim / 3.0;
        if (lambda_dssim == 0.0) continue;

        // d dssim / dS = -1/2 * 1/(3 * windows)
        const double w = lambda_dssim * (-0.5) / (3.0 * double(sc.windows));
        for (auto& v : sc.d_mu_x.v) v *= w;
        for (auto& v : sc.d_v1.v) v *= w;
        for (auto& v : sc.d_v12.v) v *= w;
        const Plane g_mu = filter_valid_adjoint(sc.d_mu_x, rendered.width, rendered.height);
        const Plane g_v1 = filter_valid_adjoint(sc.d_v1, rendered.width, rendered.height);
        const Plane g_v12 = filter_valid_adjoint(sc.d_v12, rendered.width, rendered.height);
        for (int r = 0; r < rendered.height; ++r)
            for (int c = 0; c < rendered.width; ++c)
                out.d_image.at(r, c, ch) += g_mu.at(r, c) + 2.0 * x.at(r, c) * g_v1.at(r, c) +
                                            y.at(r, c) * g_v12.at(r, c);
    }
    out.ssim = mean_ssim;
    out.dssim = (1.0 - mean_ssim) / 2.0;
    out.value = (1.0 - lambda_dssim) * l1 + lambda_dssim * out.dssim;
    return out;
}

double ssim(const Image& a, const Image& b) {
    if (!a.same_size(b)) throw InvalidParameterError("ssim: image dimensions differ");
    double total = 0.0;
    for (int ch = 0; ch < 3; ++ch)
        total += ssim_channel(channel_plane(a, ch), channel_plane(b, ch), false).mean_ssim;
    return total / 3.0;
}

LossReport total_objective(double l1, double dssim, double mcr, double sr, double arap,
                           const LossWeights& w) {
    LossReport r;
    r.l1 = l1;
    r.dssim = dssim;
    r.mcr = mcr;
    r.sr = sr;
    r.arap = arap;
    r.total = (1.0 - w.lambda_dssim) * l1 + w.lambda_dssim * dssim + w.lambda_mcr * mcr +
              w.lambda_sr * sr + w.lambda_arap * arap;
    return r;
}

double sample_timestep_pair(double t, double m, double t_max, Rng& rng) {
    if (!(m > 0.0)) return t;
    const double lo = std::max(0.0, t - m);
    const double hi = std::min(t_max, t + m);
    return lo + (hi - lo) * rng.uniform();
}

}  // namespace rrgs
