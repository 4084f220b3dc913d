#include "rrgs/motion_models.hpp"

#include <algorithm>
#include <cmath>

namespace rrgs {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

DeformationTable DeformationTable::zeros(std::vector<double> keys, int count) {
    DeformationTable t;
    t.keys = std::move(keys);
    t.count = count;
    const size_t n = t.keys.size() * size_t(count);
    t.d_position.assign(n, Vec3::Zero());
    t.d_rotation.assign(n, Vec4::Zero());
    t.d_scale.assign(n, Vec3::Zero());
    t.d_opacity.assign(n, 0.0);
    t.validate();
    return t;
}

void DeformationTable::validate() const {
    if (keys.empty()) throw InvalidParameterError("DeformationTable: no key timesteps");
    for (size_t i = 1; i < keys.size(); ++i)
        if (!(keys[i] > keys[i - 1]))
            throw InvalidParameterError("DeformationTable: keys must be strictly increasing");
    const size_t n = keys.size() * size_t(count);
    if (d_position.size() != n || d_rotation.size() != n || d_scale.size() != n ||
        d_opacity.size() != n)
        throw InvalidParameterError("DeformationTable: offset array sizes mismatch");
}

BasisTrajectory BasisTrajectory::from_canonical(Family family, int order,
                                                const GaussianSet& set) {
    if (order < 1) throw InvalidParameterError("BasisTrajectory: order must be >= 1");
    BasisTrajectory b;
    b.family = family;
    b.order = order;
    b.count = int(set.size());
    b.coefficients.assign(size_t(order) * set.size(), Vec3::Zero());
    for (size_t i = 0; i < set.size(); ++i) b.coefficients[i] = set[i].position;
    return b;
}

double BasisTrajectory::basis(int l, double t) const {
    if (family == Family::Polynomial) return std::pow(t, l);
    if (l == 0) return 1.0;
    const int harmonic = (l + 1) / 2;
    const double arg = kTwoPi * harmonic * t;
    return (l % 2 == 1) ? std::sin(arg) : std::cos(arg);
}

FrameState evaluate_frame(const MotionModel& model, const GaussianSet& canonical, double t,
                          bool retain_ctx) {
    const int n = int(canonical.size());
    FrameState frame;
    frame.positions.resize(n);
    frame.scales.resize(n);
    frame.rotations.resize(n);
    frame.opacities.resize(n);

    auto ctx = std::make_shared<FrameEvalContext>();
    const double tc = std::clamp(t, 0.0, 1.0);
    ctx->t = tc;

    if (const auto* table = std::get_if<DeformationTable>(&model)) {
        if (table->count != n)
            throw InvalidParameterError("evaluate_frame: table size differs from canonical set");
        const auto& keys = table->keys;
        int lo = 0, hi = 0;
        double w = 0.0;
        if (tc <= keys.front()) {
            lo = hi = 0;
        } else if (tc >= keys.back()) {
            lo = hi = int(keys.size()) - 1;
        } else {
            hi = int(std::upper_bound(keys.begin(), keys.end(), tc) - keys.begin());
            lo = hi - 1;
            w = (tc - keys[lo]) / (keys[hi] - keys[lo]);
            if (table->interp == DeformationTable::Interp::Nearest) {
                if (w < 0.5) {
                    hi = lo;
                    w = 0.0;
                } else {
                    lo = hi;
                    w = 1.0;  // degenerates to the nearest key
                }
            }
        }
        if (lo == hi) w = 0.0;
        ctx->key_lo = lo;
        ctx->key_hi = hi;
        ctx->weight_hi = w;
        ctx->quat_norms.resize(n);
        ctx->scale_clamped.resize(n);
        ctx->opacity_clamped.resize(n);

        for (int i = 0; i < n; ++i) {
            const size_t elo = table->entry(lo, i), ehi = table->entry(hi, i);
            const Vec3 dpos = (1.0 - w) * table->d_position[elo] + w * table->d_position[ehi];
            const Vec4 drot = (1.0 - w) * table->d_rotation[elo] + w * table->d_rotation[ehi];
            const Vec3 dscl = (1.0 - w) * table->d_scale[elo] + w * table->d_scale[ehi];
            const double dopa = (1.0 - w) * table->d_opacity[elo] + w * table->d_opacity[ehi];

            frame.positions[i] = canonical[i].position + dpos;
            const Vec4 q_raw = canonical[i].rotation + drot;
            const double qn = q_raw.norm();
            if (qn < 1e-12)
                throw NumericalDegeneracyError("evaluate_frame: deformed quaternion vanished");
            frame.rotations[i] = q_raw / qn;
            ctx->quat_norms[i] = qn;

            const Vec3 s_raw = canonical[i].scale + dscl;
            for (int k = 0; k < 3; ++k) {
                ctx->scale_clamped[i][k] = s_raw[k] < kScaleFloor;
                frame.scales[i][k] = std::max(s_raw[k], kScaleFloor);
            }
            const double o_raw = canonical[i].opacity + dopa;
            ctx->opacity_clamped[i] = o_raw < 0.0;
            frame.opacities[i] = std::max(o_raw, 0.0);
        }
    } else {
        const auto& basis = std::get<BasisTrajectory>(model);
        if (basis.count != n)
            throw InvalidParameterError("evaluate_frame: basis size differs from canonical set");
        for (int i = 0; i < n; ++i) {
            Vec3 pos = Vec3::Zero();
            for (int l = 0; l < basis.order; ++l)
                pos += basis.coefficients[basis.entry(l, i)] * basis.basis(l, tc);
            frame.positions[i] = pos;
            frame.rotations[i] = canonical[i].rotation.normalized();
            frame.scales[i] = canonical[i].scale.cwiseMax(kScaleFloor);
            frame.opacities[i] = std::max(canonical[i].opacity, 0.0);
        }
    }

    if (retain_ctx) frame.ctx = std::move(ctx);
    return frame;
}

void ModelGradients::accumulate(const ModelGradients& other) {
    for (size_t i = 0; i < d_position.size(); ++i) d_position[i] += other.d_position[i];
    for (size_t i = 0; i < d_rotation.size(); ++i) d_rotation[i] += other.d_rotation[i];
    for (size_t i = 0; i < d_scale.size(); ++i) d_scale[i] += other.d_scale[i];
    for (size_t i = 0; i < d_opacity.size(); ++i) d_opacity[i] += other.d_opacity[i];
}

ModelGradients zero_gradients(const MotionModel& model) {
    ModelGradients g;
    if (const auto* table = std::get_if<DeformationTable>(&model)) {
        const size_t n = table->keys.size() * size_t(table->count);
        g.d_position.assign(n, Vec3::Zero());
        g.d_rotation.assign(n, Vec4::Zero());
        g.d_scale.assign(n, Vec3::Zero());
        g.d_opacity.assign(n, 0.0);
    } else {
        const auto& basis = std::get<BasisTrajectory>(model);
        g.d_position.assign(size_t(basis.order) * basis.count, Vec3::Zero());
    }
    return g;
}

ModelGradients frame_backward(const MotionModel& model, const GaussianSet& canonical,
                              const FrameState& frame, const FrameGrad& grad) {
    if (!frame.ctx)
        throw ContractViolationError("frame_backward: evaluate_frame was not retained");
    const auto& ctx = *frame.ctx;
    const int n = int(canonical.size());
    ModelGradients out = zero_gradients(model);

    if (const auto* table = std::get_if<DeformationTable>(&model)) {
        const int lo = ctx.key_lo, hi = ctx.key_hi;
        const double w = ctx.weight_hi;
        for (int i = 0; i < n; ++i) {
            // position: identity chain
            const Vec3 dp = grad.d_position.empty() ? Vec3(Vec3::Zero()) : grad.d_position[i];

            // rotation: through q = u / |u|
            Vec4 du = Vec4::Zero();
            if (!grad.d_rotation.empty()) {
                const Vec4& q = frame.rotations[i];
                const Vec4& dq = grad.d_rotation[i];
                du = (dq - q * q.dot(dq)) / ctx.quat_norms[i];
            }

            // scale / opacity: gradient blocked where the floor clamped
            Vec3 ds = Vec3::Zero();
            if (!grad.d_scale.empty())
                for (int k = 0; k < 3; ++k)
                    ds[k] = ctx.scale_clamped[i][k] ? 0.0 : grad.d_scale[i][k];
            double dop = 0.0;
            if (!grad.d_opacity.empty())
                dop = ctx.opacity_clamped[i] ? 0.0 : grad.d_opacity[i];

            const size_t elo = table->entry(lo, i), ehi = table->entry(hi, i);
            out.d_position[elo] += (1.0 - w) * dp;
            out.d_rotation[elo] += (1.0 - w) * du;
            out.d_scale[elo] += (1.0 - w) * ds;
            out.d_opacity[elo] += (1.0 - w) * dop;
            if (ehi != elo) {
                out.d_position[ehi] += w * dp;
                out.d_rotation[ehi] += w * du;
                out.d_scale[ehi] += w * ds;
                out.d_opacity[ehi] += w * dop;
            }
        }
    } else {
        const auto& basis = std::get<BasisTrajectory>(model);
        for (int i = 0; i < n; ++i) {
            if (grad.d_position.empty()) break;
            const Vec3& dp = grad.d_position[i];
            for (int l = 0; l < basis.order; ++l)
                out.d_position[basis.entry(l, i)] += dp * basis.basis(l, ctx.t);
        }
    }
    return out;
}

}  // namespace rrgs
