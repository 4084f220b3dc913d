#pragma once

#include <array>
#include <variant>
#include <vector>

#include "rrgs/core_types.hpp"

namespace rrgs {

/// Keyframed per-Gaussian offsets added to the canonical parameters
/// (deformation-field style). Offsets are stored key-major:
/// entry(key, gaussian) = key * count + gaussian.
struct DeformationTable {
    enum class Interp { Linear, Nearest };

    std::vector<double> keys;  // strictly increasing, inside [0, 1]
    int count = 0;             // Gaussians
    Interp interp = Interp::Linear;
    std::vector<Vec3> d_position;   // keys.size() * count
    std::vector<Vec4> d_rotation;
    std::vector<Vec3> d_scale;
    std::vector<double> d_opacity;

    static DeformationTable zeros(std::vector<double> keys, int count);
    size_t entry(int key, int gaussian) const { return size_t(key) * count + gaussian; }
    void validate() const;
};

/// Position as a linear combination of fixed temporal basis functions with
/// learnable per-Gaussian coefficients; other attributes stay canonical.
struct BasisTrajectory {
    enum class Family { Polynomial, Fourier };

    Family family = Family::Polynomial;
    int order = 1;  // L
    int count = 0;
    std::vector<Vec3> coefficients;  // order * count, entry(l, i) = l * count + i

    /// Coefficients reproducing the canonical positions at every t
    /// (constant basis term carries the position).
    static BasisTrajectory from_canonical(Family family, int order, const GaussianSet& set);
    size_t entry(int l, int gaussian) const { return size_t(l) * count + gaussian; }
    double basis(int l, double t) const;
};

using MotionModel = std::variant<DeformationTable, BasisTrajectory>;

/// Interpolation / clamping state retained by evaluate_frame for the
/// backward pass.
struct FrameEvalContext {
    double t = 0.0;
    // Table mode:
    int key_lo = 0, key_hi = 0;
    double weight_hi = 0.0;
    std::vector<double> quat_norms;               // |q_c + dq| per Gaussian
    std::vector<std::array<bool, 3>> scale_clamped;
    std::vector<bool> opacity_clamped;
};

/// Realized per-Gaussian parameters at time t (clamped to the model domain).
/// Rotations are renormalized, scales floored at 1e-6, opacities clamped at
/// zero. Pass retain_ctx = true when frame_backward will be called.
FrameState evaluate_frame(const MotionModel& model, const GaussianSet& canonical, double t,
                          bool retain_ctx = false);

/// Gradients w.r.t. the frame's realized parameters, to be mapped onto model
/// parameters. Mirrors ParamGradients minus color.
struct FrameGrad {
    std::vector<Vec3> d_position;
    std::vector<Vec3> d_scale;
    std::vector<Vec4> d_rotation;
    std::vector<double> d_opacity;
};

/// Gradients w.r.t. the model's own parameters; layout matches the model.
struct ModelGradients {
    std::vector<Vec3> d_position;
    std::vector<Vec4> d_rotation;
    std::vector<Vec3> d_scale;
    std::vector<double> d_opacity;

    void accumulate(const ModelGradients& other);
};

/// Chain rule through evaluate_frame. Table mode splits gradients across the
/// bracketing keys; basis mode multiplies by the basis values. Throws
/// ContractViolationError when the frame lacks a retained context.
ModelGradients frame_backward(const MotionModel& model, const GaussianSet& canonical,
                              const FrameState& frame, const FrameGrad& grad);

ModelGradients zero_gradients(const MotionModel& model);

}  // namespace rrgs
