#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "rrgs/common.hpp"

namespace rrgs {

/// An anisotropic 3D Gaussian primitive. Quaternions are scalar-first
/// (w,x,y,z); scales are stored linearly and must stay strictly positive.
struct Gaussian3D {
    Vec3 position = Vec3::Zero();
    Vec3 scale = Vec3::Ones();
    Vec4 rotation = Vec4(1, 0, 0, 0);
    double opacity = 1.0;
    Vec3 color = Vec3::Ones();
};

using GaussianSet = std::vector<Gaussian3D>;

/// Per-timestep realized parameters after applying a motion model. Colors are
/// not time-varying and stay with the canonical set.
struct FrameEvalContext;  // defined in motion_models.hpp

struct FrameState {
    std::vector<Vec3> positions;
    std::vector<Vec3> scales;
    std::vector<Vec4> rotations;
    std::vector<double> opacities;
    std::shared_ptr<const FrameEvalContext> ctx;  // present when retained for backward

    size_t size() const { return positions.size(); }
};

/// Copies the canonical parameters into a FrameState (identity motion).
FrameState frame_from_set(const GaussianSet& set);

struct Camera {
    Mat4 world_to_camera = Mat4::Identity();
    double fx = 1.0, fy = 1.0;
    double cx = 0.0, cy = 0.0;
    int width = 1, height = 1;
    double near_clip = 0.01;

    Mat3 rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }
    Vec3 translation() const { return world_to_camera.topRightCorner<3, 1>(); }

    /// Throws InvalidParameterError if the rotation block is not orthonormal
    /// within 1e-9 or the intrinsics/size are out of range.
    void validate() const;
};

/// Builds a world-to-camera transform with the camera at `eye` looking at
/// `target` (+z forward, y down the image).
Camera make_lookat_camera(const Vec3& eye, const Vec3& target, const Vec3& world_up,
                          double fx, double fy, int width, int height);

struct ProjectedGaussian {
    Vec2 mean_px = Vec2::Zero();
    Mat2 cov_px = Mat2::Identity();  // includes the 0.3 px^2 diagonal dilation
    double depth = 0.0;              // camera-space z
    int source_index = -1;

    // Retained intermediates for the backward pass.
    Vec3 t_cam = Vec3::Zero();
    Mat2 cov_inv = Mat2::Identity();
    double lambda_max = 1.0;  // larger eigenvalue of cov_px
};

/// Diagonal dilation added to the projected covariance before inversion.
inline constexpr double kCovDilation = 0.3;
inline constexpr double kScaleFloor = 1e-6;
inline constexpr double kDefaultNearClip = 0.01;

/// Rotation matrix from a (w,x,y,z) quaternion; normalizes defensively.
Mat3 quat_to_rotation(const Vec4& q);

/// Sigma = R S S^T R^T. Throws InvalidParameterError on non-positive scales
/// or a zero quaternion.
Mat3 build_covariance(const Vec3& scale, const Vec4& rotation);

/// Projects one Gaussian; returns nullopt when the camera-space depth is at
/// or behind the near clip.
std::optional<ProjectedGaussian> project_gaussian(const Gaussian3D& g, const Camera& cam);

/// exp(-1/2 d^T Sigma'^-1 d) at pixel position x. Throws
/// NumericalDegeneracyError if the stored covariance is not invertible.
double eval_density(const ProjectedGaussian& pg, const Vec2& x);

}  // namespace rrgs
