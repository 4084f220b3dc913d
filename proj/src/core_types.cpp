#include "rrgs/core_types.hpp"

#include <cmath>

namespace rrgs {

FrameState frame_from_set(const GaussianSet& set) {
    FrameState f;
    f.positions.reserve(set.size());
    f.scales.reserve(set.size());
    f.rotations.reserve(set.size());
    f.opacities.reserve(set.size());
    for (const auto& g : set) {
        f.positions.push_back(g.position);
        f.scales.push_back(g.scale);
        f.rotations.push_back(g.rotation);
        f.opacities.push_back(g.opacity);
    }
    return f;
}

void Camera::validate() const {
    const Mat3 R = rotation();
    if ((R * R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9)
        throw InvalidParameterError("camera rotation block is not orthonormal");
    if (!(fx > 0.0) || !(fy > 0.0))
        throw InvalidParameterError("camera focal lengths must be positive");
    if (width < 1 || height < 1)
        throw InvalidParameterError("camera image size must be at least 1x1");
}

Camera make_lookat_camera(const Vec3& eye, const Vec3& target, const Vec3& world_up,
                          double fx, double fy, int width, int height) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 right = world_up.cross(forward);
    const double rn = right.norm();
    if (rn < 1e-12)
        throw InvalidParameterError("look-at direction is parallel to the up vector");
    right /= rn;
    const Vec3 down = forward.cross(right);

    Camera cam;
    Mat3 R;
    R.row(0) = right.transpose();
    R.row(1) = down.transpose();
    R.row(2) = forward.transpose();
    cam.world_to_camera.setIdentity();
    cam.world_to_camera.topLeftCorner<3, 3>() = R;
    cam.world_to_camera.topRightCorner<3, 1>() = -R * eye;
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.width = width;
    cam.height = height;
    cam.near_clip = kDefaultNearClip;
    return cam;
}

Mat3 quat_to_rotation(const Vec4& q) {
    const double n = q.norm();
    if (n < 1e-12) throw InvalidParameterError("zero quaternion");
    const double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
    Mat3 R;
    R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return R;
}

Mat3 build_covariance(const Vec3& scale, const Vec4& rotation) {
    if (!(scale.x() > 0.0 && scale.y() > 0.0 && scale.z() > 0.0))
        throw InvalidParameterError("Gaussian scale components must be positive");
    const Mat3 R = quat_to_rotation(rotation);
    const Vec3 s2 = scale.cwiseProduct(scale);
    return R * s2.asDiagonal() * R.transpose();
}

std::optional<ProjectedGaussian> project_gaussian(const Gaussian3D& g, const Camera& cam) {
    const Mat3 W = cam.rotation();
    const Vec3 t = W * g.position + cam.translation();
    if (t.z() <= cam.near_clip) return std::nullopt;

    const double tz = t.z();
    const double inv_z = 1.0 / tz;
    Eigen::Matrix<double, 2, 3> J;
    J << cam.fx * inv_z, 0.0, -cam.fx * t.x() * inv_z * inv_z,
        0.0, cam.fy * inv_z, -cam.fy * t.y() * inv_z * inv_z;

    const Mat3 sigma = build_covariance(g.scale, g.rotation);
    const Mat3 cam_cov = W * sigma * W.transpose();
    Mat2 cov = J * cam_cov * J.transpose();
    cov(0, 0) += kCovDilation;
    cov(1, 1) += kCovDilation;

    ProjectedGaussian pg;
    pg.mean_px = Vec2(cam.fx * t.x() * inv_z + cam.cx, cam.fy * t.y() * inv_z + cam.cy);
    pg.cov_px = cov;
    pg.depth = tz;
    pg.t_cam = t;

    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
    if (det <= 0.0) return std::nullopt;  // cannot happen for valid inputs after dilation
    const double inv_det = 1.0 / det;
    pg.cov_inv << cov(1, 1) * inv_det, -cov(0, 1) * inv_det,
        -cov(1, 0) * inv_det, cov(0, 0) * inv_det;

    const double half_tr = 0.5 * (cov(0, 0) + cov(1, 1));
    const double disc = std::sqrt(std::max(0.0, half_tr * half_tr - det));
    pg.lambda_max = half_tr + disc;
    return pg;
}

double eval_density(const ProjectedGaussian& pg, const Vec2& x) {
    const Mat2& c = pg.cov_px;
    const double det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
    if (!(det > 0.0)) throw NumericalDegeneracyError("projected covariance is singular");
    const Vec2 d = x - pg.mean_px;
    const double q = d.dot(pg.cov_inv * d);
    return std::exp(-0.5 * q);
}

}  // namespace rrgs
