#include "rrgs/scenes.hpp"

#include <cmath>

#include "rrgs/grouping.hpp"
#include "rrgs/rasterizer.hpp"

namespace rrgs {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

Mat3 axis_angle(const Vec3& axis, double angle) {
    const Vec3 a = axis.normalized();
    const double c = std::cos(angle), s = std::sin(angle);
    Mat3 K;
    K << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;
    return Mat3::Identity() * c + (1 - c) * (a * a.transpose()) + s * K;
}
}  // namespace

MotionKind motion_kind_from_string(const std::string& s) {
    if (s == "static") return MotionKind::Static;
    if (s == "rigid-translation") return MotionKind::RigidTranslation;
    if (s == "rigid-rotation") return MotionKind::RigidRotation;
    if (s == "articulated-hinge") return MotionKind::ArticulatedHinge;
    if (s == "nonrigid-bend") return MotionKind::NonrigidBend;
    throw InvalidParameterError("unknown motion kind: " + s);
}

std::string to_string(MotionKind k) {
    switch (k) {
        case MotionKind::Static: return "static";
        case MotionKind::RigidTranslation: return "rigid-translation";
        case MotionKind::RigidRotation: return "rigid-rotation";
        case MotionKind::ArticulatedHinge: return "articulated-hinge";
        default: return "nonrigid-bend";
    }
}

CameraPath camera_path_from_string(const std::string& s) {
    if (s == "orbit") return CameraPath::Orbit;
    if (s == "fixed") return CameraPath::Fixed;
    throw InvalidParameterError("unknown camera path: " + s);
}

std::string to_string(CameraPath p) { return p == CameraPath::Orbit ? "orbit" : "fixed"; }

void SceneSpec::validate() const {
    if (gaussian_count < 1 || gaussian_count > 500)
        throw InvalidParameterError("scene: gaussian_count must be in [1, 500]");
    if (timesteps < 1 || timesteps > 60)
        throw InvalidParameterError("scene: timesteps must be in [1, 60]");
    if (image_width < 16 || image_width > 128 || image_height < 16 || image_height > 128)
        throw InvalidParameterError("scene: image size must be within [16, 128]");
}

Scene generate_scene(const SceneSpec& spec) {
    spec.validate();
    Scene scene;
    scene.spec = spec;
    Rng rng(spec.seed);

    const int n = spec.gaussian_count;
    const int T = spec.timesteps;

    // Base point cloud. Coordinates land on a dyadic grid so that the pure
    // translation trajectories below stay exact in double precision.
    std::vector<Vec3> base(n);
    if (spec.motion == MotionKind::ArticulatedHinge) {
        for (int i = 0; i < n; ++i) {
            const bool segment_b = i >= n / 2;
            const double x = segment_b ? rng.uniform(0.1, 1.0) : rng.uniform(-1.0, -0.1);
            base[i] = dyadic(Vec3(x, rng.uniform(-0.25, 0.25), rng.uniform(-0.25, 0.25)));
        }
    } else {
        for (int i = 0; i < n; ++i) base[i] = dyadic(rng.uniform_vec3(-0.8, 0.8));
    }

    scene.canonical.resize(n);
    for (int i = 0; i < n; ++i) {
        auto& g = scene.canonical[i];
        g.position = base[i];
        g.scale = Vec3(rng.uniform(0.04, 0.10), rng.uniform(0.04, 0.10), rng.uniform(0.04, 0.10));
        g.rotation = rng.unit_quaternion();
        g.opacity = rng.uniform(0.5, 1.2);
        g.color = rng.uniform_vec3(0.1, 0.95);
    }

    scene.trajectories.assign(T, base);
    for (int t = 0; t < T; ++t) {
        const double tau = T > 1 ? double(t) / (T - 1) : 0.0;
        auto& pos = scene.trajectories[t];
        switch (spec.motion) {
            case MotionKind::Static:
                break;
            case MotionKind::RigidTranslation: {
                const Vec3 dir = Vec3(1.0, 0.3, 0.15).normalized();
                const Vec3 offset = dyadic(Vec3(0.8 * tau * dir));
                for (auto& p : pos) p += offset;
                break;
            }
            case MotionKind::RigidRotation: {
                const Mat3 rot = axis_angle(Vec3(0, 1, 0), 1.2 * tau);
                for (auto& p : pos) p = rot * p;
                break;
            }
            case MotionKind::ArticulatedHinge: {
                const Mat3 rot = axis_angle(Vec3(0, 0, 1), 0.8 * tau);
                for (int i = n / 2; i < n; ++i) pos[i] = rot * base[i];
                break;
            }
            case MotionKind::NonrigidBend: {
                for (auto& p : pos) {
                    const Mat3 rot = axis_angle(Vec3(1, 0, 0), 1.0 * tau * (p.x() + 0.8));
                    p = rot * p;
                }
                break;
            }
        }
    }

    const double fx = 1.2 * spec.image_width;
    const double fy = 1.2 * spec.image_width;
    scene.cameras.reserve(T);
    for (int t = 0; t < T; ++t) {
        if (spec.camera_path == CameraPath::Orbit) {
            const double phi = kTwoPi * (T > 0 ? double(t) / T : 0.0);
            const Vec3 eye(4.0 * std::cos(phi), 1.5, 4.0 * std::sin(phi));
            scene.cameras.push_back(make_lookat_camera(eye, Vec3::Zero(), Vec3(0, 1, 0), fx, fy,
                                                       spec.image_width, spec.image_height));
        } else {
            scene.cameras.push_back(make_lookat_camera(Vec3(4.0, 1.5, 0.0), Vec3::Zero(),
                                                       Vec3(0, 1, 0), fx, fy, spec.image_width,
                                                       spec.image_height));
        }
    }

    RenderOptions opts;
    opts.retain_fragments = false;
    scene.targets.reserve(T);
    for (int t = 0; t < T; ++t) {
        scene.targets.push_back(render(ground_truth_frame(scene, t), scene.canonical,
                                       scene.cameras[t], opts)
                                    .image);
    }
    return scene;
}

FrameState ground_truth_frame(const Scene& scene, int timestep) {
    FrameState f = frame_from_set(scene.canonical);
    f.positions = scene.trajectories.at(timestep);
    return f;
}

TrajectoryError trajectory_error(const std::vector<std::vector<Vec3>>& estimated,
                                 const std::vector<std::vector<Vec3>>& ground_truth,
                                 int knn_k) {
    if (estimated.size() != ground_truth.size())
        throw InvalidParameterError("trajectory_error: timestep counts differ");
    if (estimated.empty()) throw InvalidParameterError("trajectory_error: no timesteps");
    const size_t T = estimated.size();
    const size_t n = ground_truth[0].size();
    for (size_t t = 0; t < T; ++t)
        if (estimated[t].size() != n || ground_truth[t].size() != n)
            throw InvalidParameterError("trajectory_error: gaussian counts differ");

    TrajectoryError out;
    double err = 0.0;
    for (size_t t = 0; t < T; ++t)
        for (size_t i = 0; i < n; ++i) err += (estimated[t][i] - ground_truth[t][i]).norm();
    out.endpoint_error = err / double(T * n);

    if (T < 2 || n < 2) return out;
    const KnnGroups knn = knn_groups(ground_truth[0], std::min<int>(knn_k, int(n) - 1));

    double var = 0.0;
    long count = 0;
    std::vector<Vec3> disp(n);
    for (size_t t = 0; t + 1 < T; ++t) {
        for (size_t i = 0; i < n; ++i) disp[i] = estimated[t + 1][i] - estimated[t][i];
        for (size_t i = 0; i < n; ++i) {
            Vec3 mean = disp[i];
            for (int j : knn.neighbors[i]) mean += disp[j];
            mean /= double(knn.neighbors[i].size() + 1);
            const double mean_norm = mean.norm();
            if (mean_norm <= 1e-12) continue;
            auto add_member = [&](int idx) {
                const double d_norm = disp[idx].norm();
                if (d_norm <= 1e-12) return;
                var += 1.0 - disp[idx].dot(mean) / (d_norm * mean_norm);
                ++count;
            };
            add_member(int(i));
            for (int j : knn.neighbors[i]) add_member(j);
        }
    }
    out.direction_variance = count > 0 ? var / double(count) : 0.0;
    return out;
}

}  // namespace rrgs
