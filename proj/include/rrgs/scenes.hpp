#pragma once

#include <string>
#include <vector>

#include "rrgs/core_types.hpp"
#include "rrgs/image.hpp"

namespace rrgs {

enum class MotionKind { Static, RigidTranslation, RigidRotation, ArticulatedHinge, NonrigidBend };
enum class CameraPath { Orbit, Fixed };

MotionKind motion_kind_from_string(const std::string& s);
std::string to_string(MotionKind k);
CameraPath camera_path_from_string(const std::string& s);
std::string to_string(CameraPath p);

struct SceneSpec {
    std::string name = "scene";
    int gaussian_count = 64;
    MotionKind motion = MotionKind::Static;
    int timesteps = 20;
    CameraPath camera_path = CameraPath::Orbit;
    uint64_t seed = 1;
    int image_width = 64;
    int image_height = 64;

    void validate() const;
};

/// A synthetic dynamic scene with ground truth everywhere: canonical
/// Gaussians, per-timestep positions, cameras, and target images rendered
/// from the ground truth by this repo's own rasterizer.
struct Scene {
    SceneSpec spec;
    GaussianSet canonical;                       // positions = trajectory at t=0
    std::vector<std::vector<Vec3>> trajectories; // [timestep][gaussian]
    std::vector<Camera> cameras;                 // one per timestep
    std::vector<Image> targets;                  // one per timestep

    /// Normalized time of a timestep index (0 .. T-1 mapped to [0, 1]).
    double time_of(int timestep) const {
        return spec.timesteps > 1 ? double(timestep) / (spec.timesteps - 1) : 0.0;
    }
};

Scene generate_scene(const SceneSpec& spec);

/// Ground-truth FrameState at a timestep (canonical attributes, trajectory
/// positions).
FrameState ground_truth_frame(const Scene& scene, int timestep);

struct TrajectoryError {
    double endpoint_error = 0.0;       // mean |estimated - truth| over Gaussians/timesteps
    double direction_variance = 0.0;   // 1 - mean cosine(member displacement, group mean)
};

/// Quantifies trajectory fidelity. Neighborhood groups are k-nearest
/// neighbors on the ground-truth canonical positions; direction variance
/// averages over consecutive-timestep displacements of moving members.
/// Throws InvalidParameterError on shape mismatch.
TrajectoryError trajectory_error(const std::vector<std::vector<Vec3>>& estimated,
                                 const std::vector<std::vector<Vec3>>& ground_truth,
                                 int knn_k = 8);

}  // namespace rrgs
