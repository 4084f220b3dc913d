#pragma once

#include <string>

#include "rrgs/losses.hpp"
#include "rrgs/scenes.hpp"

namespace rrgs {

enum class GroupingMode { Ray, Knn };
enum class RegularizerMode { None, Mcr, Sr, Full, Arap };
enum class MotionModelKind { Table, BasisPolynomial, BasisFourier };

GroupingMode grouping_mode_from_string(const std::string& s);
RegularizerMode regularizer_mode_from_string(const std::string& s);
MotionModelKind motion_model_kind_from_string(const std::string& s);
std::string to_string(GroupingMode m);
std::string to_string(RegularizerMode m);
std::string to_string(MotionModelKind m);

struct RunConfig {
    std::string scene_path;
    SceneSpec scene;  // loaded from scene_path

    MotionModelKind motion_model = MotionModelKind::Table;
    int basis_order = 3;
    int iterations = 300;
    double learning_rate = 1e-3;
    double momentum = 0.0;
    GroupingMode grouping = GroupingMode::Ray;
    RegularizerMode regularizer = RegularizerMode::Full;
    double tau = 1e-3;
    int knn_k = 20;
    int pixel_stride = 1;
    uint64_t seed = 1;
    std::string output_dir = "out";
    int holdout_stride = 0;   // every (stride-1 mod stride)-th timestep held out; 0 = none
    double init_noise = 0.0;  // stddev of initial position-offset noise
    int render_timestep = 0;
    LossWeights weights;

    /// Effective weights after applying the regularizer mode (e.g. "arap"
    /// forces lambda_mcr to 0 and disables SR).
    LossWeights effective_weights() const;

    bool timestep_held_out(int t) const {
        return holdout_stride > 0 && (t % holdout_stride) == holdout_stride - 1;
    }
};

/// Parses a scene spec JSON file. Unknown fields are errors.
SceneSpec load_scene_spec(const std::string& path);

/// Parses a run config JSON file; the scene path is resolved relative to the
/// config file's directory. RRGS_SEED overrides the seed when set. Unknown
/// fields are errors.
RunConfig load_run_config(const std::string& path);

/// Full round-trippable echo of the resolved configuration.
std::string config_echo_json(const RunConfig& cfg);

}  // namespace rrgs
