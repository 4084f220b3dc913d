#pragma once

#include "rrgs/config.hpp"
#include "rrgs/motion_models.hpp"

namespace rrgs {

struct TrainOutcome {
    bool diverged = false;
    int iterations_run = 0;
    LossReport last;
    double psnr_train = 0.0;
    double psnr_holdout = 0.0;
    double ssim_mean = 0.0;
    TrajectoryError trajectory;
    MotionModel model;
    std::string metrics_json;  // as written to metrics.json
};

/// Runs the optimization loop on the configured synthetic scene and writes
/// metrics.json, losses.csv, loss_reports.jsonl, trajectories.csv,
/// groups.csv, a checkpoint, final renders and the config echo into
/// cfg.output_dir.
TrainOutcome train(const RunConfig& cfg);

/// Builds the initial motion model (incl. seeded init noise) for a config.
MotionModel initial_model(const RunConfig& cfg, const Scene& scene);

/// ARAP evaluated on a scene's ground-truth trajectories between the first
/// and last timestep, with neighborhoods from the configured grouping mode.
/// This is the rigid-motion exactness diagnostic used by the ablation table.
double arap_on_ground_truth(const Scene& scene, GroupingMode grouping, double tau, int knn_k);

}  // namespace rrgs
