#pragma once

#include <vector>

#include "rrgs/grouping.hpp"
#include "rrgs/image.hpp"

namespace rrgs {

struct LossWeights {
    double lambda_dssim = 0.2;
    double lambda_mcr = 0.005;
    double lambda_sr = 1.0;
    double lambda_arap = 0.0;
    double epsilon = 1e-8;            // cosine denominator guard
    double motion_threshold = 1e-4;   // displacement norm below which a Gaussian is static
    double huber_delta = 1.0;
    double temporal_window = 20.0;    // m, in timestep units
};

/// Per-member gradient arrays for a regularizer acting on positions at the
/// two sampled times.
struct RegTerm {
    double value = 0.0;
    std::vector<Vec3> d_pos_t;
    std::vector<Vec3> d_pos_dt;
    long qualifying = 0;  // (group, member) pairs for MCR; groups for SR; pairs for ARAP
};

/// Motion coherence: mean over moving members of
///   1 - d_i . dbar / (|d_i| |dbar| + eps),
/// with dbar the arithmetic mean displacement of the whole group. Gradients
/// flow into every member through dbar.
RegTerm mcr_loss(const std::vector<RayGroup>& groups, const std::vector<Vec3>& pos_t,
                 const std::vector<Vec3>& pos_dt, double epsilon, double motion_threshold);

/// Spectral regularization: mean over groups with more than one member of the
/// Huber distance between the sorted eigenvalue spectra of the group position
/// covariance at the two times (same members, time-t group order).
RegTerm sr_loss(const std::vector<RayGroup>& groups, const std::vector<Vec3>& pos_t,
                const std::vector<Vec3>& pos_dt, double huber_delta);

/// Local neighborhood for ARAP: a center Gaussian with its companions.
struct Neighborhood {
    int center = -1;
    std::vector<int> others;
};

std::vector<Neighborhood> neighborhoods_from_knn(const KnnGroups& knn);
std::vector<Neighborhood> neighborhoods_from_ray_groups(const std::vector<RayGroup>& groups);

/// As-rigid-as-possible residual, mean over (center, companion) pairs of
///   | (mu_i' - mu_j') - R_i (mu_i - mu_j) |^2
/// with R_i the proper Procrustes rotation fit to the neighborhood's spoke
/// vectors (treated as constant for gradients). Neighborhoods without
/// companions are skipped.
RegTerm arap_loss(const std::vector<Neighborhood>& neighborhoods, const std::vector<Vec3>& pos_t,
                  const std::vector<Vec3>& pos_dt);

/// Best proper rotation R maximizing sum (R v_i) . w_i over pairs, via the
/// quaternion eigenvalue formulation. Exposed for tests.
Mat3 procrustes_rotation(const std::vector<Vec3>& from, const std::vector<Vec3>& to);

struct PhotometricResult {
    double value = 0.0;
    double l1 = 0.0;
    double dssim = 0.0;
    double ssim = 0.0;
    Image d_image;  // gradient w.r.t. the rendered image
};

/// (1 - lambda) * mean|r - t| + lambda * (1 - SSIM(r, t)) / 2 with the
/// standard 11x11 sigma=1.5 Gaussian window, C1 = 0.01^2, C2 = 0.03^2,
/// per channel, windows fully inside the image. Returns the analytic image
/// gradient. Throws InvalidParameterError on dimension mismatch.
PhotometricResult photometric_loss(const Image& rendered, const Image& target,
                                   double lambda_dssim);

/// Mean SSIM alone (no gradient); used for metrics.
double ssim(const Image& a, const Image& b);

struct LossReport {
    double l1 = 0.0;
    double dssim = 0.0;
    double mcr = 0.0;
    double sr = 0.0;
    double arap = 0.0;
    double total = 0.0;
    long mcr_pairs = 0;
    long sr_groups = 0;
    long arap_pairs = 0;
    long group_count = 0;
};

/// total = (1 - lambda_dssim) l1 + lambda_dssim dssim + lambda_mcr mcr
///       + lambda_sr sr + lambda_arap arap.
LossReport total_objective(double l1, double dssim, double mcr, double sr, double arap,
                           const LossWeights& w);

/// Second timestep of a training pair: uniform on [t - m, t + m] intersected
/// with [0, t_max]. The offset may be negative.
double sample_timestep_pair(double t, double m, double t_max, Rng& rng);

}  // namespace rrgs
