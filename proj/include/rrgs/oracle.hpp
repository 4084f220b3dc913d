#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "rrgs/common.hpp"

namespace rrgs::oracle {

// Brute-force references kept deliberately independent of the streaming /
// rasterizing implementations they are used to check. Nothing in this file
// may call into those modules.

/// Exact two-pass population covariance: mean first, then
/// (1/n) sum (p - mean)(p - mean)^T. Throws InvalidParameterError on empty
/// input.
std::pair<Vec3, Mat3> twopass_covariance(const std::vector<Vec3>& points);

struct FiniteDiffConfig {
    double h = 1e-5;
    double rel_tol = 1e-4;
    double abs_floor = 1e-8;
};

/// Central differences (f(x + h e_k) - f(x - h e_k)) / 2h per coordinate.
/// Throws NumericalDegeneracyError naming the coordinate if f evaluates to a
/// non-finite value.
std::vector<double> finite_diff_gradient(const std::function<double(const std::vector<double>&)>& f,
                                         std::vector<double> x, const FiniteDiffConfig& cfg);

/// Relative error with an absolute floor: |a - b| / max(|a|, |b|) when either
/// magnitude exceeds cfg.abs_floor, otherwise |a - b| itself.
double graded_error(double analytic, double reference, const FiniteDiffConfig& cfg);

/// Literal front-to-back blend of sorted fragments: each transmittance is the
/// explicit product of e^{-alpha_j} over the fragments in front.
Vec3 reference_blend(const std::vector<std::pair<double, Vec3>>& fragments, const Vec3& background);

}  // namespace rrgs::oracle
