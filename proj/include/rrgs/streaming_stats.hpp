#pragma once

#include <utility>
#include <vector>

#include "rrgs/common.hpp"

namespace rrgs {

/// Single-pass mean and population covariance of a stream of 3D points.
///
/// The update uses the asymmetric rank-one form
///     K_n = (n-1)/n K_{n-1} + 1/n (mu_n - mean_{n-1})(mu_n - mean_n)^T
/// so one multiply-accumulate per insertion yields the exact (1/n)-normalized
/// covariance of everything inserted so far. When retention is enabled the
/// inserted points and all prefix means are kept so that the analytic
/// gradient of the final covariance w.r.t. every inserted point can be
/// evaluated afterwards in O(n) total.
class GroupStats {
public:
    explicit GroupStats(bool retain_for_backward = true)
        : retain_(retain_for_backward) {}

    void update(const Vec3& point);

    int count() const { return n_; }

    /// (mean, covariance) of the points inserted so far. Read-only; throws
    /// InvalidParameterError when the group is empty.
    std::pair<Vec3, Mat3> finalize() const;

    /// Gradients dL/dmu_n for L with cotangent dL_dK (symmetric), one entry
    /// per inserted point in insertion order.
    ///
    /// Uses the suffix form of the covariance derivative: with
    ///   R(i) = 1/(i-1) e_k (mu_i - mean_i)^T + 1/i (mu_i - mean_{i-1}) e_k^T
    /// the gradient of the final covariance w.r.t. component k of point n is
    ///   1/N [ (n-1) R_k(n) - sum_{i>n} R_k(i) ],
    /// which contracts against dL_dK to the vector recurrence implemented
    /// here. A single reverse sweep accumulates the suffix sum.
    ///
    /// Throws ContractViolationError when retention was disabled.
    std::vector<Vec3> covariance_backward(const Mat3& dL_dK) const;

    bool retains_backward_state() const { return retain_; }
    const std::vector<Vec3>& prefix_means() const { return prefix_means_; }
    const std::vector<Vec3>& points() const { return points_; }

private:
    bool retain_;
    int n_ = 0;
    Vec3 mean_ = Vec3::Zero();
    Mat3 cov_ = Mat3::Zero();
    std::vector<Vec3> points_;
    std::vector<Vec3> prefix_means_;
};

}  // namespace rrgs
