#include "rrgs/streaming_stats.hpp"

namespace rrgs {

void GroupStats::update(const Vec3& point) {
    const int n = n_ + 1;
    const Vec3 mean_prev = mean_;
    mean_ = (double(n - 1) / n) * mean_prev + point / double(n);
    const Vec3 left = point - mean_prev;   // vs mean before this insertion
    const Vec3 right = point - mean_;      // vs mean after this insertion
    cov_ = (double(n - 1) / n) * cov_ + (left * right.transpose()) / double(n);
    n_ = n;
    if (retain_) {
        points_.push_back(point);
        prefix_means_.push_back(mean_);
    }
}

std::pair<Vec3, Mat3> GroupStats::finalize() const {
    if (n_ == 0) throw InvalidParameterError("GroupStats::finalize on empty group");
    return {mean_, cov_};
}

std::vector<Vec3> GroupStats::covariance_backward(const Mat3& dL_dK) const {
    if (!retain_)
        throw ContractViolationError(
            "GroupStats::covariance_backward requires retained prefix means");
    const int N = n_;
    std::vector<Vec3> grads(N, Vec3::Zero());
    if (N <= 1) return grads;  // covariance of a single point is identically zero

    // g(i) = <A, R_k(i)> stacked over k, with A = sym(dL_dK). Only the
    // symmetric part of the cotangent can contribute since K is symmetric,
    // and for symmetric A: <A, e_k v^T> = (A v)_k and <A, u e_k^T> = (A u)_k.
    const Mat3 A = 0.5 * (dL_dK + dL_dK.transpose());
    std::vector<Vec3> g(N, Vec3::Zero());
    for (int i = 2; i <= N; ++i) {
        const Vec3& mu_i = points_[i - 1];
        const Vec3& mean_i = prefix_means_[i - 1];
        const Vec3& mean_prev = prefix_means_[i - 2];
        g[i - 1] = A * (mu_i - mean_i) / double(i - 1) +
                   A * (mu_i - mean_prev) / double(i);
    }

    Vec3 suffix = Vec3::Zero();
    for (int n = N; n >= 1; --n) {
        grads[n - 1] = (double(n - 1) * g[n - 1] - suffix) / double(N);
        suffix += g[n - 1];
    }
    return grads;
}

}  // namespace rrgs
