#include "rrgs/oracle.hpp"

#include <cmath>

namespace rrgs::oracle {

std::pair<Vec3, Mat3> twopass_covariance(const std::vector<Vec3>& points) {
    if (points.empty())
        throw InvalidParameterError("twopass_covariance: empty point set");
    Vec3 mean = Vec3::Zero();
    for (const auto& p : points) mean += p;
    mean /= double(points.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& p : points) {
        const Vec3 d = p - mean;
        cov += d * d.transpose();
    }
    cov /= double(points.size());
    return {mean, cov};
}

std::vector<double> finite_diff_gradient(const std::function<double(const std::vector<double>&)>& f,
                                         std::vector<double> x, const FiniteDiffConfig& cfg) {
    std::vector<double> grad(x.size(), 0.0);
    for (size_t k = 0; k < x.size(); ++k) {
        const double saved = x[k];
        x[k] = saved + cfg.h;
        const double fp = f(x);
        x[k] = saved - cfg.h;
        const double fm = f(x);
        x[k] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericalDegeneracyError("finite_diff_gradient: non-finite f at coordinate " +
                                           std::to_string(k));
        grad[k] = (fp - fm) / (2.0 * cfg.h);
    }
    return grad;
}

double graded_error(double analytic, double reference, const FiniteDiffConfig& cfg) {
    const double diff = std::abs(analytic - reference);
    const double mag = std::max(std::abs(analytic), std::abs(reference));
    if (mag > cfg.abs_floor) return diff / mag;
    return diff;
}

Vec3 reference_blend(const std::vector<std::pair<double, Vec3>>& fragments, const Vec3& background) {
    Vec3 color = Vec3::Zero();
    for (size_t i = 0; i < fragments.size(); ++i) {
        double transmittance = 1.0;
        for (size_t j = 0; j < i; ++j) transmittance *= std::exp(-fragments[j].first);
        color += transmittance * (1.0 - std::exp(-fragments[i].first)) * fragments[i].second;
    }
    double final_t = 1.0;
    for (const auto& frag : fragments) final_t *= std::exp(-frag.first);
    return color + final_t * background;
}

}  // namespace rrgs::oracle
