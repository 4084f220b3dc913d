#include "rrgs/spectral.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace rrgs {
namespace {

constexpr double kTwoPiThirds = 2.0943951023931954923;

// Newton step on p(x) = x^3 - i1 x^2 + i2 x - i3 (characteristic polynomial
// of the scaled matrix). Near a repeated root p' vanishes and the step is
// meaningless, so only small corrections are accepted; clustered eigenvalues
// get their accuracy from the Rayleigh-quotient pass instead.
double polish_root(double x, double i1, double i2, double i3) {
    const double p = ((x - i1) * x + i2) * x - i3;
    const double dp = (3.0 * x - 2.0 * i1) * x + i2;
    if (std::abs(dp) < 1e-300) return x;
    const double step = p / dp;
    if (std::abs(step) > 1e-4) return x;
    return x - step;
}

// Unit eigenvector of A for eigenvalue lambda via cross products of the rows
// of (A - lambda I); falls back to the complement of the largest row when the
// eigenvalue is repeated (rank(A - lambda I) <= 1).
Vec3 eigenvector_from_rows(const Mat3& A, double lambda) {
    const Mat3 M = A - lambda * Mat3::Identity();
    const Vec3 r0 = M.row(0), r1 = M.row(1), r2 = M.row(2);
    const std::array<Vec3, 3> crosses = {r0.cross(r1), r0.cross(r2), r1.cross(r2)};
    int best = 0;
    double best_n2 = crosses[0].squaredNorm();
    for (int i = 1; i < 3; ++i) {
        const double n2 = crosses[i].squaredNorm();
        if (n2 > best_n2) {
            best = i;
            best_n2 = n2;
        }
    }
    if (best_n2 > 1e-28) return crosses[best] / std::sqrt(best_n2);

    // Rank <= 1: any direction orthogonal to the largest row works.
    int lr = 0;
    double lr_n2 = r0.squaredNorm();
    const std::array<Vec3, 3> rows = {r0, r1, r2};
    for (int i = 1; i < 3; ++i) {
        const double n2 = rows[i].squaredNorm();
        if (n2 > lr_n2) {
            lr = i;
            lr_n2 = n2;
        }
    }
    if (lr_n2 < 1e-28) return Vec3::UnitX();  // A == lambda I
    const Vec3 n = rows[lr] / std::sqrt(lr_n2);
    Vec3 u = (std::abs(n.x()) > 0.9) ? Vec3::UnitY() : Vec3::UnitX();
    u -= n * n.dot(u);
    return u.normalized();
}

// Second eigenvector constrained to the complement of v0: solve the reduced
// 2x2 symmetric problem on an orthonormal basis {u, w} of v0-perp.
Vec3 eigenvector_in_complement(const Mat3& A, double lambda, const Vec3& v0) {
    Vec3 u = (std::abs(v0.x()) > 0.9) ? Vec3::UnitY() : Vec3::UnitX();
    u -= v0 * v0.dot(u);
    u.normalize();
    const Vec3 w = v0.cross(u);
    const Mat3 M = A - lambda * Mat3::Identity();
    const double m00 = u.dot(M * u);
    const double m01 = u.dot(M * w);
    const double m11 = w.dot(M * w);
    double a, b;
    if (std::abs(m00) >= std::abs(m11)) {
        if (std::max(std::abs(m00), std::abs(m01)) < 1e-28) return u;
        a = m01;
        b = -m00;
    } else {
        if (std::max(std::abs(m11), std::abs(m01)) < 1e-28) return u;
        a = m11;
        b = -m01;
    }
    return (a * u + b * w).normalized();
}

void canonicalize_sign(Vec3& v) {
    for (int k = 0; k < 3; ++k) {
        if (std::abs(v[k]) > 1e-9) {
            if (v[k] < 0.0) v = -v;
            return;
        }
    }
}

}  // namespace

EigenResult eig3_sym(const Mat3& K) {
    if (!K.allFinite()) throw InvalidParameterError("eig3_sym: non-finite matrix entry");
    const Mat3 A = 0.5 * (K + K.transpose());

    EigenResult res;
    const double scale = A.cwiseAbs().maxCoeff();
    if (scale == 0.0) {
        res.eigenvalues.setZero();
        res.eigenvectors.setIdentity();
        res.degenerate = true;
        return res;
    }
    const Mat3 B = A / scale;

    const double q = B.trace() / 3.0;
    const Mat3 D = B - q * Mat3::Identity();
    const double p2 = (D * D).trace() / 6.0;
    const double p = std::sqrt(std::max(p2, 0.0));

    Vec3 evals;
    if (p < 1e-14) {
        evals.setConstant(q);
    } else {
        const double half_det = std::clamp((D / p).determinant() * 0.5, -1.0, 1.0);
        const double phi = std::acos(half_det) / 3.0;
        const double big = q + 2.0 * p * std::cos(phi);
        const double small = q + 2.0 * p * std::cos(phi + kTwoPiThirds);
        evals << small, 3.0 * q - big - small, big;

        const double i1 = B.trace();
        const double i2 = B(0, 0) * B(1, 1) - B(0, 1) * B(1, 0) +
                          B(0, 0) * B(2, 2) - B(0, 2) * B(2, 0) +
                          B(1, 1) * B(2, 2) - B(1, 2) * B(2, 1);
        const double i3 = B.determinant();
        for (int r = 0; r < 3; ++r) evals[r] = polish_root(evals[r], i1, i2, i3);
        std::sort(evals.data(), evals.data() + 3);
    }

    // Compute the most isolated extreme eigenvector first, then the second in
    // its orthogonal complement; the third closes the right-handed system.
    Mat3 V;
    const bool max_isolated = (evals[2] - evals[1]) >= (evals[1] - evals[0]);
    const int first = max_isolated ? 2 : 0;
    const int other = max_isolated ? 0 : 2;
    V.col(first) = eigenvector_from_rows(B, evals[first]);
    V.col(1) = eigenvector_in_complement(B, evals[1], V.col(first));
    V.col(other) = V.col(first).cross(V.col(1));

    // Rayleigh quotients are the optimal symmetric eigenvalue estimates for
    // the computed basis; they repair the precision the characteristic
    // polynomial loses on clustered spectra.
    for (int r = 0; r < 3; ++r) evals[r] = V.col(r).dot(B * V.col(r));
    if (evals[0] > evals[1]) {
        std::swap(evals[0], evals[1]);
        V.col(0).swap(V.col(1));
    }
    if (evals[1] > evals[2]) {
        std::swap(evals[1], evals[2]);
        V.col(1).swap(V.col(2));
    }
    if (evals[0] > evals[1]) {
        std::swap(evals[0], evals[1]);
        V.col(0).swap(V.col(1));
    }

    for (int r = 0; r < 3; ++r) {
        Vec3 v = V.col(r);
        canonicalize_sign(v);
        V.col(r) = v;
    }

    res.eigenvalues = evals * scale;
    res.eigenvectors = V;
    const double norm_k = A.norm();
    const double gap_floor = 1e-9 * std::max(1.0, norm_k);
    res.degenerate = (res.eigenvalues[1] - res.eigenvalues[0] < gap_floor) ||
                     (res.eigenvalues[2] - res.eigenvalues[1] < gap_floor);
    return res;
}

Mat3 eigenvalue_backward(const EigenResult& res, const Vec3& dL_dsigma) {
    Mat3 out = Mat3::Zero();
    for (int r = 0; r < 3; ++r) {
        const Vec3 v = res.eigenvectors.col(r);
        out += dL_dsigma[r] * (v * v.transpose());
    }
    return out;
}

double huber(double a, double b, double delta) {
    if (!(delta > 0.0)) throw InvalidParameterError("huber: delta must be positive");
    const double r = a - b;
    const double ar = std::abs(r);
    if (ar <= delta) return 0.5 * r * r;
    return delta * (ar - 0.5 * delta);
}

double huber_grad(double a, double b, double delta) {
    if (!(delta > 0.0)) throw InvalidParameterError("huber: delta must be positive");
    const double r = a - b;
    if (std::abs(r) <= delta) return r;
    return r > 0.0 ? delta : -delta;
}

}  // namespace rrgs
