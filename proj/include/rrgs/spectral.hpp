#pragma once

#include "rrgs/common.hpp"

namespace rrgs {

struct EigenResult {
    Vec3 eigenvalues;   // ascending
    Mat3 eigenvectors;  // column r pairs with eigenvalues[r]; orthonormal
    bool degenerate = false;  // some eigenvalue gap below 1e-9 * max(1, ||K||_F)
};

/// Closed-form eigendecomposition of a symmetric 3x3 matrix.
///
/// Eigenvalues come from the trigonometric solution of the characteristic
/// polynomial followed by one Newton polish step each; eigenvectors use row
/// cross-products with an orthogonal-complement fallback so that repeated
/// eigenvalues still yield an orthonormal basis. The input is symmetrized as
/// (K + K^T)/2 before use. Signs are canonical: the first component of each
/// eigenvector with magnitude above 1e-9 is positive.
///
/// Throws InvalidParameterError on non-finite entries.
EigenResult eig3_sym(const Mat3& K);

/// dL/dK = sum_r dL_dsigma[r] * v_r v_r^T (first-order eigenvalue
/// perturbation). For degenerate spectra this is a subgradient of the
/// sorted-eigenvalue map in the solver's chosen basis.
Mat3 eigenvalue_backward(const EigenResult& res, const Vec3& dL_dsigma);

/// Standard Huber loss on the residual a - b: 0.5 r^2 for |r| <= delta,
/// otherwise delta (|r| - delta/2).
double huber(double a, double b, double delta);

/// d huber / d a; the derivative w.r.t. b is its negative.
double huber_grad(double a, double b, double delta);

}  // namespace rrgs
