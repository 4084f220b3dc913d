#pragma once

#include <vector>

#include "rrgs/core_types.hpp"
#include "rrgs/image.hpp"

namespace rrgs {

struct RenderOptions {
    Vec3 background = Vec3::Zero();
    double alpha_min = 1.0 / 255.0;       // fragments below this are skipped
    double transmittance_floor = 1e-4;    // stop compositing once T drops below
    bool retain_fragments = true;
};

/// One composited contribution at a pixel, kept in depth order.
struct Fragment {
    int gaussian = -1;      // index into the scene's Gaussian set
    double alpha = 0.0;     // opacity * density at this pixel
    double transmittance = 0.0;  // T before this fragment
    double weight = 0.0;    // T * (1 - e^{-alpha})
};

struct RenderOutput {
    Image image;
    Vec3 background = Vec3::Zero();
    std::vector<std::vector<Fragment>> fragments;  // row-major, one list per pixel
    std::vector<double> final_transmittance;       // row-major per pixel
    std::vector<ProjectedGaussian> projected;      // visible Gaussians only
    std::vector<int> projected_of_source;          // source index -> projected index or -1
    RenderOptions options;

    const std::vector<Fragment>& fragments_at(int row, int col) const {
        return fragments[size_t(row) * image.width + col];
    }
};

/// Gradients w.r.t. the realized per-Gaussian parameters (and colors, which
/// live on the canonical set).
struct ParamGradients {
    std::vector<Vec3> d_position;
    std::vector<Vec3> d_scale;
    std::vector<Vec4> d_rotation;
    std::vector<double> d_opacity;
    std::vector<Vec3> d_color;

    void resize_zero(size_t n);
    void accumulate(const ParamGradients& other);
};

/// Deterministic fragment ordering: ascending depth, ties by ascending index.
std::vector<std::pair<int, double>> sort_fragments(std::vector<std::pair<int, double>> fragments);

/// Depth-sorted per-pixel alpha compositing:
///   C = sum_i T_i (1 - e^{-alpha_i}) c_i + T_{N+1} * background,
///   T_i = e^{-sum_{j<i} alpha_j},  alpha_i = o_i * G_i(x).
/// Fragment lists are retained per pixel for grouping and for the backward
/// pass. Pixel centers sit at (col + 0.5, row + 0.5).
RenderOutput render(const FrameState& frame, const GaussianSet& set, const Camera& cam,
                    const RenderOptions& opts = {});

/// Exact reverse-mode gradients of the rendered image w.r.t. every
/// contributing Gaussian's position, scale, rotation, opacity and color.
/// Throws ContractViolationError when fragments were not retained.
ParamGradients render_backward(const RenderOutput& out, const FrameState& frame,
                               const GaussianSet& set, const Camera& cam,
                               const Image& dL_dimage);

}  // namespace rrgs
