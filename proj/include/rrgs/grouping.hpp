#pragma once

#include <map>
#include <vector>

#include "rrgs/rasterizer.hpp"

namespace rrgs {

/// Gaussians contributing to one pixel with weight above the threshold,
/// kept in depth order.
struct RayGroup {
    int row = 0;
    int col = 0;
    std::vector<int> members;
    std::vector<double> weights;

    size_t size() const { return members.size(); }
};

/// One group per pixel whose fragments pass w > tau; pixels with no
/// qualifying fragment are omitted. `stride` keeps every stride-th pixel in
/// each dimension (stride 1 = all pixels). Output is row-major deterministic.
std::vector<RayGroup> extract_groups(const RenderOutput& out, double tau, int stride = 1);

/// Counts of nonempty groups by size.
std::map<int, int> group_size_histogram(const std::vector<RayGroup>& groups);

struct KnnGroups {
    int k = 0;
    std::vector<std::vector<int>> neighbors;  // per Gaussian, sorted by (distance, index)
};

/// Exact Euclidean k-nearest neighbors, self excluded, deterministic
/// tie-break by index. Throws InvalidParameterError when fewer than two
/// points or k < 1.
KnnGroups knn_groups(const std::vector<Vec3>& positions, int k);

}  // namespace rrgs
