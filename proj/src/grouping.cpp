#include "rrgs/grouping.hpp"

#include <algorithm>

namespace rrgs {

std::vector<RayGroup> extract_groups(const RenderOutput& out, double tau, int stride) {
    if (!(tau > 0.0 && tau < 1.0))
        throw InvalidParameterError("extract_groups: tau must lie in (0, 1)");
    if (stride < 1) throw InvalidParameterError("extract_groups: stride must be >= 1");
    if (!out.options.retain_fragments)
        throw ContractViolationError("extract_groups: fragment records were not retained");

    std::vector<RayGroup> groups;
    const int width = out.image.width, height = out.image.height;
    for (int row = 0; row < height; row += stride) {
        for (int col = 0; col < width; col += stride) {
            const auto& frags = out.fragments[size_t(row) * width + col];
            RayGroup g;
            g.row = row;
            g.col = col;
            for (const Fragment& f : frags) {
                if (f.weight > tau) {
                    g.members.push_back(f.gaussian);
                    g.weights.push_back(f.weight);
                }
            }
            if (!g.members.empty()) groups.push_back(std::move(g));
        }
    }
    return groups;
}

std::map<int, int> group_size_histogram(const std::vector<RayGroup>& groups) {
    std::map<int, int> hist;
    for (const auto& g : groups)
        if (!g.members.empty()) ++hist[int(g.members.size())];
    return hist;
}

KnnGroups knn_groups(const std::vector<Vec3>& positions, int k) {
    const int n = int(positions.size());
    if (n < 2) throw InvalidParameterError("knn_groups: need at least two points");
    if (k < 1) throw InvalidParameterError("knn_groups: k must be >= 1");

    KnnGroups out;
    out.k = k;
    out.neighbors.assign(n, {});
    const int take = std::min(k, n - 1);
    parallel_for(n, [&](int i) {
        std::vector<std::pair<double, int>> dist;
        dist.reserve(n - 1);
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            dist.emplace_back((positions[j] - positions[i]).squaredNorm(), j);
        }
        std::partial_sort(dist.begin(), dist.begin() + take, dist.end());
        auto& nb = out.neighbors[i];
        nb.reserve(take);
        for (int t = 0; t < take; ++t) nb.push_back(dist[t].second);
    });
    return out;
}

}  // namespace rrgs
