#include <cmath>
#include <set>

#include "doctest.h"
#include "rrgs/grouping.hpp"

using namespace rrgs;

namespace {

Camera test_camera(int size = 32) {
    return make_lookat_camera(Vec3(0, 0, -3.0), Vec3::Zero(), Vec3(0, 1, 0), 1.4 * size,
                              1.4 * size, size, size);
}

// Two opaque layers covering the image center, plus scattered filler.
GaussianSet occlusion_scene(Rng& rng, double front_opacity) {
    GaussianSet set;
    for (int i = 0; i < 6; ++i) {
        Gaussian3D g;
        g.position = Vec3(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), -0.5);
        g.scale = Vec3(0.3, 0.3, 0.1);
        g.opacity = front_opacity;
        g.color = Vec3(0.9, 0.1, 0.1);
        set.push_back(g);
    }
    for (int i = 0; i < 6; ++i) {
        Gaussian3D g;
        g.position = Vec3(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 0.5);
        g.scale = Vec3(0.3, 0.3, 0.1);
        g.opacity = 0.8;
        g.color = Vec3(0.1, 0.9, 0.1);
        set.push_back(g);
    }
    return set;
}

}  // namespace

TEST_CASE("extract_groups thresholds weights directly") {
    // Synthesize a render output with known fragment weights.
    RenderOutput out;
    out.image = Image(2, 1);
    out.options.retain_fragments = true;
    out.fragments.assign(2, {});
    out.final_transmittance.assign(2, 1.0);
    out.fragments[0] = {{4, 1.0, 1.0, 0.5}, {7, 0.5, 0.5, 0.3}, {9, 0.01, 0.2, 1e-5}};

    const auto groups = extract_groups(out, 1e-3);
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].row == 0);
    CHECK(groups[0].col == 0);
    CHECK(groups[0].members == std::vector<int>{4, 7});
}

TEST_CASE("extract_groups validates inputs") {
    RenderOutput out;
    out.image = Image(1, 1);
    out.options.retain_fragments = true;
    out.fragments.assign(1, {});
    out.final_transmittance.assign(1, 1.0);
    CHECK_THROWS_AS(extract_groups(out, 0.0), InvalidParameterError);
    CHECK_THROWS_AS(extract_groups(out, 1.0), InvalidParameterError);
    CHECK_THROWS_AS(extract_groups(out, 0.5, 0), InvalidParameterError);
    out.options.retain_fragments = false;
    CHECK_THROWS_AS(extract_groups(out, 0.5), ContractViolationError);
}

TEST_CASE("opaque occluder suppresses the back layer") {
    // alpha = 10 in front: T behind it is e^-10, so the far Gaussian's weight
    // stays under any tau in the paper's range.
    GaussianSet set(2);
    set[0].position = Vec3(0, 0, -0.5);
    set[0].scale = Vec3(0.4, 0.4, 0.1);
    set[0].opacity = 10.0;
    set[1].position = Vec3(0, 0, 0.5);
    set[1].scale = Vec3(0.4, 0.4, 0.1);
    set[1].opacity = 0.9;
    const Camera cam = test_camera();
    const RenderOutput out = render(frame_from_set(set), set, cam, {});

    const auto groups = extract_groups(out, 1e-4);
    bool saw_front = false;
    for (const auto& g : groups) {
        for (size_t j = 0; j < g.members.size(); ++j) {
            if (g.members[j] == 0) saw_front = true;
            if (g.members[j] == 1) {
                // Where the far one is a member, the near one cannot have been
                // nearly opaque at that pixel.
                const auto& frags = out.fragments_at(g.row, g.col);
                for (const auto& f : frags)
                    if (f.gaussian == 1) CHECK(f.weight > 1e-4);
            }
        }
    }
    CHECK(saw_front);

    // At the image center the front Gaussian is fully opaque: w_far =
    // e^{-alpha_near} * (1 - e^{-alpha_far}) which is below tau.
    const auto& center = out.fragments_at(16, 16);
    REQUIRE(center.size() >= 1);
    CHECK(center[0].gaussian == 0);
    for (const auto& f : center)
        if (f.gaussian == 1) CHECK(f.weight < 1e-4);
}

TEST_CASE("group monotonicity in tau and the occlusion filter") {
    Rng rng(41);
    const GaussianSet set = occlusion_scene(rng, 3.0);
    const Camera cam = test_camera();
    const RenderOutput out = render(frame_from_set(set), set, cam, {});

    const double taus[3] = {1e-4, 3e-4, 1e-3};
    std::vector<std::vector<RayGroup>> by_tau;
    for (double tau : taus) by_tau.push_back(extract_groups(out, tau));

    // Nesting: members under a larger tau are a subset of those under a
    // smaller one, pixel by pixel.
    for (int a = 0; a < 2; ++a) {
        std::map<std::pair<int, int>, std::set<int>> loose;
        for (const auto& g : by_tau[a])
            loose[{g.row, g.col}] = std::set<int>(g.members.begin(), g.members.end());
        for (const auto& g : by_tau[a + 1]) {
            const auto it = loose.find({g.row, g.col});
            REQUIRE(it != loose.end());
            for (int m : g.members) CHECK(it->second.count(m) == 1);
        }
    }

    // Occlusion: a fragment whose entry transmittance is <= tau can never be
    // a member (w <= T).
    for (size_t ti = 0; ti < 3; ++ti) {
        for (const auto& g : by_tau[ti]) {
            const auto& frags = out.fragments_at(g.row, g.col);
            for (int m : g.members) {
                for (const auto& f : frags) {
                    if (f.gaussian == m) CHECK(f.transmittance > taus[ti]);
                }
            }
        }
    }
}

TEST_CASE("groups keep depth order and unique indices") {
    Rng rng(42);
    const GaussianSet set = occlusion_scene(rng, 1.0);
    const Camera cam = test_camera();
    const RenderOutput out = render(frame_from_set(set), set, cam, {});
    const auto groups = extract_groups(out, 1e-3);
    CHECK(!groups.empty());
    for (const auto& g : groups) {
        std::set<int> seen;
        double prev_depth = -1.0;
        for (size_t j = 0; j < g.members.size(); ++j) {
            CHECK(seen.insert(g.members[j]).second);
            const double depth = out.projected[out.projected_of_source[g.members[j]]].depth;
            CHECK(depth >= prev_depth);
            prev_depth = depth;
            CHECK(g.weights[j] > 1e-3);
        }
    }
}

TEST_CASE("re-extraction is idempotent") {
    Rng rng(43);
    const GaussianSet set = occlusion_scene(rng, 1.0);
    const Camera cam = test_camera();
    const RenderOutput out = render(frame_from_set(set), set, cam, {});
    const auto a = extract_groups(out, 3e-4);
    const auto b = extract_groups(out, 3e-4);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].members == b[i].members);
        CHECK(a[i].weights == b[i].weights);
    }
}

TEST_CASE("pixel stride subsamples the group grid") {
    Rng rng(44);
    const GaussianSet set = occlusion_scene(rng, 1.0);
    const Camera cam = test_camera();
    const RenderOutput out = render(frame_from_set(set), set, cam, {});
    const auto full = extract_groups(out, 1e-3, 1);
    const auto strided = extract_groups(out, 1e-3, 4);
    int expected = 0;
    for (const auto& g : full)
        if (g.row % 4 == 0 && g.col % 4 == 0) ++expected;
    CHECK(int(strided.size()) == expected);
    for (const auto& g : strided) {
        CHECK(g.row % 4 == 0);
        CHECK(g.col % 4 == 0);
    }
}

TEST_CASE("group_size_histogram counts sizes") {
    std::vector<RayGroup> groups(3);
    groups[0].members = {1, 2};
    groups[1].members = {3, 4};
    groups[2].members = {5, 6, 7, 8, 9};
    const auto hist = group_size_histogram(groups);
    CHECK(hist.size() == 2);
    CHECK(hist.at(2) == 2);
    CHECK(hist.at(5) == 1);
    CHECK(group_size_histogram({}).empty());
}

TEST_CASE("histogram matches a direct per-pixel recount on a render") {
    Rng rng(45);
    const GaussianSet set = occlusion_scene(rng, 1.0);
    const Camera cam = test_camera();
    const RenderOutput out = render(frame_from_set(set), set, cam, {});
    const double tau = 3e-4;
    const auto hist = group_size_histogram(extract_groups(out, tau));

    std::map<int, int> recount;
    for (int r = 0; r < cam.height; ++r)
        for (int c = 0; c < cam.width; ++c) {
            int size = 0;
            for (const auto& f : out.fragments_at(r, c))
                if (f.weight > tau) ++size;
            if (size > 0) ++recount[size];
        }
    CHECK(hist == recount);
}

TEST_CASE("knn basics and determinism") {
    // Collinear points: the middle one picks the closer endpoint.
    const std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(3, 0, 0)};
    const KnnGroups knn = knn_groups(pts, 1);
    CHECK(knn.neighbors[1] == std::vector<int>{0});

    CHECK_THROWS_AS(knn_groups({Vec3(0, 0, 0)}, 1), InvalidParameterError);
    CHECK_THROWS_AS(knn_groups(pts, 0), InvalidParameterError);

    // k larger than n-1 truncates.
    const KnnGroups all = knn_groups(pts, 20);
    for (const auto& nb : all.neighbors) CHECK(nb.size() == 2);
}

TEST_CASE("knn ties break by index") {
    const std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(-1, 0, 0)};
    const KnnGroups knn = knn_groups(pts, 1);
    CHECK(knn.neighbors[0] == std::vector<int>{1});  // both at distance 1; lower index wins
}

TEST_CASE("knn matches the all-pairs oracle on 200 points") {
    Rng rng(46);
    std::vector<Vec3> pts(200);
    for (auto& p : pts) p = rng.uniform_vec3(-5, 5);
    const KnnGroups knn = knn_groups(pts, 5);
    for (int i = 0; i < 200; ++i) {
        std::vector<std::pair<double, int>> all;
        for (int j = 0; j < 200; ++j)
            if (j != i) all.emplace_back((pts[j] - pts[i]).squaredNorm(), j);
        std::sort(all.begin(), all.end());
        for (int t = 0; t < 5; ++t) CHECK(knn.neighbors[i][t] == all[t].second);
    }
}
