#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "gsgraph/cluster.hpp"
#include "gsgraph/errors.hpp"
#include "gsgraph/synth.hpp"

using namespace gsgraph;

namespace {

std::vector<int> all_indices(std::size_t n) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

// Well-separated blobs in feature space; returns per-point blob id.
struct Blobs {
    std::vector<VecX> features;
    std::vector<int> truth;
};

Blobs make_blobs(int k, int per_blob, int dim, double separation, unsigned seed) {
    Blobs out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int b = 0; b < k; ++b) {
        VecX center = VecX::Zero(dim);
        center[b % dim] = separation * (1 + b / dim);
        for (int i = 0; i < per_blob; ++i) {
            VecX f = center;
            for (int d = 0; d < dim; ++d) f[d] += gauss(rng) / std::sqrt(static_cast<double>(dim));
            out.features.push_back(std::move(f));
            out.truth.push_back(b);
        }
    }
    return out;
}

double purity(const std::vector<int>& predicted, const std::vector<int>& truth) {
    std::map<int, std::map<int, int>> tally;
    for (std::size_t i = 0; i < predicted.size(); ++i) ++tally[predicted[i]][truth[i]];
    std::size_t correct = 0;
    for (const auto& [cluster, votes] : tally) {
        int best = 0;
        for (const auto& [t, c] : votes) best = std::max(best, c);
        correct += static_cast<std::size_t>(best);
    }
    return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

}  // namespace

TEST_SUITE("cluster") {

TEST_CASE("fps: collinear points pick the extremes") {
    const std::vector<Vec3> positions = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(10, 0, 0)};
    const auto idx = all_indices(3);
    const auto picked = sample_fps(idx, positions, 2);
    const std::set<int> got(picked.begin(), picked.end());
    CHECK(got == std::set<int>{0, 2});
}

TEST_CASE("fps: m equal to the candidate count returns everything") {
    const std::vector<Vec3> positions = {Vec3(0, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 2)};
    const auto picked = sample_fps(all_indices(3), positions, 3);
    CHECK(std::set<int>(picked.begin(), picked.end()) == std::set<int>{0, 1, 2});
}

TEST_CASE("fps: unit square corners give a diagonal") {
    const std::vector<Vec3> positions = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)};
    const auto picked = sample_fps(all_indices(4), positions, 2);
    REQUIRE(picked.size() == 2);
    const double d = (positions[static_cast<std::size_t>(picked[0])] -
                      positions[static_cast<std::size_t>(picked[1])]).norm();
    CHECK(d == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("fps: requesting too many points throws") {
    const std::vector<Vec3> positions = {Vec3(0, 0, 0)};
    CHECK_THROWS_AS(sample_fps(all_indices(1), positions, 2), TooFewPointsError);
    CHECK(sample_fps(all_indices(1), positions, 0).empty());
}

TEST_CASE("fpfh: uniform plane scores tie and fall back to index order") {
    std::vector<Vec3> positions;
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) positions.emplace_back(x * 0.5, y * 0.5, 0.0);
    }
    const auto picked = sample_fpfh(all_indices(positions.size()), positions, 5, 8);
    CHECK(picked == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("fpfh: crease points are the most distinctive") {
    // Fold at y = 0: one half flat in z = 0, the other rising vertically.
    const double h = 0.5;
    std::vector<Vec3> positions;
    for (int ix = 0; ix < 12; ++ix) {
        for (int iy = -6; iy <= 6; ++iy) {
            if (iy <= 0) {
                positions.emplace_back(ix * h, iy * h, 0.0);
            } else {
                positions.emplace_back(ix * h, 0.0, iy * h);
            }
        }
    }
    const auto picked = sample_fpfh(all_indices(positions.size()), positions, 5, 10);
    int near_crease = 0;
    for (int idx : picked) {
        const Vec3& p = positions[static_cast<std::size_t>(idx)];
        const double crease_dist = std::sqrt(p.y() * p.y() + p.z() * p.z());
        near_crease += crease_dist <= 2.0 * h ? 1 : 0;
    }
    CHECK(near_crease >= 4);
}

TEST_CASE("fpfh: m=0 gives an empty set, coincident points throw") {
    std::vector<Vec3> same(6, Vec3(1, 2, 3));
    CHECK(sample_fpfh(all_indices(6), same, 0, 3).empty());
    CHECK_THROWS_AS(sample_fpfh(all_indices(6), same, 2, 3), DegenerateNeighborhoodError);
}

TEST_CASE("birch: three separated blobs come out as three pure clusters") {
    const Blobs blobs = make_blobs(3, 60, 5, 10.0, 13);
    const BirchResult result = birch_cluster(blobs.features, 0.5, 50);
    CHECK(result.centers.size() == 3);
    CHECK(purity(result.assignments, blobs.truth) == doctest::Approx(1.0));
    // Centers are the exact member means.
    for (std::size_t c = 0; c < result.centers.size(); ++c) {
        VecX mean = VecX::Zero(5);
        std::int64_t n = 0;
        for (std::size_t i = 0; i < blobs.features.size(); ++i) {
            if (result.assignments[i] == static_cast<int>(c)) {
                mean += blobs.features[i];
                ++n;
            }
        }
        mean /= static_cast<double>(n);
        CHECK((mean - result.centers[c]).norm() < 1e-9);
        CHECK(n == result.counts[c]);
    }
}

TEST_CASE("birch: identical points collapse to one cluster") {
    std::vector<VecX> features(40, VecX::Constant(4, 2.5));
    const BirchResult result = birch_cluster(features, 0.5, 50);
    CHECK(result.centers.size() == 1);
    CHECK(result.counts[0] == 40);
}

TEST_CASE("birch: single point is its own center") {
    std::vector<VecX> features = {VecX::Constant(3, -1.5)};
    const BirchResult result = birch_cluster(features, 0.5, 50);
    REQUIRE(result.centers.size() == 1);
    CHECK(result.centers[0] == features[0]);
}

TEST_CASE("birch: emergent k tracks blob count without being an input") {
    for (int k : {2, 4, 7}) {
        const Blobs blobs = make_blobs(k, 40, 6, 12.0, 100 + static_cast<unsigned>(k));
        const BirchResult result = birch_cluster(blobs.features, 0.5, 50);
        CHECK(static_cast<int>(result.centers.size()) == k);
    }
}

TEST_CASE("control_cluster resolves the threshold automatically") {
    // Control features already in concatenated space.
    const Blobs blobs = make_blobs(3, 50, 6, 10.0, 21);
    ScenePoints scene;
    ControlPointSet ctrl;
    for (std::size_t i = 0; i < blobs.features.size(); ++i) {
        scene.positions.emplace_back(0, 0, 0);
        scene.instance_features.push_back(VecX::Zero(3));
        scene.labels.push_back(kNoLabel);
        ctrl.indices.push_back(static_cast<int>(i));
        ctrl.features.push_back(blobs.features[i]);
    }
    ClusterParams params;
    const ClusterSet initial = control_cluster(scene, ctrl, params);
    CHECK(initial.k == 3);
    std::vector<int> ctrl_assign;
    for (int idx : ctrl.indices) ctrl_assign.push_back(initial.assignments[static_cast<std::size_t>(idx)]);
    CHECK(purity(ctrl_assign, blobs.truth) == doctest::Approx(1.0));
}

TEST_CASE("follow_assign: identical feature joins at distance zero") {
    ScenePoints scene;
    scene.positions = {Vec3(1, 2, 3)};
    scene.instance_features = {VecX::Constant(2, 0.5)};
    scene.labels = {kNoLabel};

    ClusterParams params;
    params.w_xyz = 1.0;
    params.follow_threshold = 0.5;

    ClusterSet initial;
    initial.k = 1;
    initial.centers = {concat_feature(scene, 0, 1.0)};
    initial.member_counts = {4};
    initial.assignments = {kNoLabel};

    const ClusterSet out = follow_assign(scene, initial, {}, params);
    CHECK(out.assignments[0] == 0);
    CHECK(out.k == 1);
    CHECK(out.member_counts[0] == 5);
    CHECK((out.centers[0] - initial.centers[0]).norm() == doctest::Approx(0.0));
}

TEST_CASE("follow_assign: distant point founds a new singleton cluster") {
    ScenePoints scene;
    scene.positions = {Vec3(100, 100, 100)};
    scene.instance_features = {VecX::Constant(2, 9.0)};
    scene.labels = {kNoLabel};

    ClusterParams params;
    params.w_xyz = 1.0;
    params.follow_threshold = 1.0;

    ClusterSet initial;
    initial.k = 1;
    initial.centers = {VecX::Zero(5)};
    initial.member_counts = {3};
    initial.assignments = {kNoLabel};

    const ClusterSet out = follow_assign(scene, initial, {}, params);
    CHECK(out.k == 2);
    CHECK(out.assignments[0] == 1);
    CHECK(out.member_counts[1] == 1);
}

TEST_CASE("follow_assign: running-mean recurrence over a seeded cluster") {
    // Two points with concatenated features f and g appended to a cluster
    // seeded at E with weight 3: final center (f + g + 3E) / 5.
    ScenePoints scene;
    scene.positions = {Vec3(0, 0, 0), Vec3(0, 0, 0)};
    VecX f1(1), f2(1);
    f1 << 1.0;
    f2 << 2.0;
    scene.instance_features = {f1, f2};
    scene.labels = {kNoLabel, kNoLabel};

    ClusterParams params;
    params.w_xyz = 1.0;
    params.follow_threshold = 100.0;

    VecX seed(4);
    seed << 0.5, 0, 0, 0;
    ClusterSet initial;
    initial.k = 1;
    initial.centers = {seed};
    initial.member_counts = {3};
    initial.assignments = {kNoLabel, kNoLabel};

    const ClusterSet out = follow_assign(scene, initial, {}, params);
    const VecX f = concat_feature(scene, 0, 1.0);
    const VecX g = concat_feature(scene, 1, 1.0);
    const VecX expected = (f + g + 3.0 * seed) / 5.0;
    CHECK((out.centers[0] - expected).norm() < 1e-12);
    CHECK(out.member_counts[0] == 5);
}

TEST_CASE("refine: bimodal cluster splits, tight and singleton clusters stay") {
    ScenePoints scene;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> gauss(0, 0.05);
    // Cluster 0: two feature modes far apart; cluster 1: one tight mode;
    // cluster 2: singleton.
    auto add_point = [&](double feat, int label) {
        scene.positions.emplace_back(0, 0, 0);
        VecX f(2);
        f << feat + gauss(rng), gauss(rng);
        scene.instance_features.push_back(f);
        scene.labels.push_back(label);
    };
    for (int i = 0; i < 30; ++i) add_point(0.0, 0);
    for (int i = 0; i < 30; ++i) add_point(5.0, 0);
    for (int i = 0; i < 30; ++i) add_point(10.0, 1);
    add_point(20.0, 2);

    ClusterSet clusters;
    clusters.k = 3;
    clusters.assignments = scene.labels;
    clusters.member_counts = {60, 30, 1};
    clusters.centers.assign(3, VecX::Zero(5));

    ClusterParams params;
    params.w_xyz = 1.0;
    params.split_threshold = 1.0;  // bimodal spread ~2.5 exceeds it, tight ~0.07 does not

    const ClusterSet out = refine_clusters(scene, clusters, params);
    CHECK(out.k == 4);
    // Partition preserved.
    std::vector<std::int64_t> counts(static_cast<std::size_t>(out.k), 0);
    for (int l : out.assignments) {
        REQUIRE(l >= 0);
        REQUIRE(l < out.k);
        ++counts[static_cast<std::size_t>(l)];
    }
    std::int64_t total = 0;
    for (auto c : counts) total += c;
    CHECK(total == static_cast<std::int64_t>(scene.size()));
    // The two halves of cluster 0 now carry different labels.
    CHECK(out.assignments[0] != out.assignments[35]);
    // Former cluster 1 and the singleton each stay whole.
    CHECK(out.assignments[60] == out.assignments[89]);
}

TEST_CASE("cluster_scene: emergent count and purity on synthetic scenes") {
    for (int n : {3, 5}) {
        SynthSpec spec = default_scene_spec(n, 400);
        spec.cameras.views = 0;
        SynthOutput synth = generate(spec, static_cast<unsigned>(40 + n));
        ClusterParams params;
        const ClusterOutcome outcome = cluster_scene(synth.scene, params);
        CHECK(outcome.clusters.k >= n - 1);
        CHECK(outcome.clusters.k <= n + 1);
        CHECK(purity(synth.scene.labels, synth.gt.point_labels) >= 0.9);
        // Labels partition every point.
        for (int l : synth.scene.labels) {
            CHECK(l >= 0);
            CHECK(l < outcome.clusters.k);
        }
    }
}

TEST_CASE("cluster_scene is deterministic") {
    SynthSpec spec = default_scene_spec(4, 300);
    spec.cameras.views = 0;
    SynthOutput a = generate(spec, 77);
    SynthOutput b = generate(spec, 77);
    ClusterParams params;
    cluster_scene(a.scene, params);
    cluster_scene(b.scene, params);
    CHECK(a.scene.labels == b.scene.labels);
}

TEST_CASE("cluster centers equal member means after finalization") {
    SynthSpec spec = default_scene_spec(3, 200);
    spec.cameras.views = 0;
    SynthOutput synth = generate(spec, 55);
    ClusterParams params;
    const ClusterOutcome outcome = cluster_scene(synth.scene, params);
    const double w = outcome.resolved.w_xyz;
    for (int c = 0; c < outcome.clusters.k; ++c) {
        VecX mean = VecX::Zero(synth.scene.feature_dim() + 3);
        std::int64_t n = 0;
        for (std::size_t i = 0; i < synth.scene.size(); ++i) {
            if (synth.scene.labels[i] == c) {
                mean += concat_feature(synth.scene, static_cast<int>(i), w);
                ++n;
            }
        }
        REQUIRE(n > 0);
        mean /= static_cast<double>(n);
        CHECK((mean - outcome.clusters.centers[static_cast<std::size_t>(c)]).norm() < 1e-5);
        CHECK(n == outcome.clusters.member_counts[static_cast<std::size_t>(c)]);
    }
}

}  // TEST_SUITE
