#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "gsgraph/errors.hpp"
#include "gsgraph/ingest.hpp"
#include "oracles.hpp"

using namespace gsgraph;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("gsgraph_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Detection det(double x0, double y0, double x1, double y1, int mask) {
    Detection d;
    d.category = "obj";
    d.box = {x0, y0, x1, y1};
    d.mask_index = mask;
    return d;
}

}  // namespace

TEST_SUITE("ingest") {

TEST_CASE("match_mask_index identity case") {
    SegGrid seg(4, 4, kBackground);
    MaskGrid fg(4, 4, 0);
    for (int x = 0; x < 3; ++x) {
        seg.at(1, x) = 3;
        fg.at(1, x) = 1;
    }
    seg.at(3, 3) = 1;
    CHECK(match_mask_index(fg, seg) == 3);
}

TEST_CASE("match_mask_index picks the argmax-IoU mask") {
    // 4x4 grid, fg = {(0,0),(0,1)}. Masks share no pixels (single
    // granularity), so the two layouts below cover both argmax outcomes.
    MaskGrid fg(4, 4, 0);
    fg.at(0, 0) = fg.at(0, 1) = 1;

    SUBCASE("mask 1 = {(0,0),(0,1),(0,2)}: IoU 2/3 wins") {
        SegGrid seg(4, 4, kBackground);
        seg.at(1, 0) = 0;
        seg.at(0, 0) = seg.at(0, 1) = seg.at(0, 2) = 1;
        CHECK(match_mask_index(fg, seg) == 1);
    }
    SUBCASE("mask 0 = {(0,0)}: IoU 1/2 beats mask 1's 1/3") {
        SegGrid seg(4, 4, kBackground);
        seg.at(0, 0) = 0;
        seg.at(0, 1) = seg.at(0, 2) = 1;
        CHECK(match_mask_index(fg, seg) == 0);
    }
}

TEST_CASE("match_mask_index error paths") {
    SegGrid seg(2, 2, kBackground);
    seg.at(0, 0) = 0;
    MaskGrid empty(2, 2, 0);
    CHECK_THROWS_AS(match_mask_index(empty, seg), EmptyMaskError);

    MaskGrid fg(2, 2, 0);
    fg.at(1, 1) = 1;  // disjoint from mask 0
    CHECK_THROWS_AS(match_mask_index(fg, seg), NoOverlapError);
}

TEST_CASE("match_mask_index ties break to the lowest index") {
    SegGrid seg(2, 2, kBackground);
    seg.at(0, 0) = 5;
    seg.at(0, 1) = 2;
    MaskGrid fg(2, 2, 0);
    fg.at(0, 0) = fg.at(0, 1) = 1;  // IoU 1/2 with both masks
    CHECK(match_mask_index(fg, seg) == 2);
}

TEST_CASE("match_mask_index agrees with the per-pixel oracle on random grids") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> size(3, 12), mask_count(1, 5), coin(0, 3);
    for (int round = 0; round < 1000; ++round) {
        const int h = size(rng), w = size(rng);
        const int masks = mask_count(rng);
        SegGrid seg(h, w, kBackground);
        for (auto& v : seg.data) {
            const int c = coin(rng);
            v = c == 0 ? kBackground : std::uniform_int_distribution<int>(0, masks - 1)(rng);
        }
        MaskGrid fg(h, w, 0);
        for (auto& v : fg.data) v = coin(rng) == 0 ? 1 : 0;

        const auto expected = oracle::match_mask(fg, seg);
        bool fg_empty = true;
        for (auto v : fg.data) fg_empty = fg_empty && !v;
        if (fg_empty) {
            CHECK_THROWS_AS(match_mask_index(fg, seg), EmptyMaskError);
        } else if (!expected) {
            CHECK_THROWS_AS(match_mask_index(fg, seg), Error);
        } else {
            CHECK(match_mask_index(fg, seg) == *expected);
        }
    }
}

TEST_CASE("candidate_pairs: similarity branch") {
    std::map<int, VecX> features;
    VecX a(2), b(2);
    a << 1, 0;
    b << 0.85, std::sqrt(1 - 0.85 * 0.85);  // cosine vs a = 0.85
    features[0] = a;
    features[1] = b;
    const std::vector<Detection> dets = {det(0, 0, 1, 1, 0), det(5, 5, 6, 6, 1)};  // disjoint boxes
    const auto pairs = candidate_pairs(dets, features, 0.8);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0] == std::pair<int, int>{0, 1});
}

TEST_CASE("candidate_pairs: tiny box overlap is enough, shared edges are not") {
    std::map<int, VecX> features;
    VecX a(2), b(2);
    a << 1, 0;
    b << 0, 1;  // cosine 0: semantic branch off
    features[0] = a;
    features[1] = b;
    SUBCASE("1px^2 overlap") {
        const std::vector<Detection> dets = {det(0, 0, 2, 2, 0), det(1, 1, 3, 3, 1)};
        CHECK(candidate_pairs(dets, features, 0.8).size() == 1);
    }
    SUBCASE("shared edge only") {
        const std::vector<Detection> dets = {det(0, 0, 2, 2, 0), det(2, 0, 4, 2, 1)};
        CHECK(candidate_pairs(dets, features, 0.8).empty());
    }
    SUBCASE("disjoint and dissimilar") {
        const std::vector<Detection> dets = {det(0, 0, 1, 1, 0), det(5, 5, 6, 6, 1)};
        CHECK(candidate_pairs(dets, features, 0.8).empty());
    }
}

TEST_CASE("candidate_pairs equals the union of the two branch graphs on random input") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> coord(0, 10), len(0.5, 3);
    std::uniform_int_distribution<int> n_det(2, 8);
    for (int round = 0; round < 1000; ++round) {
        const int n = n_det(rng);
        std::vector<Detection> dets;
        std::vector<oracle::OracleDetection> odets;
        std::map<int, VecX> features;
        for (int i = 0; i < n; ++i) {
            const double x0 = coord(rng), y0 = coord(rng);
            const double x1 = x0 + len(rng), y1 = y0 + len(rng);
            dets.push_back(det(x0, y0, x1, y1, i));
            VecX f(3);
            for (int k = 0; k < 3; ++k) f[k] = std::uniform_real_distribution<double>(-1, 1)(rng);
            f.normalize();
            features[i] = f;
            odets.push_back({x0, y0, x1, y1, {f[0], f[1], f[2]}});
        }
        const auto got = candidate_pairs(dets, features, 0.8);
        const auto expected = oracle::candidate_pairs(odets, 0.8);
        CHECK(got == expected);
    }
}

TEST_CASE("candidate_pairs rejects out-of-range theta") {
    CHECK_THROWS_AS(candidate_pairs({}, {}, 1.5), ConfigError);
}

TEST_CASE("scene round-trip preserves everything") {
    ScenePoints scene;
    std::mt19937_64 rng(3);
    for (int i = 0; i < 17; ++i) {
        scene.positions.emplace_back(static_cast<float>(i) * 0.25f, -1.0f, 2.5f);
        VecX f(5);
        for (int k = 0; k < 5; ++k) f[k] = static_cast<float>(std::uniform_real_distribution<double>(-2, 2)(rng));
        scene.instance_features.push_back(f);
        scene.labels.push_back(kNoLabel);
        scene.stability.push_back(static_cast<float>(i) * 0.125f);
    }
    const fs::path dir = temp_dir("scene_rt");
    save_scene(dir / "scene.bin", scene);
    const ScenePoints back = load_scene(dir / "scene.bin");
    REQUIRE(back.size() == scene.size());
    for (std::size_t i = 0; i < scene.size(); ++i) {
        CHECK(back.positions[i] == scene.positions[i]);
        CHECK(back.instance_features[i] == scene.instance_features[i]);
        CHECK(back.stability[i] == doctest::Approx(scene.stability[i]));
    }
}

TEST_CASE("truncated scene file raises ParseError") {
    ScenePoints scene;
    scene.positions.emplace_back(0, 0, 0);
    scene.instance_features.push_back(VecX::Zero(3));
    scene.labels.push_back(kNoLabel);
    const fs::path dir = temp_dir("scene_trunc");
    save_scene(dir / "scene.bin", scene);

    std::ifstream in(dir / "scene.bin", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    bytes.resize(bytes.size() - 5);
    std::ofstream out(dir / "broken.bin", std::ios::binary);
    out << bytes;
    out.close();
    CHECK_THROWS_AS(load_scene(dir / "broken.bin"), ParseError);
}

TEST_CASE("bundle round-trip and invalid-reference rejection") {
    ViewBundle bundle;
    bundle.view_id = 4;
    bundle.camera.fx = bundle.camera.fy = 40;
    bundle.camera.cx = bundle.camera.cy = 8;
    bundle.camera.width = bundle.camera.height = 16;
    bundle.full_segmentation = SegGrid(16, 16, kBackground);
    bundle.full_segmentation.at(2, 2) = 0;
    bundle.full_segmentation.at(9, 9) = 1;
    VecX f(4);
    f << 0.5, 0.5, 0.5, 0.5;
    bundle.mask_features[0] = f;
    bundle.mask_features[1] = f;
    bundle.mask_confidences[0] = 0.75;
    bundle.mask_confidences[1] = 1.0;
    bundle.detections.push_back(det(1, 1, 3, 3, 0));
    bundle.captions[0] = "a cup";
    bundle.relation_candidates.push_back({0, "on", 1, "cup", "table"});

    const fs::path dir = temp_dir("bundle_rt");
    save_bundle(dir / "view_000", bundle);
    const auto views = load_views(dir);
    REQUIRE(views.size() == 1);
    const ViewBundle& back = views[0];
    CHECK(back.view_id == bundle.view_id);
    CHECK(back.full_segmentation == bundle.full_segmentation);
    CHECK(back.mask_features.at(0) == bundle.mask_features.at(0));
    CHECK(back.mask_confidences.at(1) == bundle.mask_confidences.at(1));
    CHECK(back.detections == bundle.detections);
    CHECK(back.captions.at(0) == "a cup");
    CHECK(back.relation_candidates == bundle.relation_candidates);

    // A relation referencing an absent mask index fails validation on load.
    bundle.relation_candidates.push_back({0, "on", 9, "cup", "table"});
    CHECK_THROWS_AS(save_bundle(dir / "view_001", bundle), ValidationError);
}

TEST_CASE("graph json round-trip") {
    SceneGraph graph;
    GraphNode n0;
    n0.cluster_id = 0;
    n0.category = "cup";
    n0.attributes = {"a red cup"};
    n0.centroid = Vec3(1, 2, 3);
    n0.semantic_feature = VecX::Zero(4);
    n0.semantic_feature[2] = 1.0;
    GraphNode n1 = n0;
    n1.cluster_id = 1;
    n1.category = "table";
    graph.nodes = {n0, n1};
    graph.edges.push_back({0, "on", 1, 3, true, Verdict::kKept, false});
    graph.edges.push_back({1, "next to", 0, 1, false, Verdict::kDroppedAdjacency, false});

    const fs::path dir = temp_dir("graph_rt");
    save_graph_json(dir / "graph.json", graph);
    const SceneGraph back = load_graph_json(dir / "graph.json");
    REQUIRE(back.nodes.size() == 2);
    REQUIRE(back.edges.size() == 2);
    CHECK(back.nodes[0].category == "cup");
    CHECK(back.nodes[1].centroid == n1.centroid);
    CHECK(back.nodes[0].semantic_feature == n0.semantic_feature);
    CHECK(back.edges[0].support_views == 3);
    CHECK(back.edges[1].verdict == Verdict::kDroppedAdjacency);
}

}  // TEST_SUITE
