#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "gsgraph/errors.hpp"
#include "gsgraph/ingest.hpp"
#include "gsgraph/metrics.hpp"
#include "gsgraph/synth.hpp"
#include "oracles.hpp"
#include "scenes.hpp"

using namespace gsgraph;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("gsgraph_synth_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("mask features equal the object's category feature at zero corruption") {
    SynthSpec spec = default_scene_spec(3, 150);
    spec.cameras.views = 4;
    const SynthOutput out = generate(spec, 1);
    REQUIRE(out.bundles.size() == 4);
    for (const auto& bundle : out.bundles) {
        for (const auto& [mask, feature] : bundle.mask_features) {
            // Mask indices are shuffled per view; recover the object by its
            // detection entry.
            std::string category;
            for (const auto& det : bundle.detections) {
                if (det.mask_index == mask) category = det.category;
            }
            REQUIRE(!category.empty());
            CHECK(feature == out.gt.embeddings.at(category));
            CHECK(bundle.mask_confidences.at(mask) == 1.0);
        }
    }
}

TEST_CASE("same seed twice gives byte-identical outputs") {
    SynthSpec spec = scenes::relation_scene_spec();
    const fs::path da = temp_dir("det_a"), db = temp_dir("det_b");
    save_synth_output(da, generate(spec, 42));
    save_synth_output(db, generate(spec, 42));
    for (const char* name : {"scene.bin", "gt.json", "gt_labels.bin", "embeddings.json",
                             "views/view_000/manifest.json", "views/view_000/segmentation.bin",
                             "views/view_003/mask_features.bin"}) {
        CHECK(slurp(da / name) == slurp(db / name));
    }
    const std::string a = slurp(da / "gt.json");
    CHECK(a == slurp(db / "gt.json"));
}

TEST_CASE("corruption fraction plants the rounded count, each tagged with its class") {
    SynthSpec spec = scenes::relation_scene_spec();
    spec.planted_false.clear();
    spec.corruption.false_relation_fraction = 0.5;  // 6 true -> 3 planted
    const SynthOutput out = generate(spec, 3);
    CHECK(out.gt.true_relations.size() == 6);
    REQUIRE(out.gt.planted_false.size() == 3);
    for (const auto& p : out.gt.planted_false) {
        CHECK((p.violated == "contact" || p.violated == "direction" || p.violated == "adjacency"));
    }
}

TEST_CASE("declared-true relations that fail geometry are rejected") {
    SynthSpec spec = scenes::relation_scene_spec();
    spec.true_relations.push_back({3, "on", 1});  // far cup is not on the table
    CHECK_THROWS_AS(generate(spec, 1), SpecError);
}

TEST_CASE("planted-false relations that are actually valid are rejected") {
    SynthSpec spec = scenes::relation_scene_spec();
    spec.planted_false.push_back({0, "on", 1});  // genuinely true
    CHECK_THROWS_AS(generate(spec, 1), SpecError);
}

TEST_CASE("generator output survives ingest validation round-trip") {
    const SynthSpec spec = scenes::relation_scene_spec();
    const SynthOutput out = generate(spec, 9);
    const fs::path dir = temp_dir("roundtrip");
    save_synth_output(dir, out);

    const ScenePoints scene = load_scene(dir / "scene.bin");  // validates
    CHECK(scene.size() == out.scene.size());
    const auto views = load_views(dir / "views");  // validates every bundle
    CHECK(views.size() == out.bundles.size());
    const GroundTruth gt = load_ground_truth(dir);
    CHECK(gt.true_relations.size() == out.gt.true_relations.size());
    CHECK(gt.queries.size() == out.gt.queries.size());
    CHECK(gt.point_labels == out.gt.point_labels);
}

TEST_CASE("generated queries carry provably unique answers") {
    const SynthSpec spec = scenes::relation_scene_spec();
    const SynthOutput out = generate(spec, 11);
    CHECK(out.gt.queries.size() >= 8);
    bool saw_two_constraint = false, saw_superlative = false;
    for (const auto& q : out.gt.queries) {
        CHECK(q.answer_object >= 0);
        CHECK(q.answer_object < static_cast<int>(spec.objects.size()));
        saw_two_constraint = saw_two_constraint || q.constraints.relations.size() == 2;
        saw_superlative = saw_superlative || q.constraints.superlative.has_value();
    }
    CHECK(saw_two_constraint);
    CHECK(saw_superlative);
}

TEST_CASE("evaluate_segmentation: perfect and permuted labelings score 1.0") {
    std::vector<int> gt = {0, 0, 1, 1, 2, 2, 2};
    CHECK(evaluate_segmentation(gt, gt).miou == doctest::Approx(1.0));
    CHECK(evaluate_segmentation(gt, gt).macc == doctest::Approx(1.0));
    std::vector<int> permuted = {5, 5, 3, 3, 4, 4, 4};
    const auto eval = evaluate_segmentation(permuted, gt);
    CHECK(eval.miou == doctest::Approx(1.0));
    CHECK(eval.macc == doctest::Approx(1.0));
}

TEST_CASE("evaluate_segmentation: frozen half-mislabeled two-class case") {
    // gt: class 0 x4, class 1 x4; prediction sends half of class 1 into
    // cluster 0. Optimal matching: cluster0->class0, cluster1->class1.
    // IoU(class0) = 4/6, IoU(class1) = 2/4, mIoU = 7/12, mAcc = 6/8.
    const std::vector<int> gt = {0, 0, 0, 0, 1, 1, 1, 1};
    const std::vector<int> pred = {0, 0, 0, 0, 0, 0, 1, 1};
    const auto eval = evaluate_segmentation(pred, gt);
    CHECK(eval.macc == doctest::Approx(6.0 / 8.0));
    CHECK(eval.miou == doctest::Approx(7.0 / 12.0));
    CHECK(eval.per_class_iou.at(0) == doctest::Approx(4.0 / 6.0));
    CHECK(eval.per_class_iou.at(1) == doctest::Approx(2.0 / 4.0));
}

TEST_CASE("evaluate_segmentation matches the enumerating oracle exactly") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> len(5, 60), k_pred(1, 6), k_gt(1, 6);
    for (int round = 0; round < 100; ++round) {
        const int n = len(rng);
        const int kp = k_pred(rng), kg = k_gt(rng);
        std::vector<int> pred(static_cast<std::size_t>(n)), gt(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            pred[static_cast<std::size_t>(i)] = std::uniform_int_distribution<int>(0, kp - 1)(rng);
            gt[static_cast<std::size_t>(i)] = std::uniform_int_distribution<int>(0, kg - 1)(rng);
        }
        const auto got = evaluate_segmentation(pred, gt);
        const auto expected = oracle::segmentation_metrics(pred, gt);
        CHECK(got.miou == expected.miou);
        CHECK(got.macc == expected.macc);
    }
}

TEST_CASE("max_assignment equals exhaustive enumeration") {
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<int> dim(1, 6), val(0, 9);
    for (int round = 0; round < 200; ++round) {
        const int r = dim(rng), c = dim(rng);
        std::vector<std::vector<std::int64_t>> score(static_cast<std::size_t>(r),
                                                     std::vector<std::int64_t>(static_cast<std::size_t>(c)));
        for (auto& row : score) {
            for (auto& v : row) v = val(rng);
        }
        const Assignment got = max_assignment(score);
        const oracle::EnumeratedAssignment expected = oracle::enumerate_assignment(score);
        CHECK(got.total == expected.total);
        CHECK(got.row_to_col == expected.row_to_col);
    }
}

TEST_CASE("evaluate_relations counts pre/post precision and planted survivors") {
    SceneGraph graph;
    for (int i = 0; i < 3; ++i) {
        GraphNode n;
        n.cluster_id = i;
        graph.nodes.push_back(n);
    }
    // cluster i maps to object i
    std::map<int, int> mapping = {{0, 0}, {1, 1}, {2, 2}};
    const std::vector<ObjectRelation> truth = {{0, "on", 1}, {2, "next to", 1}};
    const std::vector<ObjectRelation> planted = {{2, "on", 1}};

    graph.edges.push_back({0, "on", 1, 1, true, Verdict::kKept, false});
    graph.edges.push_back({2, "next to", 1, 1, true, Verdict::kKept, false});
    graph.edges.push_back({2, "on", 1, 1, true, Verdict::kDroppedContact, false});

    const RelationEval eval = evaluate_relations(graph, mapping, truth, planted);
    CHECK(eval.precision_pre == doctest::Approx(2.0 / 3.0));
    CHECK(eval.recall_pre == doctest::Approx(1.0));
    CHECK(eval.precision_post == doctest::Approx(1.0));
    CHECK(eval.recall_post == doctest::Approx(1.0));
    CHECK(eval.planted_false_kept == doctest::Approx(0.0));

    SUBCASE("a wrongly dropped true edge shows up in recall") {
        graph.edges[1].verdict = Verdict::kDroppedAdjacency;
        const RelationEval e2 = evaluate_relations(graph, mapping, truth, planted);
        CHECK(e2.recall_post == doctest::Approx(0.5));
    }
    SUBCASE("a surviving planted edge is reported") {
        graph.edges[2].verdict = Verdict::kKept;
        const RelationEval e2 = evaluate_relations(graph, mapping, truth, planted);
        CHECK(e2.planted_false_kept == doctest::Approx(1.0));
        CHECK(e2.precision_post == doctest::Approx(2.0 / 3.0));
    }
}

TEST_CASE("evaluate_grounding counts top-k hits") {
    std::vector<std::vector<int>> ranked;
    std::vector<int> answers;
    for (int i = 0; i < 10; ++i) {
        answers.push_back(i);
        if (i < 7) {
            ranked.push_back({i, 100, 101});
        } else if (i < 9) {
            ranked.push_back({100, i, 101});  // top-3 hit only
        } else {
            ranked.push_back({100, 101, 102});  // miss
        }
    }
    const GroundingEval eval = evaluate_grounding(ranked, answers);
    CHECK(eval.recall_at_1 == doctest::Approx(0.7));
    CHECK(eval.recall_at_3 == doctest::Approx(0.9));
    CHECK(eval.recall_at_5 == doctest::Approx(0.9));
}

TEST_CASE("synth spec json round-trip") {
    const SynthSpec spec = scenes::relation_scene_spec();
    const fs::path dir = temp_dir("specjson");
    save_synth_spec(dir / "spec.json", spec);
    const SynthSpec back = load_synth_spec(dir / "spec.json");
    CHECK(back.objects.size() == spec.objects.size());
    CHECK(back.true_relations.size() == spec.true_relations.size());
    CHECK(back.planted_false.size() == spec.planted_false.size());
    CHECK(back.cameras.views == spec.cameras.views);
    CHECK(back.query_count == spec.query_count);
    // The reloaded spec must generate identically.
    const fs::path da = temp_dir("specjson_a"), db = temp_dir("specjson_b");
    save_synth_output(da, generate(spec, 5));
    save_synth_output(db, generate(back, 5));
    CHECK(slurp(da / "gt.json") == slurp(db / "gt.json"));
    CHECK(slurp(da / "scene.bin") == slurp(db / "scene.bin"));
}

}  // TEST_SUITE
