#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gsgraph/graph.hpp"
#include "gsgraph/ground.hpp"
#include "gsgraph/metrics.hpp"
#include "gsgraph/types.hpp"

namespace gsgraph {

struct SynthObject {
    std::string shape = "box";  // "box" | "sphere"
    Vec3 center = Vec3::Zero();
    Vec3 size = Vec3(1, 1, 1);  // box: full extents; sphere: size.x() = radius
    std::string category;
    std::string caption;
    int points = 500;
};

struct CameraRing {
    int views = 8;
    double radius = 8.0;
    double height = 4.0;
    Vec3 target = Vec3(0, 0, 0.5);
    int width = 96;
    int height_px = 96;
    double fx = 90.0;
    double fy = 90.0;
    // Odd views flip below the scene so every surface gets seen; leaves no
    // blind spots for the visibility-driven feature training.
    bool mirror = false;
};

struct CorruptionSpec {
    double false_relation_fraction = 0.0;  // auto-planted share of |true relations|
    double confidence_noise = 0.0;         // mask confidences drawn from [1-noise, 1]
};

struct GtRelation {
    int subject = -1;  // object indices
    std::string predicate;
    int object = -1;
};

struct SynthSpec {
    std::vector<SynthObject> objects;
    CameraRing cameras;
    std::vector<GtRelation> true_relations;
    std::vector<GtRelation> planted_false;  // explicit plants, certified at generation
    CorruptionSpec corruption;
    int d_i = 6;
    int d_s = 8;
    double feature_separation = 1.0;  // min distance between object instance-feature centers
    double feature_noise = 0.0;       // 0 = separation / 10
    double radius_px = 2.0;
    int query_count = 0;
};

SynthSpec load_synth_spec(const std::filesystem::path& path);
void save_synth_spec(const std::filesystem::path& path, const SynthSpec& spec);

struct PlantedFalse {
    GtRelation relation;
    std::string violated;  // "contact" | "direction" | "adjacency"
};

struct GtQuery {
    std::string text;
    QueryConstraints constraints;
    int answer_object = -1;
};

struct GroundTruth {
    std::vector<int> point_labels;            // object index per point
    std::vector<std::string> categories;      // per object
    std::vector<GtRelation> true_relations;   // certified geometrically valid
    std::vector<PlantedFalse> planted_false;  // certified geometrically false
    std::vector<GtQuery> queries;
    std::map<std::string, VecX> embeddings;   // category -> semantic unit vector
    std::vector<VecX> object_instance;        // per object true instance feature
    double scene_scale = 0.0;
};

struct SynthOutput {
    ScenePoints scene;
    std::vector<ViewBundle> bundles;
    GroundTruth gt;
};

/// Deterministic scene synthesis: exact masks from the same point-footprint
/// projector the pipeline uses, per-view shuffled mask indices, category
/// one-hot semantic features, and certified relation ground truth.
SynthOutput generate(const SynthSpec& spec, unsigned seed);

void save_synth_output(const std::filesystem::path& dir, const SynthOutput& output);
GroundTruth load_ground_truth(const std::filesystem::path& dir);

/// Canned layout used by tests and the quickstart: n objects on a grid of
/// disjoint boxes with a small category vocabulary and simple relations.
SynthSpec default_scene_spec(int n_objects, int points_per_object);

}  // namespace gsgraph
