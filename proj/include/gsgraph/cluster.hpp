#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gsgraph/types.hpp"

namespace gsgraph {

/// Downsampled gradient-stable points that seed the control stage.
struct ControlPointSet {
    std::vector<int> indices;   // into ScenePoints
    std::vector<VecX> features; // concatenated [instance feature, w_xyz * xyz]
};

enum class SamplerKind { kFps, kFpfh };

struct ClusterParams {
    SamplerKind sampler = SamplerKind::kFps;
    int control_count = 0;          // 0 = auto: min(2048, M/10)
    int fpfh_neighbors = 10;
    int birch_branching = 50;
    double birch_threshold = 0.0;   // 0 = auto: 0.5 * median control-feature NN distance
    double follow_threshold = 0.0;  // 0 = auto from control-stage radii
    double split_threshold = 0.0;   // 0 = auto from per-cluster feature spreads
    double w_xyz = 0.0;             // 0 = auto: feature RMS / scene diagonal
    double stability_epsilon = 0.0;  // 0 = auto: median stability score
};

/// Greedy farthest-point sampling over the candidate set; the seed is the
/// candidate farthest from the candidates' centroid, ties to lowest index.
std::vector<int> sample_fps(std::span<const int> candidates, std::span<const Vec3> positions, int m);

/// Edge-aware sampling: a simplified point-feature-histogram descriptor per
/// candidate (normal-angle histograms over k nearest neighbors), scored by
/// distance to the mean descriptor; returns the m most distinctive points.
std::vector<int> sample_fpfh(std::span<const int> candidates, std::span<const Vec3> positions, int m,
                             int k_neighbors);

/// Threshold-driven clustering of arbitrary vectors: a CF-tree compresses
/// the input into subcluster summaries, then subclusters within reach of
/// each other merge. The cluster count is an output, never an input.
struct BirchResult {
    std::vector<VecX> centers;
    std::vector<std::int64_t> counts;
    std::vector<int> assignments;  // per input vector
};

BirchResult birch_cluster(std::span<const VecX> features, double threshold, int branching_factor);

/// Stability gate over persisted per-point mean-gradient scores;
/// epsilon <= 0 uses the median score as the cutoff.
std::vector<int> stable_by_scores(std::span<const double> stability, double epsilon);

/// Spatial weight so neither modality dominates the concatenated feature.
double auto_spatial_weight(const ScenePoints& scene);

/// Builds the clustering feature [instance feature, w_xyz * xyz] for one point.
VecX concat_feature(const ScenePoints& scene, int index, double w_xyz);

/// Control stage: BIRCH over the control-point features.
ClusterSet control_cluster(const ScenePoints& scene, const ControlPointSet& ctrl, const ClusterParams& params);

/// Follow stage: every remaining point joins the nearest center when the
/// distance is below the follow threshold, else founds a new cluster; the
/// receiving cluster's running-mean center updates after every assignment.
ClusterSet follow_assign(const ScenePoints& scene, const ClusterSet& initial, const ControlPointSet& ctrl,
                         const ClusterParams& params);

/// Refinement: clusters whose members' instance-feature spread exceeds the
/// split threshold are re-clustered on features alone (spatial part zeroed).
ClusterSet refine_clusters(const ScenePoints& scene, const ClusterSet& clusters, const ClusterParams& params);

/// Full Control-Follow pipeline; labels the scene and returns the final
/// cluster set. `stable` restricts control sampling (empty = all points).
struct ClusterOutcome {
    ClusterSet clusters;
    ControlPointSet control;
    ClusterParams resolved;  // params with every auto value filled in
};

ClusterOutcome cluster_scene(ScenePoints& scene, const ClusterParams& params, std::span<const int> stable = {});

}  // namespace gsgraph
