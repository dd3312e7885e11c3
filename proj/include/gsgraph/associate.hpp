#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsgraph/types.hpp"

namespace gsgraph {

/// Per-pixel nearest-point rasterization of the whole point set: each
/// in-frustum point with positive depth stamps a disc of radius_px around
/// its pinhole projection; the smallest-depth point wins a pixel (ties
/// break to the lowest point index). winner == -1 marks uncovered pixels.
struct WinnerMap {
    Grid<std::int32_t> winner;
    Grid<float> depth;
};

WinnerMap render_winner_map(std::span<const Vec3> positions, const CameraView& camera, double radius_px);

/// Binary footprint of one cluster: every member point stamps its disc,
/// no depth test against other clusters.
struct ClusterFootprint {
    int cluster_id = -1;
    int view_id = -1;
    MaskGrid pixels;

    std::size_t area() const;
};

ClusterFootprint project_cluster(std::span<const Vec3> positions, std::span<const int> point_indices,
                                 const CameraView& camera, double radius_px, int cluster_id = -1,
                                 int view_id = -1);

/// Best-IoU mask for a footprint, or nothing when every IoU < iou_min.
struct FootprintMatch {
    int mask_index = -1;
    double iou = 0.0;
};

std::optional<FootprintMatch> match_footprint(const ClusterFootprint& footprint, const ViewBundle& bundle,
                                              double iou_min);

/// One cluster's matches across views: view_id -> matched mask.
struct ClusterViewMatches {
    int cluster_id = -1;
    std::map<int, FootprintMatch> per_view;
};

struct AssociationParams {
    double radius_px = 2.0;
    double iou_min = 0.2;
};

/// Projects every cluster into every view and matches it to a 2D mask.
std::vector<ClusterViewMatches> match_clusters(const ScenePoints& scene, const std::vector<ViewBundle>& bundles,
                                               const AssociationParams& params);

/// Aggregates matched 2D evidence into graph nodes: L2-normalized mean
/// semantic feature, plurality-vote category (ties break lexicographically)
/// and deduplicated captions. Clusters with no match anywhere are dropped
/// and reported in `unmatched`.
std::vector<GraphNode> aggregate_nodes(const ScenePoints& scene, const std::vector<ViewBundle>& bundles,
                                       const std::vector<ClusterViewMatches>& matches,
                                       std::vector<int>* unmatched = nullptr);

}  // namespace gsgraph
