#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gsgraph {

using Vec3 = Eigen::Vector3d;
using VecX = Eigen::VectorXd;
using Mat3 = Eigen::Matrix3d;

/// Sentinel for "no cluster assigned yet".
inline constexpr int kNoLabel = -1;
/// Background value in a full-segmentation grid.
inline constexpr std::int32_t kBackground = -1;

// Dense row-major 2D grid. Used for segmentations, footprints and the
// per-pixel winner index of the feature renderer.
template <typename T>
struct Grid {
    int height = 0;
    int width = 0;
    std::vector<T> data;

    Grid() = default;
    Grid(int h, int w, T fill = T{}) : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

    T& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    const T& at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
    bool in_bounds(int y, int x) const { return y >= 0 && y < height && x >= 0 && x < width; }
    std::size_t size() const { return data.size(); }
    bool same_shape(int h, int w) const { return height == h && width == w; }

    bool operator==(const Grid&) const = default;
};

using MaskGrid = Grid<std::uint8_t>;
using SegGrid = Grid<std::int32_t>;

/// The 3D point set: positions, per-point instance features and cluster
/// labels. Immutable after construction everywhere but the training and
/// clustering stages, which produce new values.
struct ScenePoints {
    std::vector<Vec3> positions;
    std::vector<VecX> instance_features;
    std::vector<int> labels;           // kNoLabel when unassigned
    std::vector<double> stability;     // mean gradient norm per point; empty if never trained

    std::size_t size() const { return positions.size(); }
    int feature_dim() const { return instance_features.empty() ? 0 : static_cast<int>(instance_features.front().size()); }
};

/// Pinhole camera with a world-to-camera rigid transform.
struct CameraView {
    Mat3 rotation = Mat3::Identity();  // world -> camera
    Vec3 translation = Vec3::Zero();
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;

    Vec3 to_camera(const Vec3& p_world) const { return rotation * p_world + translation; }
};

struct PixelBox {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    bool operator==(const PixelBox&) const = default;
};

struct Detection {
    std::string category;
    PixelBox box;
    int mask_index = -1;

    bool operator==(const Detection&) const = default;
};

struct RelationCandidate {
    int subject_mask = -1;
    std::string predicate;
    int object_mask = -1;
    std::string subject_category;
    std::string object_category;

    bool operator==(const RelationCandidate&) const = default;
};

/// One posed view's 2D extraction bundle: segmentation, per-mask semantic
/// features and confidences, detections, captions and relation candidates.
struct ViewBundle {
    int view_id = 0;
    CameraView camera;
    SegGrid full_segmentation;
    std::map<int, VecX> mask_features;      // unit vectors, d_s dims
    std::map<int, double> mask_confidences; // in [0, 1]
    std::vector<Detection> detections;
    std::map<int, std::string> captions;
    std::vector<RelationCandidate> relation_candidates;

    int semantic_dim() const { return mask_features.empty() ? 0 : static_cast<int>(mask_features.begin()->second.size()); }
};

/// Clustering state: centers live in the (d_i + 3)-dim concatenated
/// feature/position space, member counts track running means.
struct ClusterSet {
    std::vector<VecX> centers;
    std::vector<std::int64_t> member_counts;
    std::vector<int> assignments;  // per point, kNoLabel when unassigned
    int k = 0;
};

enum class Verdict {
    kKept,
    kDroppedContact,
    kDroppedDirection,
    kDroppedAdjacency,
};

std::string to_string(Verdict v);
std::optional<Verdict> verdict_from_string(const std::string& s);

struct GraphNode {
    int cluster_id = -1;
    VecX semantic_feature;
    std::string category;
    std::vector<std::string> attributes;
    Vec3 centroid = Vec3::Zero();
};

struct GraphEdge {
    int subject = -1;
    std::string predicate;
    int object = -1;
    int support_views = 0;
    bool verified = false;
    Verdict verdict = Verdict::kKept;
    // Direction check came out exactly orthogonal; edge kept but flagged.
    bool indeterminate_direction = false;
};

struct SceneGraph {
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges;

    const GraphNode* find_node(int cluster_id) const;
    bool has_node(int cluster_id) const { return find_node(cluster_id) != nullptr; }
};

struct Violation {
    std::string field;
    std::string message;

    std::string str() const { return field + ": " + message; }
};

/// Checks every ScenePoints invariant; returns the violations instead of
/// throwing. Empty result means the scene is well formed.
std::vector<Violation> validate_scene(const ScenePoints& points);

/// Same contract for a view bundle (mask references, unit feature norms,
/// confidence ranges, camera validity).
std::vector<Violation> validate_bundle(const ViewBundle& bundle);

std::vector<Violation> validate_graph(const SceneGraph& graph);

}  // namespace gsgraph
