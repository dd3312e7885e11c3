#include "gsgraph/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace gsgraph {

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::kKept: return "kept";
        case Verdict::kDroppedContact: return "dropped_contact";
        case Verdict::kDroppedDirection: return "dropped_direction";
        case Verdict::kDroppedAdjacency: return "dropped_adjacency";
    }
    return "kept";
}

std::optional<Verdict> verdict_from_string(const std::string& s) {
    if (s == "kept") return Verdict::kKept;
    if (s == "dropped_contact") return Verdict::kDroppedContact;
    if (s == "dropped_direction") return Verdict::kDroppedDirection;
    if (s == "dropped_adjacency") return Verdict::kDroppedAdjacency;
    return std::nullopt;
}

const GraphNode* SceneGraph::find_node(int cluster_id) const {
    for (const auto& n : nodes) {
        if (n.cluster_id == cluster_id) return &n;
    }
    return nullptr;
}

namespace {

bool all_finite(const VecX& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) return false;
    }
    return true;
}

}  // namespace

std::vector<Violation> validate_scene(const ScenePoints& points) {
    std::vector<Violation> out;
    const std::size_t m = points.positions.size();
    if (points.instance_features.size() != m) {
        out.push_back({"instance_features",
                       "length " + std::to_string(points.instance_features.size()) +
                           " does not match point count " + std::to_string(m)});
    }
    if (points.labels.size() != m) {
        out.push_back({"labels", "length " + std::to_string(points.labels.size()) +
                                     " does not match point count " + std::to_string(m)});
    }
    if (!points.stability.empty() && points.stability.size() != m) {
        out.push_back({"stability", "length " + std::to_string(points.stability.size()) +
                                        " does not match point count " + std::to_string(m)});
    }

    const int d = points.feature_dim();
    for (std::size_t i = 0; i < points.instance_features.size(); ++i) {
        const VecX& f = points.instance_features[i];
        if (static_cast<int>(f.size()) != d) {
            out.push_back({"instance_features[" + std::to_string(i) + "]",
                           "dimension " + std::to_string(f.size()) + " differs from " + std::to_string(d)});
        }
        if (!all_finite(f)) {
            out.push_back({"instance_features[" + std::to_string(i) + "]", "non-finite value"});
        }
    }
    for (std::size_t i = 0; i < points.positions.size(); ++i) {
        if (!points.positions[i].allFinite()) {
            out.push_back({"positions[" + std::to_string(i) + "]", "non-finite value"});
        }
    }

    // Labels, once assigned, must index a cluster in [0, k_total).
    int k_total = 0;
    for (int l : points.labels) k_total = std::max(k_total, l + 1);
    for (std::size_t i = 0; i < points.labels.size(); ++i) {
        const int l = points.labels[i];
        if (l != kNoLabel && l < 0) {
            out.push_back({"labels[" + std::to_string(i) + "]", "negative label " + std::to_string(l)});
        }
        (void)k_total;
    }
    return out;
}

std::vector<Violation> validate_bundle(const ViewBundle& bundle) {
    std::vector<Violation> out;
    const CameraView& cam = bundle.camera;
    if (cam.fx <= 0 || cam.fy <= 0) out.push_back({"camera", "fx and fy must be positive"});
    if (cam.width <= 0 || cam.height <= 0) out.push_back({"camera", "width and height must be positive"});
    const Mat3 gram = cam.rotation.transpose() * cam.rotation;
    if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6) {
        out.push_back({"camera", "rotation is not orthonormal within 1e-6"});
    }
    if (!bundle.full_segmentation.same_shape(cam.height, cam.width)) {
        out.push_back({"full_segmentation", "grid shape does not match camera height/width"});
    }

    std::set<std::int32_t> present;
    for (std::int32_t v : bundle.full_segmentation.data) {
        if (v != kBackground) present.insert(v);
    }
    auto check_ref = [&](int idx, const std::string& where) {
        if (present.find(idx) == present.end()) {
            out.push_back({where, "mask index " + std::to_string(idx) + " absent from full_segmentation"});
        }
    };
    for (std::size_t i = 0; i < bundle.detections.size(); ++i) {
        check_ref(bundle.detections[i].mask_index, "detections[" + std::to_string(i) + "]");
    }
    for (const auto& [idx, text] : bundle.captions) {
        (void)text;
        check_ref(idx, "captions[" + std::to_string(idx) + "]");
    }
    for (std::size_t i = 0; i < bundle.relation_candidates.size(); ++i) {
        const auto& rc = bundle.relation_candidates[i];
        check_ref(rc.subject_mask, "relation_candidates[" + std::to_string(i) + "].subject");
        check_ref(rc.object_mask, "relation_candidates[" + std::to_string(i) + "].object");
    }

    for (const auto& [idx, f] : bundle.mask_features) {
        if (!all_finite(f)) {
            out.push_back({"mask_features[" + std::to_string(idx) + "]", "non-finite value"});
            continue;
        }
        if (std::abs(f.norm() - 1.0) > 1e-5) {
            out.push_back({"mask_features[" + std::to_string(idx) + "]",
                           "norm " + std::to_string(f.norm()) + " not unit within 1e-5"});
        }
    }
    for (const auto& [idx, c] : bundle.mask_confidences) {
        if (!(c >= 0.0 && c <= 1.0)) {
            out.push_back({"mask_confidences[" + std::to_string(idx) + "]", "outside [0, 1]"});
        }
    }
    return out;
}

std::vector<Violation> validate_graph(const SceneGraph& graph) {
    std::vector<Violation> out;
    std::set<int> ids;
    for (const auto& n : graph.nodes) ids.insert(n.cluster_id);
    for (std::size_t i = 0; i < graph.edges.size(); ++i) {
        const auto& e = graph.edges[i];
        if (ids.find(e.subject) == ids.end() || ids.find(e.object) == ids.end()) {
            out.push_back({"edges[" + std::to_string(i) + "]", "endpoint references a missing node"});
        }
        if (e.subject == e.object) {
            out.push_back({"edges[" + std::to_string(i) + "]", "self-edge"});
        }
        if (e.support_views < 1) {
            out.push_back({"edges[" + std::to_string(i) + "]", "support_views must be >= 1"});
        }
    }
    return out;
}

}  // namespace gsgraph
