#include "gsgraph/associate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "gsgraph/errors.hpp"
#include "gsgraph/util.hpp"

namespace gsgraph {

namespace {

struct Projected {
    double u = 0, v = 0, z = 0;
    bool valid = false;
};

Projected project_point(const Vec3& p_world, const CameraView& cam) {
    Projected out;
    const Vec3 pc = cam.to_camera(p_world);
    if (pc.z() <= 0.0) return out;
    out.u = cam.fx * pc.x() / pc.z() + cam.cx;
    out.v = cam.fy * pc.y() / pc.z() + cam.cy;
    out.z = pc.z();
    out.valid = true;
    return out;
}

template <typename Fn>
void stamp_disc(const Projected& pr, const CameraView& cam, double r, Fn&& fn) {
    const int y0 = std::max(0, static_cast<int>(std::ceil(pr.v - r)));
    const int y1 = std::min(cam.height - 1, static_cast<int>(std::floor(pr.v + r)));
    const int x0 = std::max(0, static_cast<int>(std::ceil(pr.u - r)));
    const int x1 = std::min(cam.width - 1, static_cast<int>(std::floor(pr.u + r)));
    const double r2 = r * r;
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double dx = x - pr.u;
            const double dy = y - pr.v;
            if (dx * dx + dy * dy <= r2) fn(y, x);
        }
    }
}

}  // namespace

WinnerMap render_winner_map(std::span<const Vec3> positions, const CameraView& camera, double radius_px) {
    WinnerMap map;
    map.winner = Grid<std::int32_t>(camera.height, camera.width, -1);
    map.depth = Grid<float>(camera.height, camera.width, std::numeric_limits<float>::infinity());
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const Projected pr = project_point(positions[i], camera);
        if (!pr.valid) continue;
        const float z = static_cast<float>(pr.z);
        stamp_disc(pr, camera, radius_px, [&](int y, int x) {
            float& best = map.depth.at(y, x);
            std::int32_t& who = map.winner.at(y, x);
            if (z < best || (z == best && static_cast<std::int32_t>(i) < who)) {
                best = z;
                who = static_cast<std::int32_t>(i);
            }
        });
    }
    return map;
}

std::size_t ClusterFootprint::area() const {
    std::size_t n = 0;
    for (auto v : pixels.data) n += v ? 1 : 0;
    return n;
}

ClusterFootprint project_cluster(std::span<const Vec3> positions, std::span<const int> point_indices,
                                 const CameraView& camera, double radius_px, int cluster_id, int view_id) {
    ClusterFootprint fp;
    fp.cluster_id = cluster_id;
    fp.view_id = view_id;
    fp.pixels = MaskGrid(camera.height, camera.width, 0);
    for (int idx : point_indices) {
        const Projected pr = project_point(positions[static_cast<std::size_t>(idx)], camera);
        if (!pr.valid) continue;
        stamp_disc(pr, camera, radius_px, [&](int y, int x) { fp.pixels.at(y, x) = 1; });
    }
    return fp;
}

std::optional<FootprintMatch> match_footprint(const ClusterFootprint& footprint, const ViewBundle& bundle,
                                              double iou_min) {
    const SegGrid& seg = bundle.full_segmentation;
    if (!footprint.pixels.same_shape(seg.height, seg.width)) {
        throw Error("match_footprint: footprint and segmentation shapes differ");
    }
    std::size_t fp_area = 0;
    std::map<std::int32_t, std::size_t> inter, area;
    for (std::size_t i = 0; i < seg.data.size(); ++i) {
        const std::int32_t m = seg.data[i];
        if (m != kBackground) ++area[m];
        if (footprint.pixels.data[i]) {
            ++fp_area;
            if (m != kBackground) ++inter[m];
        }
    }
    if (fp_area == 0) return std::nullopt;

    FootprintMatch best;
    for (const auto& [mask, a] : area) {
        const std::size_t is = inter.count(mask) ? inter.at(mask) : 0;
        const double iou = static_cast<double>(is) / static_cast<double>(fp_area + a - is);
        if (iou > best.iou) {
            best.iou = iou;
            best.mask_index = mask;
        }
    }
    if (best.mask_index < 0 || best.iou < iou_min) return std::nullopt;
    return best;
}

std::vector<ClusterViewMatches> match_clusters(const ScenePoints& scene, const std::vector<ViewBundle>& bundles,
                                               const AssociationParams& params) {
    std::map<int, std::vector<int>> members;
    for (std::size_t i = 0; i < scene.labels.size(); ++i) {
        if (scene.labels[i] != kNoLabel) members[scene.labels[i]].push_back(static_cast<int>(i));
    }
    std::vector<int> cluster_ids;
    cluster_ids.reserve(members.size());
    for (const auto& [id, pts] : members) {
        (void)pts;
        cluster_ids.push_back(id);
    }

    std::vector<ClusterViewMatches> out(cluster_ids.size());
    const std::size_t jobs = cluster_ids.size() * bundles.size();
    std::vector<std::optional<FootprintMatch>> slots(jobs);
    parallel_for(jobs, [&](std::size_t job) {
        const std::size_t ci = job / bundles.size();
        const std::size_t vi = job % bundles.size();
        const auto& pts = members.at(cluster_ids[ci]);
        const ClusterFootprint fp = project_cluster(scene.positions, pts, bundles[vi].camera, params.radius_px,
                                                    cluster_ids[ci], bundles[vi].view_id);
        slots[job] = match_footprint(fp, bundles[vi], params.iou_min);
    });
    for (std::size_t ci = 0; ci < cluster_ids.size(); ++ci) {
        out[ci].cluster_id = cluster_ids[ci];
        for (std::size_t vi = 0; vi < bundles.size(); ++vi) {
            const auto& m = slots[ci * bundles.size() + vi];
            if (m) out[ci].per_view[bundles[vi].view_id] = *m;
        }
    }
    return out;
}

std::vector<GraphNode> aggregate_nodes(const ScenePoints& scene, const std::vector<ViewBundle>& bundles,
                                       const std::vector<ClusterViewMatches>& matches,
                                       std::vector<int>* unmatched) {
    std::map<int, const ViewBundle*> by_view;
    for (const auto& b : bundles) by_view[b.view_id] = &b;

    std::map<int, Vec3> centroid_sum;
    std::map<int, std::size_t> centroid_n;
    for (std::size_t i = 0; i < scene.labels.size(); ++i) {
        const int l = scene.labels[i];
        if (l == kNoLabel) continue;
        auto [it, fresh] = centroid_sum.try_emplace(l, Vec3::Zero());
        (void)fresh;
        it->second += scene.positions[i];
        ++centroid_n[l];
    }

    std::vector<GraphNode> nodes;
    for (const auto& cm : matches) {
        if (cm.per_view.empty()) {
            if (unmatched) unmatched->push_back(cm.cluster_id);
            continue;
        }

        VecX feature_sum;
        std::size_t feature_n = 0;
        std::map<std::string, int> category_votes;
        std::vector<std::string> attributes;
        std::set<std::string> seen_captions;

        for (const auto& [view_id, m] : cm.per_view) {
            const ViewBundle& bundle = *by_view.at(view_id);
            auto fit = bundle.mask_features.find(m.mask_index);
            if (fit != bundle.mask_features.end()) {
                if (feature_n == 0) {
                    feature_sum = fit->second;
                } else {
                    feature_sum += fit->second;
                }
                ++feature_n;
            }
            for (const auto& det : bundle.detections) {
                if (det.mask_index == m.mask_index) ++category_votes[det.category];
            }
            auto cit = bundle.captions.find(m.mask_index);
            if (cit != bundle.captions.end() && seen_captions.insert(cit->second).second) {
                attributes.push_back(cit->second);
            }
        }

        GraphNode node;
        node.cluster_id = cm.cluster_id;
        if (feature_n > 0) {
            node.semantic_feature = feature_sum / static_cast<double>(feature_n);
            const double norm = node.semantic_feature.norm();
            if (norm > 0.0) node.semantic_feature /= norm;
        }
        // Plurality vote; ties go to the lexicographically first category.
        int best_votes = 0;
        for (const auto& [cat, votes] : category_votes) {
            if (votes > best_votes) {
                best_votes = votes;
                node.category = cat;
            }
        }
        node.attributes = std::move(attributes);
        if (centroid_n.count(cm.cluster_id)) {
            node.centroid = centroid_sum.at(cm.cluster_id) / static_cast<double>(centroid_n.at(cm.cluster_id));
        }
        nodes.push_back(std::move(node));
    }
    return nodes;
}

}  // namespace gsgraph
