#include "gsgraph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "gsgraph/errors.hpp"
#include "gsgraph/geometry.hpp"
#include "gsgraph/util.hpp"

namespace gsgraph {

VecX TableEmbedder::embed(const std::string& text) const {
    auto it = table_.find(text);
    if (it == table_.end()) throw EndpointError("TableEmbedder: no embedding for '" + text + "'");
    return it->second;
}

void CorrectionParams::resolve_directional_defaults() {
    if (!directional_predicates.empty()) return;
    directional_predicates["in front of"] = front_axis;
    directional_predicates["behind"] = -front_axis;
    directional_predicates["left of"] = Vec3(0, 1, 0);
    directional_predicates["right of"] = Vec3(0, -1, 0);
    directional_predicates["above"] = Vec3(0, 0, 1);
    directional_predicates["below"] = Vec3(0, 0, -1);
}

std::vector<RelationTriple> lift_relations(const std::vector<ViewBundle>& bundles,
                                           const std::vector<ClusterViewMatches>& matches) {
    // Reverse map per view: mask -> best-IoU cluster.
    std::map<int, std::map<int, std::pair<int, double>>> mask_cluster;  // view -> mask -> (cluster, iou)
    for (const auto& cm : matches) {
        for (const auto& [view_id, m] : cm.per_view) {
            auto& slot = mask_cluster[view_id][m.mask_index];
            if (slot.second < m.iou || (slot.second == m.iou && cm.cluster_id < slot.first)) {
                slot = {cm.cluster_id, m.iou};
            }
        }
    }

    std::map<std::tuple<int, std::string, int>, RelationTriple> merged;
    for (const auto& bundle : bundles) {
        auto vit = mask_cluster.find(bundle.view_id);
        if (vit == mask_cluster.end()) continue;
        const auto& by_mask = vit->second;
        for (const auto& rc : bundle.relation_candidates) {
            auto sit = by_mask.find(rc.subject_mask);
            auto oit = by_mask.find(rc.object_mask);
            if (sit == by_mask.end() || oit == by_mask.end()) continue;  // unmatched mask: dropped
            const int s = sit->second.first;
            const int o = oit->second.first;
            if (s == o) continue;  // both masks fused into one cluster
            const auto key = std::make_tuple(s, rc.predicate, o);
            auto [it, fresh] = merged.try_emplace(key);
            if (fresh) {
                it->second = {s, rc.predicate, o, rc.subject_category, rc.object_category, 1};
            } else {
                ++it->second.support_views;
            }
        }
    }

    std::vector<RelationTriple> out;
    out.reserve(merged.size());
    for (auto& [key, triple] : merged) {
        (void)key;
        out.push_back(std::move(triple));
    }
    return out;
}

namespace {

double cosine(const VecX& a, const VecX& b) {
    if (a.size() == 0 || b.size() == 0 || a.size() != b.size()) return -1.0;
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) return -1.0;
    return a.dot(b) / (na * nb);
}

}  // namespace

bool verify_relation(const RelationTriple& triple, const VecX& subject_feature, const VecX& object_feature,
                     const TextEmbedder* embedder, double mu) {
    if (embedder == nullptr) throw EndpointError("verify_relation: embedder unavailable");
    const VecX e1 = embedder->embed(triple.subject_category);
    const VecX e2 = embedder->embed(triple.object_category);
    const double subject_side = std::max(cosine(e1, subject_feature), cosine(e2, subject_feature));
    const double object_side = std::max(cosine(e1, object_feature), cosine(e2, object_feature));
    return subject_side > mu && object_side > mu;
}

bool check_contact(std::span<const Vec3> subject_points, std::span<const Vec3> object_points) {
    auto flatten = [](std::span<const Vec3> pts) {
        std::vector<geom::Vec2> out;
        out.reserve(pts.size());
        for (const Vec3& p : pts) out.emplace_back(p.x(), p.y());
        return out;
    };
    const auto ha = geom::convex_hull(flatten(subject_points));
    const auto hb = geom::convex_hull(flatten(object_points));
    return geom::hulls_intersect(ha, hb);
}

DirectionVerdict check_direction(const Vec3& subject_center, const Vec3& object_center,
                                 const std::string& predicate, const CorrectionParams& params) {
    auto it = params.directional_predicates.find(predicate);
    if (it == params.directional_predicates.end()) {
        throw UnknownPredicateAxisError("check_direction: no axis for predicate '" + predicate + "'");
    }
    const Vec3 v = subject_center - object_center;
    const double dot = v.dot(it->second);
    if (std::abs(dot) < 1e-9) return {true, true};
    return {dot > 0.0, false};
}

bool check_adjacency(const Vec3& center_i, const Vec3& center_j, double scene_scale, double fraction) {
    if (scene_scale <= 0.0) throw Error("check_adjacency: scene_scale must be positive");
    return (center_i - center_j).norm() <= fraction * scene_scale;
}

int nearest_of_category(const std::string& category, int anchor_cluster, const SceneGraph& graph) {
    const GraphNode* anchor = graph.find_node(anchor_cluster);
    if (anchor == nullptr) throw CategoryAbsentError("nearest_of_category: anchor cluster not in graph");
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& n : graph.nodes) {
        if (n.category != category) continue;
        const double d = (n.centroid - anchor->centroid).norm();
        if (d < best_d || (d == best_d && n.cluster_id < best)) {
            best_d = d;
            best = n.cluster_id;
        }
    }
    if (best < 0) throw CategoryAbsentError("nearest_of_category: no node of category '" + category + "'");
    return best;
}

double scene_scale(const ScenePoints& scene) {
    if (scene.size() == 0) return 0.0;
    Vec3 lo = scene.positions.front(), hi = scene.positions.front();
    for (const Vec3& p : scene.positions) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
}

SceneGraph build_graph(const ScenePoints& scene, const std::vector<ViewBundle>& bundles,
                       const BuildParams& params, const TextEmbedder* embedder, BuildLog* log) {
    CorrectionParams correction = params.correction;
    correction.resolve_directional_defaults();

    const std::vector<ClusterViewMatches> matches = match_clusters(scene, bundles, params.association);

    SceneGraph graph;
    std::vector<int> unmatched;
    graph.nodes = aggregate_nodes(scene, bundles, matches, &unmatched);
    if (log) log->unmatched_clusters = unmatched;

    std::vector<RelationTriple> triples = lift_relations(bundles, matches);
    if (log) {
        int total = 0;
        for (const auto& b : bundles) total += static_cast<int>(b.relation_candidates.size());
        int lifted = 0;
        for (const auto& t : triples) lifted += t.support_views;
        log->dropped_candidates = total - lifted;
    }

    // Drop triples touching clusters that never made it into the node set.
    std::erase_if(triples, [&](const RelationTriple& t) {
        return !graph.has_node(t.subject) || !graph.has_node(t.object);
    });

    std::map<int, std::vector<Vec3>> member_points;
    for (std::size_t i = 0; i < scene.labels.size(); ++i) {
        if (scene.labels[i] != kNoLabel) member_points[scene.labels[i]].push_back(scene.positions[i]);
    }
    const double scale = scene_scale(scene);

    graph.edges.resize(triples.size());
    std::vector<std::uint8_t> failed_verification(triples.size(), 0);
    // Verdicts depend only on the edge's own geometry and the params, so
    // edges are independent jobs.
    parallel_for(triples.size(), [&](std::size_t i) {
        const RelationTriple& t = triples[i];
        GraphEdge edge;
        edge.subject = t.subject;
        edge.predicate = t.predicate;
        edge.object = t.object;
        edge.support_views = t.support_views;

        const GraphNode* sn = graph.find_node(t.subject);
        const GraphNode* on = graph.find_node(t.object);
        bool keep_semantic = true;
        if (embedder != nullptr) {
            try {
                edge.verified = verify_relation(t, sn->semantic_feature, on->semantic_feature, embedder, correction.mu);
                keep_semantic = edge.verified;
                failed_verification[i] = edge.verified ? 0 : 1;
            } catch (const EndpointError&) {
                edge.verified = false;  // embedder could not answer; skip, keep unverified
            }
        } else {
            edge.verified = false;  // verification skipped, triple stays
        }

        edge.verdict = Verdict::kKept;
        if (keep_semantic && correction.enable_correction) {
            if (correction.contact_predicates.count(t.predicate)) {
                if (!check_contact(member_points.at(t.subject), member_points.at(t.object))) {
                    edge.verdict = Verdict::kDroppedContact;
                }
            } else if (correction.directional_predicates.count(t.predicate)) {
                const DirectionVerdict dv = check_direction(sn->centroid, on->centroid, t.predicate, correction);
                edge.indeterminate_direction = dv.indeterminate;
                if (!dv.keep) edge.verdict = Verdict::kDroppedDirection;
            } else if (correction.adjacency_predicates.count(t.predicate)) {
                if (!check_adjacency(sn->centroid, on->centroid, scale, correction.adjacency_fraction)) {
                    edge.verdict = Verdict::kDroppedAdjacency;
                }
            }
            // any other predicate passes through untouched
        }
        graph.edges[i] = std::move(edge);
    });

    // Edges that failed semantic verification drop out entirely; edges
    // dropped by correction stay with their verdict recorded.
    std::vector<GraphEdge> kept;
    kept.reserve(graph.edges.size());
    for (std::size_t i = 0; i < graph.edges.size(); ++i) {
        if (!failed_verification[i]) kept.push_back(std::move(graph.edges[i]));
    }
    graph.edges = std::move(kept);
    return graph;
}

}  // namespace gsgraph
