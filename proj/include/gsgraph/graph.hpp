#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gsgraph/associate.hpp"
#include "gsgraph/types.hpp"

namespace gsgraph {

/// Relation lifted from 2D candidates onto clusters; identical triples
/// from different views merge with their support count incremented.
struct RelationTriple {
    int subject = -1;
    std::string predicate;
    int object = -1;
    std::string subject_category;
    std::string object_category;
    int support_views = 1;
};

/// Pluggable text encoder used by the Eq.-style relation verification.
/// Must produce unit vectors of the graph's semantic dimension.
class TextEmbedder {
public:
    virtual ~TextEmbedder() = default;
    virtual VecX embed(const std::string& text) const = 0;
};

/// Lookup-table embedder (category -> unit vector), the form the synthetic
/// benchmark emits.
class TableEmbedder : public TextEmbedder {
public:
    explicit TableEmbedder(std::map<std::string, VecX> table) : table_(std::move(table)) {}
    VecX embed(const std::string& text) const override;

private:
    std::map<std::string, VecX> table_;
};

struct CorrectionParams {
    double mu = 0.9;                       // verification similarity threshold
    Vec3 front_axis = Vec3(1, 0, 0);       // "front" direction of the scene
    double adjacency_fraction = 0.1;       // of the scene scale
    std::set<std::string> contact_predicates = {"in", "on"};
    std::map<std::string, Vec3> directional_predicates;  // predicate -> signed axis
    std::set<std::string> adjacency_predicates = {"next to", "near", "beside"};
    bool enable_correction = true;

    /// Fills directional_predicates from front_axis when empty:
    /// front/behind on ±front, left/right on ±y, above/below on ±z.
    void resolve_directional_defaults();
};

/// Transfers per-view 2D relation candidates onto matched clusters.
/// Candidates touching unmatched masks are dropped; identical triples merge.
std::vector<RelationTriple> lift_relations(const std::vector<ViewBundle>& bundles,
                                           const std::vector<ClusterViewMatches>& matches);

/// Both endpoints must be semantically consistent with the triple's
/// categories: max over the two category embeddings of the similarity with
/// the node feature must exceed mu on the subject AND the object side.
/// A null embedder skips verification (triple stays, unverified).
bool verify_relation(const RelationTriple& triple, const VecX& subject_feature, const VecX& object_feature,
                     const TextEmbedder* embedder, double mu);

/// Contact check: 2D convex hulls of the z-discarded point sets must
/// intersect (boundary contact counts).
bool check_contact(std::span<const Vec3> subject_points, std::span<const Vec3> object_points);

struct DirectionVerdict {
    bool keep = true;
    bool indeterminate = false;  // |dot| below 1e-9: kept but flagged
};

/// Directional check: keep when (O_subject - O_object) agrees in sign with
/// the predicate's axis. Throws UnknownPredicateAxisError for unmapped
/// predicates.
DirectionVerdict check_direction(const Vec3& subject_center, const Vec3& object_center,
                                 const std::string& predicate, const CorrectionParams& params);

/// Adjacency check: centers within fraction × scene_scale (inclusive).
bool check_adjacency(const Vec3& center_i, const Vec3& center_j, double scene_scale, double fraction);

/// Among nodes of the category, the one whose centroid is nearest the
/// anchor's centroid (ties to lowest cluster id). Throws CategoryAbsentError.
int nearest_of_category(const std::string& category, int anchor_cluster, const SceneGraph& graph);

/// Scene scale = diagonal of the positions' bounding box.
double scene_scale(const ScenePoints& scene);

struct BuildParams {
    AssociationParams association;
    CorrectionParams correction;
};

struct BuildLog {
    std::vector<int> unmatched_clusters;
    int dropped_candidates = 0;  // candidates touching unmatched masks
    int dropped_self_edges = 0;
};

/// Full graph assembly: nodes from association, edges from lifting,
/// verification and the correction modules. Dropped edges stay in the
/// graph with their correction verdict.
SceneGraph build_graph(const ScenePoints& scene, const std::vector<ViewBundle>& bundles,
                       const BuildParams& params, const TextEmbedder* embedder = nullptr,
                       BuildLog* log = nullptr);

}  // namespace gsgraph
