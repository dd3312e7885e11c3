#include "gsgraph/synth.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "gsgraph/associate.hpp"
#include "gsgraph/errors.hpp"
#include "gsgraph/ingest.hpp"
#include "gsgraph/util.hpp"

namespace gsgraph {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using njson = nlohmann::json;

namespace {

// Instance-feature anchors: scaled sums of one, two or three basis vectors.
// Any two anchors are at least `separation` apart.
std::vector<VecX> feature_anchors(int count, int dim, double separation) {
    std::vector<VecX> anchors;
    auto push = [&](std::initializer_list<int> axes) {
        VecX v = VecX::Zero(dim);
        for (int a : axes) v[a] = separation;
        anchors.push_back(v);
    };
    for (int i = 0; i < dim && static_cast<int>(anchors.size()) < count; ++i) push({i});
    for (int i = 0; i < dim && static_cast<int>(anchors.size()) < count; ++i) {
        for (int j = i + 1; j < dim && static_cast<int>(anchors.size()) < count; ++j) push({i, j});
    }
    for (int i = 0; i < dim && static_cast<int>(anchors.size()) < count; ++i) {
        for (int j = i + 1; j < dim && static_cast<int>(anchors.size()) < count; ++j) {
            for (int k = j + 1; k < dim && static_cast<int>(anchors.size()) < count; ++k) push({i, j, k});
        }
    }
    if (static_cast<int>(anchors.size()) < count) {
        throw SpecError("feature dimension " + std::to_string(dim) + " supports at most " +
                        std::to_string(anchors.size()) + " objects");
    }
    return anchors;
}

CameraView ring_camera(const CameraRing& ring, int view) {
    const double angle = 2.0 * M_PI * view / std::max(1, ring.views);
    const bool below = ring.mirror && view % 2 == 1;
    const Vec3 eye(ring.radius * std::cos(angle), ring.radius * std::sin(angle),
                   below ? -ring.height : ring.height);

    Vec3 forward = (ring.target - eye).normalized();
    Vec3 right = forward.cross(Vec3(0, 0, 1));
    if (right.norm() < 1e-9) right = Vec3(1, 0, 0);
    right.normalize();
    const Vec3 down = forward.cross(right);

    CameraView cam;
    cam.rotation.row(0) = right.transpose();
    cam.rotation.row(1) = down.transpose();
    cam.rotation.row(2) = forward.transpose();
    cam.translation = -cam.rotation * eye;
    cam.fx = ring.fx;
    cam.fy = ring.fy;
    cam.cx = ring.width / 2.0;
    cam.cy = ring.height_px / 2.0;
    cam.width = ring.width;
    cam.height = ring.height_px;
    return cam;
}

enum class PredicateClass { kContact, kDirection, kAdjacency, kOther };

PredicateClass classify_predicate(const std::string& predicate, const CorrectionParams& params) {
    if (params.contact_predicates.count(predicate)) return PredicateClass::kContact;
    if (params.directional_predicates.count(predicate)) return PredicateClass::kDirection;
    if (params.adjacency_predicates.count(predicate)) return PredicateClass::kAdjacency;
    return PredicateClass::kOther;
}

std::string class_name(PredicateClass c) {
    switch (c) {
        case PredicateClass::kContact: return "contact";
        case PredicateClass::kDirection: return "direction";
        case PredicateClass::kAdjacency: return "adjacency";
        case PredicateClass::kOther: return "other";
    }
    return "other";
}

}  // namespace

SynthOutput generate(const SynthSpec& spec, unsigned seed) {
    if (spec.objects.empty()) throw SpecError("spec has no objects");
    const int n_objects = static_cast<int>(spec.objects.size());
    const double separation = spec.feature_separation;
    if (separation <= 0.0) throw SpecError("feature_separation must be positive");
    const double noise = spec.feature_noise > 0.0 ? spec.feature_noise : separation / 10.0;

    SynthOutput out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);

    // Categories -> one-hot semantic features.
    std::vector<std::string> categories;
    for (const auto& obj : spec.objects) {
        if (obj.category.empty()) throw SpecError("every object needs a category");
        categories.push_back(obj.category);
        out.gt.categories.push_back(obj.category);
    }
    {
        std::set<std::string> distinct(categories.begin(), categories.end());
        if (static_cast<int>(distinct.size()) > spec.d_s) {
            throw SpecError("d_s too small for " + std::to_string(distinct.size()) + " categories");
        }
        int idx = 0;
        for (const auto& cat : distinct) {
            VecX v = VecX::Zero(spec.d_s);
            v[idx++] = 1.0;
            out.gt.embeddings[cat] = v;
        }
    }

    const std::vector<VecX> anchors = feature_anchors(n_objects, spec.d_i, separation);
    out.gt.object_instance = anchors;

    // Points and per-point features.
    for (int o = 0; o < n_objects; ++o) {
        const SynthObject& obj = spec.objects[static_cast<std::size_t>(o)];
        if (obj.points <= 0) throw SpecError("object " + std::to_string(o) + " has no points");
        // Surface sampling: the scene stands in for splat/scan points, which
        // live on object surfaces, and the feature field only receives
        // gradient through visible points.
        const double face_x = obj.size.y() * obj.size.z();
        const double face_y = obj.size.x() * obj.size.z();
        const double face_z = obj.size.x() * obj.size.y();
        const double face_total = face_x + face_y + face_z;
        for (int p = 0; p < obj.points; ++p) {
            Vec3 pos;
            if (obj.shape == "sphere") {
                do {
                    pos = Vec3(gauss(rng), gauss(rng), gauss(rng));
                } while (pos.squaredNorm() < 1e-12);
                pos = obj.center + obj.size.x() * pos.normalized();
            } else if (obj.shape == "box") {
                const double pick = 0.5 * (uni(rng) + 1.0) * face_total;
                const double u = uni(rng), v = uni(rng), side = uni(rng) >= 0 ? 0.5 : -0.5;
                if (pick < face_x) {
                    pos = Vec3(side * obj.size.x(), 0.5 * u * obj.size.y(), 0.5 * v * obj.size.z());
                } else if (pick < face_x + face_y) {
                    pos = Vec3(0.5 * u * obj.size.x(), side * obj.size.y(), 0.5 * v * obj.size.z());
                } else {
                    pos = Vec3(0.5 * u * obj.size.x(), 0.5 * v * obj.size.y(), side * obj.size.z());
                }
                pos += obj.center;
            } else {
                throw SpecError("unknown shape '" + obj.shape + "'");
            }
            out.scene.positions.push_back(pos);
            VecX f = anchors[static_cast<std::size_t>(o)];
            const double sigma = noise / std::sqrt(static_cast<double>(spec.d_i));
            for (int k = 0; k < spec.d_i; ++k) f[k] += sigma * gauss(rng);
            out.scene.instance_features.push_back(std::move(f));
            out.gt.point_labels.push_back(o);
        }
    }
    out.scene.labels.assign(out.scene.size(), kNoLabel);
    out.gt.scene_scale = scene_scale(out.scene);

    // Relation certification.
    CorrectionParams correction;
    correction.resolve_directional_defaults();
    std::vector<std::vector<Vec3>> object_points(static_cast<std::size_t>(n_objects));
    std::vector<Vec3> object_centroid(static_cast<std::size_t>(n_objects), Vec3::Zero());
    for (std::size_t i = 0; i < out.scene.size(); ++i) {
        object_points[static_cast<std::size_t>(out.gt.point_labels[i])].push_back(out.scene.positions[i]);
    }
    for (int o = 0; o < n_objects; ++o) {
        for (const Vec3& p : object_points[static_cast<std::size_t>(o)]) object_centroid[static_cast<std::size_t>(o)] += p;
        object_centroid[static_cast<std::size_t>(o)] /= static_cast<double>(object_points[static_cast<std::size_t>(o)].size());
    }

    auto geometric_check = [&](const GtRelation& r, PredicateClass cls) -> bool {
        const auto s = static_cast<std::size_t>(r.subject);
        const auto o = static_cast<std::size_t>(r.object);
        switch (cls) {
            case PredicateClass::kContact:
                return check_contact(object_points[s], object_points[o]);
            case PredicateClass::kDirection: {
                const DirectionVerdict dv =
                    check_direction(object_centroid[s], object_centroid[o], r.predicate, correction);
                return dv.keep && !dv.indeterminate;
            }
            case PredicateClass::kAdjacency:
                return check_adjacency(object_centroid[s], object_centroid[o], out.gt.scene_scale,
                                       correction.adjacency_fraction);
            case PredicateClass::kOther:
                return true;
        }
        return true;
    };
    auto check_ids = [&](const GtRelation& r, const std::string& what) {
        if (r.subject < 0 || r.subject >= n_objects || r.object < 0 || r.object >= n_objects ||
            r.subject == r.object) {
            throw SpecError(what + " relation has bad object indices");
        }
    };

    for (const GtRelation& r : spec.true_relations) {
        check_ids(r, "true");
        const PredicateClass cls = classify_predicate(r.predicate, correction);
        if (!geometric_check(r, cls)) {
            throw SpecError("declared-true relation <" + std::to_string(r.subject) + "|" + r.predicate + "|" +
                            std::to_string(r.object) + "> fails its " + class_name(cls) + " check");
        }
        out.gt.true_relations.push_back(r);
    }

    auto certify_false = [&](const GtRelation& r) -> std::string {
        const PredicateClass cls = classify_predicate(r.predicate, correction);
        if (cls == PredicateClass::kOther) {
            throw SpecError("planted-false relation <" + std::to_string(r.subject) + "|" + r.predicate + "|" +
                            std::to_string(r.object) + "> is not geometrically checkable");
        }
        if (geometric_check(r, cls)) {
            throw SpecError("planted-false relation <" + std::to_string(r.subject) + "|" + r.predicate + "|" +
                            std::to_string(r.object) + "> is actually geometrically valid");
        }
        return class_name(cls);
    };
    for (const GtRelation& r : spec.planted_false) {
        check_ids(r, "planted-false");
        out.gt.planted_false.push_back({r, certify_false(r)});
    }

    // Auto-planted corruption: scan predicate/pair combinations for
    // certifiably false relations until the requested share is reached.
    const int wanted = static_cast<int>(std::llround(spec.corruption.false_relation_fraction *
                                                     static_cast<double>(out.gt.true_relations.size())));
    if (wanted > 0) {
        std::set<std::tuple<int, std::string, int>> taken;
        for (const auto& r : out.gt.true_relations) taken.insert({r.subject, r.predicate, r.object});
        for (const auto& p : out.gt.planted_false) {
            taken.insert({p.relation.subject, p.relation.predicate, p.relation.object});
        }
        std::vector<std::string> predicates;
        for (const auto& p : correction.contact_predicates) predicates.push_back(p);
        for (const auto& p : correction.adjacency_predicates) predicates.push_back(p);
        for (const auto& [p, axis] : correction.directional_predicates) {
            (void)axis;
            predicates.push_back(p);
        }
        int planted = 0;
        for (const auto& pred : predicates) {
            for (int s = 0; s < n_objects && planted < wanted; ++s) {
                for (int o = 0; o < n_objects && planted < wanted; ++o) {
                    if (s == o) continue;
                    const GtRelation r{s, pred, o};
                    if (taken.count({s, pred, o})) continue;
                    const PredicateClass cls = classify_predicate(pred, correction);
                    if (geometric_check(r, cls)) continue;
                    out.gt.planted_false.push_back({r, class_name(cls)});
                    taken.insert({s, pred, o});
                    ++planted;
                }
            }
            if (planted >= wanted) break;
        }
        if (planted < wanted) {
            throw SpecError("could not plant " + std::to_string(wanted) + " false relations (found " +
                            std::to_string(planted) + ")");
        }
    }

    // Views: exact masks from the shared projector, mask indices shuffled
    // per view, features equal to the category one-hot.
    std::vector<std::uint64_t> view_seeds(static_cast<std::size_t>(std::max(0, spec.cameras.views)));
    for (auto& s : view_seeds) s = rng();
    out.bundles.resize(view_seeds.size());
    parallel_for(view_seeds.size(), [&](std::size_t v) {
        std::mt19937_64 view_rng(view_seeds[v]);
        ViewBundle bundle;
        bundle.view_id = static_cast<int>(v);
        bundle.camera = ring_camera(spec.cameras, static_cast<int>(v));

        const WinnerMap winner = render_winner_map(out.scene.positions, bundle.camera, spec.radius_px);

        std::vector<int> perm(static_cast<std::size_t>(n_objects));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), view_rng);

        bundle.full_segmentation = SegGrid(bundle.camera.height, bundle.camera.width, kBackground);
        struct Extent {
            int x0 = 1 << 30, y0 = 1 << 30, x1 = -1, y1 = -1;
            bool present() const { return x1 >= 0; }
        };
        std::vector<Extent> extent(static_cast<std::size_t>(n_objects));
        for (int y = 0; y < bundle.camera.height; ++y) {
            for (int x = 0; x < bundle.camera.width; ++x) {
                const std::int32_t who = winner.winner.at(y, x);
                if (who < 0) continue;
                const int obj = out.gt.point_labels[static_cast<std::size_t>(who)];
                bundle.full_segmentation.at(y, x) = perm[static_cast<std::size_t>(obj)];
                Extent& e = extent[static_cast<std::size_t>(obj)];
                e.x0 = std::min(e.x0, x);
                e.y0 = std::min(e.y0, y);
                e.x1 = std::max(e.x1, x);
                e.y1 = std::max(e.y1, y);
            }
        }

        std::uniform_real_distribution<double> conf_noise(0.0, spec.corruption.confidence_noise);
        for (int o = 0; o < n_objects; ++o) {
            const Extent& e = extent[static_cast<std::size_t>(o)];
            if (!e.present()) continue;
            const int mask = perm[static_cast<std::size_t>(o)];
            bundle.mask_features[mask] = out.gt.embeddings.at(categories[static_cast<std::size_t>(o)]);
            bundle.mask_confidences[mask] =
                spec.corruption.confidence_noise > 0.0 ? 1.0 - conf_noise(view_rng) : 1.0;
            Detection det;
            det.category = categories[static_cast<std::size_t>(o)];
            det.box = {static_cast<double>(e.x0), static_cast<double>(e.y0), static_cast<double>(e.x1 + 1),
                       static_cast<double>(e.y1 + 1)};
            det.mask_index = mask;
            bundle.detections.push_back(det);
            const std::string caption = spec.objects[static_cast<std::size_t>(o)].caption.empty()
                                            ? "a " + categories[static_cast<std::size_t>(o)]
                                            : spec.objects[static_cast<std::size_t>(o)].caption;
            bundle.captions[mask] = caption;
        }

        auto add_candidates = [&](const GtRelation& r) {
            if (!extent[static_cast<std::size_t>(r.subject)].present() ||
                !extent[static_cast<std::size_t>(r.object)].present()) {
                return;
            }
            RelationCandidate rc;
            rc.subject_mask = perm[static_cast<std::size_t>(r.subject)];
            rc.predicate = r.predicate;
            rc.object_mask = perm[static_cast<std::size_t>(r.object)];
            rc.subject_category = categories[static_cast<std::size_t>(r.subject)];
            rc.object_category = categories[static_cast<std::size_t>(r.object)];
            bundle.relation_candidates.push_back(rc);
        };
        for (const auto& r : out.gt.true_relations) add_candidates(r);
        for (const auto& p : out.gt.planted_false) add_candidates(p.relation);

        out.bundles[v] = std::move(bundle);
    });

    // Grounding queries with provably unique answers.
    if (spec.query_count > 0) {
        auto subject_has = [&](int obj, const std::string& pred, const std::string& other_cat) {
            for (const auto& r : out.gt.true_relations) {
                if (r.subject == obj && r.predicate == pred &&
                    categories[static_cast<std::size_t>(r.object)] == other_cat) {
                    return true;
                }
            }
            return false;
        };
        auto push_query = [&](GtQuery q) {
            if (static_cast<int>(out.gt.queries.size()) < spec.query_count) out.gt.queries.push_back(std::move(q));
        };

        // Single-constraint queries from each true relation with a unique answer.
        for (const auto& r : out.gt.true_relations) {
            const std::string& target_cat = categories[static_cast<std::size_t>(r.subject)];
            const std::string& other_cat = categories[static_cast<std::size_t>(r.object)];
            bool unique = true;
            for (int c = 0; c < n_objects && unique; ++c) {
                if (c == r.subject || categories[static_cast<std::size_t>(c)] != target_cat) continue;
                if (subject_has(c, r.predicate, other_cat)) unique = false;
            }
            if (!unique) continue;
            GtQuery q;
            q.text = "the " + target_cat + " " + r.predicate + " the " + other_cat;
            q.constraints.target_category = target_cat;
            q.constraints.relations = {{r.predicate, other_cat}};
            q.answer_object = r.subject;
            push_query(std::move(q));
        }

        // Two-constraint queries from objects with two distinct true relations.
        for (int s = 0; s < n_objects; ++s) {
            std::vector<std::pair<std::string, std::string>> rels;
            for (const auto& r : out.gt.true_relations) {
                if (r.subject != s) continue;
                rels.emplace_back(r.predicate, categories[static_cast<std::size_t>(r.object)]);
            }
            if (rels.size() < 2) continue;
            const auto& c1 = rels[0];
            const auto& c2 = rels[1];
            if (c1 == c2) continue;
            bool unique = true;
            for (int c = 0; c < n_objects && unique; ++c) {
                if (c == s || categories[static_cast<std::size_t>(c)] != categories[static_cast<std::size_t>(s)]) continue;
                if (subject_has(c, c1.first, c1.second) && subject_has(c, c2.first, c2.second)) unique = false;
            }
            if (!unique) continue;
            GtQuery q;
            q.text = "the " + categories[static_cast<std::size_t>(s)] + " " + c1.first + " the " + c1.second +
                     " and " + c2.first + " the " + c2.second;
            q.constraints.target_category = categories[static_cast<std::size_t>(s)];
            q.constraints.relations = {c1, c2};
            q.answer_object = s;
            push_query(std::move(q));
        }

        // Nearest-of-category queries for duplicated categories.
        std::map<std::string, std::vector<int>> by_cat;
        for (int o = 0; o < n_objects; ++o) by_cat[categories[static_cast<std::size_t>(o)]].push_back(o);
        for (const auto& [target_cat, members] : by_cat) {
            if (members.size() < 2) continue;
            for (const auto& [anchor_cat, anchors_obj] : by_cat) {
                if (anchor_cat == target_cat || anchors_obj.size() != 1) continue;
                const Vec3& a = object_centroid[static_cast<std::size_t>(anchors_obj[0])];
                int best = -1;
                double best_d = std::numeric_limits<double>::infinity(), second = best_d;
                for (int m : members) {
                    const double d = (object_centroid[static_cast<std::size_t>(m)] - a).norm();
                    if (d < best_d) {
                        second = best_d;
                        best_d = d;
                        best = m;
                    } else {
                        second = std::min(second, d);
                    }
                }
                if (best < 0 || second - best_d < 1e-9) continue;  // ambiguous layout
                GtQuery q;
                q.text = "the " + target_cat + " nearest to the " + anchor_cat;
                q.constraints.target_category = target_cat;
                q.constraints.superlative = Superlative{Superlative::Kind::kNearest, anchor_cat};
                q.answer_object = best;
                push_query(std::move(q));
            }
        }
    }

    return out;
}

// ---- spec / ground truth serialization ----

namespace {

ojson vec_to_json(const Vec3& v) { return ojson::array({v[0], v[1], v[2]}); }
ojson vecx_to_json(const VecX& v) {
    ojson a = ojson::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Vec3 vec_from_json(const njson& j) { return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()); }

ojson relation_to_json(const GtRelation& r) {
    ojson j;
    j["subject"] = r.subject;
    j["predicate"] = r.predicate;
    j["object"] = r.object;
    return j;
}

GtRelation relation_from_json(const njson& j) {
    return {j.at("subject").get<int>(), j.at("predicate").get<std::string>(), j.at("object").get<int>()};
}

ojson constraints_to_json(const QueryConstraints& c) {
    ojson j;
    j["target_category"] = c.target_category;
    ojson rels = ojson::array();
    for (const auto& [pred, cat] : c.relations) {
        ojson r;
        r["predicate"] = pred;
        r["category"] = cat;
        rels.push_back(r);
    }
    j["relations"] = rels;
    if (c.superlative) {
        j["superlative"]["kind"] = c.superlative->kind == Superlative::Kind::kNearest ? "nearest" : "farthest";
        j["superlative"]["anchor_category"] = c.superlative->anchor_category;
    }
    return j;
}

QueryConstraints constraints_from_json(const njson& j) {
    QueryConstraints c;
    c.target_category = j.at("target_category").get<std::string>();
    for (const auto& r : j.at("relations")) {
        c.relations.emplace_back(r.at("predicate").get<std::string>(), r.at("category").get<std::string>());
    }
    if (j.contains("superlative")) {
        Superlative s;
        s.kind = j.at("superlative").at("kind").get<std::string>() == "farthest" ? Superlative::Kind::kFarthest
                                                                                 : Superlative::Kind::kNearest;
        s.anchor_category = j.at("superlative").at("anchor_category").get<std::string>();
        c.superlative = s;
    }
    return c;
}

}  // namespace

SynthSpec load_synth_spec(const fs::path& path) {
    njson j;
    try {
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open " + path.string());
        in >> j;
    } catch (const njson::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    SynthSpec spec;
    try {
        for (const auto& jo : j.at("objects")) {
            SynthObject o;
            o.shape = jo.value("shape", "box");
            o.center = vec_from_json(jo.at("center"));
            o.size = vec_from_json(jo.at("size"));
            o.category = jo.at("category").get<std::string>();
            o.caption = jo.value("caption", "");
            o.points = jo.value("points", 500);
            spec.objects.push_back(std::move(o));
        }
        if (j.contains("cameras")) {
            const auto& jc = j.at("cameras");
            spec.cameras.views = jc.value("views", spec.cameras.views);
            spec.cameras.radius = jc.value("radius", spec.cameras.radius);
            spec.cameras.height = jc.value("height", spec.cameras.height);
            if (jc.contains("target")) spec.cameras.target = vec_from_json(jc.at("target"));
            spec.cameras.width = jc.value("width", spec.cameras.width);
            spec.cameras.height_px = jc.value("height_px", spec.cameras.height_px);
            spec.cameras.fx = jc.value("fx", spec.cameras.fx);
            spec.cameras.fy = jc.value("fy", spec.cameras.fy);
            spec.cameras.mirror = jc.value("mirror", spec.cameras.mirror);
        }
        if (j.contains("relations")) {
            for (const auto& jr : j.at("relations")) spec.true_relations.push_back(relation_from_json(jr));
        }
        if (j.contains("planted_false")) {
            for (const auto& jr : j.at("planted_false")) spec.planted_false.push_back(relation_from_json(jr));
        }
        if (j.contains("corruption")) {
            spec.corruption.false_relation_fraction = j.at("corruption").value("false_relation_fraction", 0.0);
            spec.corruption.confidence_noise = j.at("corruption").value("confidence_noise", 0.0);
        }
        spec.d_i = j.value("d_i", spec.d_i);
        spec.d_s = j.value("d_s", spec.d_s);
        spec.feature_separation = j.value("feature_separation", spec.feature_separation);
        spec.feature_noise = j.value("feature_noise", spec.feature_noise);
        spec.radius_px = j.value("radius_px", spec.radius_px);
        spec.query_count = j.value("query_count", spec.query_count);
    } catch (const njson::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return spec;
}

void save_synth_spec(const fs::path& path, const SynthSpec& spec) {
    ojson j;
    ojson objects = ojson::array();
    for (const auto& o : spec.objects) {
        ojson jo;
        jo["shape"] = o.shape;
        jo["center"] = vec_to_json(o.center);
        jo["size"] = vec_to_json(o.size);
        jo["category"] = o.category;
        jo["caption"] = o.caption;
        jo["points"] = o.points;
        objects.push_back(jo);
    }
    j["objects"] = objects;
    j["cameras"]["views"] = spec.cameras.views;
    j["cameras"]["radius"] = spec.cameras.radius;
    j["cameras"]["height"] = spec.cameras.height;
    j["cameras"]["target"] = vec_to_json(spec.cameras.target);
    j["cameras"]["width"] = spec.cameras.width;
    j["cameras"]["height_px"] = spec.cameras.height_px;
    j["cameras"]["fx"] = spec.cameras.fx;
    j["cameras"]["fy"] = spec.cameras.fy;
    j["cameras"]["mirror"] = spec.cameras.mirror;
    ojson rels = ojson::array();
    for (const auto& r : spec.true_relations) rels.push_back(relation_to_json(r));
    j["relations"] = rels;
    ojson planted = ojson::array();
    for (const auto& r : spec.planted_false) planted.push_back(relation_to_json(r));
    j["planted_false"] = planted;
    j["corruption"]["false_relation_fraction"] = spec.corruption.false_relation_fraction;
    j["corruption"]["confidence_noise"] = spec.corruption.confidence_noise;
    j["d_i"] = spec.d_i;
    j["d_s"] = spec.d_s;
    j["feature_separation"] = spec.feature_separation;
    j["feature_noise"] = spec.feature_noise;
    j["radius_px"] = spec.radius_px;
    j["query_count"] = spec.query_count;
    atomic_write_file(path, j.dump(2) + "\n");
}

void save_synth_output(const fs::path& dir, const SynthOutput& output) {
    fs::create_directories(dir);
    save_scene(dir / "scene.bin", output.scene);
    for (const auto& bundle : output.bundles) {
        char name[32];
        std::snprintf(name, sizeof(name), "view_%03d", bundle.view_id);
        save_bundle(dir / "views" / name, bundle);
    }
    save_labels(dir / "gt_labels.bin", output.gt.point_labels);
    save_embeddings_json(dir / "embeddings.json", output.gt.embeddings);

    ojson j;
    j["point_labels_file"] = "gt_labels.bin";
    j["categories"] = output.gt.categories;
    ojson rels = ojson::array();
    for (const auto& r : output.gt.true_relations) rels.push_back(relation_to_json(r));
    j["true_relations"] = rels;
    ojson planted = ojson::array();
    for (const auto& p : output.gt.planted_false) {
        ojson jp = relation_to_json(p.relation);
        jp["violated"] = p.violated;
        planted.push_back(jp);
    }
    j["planted_false"] = planted;
    ojson queries = ojson::array();
    for (const auto& q : output.gt.queries) {
        ojson jq;
        jq["text"] = q.text;
        jq["constraints"] = constraints_to_json(q.constraints);
        jq["answer_object"] = q.answer_object;
        queries.push_back(jq);
    }
    j["queries"] = queries;
    ojson inst = ojson::array();
    for (const auto& f : output.gt.object_instance) inst.push_back(vecx_to_json(f));
    j["object_instance"] = inst;
    j["scene_scale"] = output.gt.scene_scale;
    atomic_write_file(dir / "gt.json", j.dump(2) + "\n");
}

GroundTruth load_ground_truth(const fs::path& dir) {
    njson j;
    try {
        std::ifstream in(dir / "gt.json");
        if (!in) throw ParseError("cannot open " + (dir / "gt.json").string());
        in >> j;
    } catch (const njson::exception& e) {
        throw ParseError((dir / "gt.json").string() + ": " + e.what());
    }
    GroundTruth gt;
    try {
        gt.point_labels = load_labels(dir / j.at("point_labels_file").get<std::string>());
        gt.categories = j.at("categories").get<std::vector<std::string>>();
        for (const auto& jr : j.at("true_relations")) gt.true_relations.push_back(relation_from_json(jr));
        for (const auto& jp : j.at("planted_false")) {
            gt.planted_false.push_back({relation_from_json(jp), jp.at("violated").get<std::string>()});
        }
        for (const auto& jq : j.at("queries")) {
            GtQuery q;
            q.text = jq.at("text").get<std::string>();
            q.constraints = constraints_from_json(jq.at("constraints"));
            q.answer_object = jq.at("answer_object").get<int>();
            gt.queries.push_back(std::move(q));
        }
        for (const auto& jf : j.at("object_instance")) {
            VecX v(jf.size());
            for (std::size_t k = 0; k < jf.size(); ++k) v[k] = jf.at(k).get<double>();
            gt.object_instance.push_back(std::move(v));
        }
        gt.scene_scale = j.at("scene_scale").get<double>();
    } catch (const njson::exception& e) {
        throw ParseError((dir / "gt.json").string() + ": " + e.what());
    }
    gt.embeddings = load_embeddings_json(dir / "embeddings.json");
    return gt;
}

SynthSpec default_scene_spec(int n_objects, int points_per_object) {
    if (n_objects < 1) throw SpecError("need at least one object");
    static const char* kCategories[] = {"cup", "table", "chair", "lamp", "book", "plant", "box", "ball"};
    const int n_cats = static_cast<int>(std::size(kCategories));

    SynthSpec spec;
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_objects))));
    const double spacing = 4.0;
    const double offset = (cols - 1) * spacing / 2.0;
    for (int i = 0; i < n_objects; ++i) {
        SynthObject obj;
        obj.shape = i % 3 == 2 ? "sphere" : "box";
        obj.center = Vec3((i % cols) * spacing - offset, (i / cols) * spacing - offset, 0.5);
        obj.size = obj.shape == "sphere" ? Vec3(0.5, 0.5, 0.5) : Vec3(1.0, 1.0, 1.0);
        obj.category = kCategories[i % n_cats];
        obj.caption = "a " + obj.category + " numbered " + std::to_string(i);
        obj.points = points_per_object;
        spec.objects.push_back(std::move(obj));
    }
    const double extent = offset * std::sqrt(2.0) + 2.0;
    spec.cameras.radius = std::max(8.0, 2.4 * extent);
    spec.cameras.height = 0.8 * spec.cameras.radius;
    spec.cameras.target = Vec3(0, 0, 0.5);
    return spec;
}

}  // namespace gsgraph
