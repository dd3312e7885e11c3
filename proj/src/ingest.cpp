#include "gsgraph/ingest.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>

#include "gsgraph/errors.hpp"
#include "gsgraph/geometry.hpp"
#include "gsgraph/util.hpp"

namespace gsgraph {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using njson = nlohmann::json;

int match_mask_index(const MaskGrid& foreground, const SegGrid& full_segmentation) {
    if (!foreground.same_shape(full_segmentation.height, full_segmentation.width)) {
        throw Error("match_mask_index: grid shapes differ");
    }

    std::size_t fg_count = 0;
    std::map<std::int32_t, std::size_t> inter;  // mask -> |fg & mask|
    std::map<std::int32_t, std::size_t> area;   // mask -> |mask|
    for (std::size_t i = 0; i < foreground.data.size(); ++i) {
        const std::int32_t m = full_segmentation.data[i];
        if (m != kBackground) ++area[m];
        if (foreground.data[i]) {
            ++fg_count;
            if (m != kBackground) ++inter[m];
        }
    }
    if (fg_count == 0) throw EmptyMaskError("match_mask_index: empty foreground mask");

    double best_iou = 0.0;
    int best = -1;
    for (const auto& [mask, a] : area) {
        const std::size_t is = inter.count(mask) ? inter.at(mask) : 0;
        const double iou = static_cast<double>(is) / static_cast<double>(fg_count + a - is);
        if (iou > best_iou) {  // strict: ties keep the lowest index seen first
            best_iou = iou;
            best = mask;
        }
    }
    if (best < 0 || best_iou == 0.0) throw NoOverlapError("match_mask_index: no mask overlaps the foreground");
    return best;
}

std::vector<std::pair<int, int>> candidate_pairs(const std::vector<Detection>& detections,
                                                 const std::map<int, VecX>& mask_features,
                                                 double theta) {
    if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("candidate_pairs: theta must be in (0, 1)");

    auto cosine = [&](int a, int b) -> double {
        auto ia = mask_features.find(a);
        auto ib = mask_features.find(b);
        if (ia == mask_features.end() || ib == mask_features.end()) return -1.0;
        const double na = ia->second.norm(), nb = ib->second.norm();
        if (na == 0.0 || nb == 0.0) return -1.0;
        return ia->second.dot(ib->second) / (na * nb);
    };

    std::vector<std::pair<int, int>> out;
    for (std::size_t i = 0; i < detections.size(); ++i) {
        for (std::size_t j = i + 1; j < detections.size(); ++j) {
            const Detection& a = detections[i];
            const Detection& b = detections[j];
            const bool semantic = cosine(a.mask_index, b.mask_index) > theta;
            const bool spatial = geom::boxes_overlap_area(a.box.x0, a.box.y0, a.box.x1, a.box.y1,
                                                          b.box.x0, b.box.y0, b.box.x1, b.box.y1);
            if (semantic || spatial) out.emplace_back(static_cast<int>(i), static_cast<int>(j));
        }
    }
    return out;
}

// ---- binary helpers ----

namespace {

constexpr char kSceneMagic[8] = {'G', 'S', 'G', 'S', 'C', 'E', 'N', 'E'};
constexpr std::uint32_t kSceneVersion = 1;
constexpr std::uint32_t kFlagStability = 1u;

template <typename T>
void put(std::string& buf, T v) {
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf.append(raw, sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& off, const std::string& what) {
    if (off + sizeof(T) > buf.size()) throw ParseError("truncated file while reading " + what);
    T v;
    std::memcpy(&v, buf.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void abort_on_violations(const std::vector<Violation>& v, const std::string& what) {
    if (v.empty()) return;
    std::string msg = what + " failed validation:";
    for (const auto& item : v) msg += "\n  " + item.str();
    throw ValidationError(msg);
}

}  // namespace

ScenePoints load_scene(const fs::path& path) {
    const std::string buf = read_file(path);
    std::size_t off = 0;
    if (buf.size() < sizeof(kSceneMagic) || std::memcmp(buf.data(), kSceneMagic, sizeof(kSceneMagic)) != 0) {
        throw ParseError(path.string() + ": not a scene file");
    }
    off = sizeof(kSceneMagic);
    const auto version = take<std::uint32_t>(buf, off, "version");
    if (version != kSceneVersion) throw ParseError(path.string() + ": unsupported scene version");
    const auto count = take<std::uint64_t>(buf, off, "point count");
    const auto dim = take<std::uint32_t>(buf, off, "feature dim");
    const auto flags = take<std::uint32_t>(buf, off, "flags");

    ScenePoints scene;
    scene.positions.reserve(count);
    scene.instance_features.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        Vec3 p;
        for (int k = 0; k < 3; ++k) p[k] = take<float>(buf, off, "position");
        scene.positions.push_back(p);
    }
    for (std::uint64_t i = 0; i < count; ++i) {
        VecX f(dim);
        for (std::uint32_t k = 0; k < dim; ++k) f[k] = take<float>(buf, off, "feature");
        scene.instance_features.push_back(std::move(f));
    }
    if (flags & kFlagStability) {
        scene.stability.reserve(count);
        for (std::uint64_t i = 0; i < count; ++i) scene.stability.push_back(take<float>(buf, off, "stability"));
    }
    if (off != buf.size()) throw ParseError(path.string() + ": trailing bytes");
    scene.labels.assign(count, kNoLabel);

    abort_on_violations(validate_scene(scene), path.string());
    return scene;
}

void save_scene(const fs::path& path, const ScenePoints& points) {
    abort_on_violations(validate_scene(points), "scene to save");
    std::string buf;
    buf.append(kSceneMagic, sizeof(kSceneMagic));
    put<std::uint32_t>(buf, kSceneVersion);
    put<std::uint64_t>(buf, points.size());
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(points.feature_dim()));
    put<std::uint32_t>(buf, points.stability.empty() ? 0u : kFlagStability);
    for (const Vec3& p : points.positions) {
        for (int k = 0; k < 3; ++k) put<float>(buf, static_cast<float>(p[k]));
    }
    for (const VecX& f : points.instance_features) {
        for (Eigen::Index k = 0; k < f.size(); ++k) put<float>(buf, static_cast<float>(f[k]));
    }
    for (double s : points.stability) put<float>(buf, static_cast<float>(s));
    atomic_write_file(path, buf);
}

// ---- view bundles ----

namespace {

ojson camera_to_json(const CameraView& cam) {
    ojson j;
    ojson rot = ojson::array();
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) rot.push_back(cam.rotation(r, c));
    }
    j["rotation"] = rot;
    j["translation"] = {cam.translation[0], cam.translation[1], cam.translation[2]};
    j["fx"] = cam.fx;
    j["fy"] = cam.fy;
    j["cx"] = cam.cx;
    j["cy"] = cam.cy;
    j["width"] = cam.width;
    j["height"] = cam.height;
    return j;
}

CameraView camera_from_json(const njson& j) {
    CameraView cam;
    const auto& rot = j.at("rotation");
    if (rot.size() != 9) throw ParseError("camera rotation must have 9 entries");
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) cam.rotation(r, c) = rot.at(r * 3 + c).get<double>();
    }
    const auto& t = j.at("translation");
    for (int k = 0; k < 3; ++k) cam.translation[k] = t.at(k).get<double>();
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    return cam;
}

ViewBundle load_bundle(const fs::path& view_dir) {
    njson manifest;
    try {
        std::ifstream in(view_dir / "manifest.json");
        if (!in) throw ParseError("cannot open " + (view_dir / "manifest.json").string());
        in >> manifest;
    } catch (const njson::exception& e) {
        throw ParseError((view_dir / "manifest.json").string() + ": " + e.what());
    }

    ViewBundle bundle;
    try {
        bundle.view_id = manifest.at("view_id").get<int>();
        bundle.camera = camera_from_json(manifest.at("camera"));
        const int d_s = manifest.at("d_s").get<int>();
        const std::vector<int> mask_ids = manifest.at("mask_ids").get<std::vector<int>>();

        const std::string segbuf = read_file(view_dir / "segmentation.bin");
        const std::size_t px = static_cast<std::size_t>(bundle.camera.height) * bundle.camera.width;
        if (segbuf.size() != px * sizeof(std::int32_t)) {
            throw ParseError((view_dir / "segmentation.bin").string() + ": size does not match camera dims");
        }
        bundle.full_segmentation = SegGrid(bundle.camera.height, bundle.camera.width);
        std::memcpy(bundle.full_segmentation.data.data(), segbuf.data(), segbuf.size());

        const std::string featbuf = read_file(view_dir / "mask_features.bin");
        if (featbuf.size() != mask_ids.size() * static_cast<std::size_t>(d_s) * sizeof(float)) {
            throw ParseError((view_dir / "mask_features.bin").string() + ": size does not match mask_ids × d_s");
        }
        for (std::size_t r = 0; r < mask_ids.size(); ++r) {
            VecX f(d_s);
            for (int c = 0; c < d_s; ++c) {
                float v;
                std::memcpy(&v, featbuf.data() + (r * d_s + c) * sizeof(float), sizeof(float));
                f[c] = v;
            }
            bundle.mask_features[mask_ids[r]] = std::move(f);
        }

        for (const auto& [key, val] : manifest.at("mask_confidences").items()) {
            bundle.mask_confidences[std::stoi(key)] = val.get<double>();
        }
        for (const auto& d : manifest.at("detections")) {
            Detection det;
            det.category = d.at("category").get<std::string>();
            const auto& b = d.at("box");
            det.box = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
            det.mask_index = d.at("mask_index").get<int>();
            bundle.detections.push_back(std::move(det));
        }
        for (const auto& [key, val] : manifest.at("captions").items()) {
            bundle.captions[std::stoi(key)] = val.get<std::string>();
        }
        for (const auto& r : manifest.at("relations")) {
            RelationCandidate rc;
            rc.subject_mask = r.at("subject_mask").get<int>();
            rc.predicate = r.at("predicate").get<std::string>();
            rc.object_mask = r.at("object_mask").get<int>();
            rc.subject_category = r.at("subject_category").get<std::string>();
            rc.object_category = r.at("object_category").get<std::string>();
            bundle.relation_candidates.push_back(std::move(rc));
        }
    } catch (const njson::exception& e) {
        throw ParseError(view_dir.string() + ": " + e.what());
    }

    abort_on_violations(validate_bundle(bundle), view_dir.string());
    return bundle;
}

}  // namespace

std::vector<ViewBundle> load_views(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ParseError(dir.string() + " is not a directory");
    std::vector<fs::path> view_dirs;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) {
            view_dirs.push_back(entry.path());
        }
    }
    std::sort(view_dirs.begin(), view_dirs.end());
    if (view_dirs.empty()) throw ParseError(dir.string() + " contains no view directories");

    std::vector<ViewBundle> bundles(view_dirs.size());
    std::vector<std::exception_ptr> errors(view_dirs.size());
    parallel_for(view_dirs.size(), [&](std::size_t i) {
        try {
            bundles[i] = load_bundle(view_dirs[i]);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    });
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    // Merge deterministically by view id regardless of directory naming.
    std::sort(bundles.begin(), bundles.end(),
              [](const ViewBundle& a, const ViewBundle& b) { return a.view_id < b.view_id; });
    for (std::size_t i = 1; i < bundles.size(); ++i) {
        if (bundles[i].view_id == bundles[i - 1].view_id) {
            throw ValidationError("duplicate view_id " + std::to_string(bundles[i].view_id));
        }
    }
    return bundles;
}

void save_bundle(const fs::path& view_dir, const ViewBundle& bundle) {
    abort_on_violations(validate_bundle(bundle), "bundle to save");
    fs::create_directories(view_dir);

    ojson manifest;
    manifest["view_id"] = bundle.view_id;
    manifest["camera"] = camera_to_json(bundle.camera);
    manifest["d_s"] = bundle.semantic_dim();
    ojson mask_ids = ojson::array();
    for (const auto& [id, f] : bundle.mask_features) {
        (void)f;
        mask_ids.push_back(id);
    }
    manifest["mask_ids"] = mask_ids;
    ojson conf = ojson::object();
    for (const auto& [id, c] : bundle.mask_confidences) conf[std::to_string(id)] = c;
    manifest["mask_confidences"] = conf;
    ojson dets = ojson::array();
    for (const auto& d : bundle.detections) {
        ojson jd;
        jd["category"] = d.category;
        jd["box"] = {d.box.x0, d.box.y0, d.box.x1, d.box.y1};
        jd["mask_index"] = d.mask_index;
        dets.push_back(jd);
    }
    manifest["detections"] = dets;
    ojson caps = ojson::object();
    for (const auto& [id, text] : bundle.captions) caps[std::to_string(id)] = text;
    manifest["captions"] = caps;
    ojson rels = ojson::array();
    for (const auto& r : bundle.relation_candidates) {
        ojson jr;
        jr["subject_mask"] = r.subject_mask;
        jr["predicate"] = r.predicate;
        jr["object_mask"] = r.object_mask;
        jr["subject_category"] = r.subject_category;
        jr["object_category"] = r.object_category;
        rels.push_back(jr);
    }
    manifest["relations"] = rels;
    atomic_write_file(view_dir / "manifest.json", manifest.dump(2) + "\n");

    std::string segbuf(bundle.full_segmentation.data.size() * sizeof(std::int32_t), '\0');
    std::memcpy(segbuf.data(), bundle.full_segmentation.data.data(), segbuf.size());
    atomic_write_file(view_dir / "segmentation.bin", segbuf);

    std::string featbuf;
    for (const auto& [id, f] : bundle.mask_features) {
        (void)id;
        for (Eigen::Index k = 0; k < f.size(); ++k) put<float>(featbuf, static_cast<float>(f[k]));
    }
    atomic_write_file(view_dir / "mask_features.bin", featbuf);
}

// ---- labels ----

std::vector<int> load_labels(const fs::path& path) {
    const std::string buf = read_file(path);
    if (buf.size() % sizeof(std::int32_t) != 0) throw ParseError(path.string() + ": size not a multiple of 4");
    std::vector<int> labels(buf.size() / sizeof(std::int32_t));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        std::int32_t v;
        std::memcpy(&v, buf.data() + i * sizeof(std::int32_t), sizeof(std::int32_t));
        labels[i] = v;
    }
    return labels;
}

void save_labels(const fs::path& path, const std::vector<int>& labels) {
    std::string buf;
    buf.reserve(labels.size() * sizeof(std::int32_t));
    for (int l : labels) put<std::int32_t>(buf, static_cast<std::int32_t>(l));
    atomic_write_file(path, buf);
}

// ---- scene graph json ----

std::string graph_to_json(const SceneGraph& graph) {
    ojson j;
    ojson nodes = ojson::array();
    for (const auto& n : graph.nodes) {
        ojson jn;
        jn["id"] = n.cluster_id;
        jn["category"] = n.category;
        jn["attributes"] = n.attributes;
        jn["centroid"] = {n.centroid[0], n.centroid[1], n.centroid[2]};
        ojson feat = ojson::array();
        for (Eigen::Index k = 0; k < n.semantic_feature.size(); ++k) feat.push_back(n.semantic_feature[k]);
        jn["feature"] = feat;
        nodes.push_back(jn);
    }
    j["nodes"] = nodes;
    ojson edges = ojson::array();
    for (const auto& e : graph.edges) {
        ojson je;
        je["subject"] = e.subject;
        je["predicate"] = e.predicate;
        je["object"] = e.object;
        je["support"] = e.support_views;
        je["verified"] = e.verified;
        je["verdict"] = to_string(e.verdict);
        je["indeterminate_direction"] = e.indeterminate_direction;
        edges.push_back(je);
    }
    j["edges"] = edges;
    return j.dump(2) + "\n";
}

void save_graph_json(const fs::path& path, const SceneGraph& graph) {
    atomic_write_file(path, graph_to_json(graph));
}

SceneGraph load_graph_json(const fs::path& path) {
    njson j;
    try {
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open " + path.string());
        in >> j;
    } catch (const njson::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }

    SceneGraph graph;
    try {
        for (const auto& jn : j.at("nodes")) {
            GraphNode n;
            n.cluster_id = jn.at("id").get<int>();
            n.category = jn.at("category").get<std::string>();
            n.attributes = jn.at("attributes").get<std::vector<std::string>>();
            for (int k = 0; k < 3; ++k) n.centroid[k] = jn.at("centroid").at(k).get<double>();
            const auto& feat = jn.at("feature");
            n.semantic_feature = VecX(feat.size());
            for (std::size_t k = 0; k < feat.size(); ++k) n.semantic_feature[k] = feat.at(k).get<double>();
            graph.nodes.push_back(std::move(n));
        }
        for (const auto& je : j.at("edges")) {
            GraphEdge e;
            e.subject = je.at("subject").get<int>();
            e.predicate = je.at("predicate").get<std::string>();
            e.object = je.at("object").get<int>();
            e.support_views = je.at("support").get<int>();
            e.verified = je.at("verified").get<bool>();
            const auto v = verdict_from_string(je.at("verdict").get<std::string>());
            if (!v) throw ParseError("unknown verdict in " + path.string());
            e.verdict = *v;
            e.indeterminate_direction = je.value("indeterminate_direction", false);
            graph.edges.push_back(std::move(e));
        }
    } catch (const njson::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    abort_on_violations(validate_graph(graph), path.string());
    return graph;
}

// ---- embeddings table ----

std::map<std::string, VecX> load_embeddings_json(const fs::path& path) {
    njson j;
    try {
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open " + path.string());
        in >> j;
    } catch (const njson::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    std::map<std::string, VecX> table;
    for (const auto& [key, val] : j.items()) {
        VecX v(val.size());
        for (std::size_t k = 0; k < val.size(); ++k) v[k] = val.at(k).get<double>();
        table[key] = std::move(v);
    }
    return table;
}

void save_embeddings_json(const fs::path& path, const std::map<std::string, VecX>& table) {
    ojson j = ojson::object();
    for (const auto& [key, v] : table) {
        ojson arr = ojson::array();
        for (Eigen::Index k = 0; k < v.size(); ++k) arr.push_back(v[k]);
        j[key] = arr;
    }
    atomic_write_file(path, j.dump(2) + "\n");
}

}  // namespace gsgraph
