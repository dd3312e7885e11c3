#include "gsgraph/cluster.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include "gsgraph/errors.hpp"
#include "gsgraph/util.hpp"

namespace gsgraph {

namespace {

// Reach multiplier for the global merge pass over CF-tree subclusters:
// subclusters whose centroids chain within this many thresholds collapse
// into one cluster. Twice the control-point spacing (the threshold is half
// the median spacing): contiguous structures chain, separated ones do not.
constexpr double kMergeReach = 4.0;

double percentile(std::vector<double> values, double q) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t idx = std::min(values.size() - 1,
                                     static_cast<std::size_t>(std::ceil(q * values.size())) - (q > 0.0 ? 1 : 0));
    return values[idx];
}

double lower_median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    const std::size_t mid = (values.size() - 1) / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    return values[mid];
}

}  // namespace

std::vector<int> sample_fps(std::span<const int> candidates, std::span<const Vec3> positions, int m) {
    const std::size_t n = candidates.size();
    if (m < 0 || static_cast<std::size_t>(m) > n) {
        throw TooFewPointsError("sample_fps: requested " + std::to_string(m) + " of " + std::to_string(n));
    }
    if (m == 0) return {};

    Vec3 centroid = Vec3::Zero();
    for (int idx : candidates) centroid += positions[static_cast<std::size_t>(idx)];
    centroid /= static_cast<double>(n);

    // Seed with the candidate farthest from the centroid.
    std::size_t seed = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = (positions[static_cast<std::size_t>(candidates[i])] - centroid).squaredNorm();
        if (d > best) {
            best = d;
            seed = i;
        }
    }

    std::vector<int> picked;
    picked.reserve(static_cast<std::size_t>(m));
    std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
    std::size_t current = seed;
    for (int step = 0; step < m; ++step) {
        picked.push_back(candidates[current]);
        const Vec3& p = positions[static_cast<std::size_t>(candidates[current])];
        std::size_t next = 0;
        double far = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = (positions[static_cast<std::size_t>(candidates[i])] - p).squaredNorm();
            if (d < min_dist[i]) min_dist[i] = d;
            if (min_dist[i] > far) {
                far = min_dist[i];
                next = i;
            }
        }
        current = next;
    }
    return picked;
}

namespace {

struct Descriptor {
    static constexpr int kBins = 5;
    std::array<double, 2 * kBins> h{};

    double distance(const Descriptor& o) const {
        double s = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i) s += (h[i] - o.h[i]) * (h[i] - o.h[i]);
        return std::sqrt(s);
    }
};

int bin_of(double v) {
    v = std::clamp(v, 0.0, 1.0);
    return std::min(Descriptor::kBins - 1, static_cast<int>(v * Descriptor::kBins));
}

}  // namespace

std::vector<int> sample_fpfh(std::span<const int> candidates, std::span<const Vec3> positions, int m,
                             int k_neighbors) {
    const std::size_t n = candidates.size();
    if (m < 0 || static_cast<std::size_t>(m) > n) {
        throw TooFewPointsError("sample_fpfh: requested " + std::to_string(m) + " of " + std::to_string(n));
    }
    if (m == 0) return {};
    if (k_neighbors < 3) throw Error("sample_fpfh: k_neighbors must be >= 3");
    const int k = std::min<int>(k_neighbors, static_cast<int>(n) - 1);
    if (k < 1) return {candidates.begin(), candidates.begin() + m};

    // k nearest neighbors within the candidate set, brute force per point.
    std::vector<std::vector<int>> neighbors(n);
    parallel_for(n, [&](std::size_t i) {
        const Vec3& p = positions[static_cast<std::size_t>(candidates[i])];
        std::vector<std::pair<double, int>> dist;
        dist.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            dist.emplace_back((positions[static_cast<std::size_t>(candidates[j])] - p).squaredNorm(),
                              static_cast<int>(j));
        }
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        neighbors[i].reserve(static_cast<std::size_t>(k));
        for (int t = 0; t < k; ++t) neighbors[i].push_back(dist[static_cast<std::size_t>(t)].second);
    });

    std::vector<Vec3> normals(n);
    std::vector<std::uint8_t> degenerate(n, 0);
    parallel_for(n, [&](std::size_t i) {
        Vec3 mean = positions[static_cast<std::size_t>(candidates[i])];
        for (int j : neighbors[i]) mean += positions[static_cast<std::size_t>(candidates[j])];
        mean /= static_cast<double>(neighbors[i].size() + 1);
        Mat3 cov = Mat3::Zero();
        auto add = [&](const Vec3& p) {
            const Vec3 d = p - mean;
            cov += d * d.transpose();
        };
        add(positions[static_cast<std::size_t>(candidates[i])]);
        for (int j : neighbors[i]) add(positions[static_cast<std::size_t>(candidates[j])]);
        if (cov.trace() < 1e-20) {
            degenerate[i] = 1;
            return;
        }
        Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
        normals[i] = eig.eigenvectors().col(0);
    });
    for (std::size_t i = 0; i < n; ++i) {
        if (degenerate[i]) {
            throw DegenerateNeighborhoodError("sample_fpfh: coincident neighborhood around candidate " +
                                              std::to_string(candidates[i]));
        }
    }

    std::vector<Descriptor> desc(n);
    parallel_for(n, [&](std::size_t i) {
        const Vec3& p = positions[static_cast<std::size_t>(candidates[i])];
        const Vec3& np = normals[i];
        int pairs = 0;
        for (int j : neighbors[i]) {
            Vec3 d = positions[static_cast<std::size_t>(candidates[j])] - p;
            const double len = d.norm();
            if (len < 1e-12) continue;
            d /= len;
            desc[i].h[static_cast<std::size_t>(bin_of(std::abs(np.dot(normals[static_cast<std::size_t>(j)]))))] +=
                1.0;
            desc[i].h[static_cast<std::size_t>(Descriptor::kBins + bin_of(std::abs(np.dot(d))))] += 1.0;
            ++pairs;
        }
        if (pairs == 0) {
            degenerate[i] = 1;
            return;
        }
        for (double& v : desc[i].h) v /= pairs;
    });
    for (std::size_t i = 0; i < n; ++i) {
        if (degenerate[i]) {
            throw DegenerateNeighborhoodError("sample_fpfh: no usable neighbor pairs around candidate " +
                                              std::to_string(candidates[i]));
        }
    }

    Descriptor mean;
    for (const auto& d : desc) {
        for (std::size_t t = 0; t < mean.h.size(); ++t) mean.h[t] += d.h[t];
    }
    for (double& v : mean.h) v /= static_cast<double>(n);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i) score[i] = desc[i].distance(mean);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (score[a] != score[b]) return score[a] > score[b];
        return a < b;
    });

    std::vector<int> picked(static_cast<std::size_t>(m));
    for (int t = 0; t < m; ++t) picked[static_cast<std::size_t>(t)] = candidates[order[static_cast<std::size_t>(t)]];
    return picked;
}

// ---- BIRCH ----

namespace {

struct CFEntry {
    double n = 0;
    VecX ls;
    double ss = 0;
    int id = -1;  // creation order, stable across splits

    VecX centroid() const { return ls / n; }

    void absorb(const VecX& x) {
        n += 1;
        ls += x;
        ss += x.squaredNorm();
    }

    double radius2_if_absorbed(const VecX& x) const {
        const double nn = n + 1;
        const VecX nls = ls + x;
        const double nss = ss + x.squaredNorm();
        return std::max(0.0, nss / nn - (nls / nn).squaredNorm());
    }

    void merge(const CFEntry& o) {
        n += o.n;
        ls += o.ls;
        ss += o.ss;
    }
};

struct CFNode {
    bool leaf = true;
    std::vector<CFEntry> entries;                   // leaf: subclusters; internal: child summaries
    std::vector<std::unique_ptr<CFNode>> children;  // internal only, parallel to entries
};

class CFTree {
public:
    CFTree(double threshold, int branching) : threshold2_(threshold * threshold), branching_(std::max(2, branching)) {}

    // Returns the id of the leaf entry that absorbed x.
    int insert(const VecX& x) {
        if (!root_) {
            root_ = std::make_unique<CFNode>();
            root_->entries.push_back(new_entry(x));
            return root_->entries.back().id;
        }
        auto [entry_id, split] = insert_into(*root_, x);
        if (split.second) {
            auto new_root = std::make_unique<CFNode>();
            new_root->leaf = false;
            new_root->entries.push_back(summarize(*split.first));
            new_root->children.push_back(std::move(split.first));
            new_root->entries.push_back(summarize(*split.second));
            new_root->children.push_back(std::move(split.second));
            root_ = std::move(new_root);
        }
        return entry_id;
    }

    std::vector<CFEntry> leaf_entries() const {
        std::vector<CFEntry> out;
        collect(root_.get(), out);
        std::sort(out.begin(), out.end(), [](const CFEntry& a, const CFEntry& b) { return a.id < b.id; });
        return out;
    }

private:
    using SplitPair = std::pair<std::unique_ptr<CFNode>, std::unique_ptr<CFNode>>;

    CFEntry new_entry(const VecX& x) {
        CFEntry e;
        e.n = 1;
        e.ls = x;
        e.ss = x.squaredNorm();
        e.id = next_id_++;
        return e;
    }

    static CFEntry summarize(const CFNode& node) {
        CFEntry s;
        s.n = 0;
        s.ls = VecX::Zero(node.entries.front().ls.size());
        s.ss = 0;
        s.id = node.entries.front().id;
        for (const auto& e : node.entries) s.merge(e);
        return s;
    }

    static std::size_t nearest_index(const std::vector<CFEntry>& entries, const VecX& x) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const double d = (entries[i].centroid() - x).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        return best;
    }

    // Returns (absorbing entry id, split result). split.second is set when
    // this node had to split; the caller replaces it with the two halves.
    std::pair<int, SplitPair> insert_into(CFNode& node, const VecX& x) {
        if (node.leaf) {
            const std::size_t i = node.entries.empty() ? 0 : nearest_index(node.entries, x);
            if (!node.entries.empty() && node.entries[i].radius2_if_absorbed(x) <= threshold2_) {
                node.entries[i].absorb(x);
                return {node.entries[i].id, SplitPair{}};
            }
            node.entries.push_back(new_entry(x));
            const int id = node.entries.back().id;
            if (static_cast<int>(node.entries.size()) > branching_) {
                return {id, split_node(node)};
            }
            return {id, SplitPair{}};
        }

        const std::size_t i = nearest_index(node.entries, x);
        auto [entry_id, child_split] = insert_into(*node.children[i], x);
        if (child_split.second) {
            node.entries[i] = summarize(*child_split.first);
            node.children[i] = std::move(child_split.first);
            node.entries.push_back(summarize(*child_split.second));
            node.children.push_back(std::move(child_split.second));
            if (static_cast<int>(node.entries.size()) > branching_) {
                return {entry_id, split_node(node)};
            }
        } else {
            // x landed under child i; refresh its summary.
            node.entries[i].absorb(x);
        }
        return {entry_id, SplitPair{}};
    }

    static SplitPair split_node(CFNode& node) {
        // Seed with the farthest pair of entry centroids.
        std::size_t sa = 0, sb = 1;
        double far = -1.0;
        for (std::size_t a = 0; a < node.entries.size(); ++a) {
            for (std::size_t b = a + 1; b < node.entries.size(); ++b) {
                const double d = (node.entries[a].centroid() - node.entries[b].centroid()).squaredNorm();
                if (d > far) {
                    far = d;
                    sa = a;
                    sb = b;
                }
            }
        }
        auto left = std::make_unique<CFNode>();
        auto right = std::make_unique<CFNode>();
        left->leaf = right->leaf = node.leaf;
        const VecX ca = node.entries[sa].centroid();
        const VecX cb = node.entries[sb].centroid();
        for (std::size_t i = 0; i < node.entries.size(); ++i) {
            const VecX c = node.entries[i].centroid();
            const bool to_left = i == sa || (i != sb && (c - ca).squaredNorm() <= (c - cb).squaredNorm());
            CFNode& dst = to_left ? *left : *right;
            dst.entries.push_back(node.entries[i]);
            if (!node.leaf) dst.children.push_back(std::move(node.children[i]));
        }
        return {std::move(left), std::move(right)};
    }

    static void collect(const CFNode* node, std::vector<CFEntry>& out) {
        if (!node) return;
        if (node->leaf) {
            out.insert(out.end(), node->entries.begin(), node->entries.end());
            return;
        }
        for (const auto& c : node->children) collect(c.get(), out);
    }

    double threshold2_;
    int branching_;
    std::unique_ptr<CFNode> root_;
    int next_id_ = 0;
};

struct DisjointSet {
    std::vector<int> parent;

    explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }

    int find(int a) {
        while (parent[static_cast<std::size_t>(a)] != a) {
            parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
            a = parent[static_cast<std::size_t>(a)];
        }
        return a;
    }

    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    }
};

}  // namespace

BirchResult birch_cluster(std::span<const VecX> features, double threshold, int branching_factor) {
    BirchResult result;
    if (features.empty()) return result;

    CFTree tree(threshold, branching_factor);
    for (std::size_t i = 0; i < features.size(); ++i) tree.insert(features[i]);
    const std::vector<CFEntry> entries = tree.leaf_entries();

    // Global phase: chain subclusters whose centroids sit within reach.
    std::vector<VecX> centroids(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) centroids[i] = entries[i].centroid();
    DisjointSet ds(entries.size());
    const double reach2 = kMergeReach * kMergeReach * threshold * threshold;
    for (std::size_t a = 0; a < entries.size(); ++a) {
        for (std::size_t b = a + 1; b < entries.size(); ++b) {
            if ((centroids[a] - centroids[b]).squaredNorm() <= reach2) {
                ds.unite(static_cast<int>(a), static_cast<int>(b));
            }
        }
    }
    // Outlier handling: stragglers in a distribution's tail form sparse
    // components that would surface as spurious clusters. A component
    // carrying a tiny share of the mass is folded into the cluster of the
    // nearest entry of a dense component.
    std::vector<int> comp_of_entry(entries.size());
    std::map<int, double> comp_mass;
    double total_mass = 0.0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        comp_of_entry[i] = ds.find(static_cast<int>(i));
        comp_mass[comp_of_entry[i]] += entries[i].n;
        total_mass += entries[i].n;
    }
    const double tiny = std::max(1.0, total_mass / 64.0);
    bool any_dense = false;
    for (const auto& [comp, mass] : comp_mass) {
        (void)comp;
        any_dense = any_dense || mass > tiny;
    }
    if (any_dense) {
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (comp_mass.at(comp_of_entry[i]) > tiny) continue;
            std::size_t target = i;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < entries.size(); ++j) {
                if (comp_mass.at(comp_of_entry[j]) <= tiny) continue;
                const double d = (centroids[i] - centroids[j]).squaredNorm();
                if (d < best) {
                    best = d;
                    target = j;
                }
            }
            comp_of_entry[i] = comp_of_entry[target];
        }
    }

    std::vector<int> cluster_of_entry(entries.size(), -1);
    std::map<int, int> cluster_of_comp;
    int k = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        auto [it, fresh] = cluster_of_comp.try_emplace(comp_of_entry[i], k);
        if (fresh) ++k;
        cluster_of_entry[i] = it->second;
    }

    // Redistribution: every vector joins the cluster of its nearest
    // subcluster centroid (ties toward the earliest-created entry).
    result.assignments.resize(features.size());
    parallel_for(features.size(), [&](std::size_t i) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t e = 0; e < entries.size(); ++e) {
            const double d = (centroids[e] - features[i]).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = e;
            }
        }
        result.assignments[i] = cluster_of_entry[best];
    });

    result.counts.assign(static_cast<std::size_t>(k), 0);
    std::vector<VecX> sums(static_cast<std::size_t>(k), VecX::Zero(features[0].size()));
    for (std::size_t i = 0; i < features.size(); ++i) {
        const int c = result.assignments[i];
        ++result.counts[static_cast<std::size_t>(c)];
        sums[static_cast<std::size_t>(c)] += features[i];
    }
    result.centers.resize(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) {
        result.centers[static_cast<std::size_t>(c)] =
            sums[static_cast<std::size_t>(c)] / static_cast<double>(result.counts[static_cast<std::size_t>(c)]);
    }
    return result;
}

// ---- control / follow / refine ----

std::vector<int> stable_by_scores(std::span<const double> stability, double epsilon) {
    std::vector<int> out;
    if (stability.empty()) return out;
    double cut = epsilon;
    if (cut <= 0.0) {
        std::vector<double> sorted(stability.begin(), stability.end());
        cut = lower_median(std::move(sorted));
    }
    for (std::size_t i = 0; i < stability.size(); ++i) {
        if (stability[i] <= cut) out.push_back(static_cast<int>(i));
    }
    return out;
}

double auto_spatial_weight(const ScenePoints& scene) {
    if (scene.size() == 0 || scene.feature_dim() == 0) return 1.0;
    double sq = 0.0;
    for (const VecX& f : scene.instance_features) sq += f.squaredNorm();
    const double rms = std::sqrt(sq / static_cast<double>(scene.size()));

    Vec3 lo = scene.positions.front(), hi = scene.positions.front();
    for (const Vec3& p : scene.positions) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double diag = (hi - lo).norm();
    if (diag <= 0.0 || rms <= 0.0) return 1.0;
    return rms / diag;
}

VecX concat_feature(const ScenePoints& scene, int index, double w_xyz) {
    const int d = scene.feature_dim();
    VecX g(d + 3);
    if (d > 0) g.head(d) = scene.instance_features[static_cast<std::size_t>(index)];
    g.tail(3) = w_xyz * scene.positions[static_cast<std::size_t>(index)];
    return g;
}

namespace {

double resolve_birch_threshold(const std::vector<VecX>& features, double requested) {
    if (requested > 0.0) return requested;
    const std::size_t n = features.size();
    if (n < 2) return 1.0;
    std::vector<double> nn(n, std::numeric_limits<double>::infinity());
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            const double d = (features[a] - features[b]).squaredNorm();
            nn[a] = std::min(nn[a], d);
            nn[b] = std::min(nn[b], d);
        }
    }
    for (double& v : nn) v = std::sqrt(v);
    return 0.5 * lower_median(nn);
}

}  // namespace

ClusterSet control_cluster(const ScenePoints& scene, const ControlPointSet& ctrl, const ClusterParams& params) {
    ClusterSet out;
    out.assignments.assign(scene.size(), kNoLabel);
    if (ctrl.indices.empty()) return out;

    const double threshold = resolve_birch_threshold(ctrl.features, params.birch_threshold);
    const BirchResult birch = birch_cluster(ctrl.features, threshold, params.birch_branching);

    out.k = static_cast<int>(birch.centers.size());
    out.centers = birch.centers;
    out.member_counts = birch.counts;
    for (std::size_t i = 0; i < ctrl.indices.size(); ++i) {
        out.assignments[static_cast<std::size_t>(ctrl.indices[i])] = birch.assignments[i];
    }
    return out;
}

namespace {

double resolve_follow_threshold(const ClusterSet& initial, const ControlPointSet& ctrl, double requested,
                                double birch_threshold) {
    if (requested > 0.0) return requested;
    std::vector<double> dist;
    dist.reserve(ctrl.indices.size());
    for (std::size_t i = 0; i < ctrl.indices.size(); ++i) {
        const int c = initial.assignments[static_cast<std::size_t>(ctrl.indices[i])];
        if (c == kNoLabel) continue;
        dist.push_back((ctrl.features[i] - initial.centers[static_cast<std::size_t>(c)]).norm());
    }
    const double p95 = percentile(dist, 0.95);
    return std::max(3.0 * p95, 2.0 * birch_threshold);
}

}  // namespace

ClusterSet follow_assign(const ScenePoints& scene, const ClusterSet& initial, const ControlPointSet& ctrl,
                         const ClusterParams& params) {
    ClusterSet out = initial;
    const double w_xyz = params.w_xyz;
    const double tau = params.follow_threshold;
    if (tau <= 0.0) throw Error("follow_assign: follow_threshold must be resolved to a positive value");

    std::vector<std::uint8_t> is_control(scene.size(), 0);
    for (int idx : ctrl.indices) is_control[static_cast<std::size_t>(idx)] = 1;

    std::vector<VecX>& centers = out.centers;
    std::vector<std::int64_t>& weights = out.member_counts;

    // Sequential by contract: running means shift with every assignment, so
    // a fixed ascending order is what makes the result reproducible.
    for (std::size_t i = 0; i < scene.size(); ++i) {
        if (is_control[i]) continue;
        const VecX g = concat_feature(scene, static_cast<int>(i), w_xyz);
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centers.size(); ++c) {
            const double d = (centers[c] - g).norm();
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(c);
            }
        }
        if (best >= 0 && best_d < tau) {
            weights[static_cast<std::size_t>(best)] += 1;
            centers[static_cast<std::size_t>(best)] +=
                (g - centers[static_cast<std::size_t>(best)]) / static_cast<double>(weights[static_cast<std::size_t>(best)]);
            out.assignments[i] = best;
        } else {
            out.assignments[i] = static_cast<int>(centers.size());
            centers.push_back(g);
            weights.push_back(1);
        }
    }
    out.k = static_cast<int>(centers.size());
    return out;
}

ClusterSet refine_clusters(const ScenePoints& scene, const ClusterSet& clusters, const ClusterParams& params) {
    const int d = scene.feature_dim();
    std::vector<std::vector<int>> members(static_cast<std::size_t>(clusters.k));
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const int c = clusters.assignments[i];
        if (c != kNoLabel) members[static_cast<std::size_t>(c)].push_back(static_cast<int>(i));
    }

    // Feature-only spread per cluster (RMS distance to the feature mean).
    std::vector<double> spread(static_cast<std::size_t>(clusters.k), 0.0);
    for (int c = 0; c < clusters.k; ++c) {
        const auto& idx = members[static_cast<std::size_t>(c)];
        if (idx.size() < 2 || d == 0) continue;
        VecX mean = VecX::Zero(d);
        for (int i : idx) mean += scene.instance_features[static_cast<std::size_t>(i)];
        mean /= static_cast<double>(idx.size());
        double sq = 0.0;
        for (int i : idx) sq += (scene.instance_features[static_cast<std::size_t>(i)] - mean).squaredNorm();
        spread[static_cast<std::size_t>(c)] = std::sqrt(sq / static_cast<double>(idx.size()));
    }

    double tau = params.split_threshold;
    if (tau <= 0.0) {
        std::vector<double> positive;
        for (double s : spread) {
            if (s > 0.0) positive.push_back(s);
        }
        if (positive.empty()) return clusters;  // nothing can split
        tau = 2.5 * lower_median(positive);
    }

    ClusterSet out;
    out.assignments.assign(scene.size(), kNoLabel);
    int next = 0;
    for (int c = 0; c < clusters.k; ++c) {
        const auto& idx = members[static_cast<std::size_t>(c)];
        if (idx.empty()) continue;

        bool split_done = false;
        if (spread[static_cast<std::size_t>(c)] > tau && idx.size() >= 2 && d > 0) {
            std::vector<VecX> feats;
            feats.reserve(idx.size());
            for (int i : idx) feats.push_back(scene.instance_features[static_cast<std::size_t>(i)]);
            const BirchResult sub = birch_cluster(feats, tau / 2.0, params.birch_branching);
            if (sub.centers.size() > 1) {
                for (std::size_t t = 0; t < idx.size(); ++t) {
                    out.assignments[static_cast<std::size_t>(idx[t])] = next + sub.assignments[t];
                }
                next += static_cast<int>(sub.centers.size());
                split_done = true;
            }
        }
        if (!split_done) {
            for (int i : idx) out.assignments[static_cast<std::size_t>(i)] = next;
            ++next;
        }
    }

    out.k = next;
    out.centers.assign(static_cast<std::size_t>(next), VecX::Zero(d + 3));
    out.member_counts.assign(static_cast<std::size_t>(next), 0);
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const int c = out.assignments[i];
        if (c == kNoLabel) continue;
        out.centers[static_cast<std::size_t>(c)] += concat_feature(scene, static_cast<int>(i), params.w_xyz);
        ++out.member_counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < next; ++c) {
        if (out.member_counts[static_cast<std::size_t>(c)] > 0) {
            out.centers[static_cast<std::size_t>(c)] /= static_cast<double>(out.member_counts[static_cast<std::size_t>(c)]);
        }
    }
    return out;
}

ClusterOutcome cluster_scene(ScenePoints& scene, const ClusterParams& params, std::span<const int> stable) {
    ClusterOutcome outcome;
    outcome.resolved = params;
    ClusterParams& resolved = outcome.resolved;

    std::vector<int> all;
    if (stable.empty()) {
        all.resize(scene.size());
        std::iota(all.begin(), all.end(), 0);
        stable = all;
    }

    if (resolved.w_xyz <= 0.0) resolved.w_xyz = auto_spatial_weight(scene);

    const auto m_cap = static_cast<int>(std::max<std::size_t>(1, scene.size() / 10));
    int m = resolved.control_count;
    if (m <= 0) m = std::min(2048, m_cap);
    m = std::min<int>(m, static_cast<int>(stable.size()));
    m = std::max(1, std::min(m, m_cap));
    resolved.control_count = m;

    ControlPointSet ctrl;
    ctrl.indices = resolved.sampler == SamplerKind::kFps
                       ? sample_fps(stable, scene.positions, m)
                       : sample_fpfh(stable, scene.positions, m, resolved.fpfh_neighbors);
    ctrl.features.reserve(ctrl.indices.size());
    for (int idx : ctrl.indices) ctrl.features.push_back(concat_feature(scene, idx, resolved.w_xyz));

    if (resolved.birch_threshold <= 0.0) {
        resolved.birch_threshold = resolve_birch_threshold(ctrl.features, 0.0);
    }
    ClusterSet initial = control_cluster(scene, ctrl, resolved);

    if (resolved.follow_threshold <= 0.0) {
        resolved.follow_threshold =
            resolve_follow_threshold(initial, ctrl, 0.0, resolved.birch_threshold);
        if (resolved.follow_threshold <= 0.0) resolved.follow_threshold = 1.0;
    }
    ClusterSet full = follow_assign(scene, initial, ctrl, resolved);
    ClusterSet refined = refine_clusters(scene, full, resolved);

    scene.labels = refined.assignments;
    outcome.clusters = std::move(refined);
    outcome.control = std::move(ctrl);
    return outcome;
}

}  // namespace gsgraph
