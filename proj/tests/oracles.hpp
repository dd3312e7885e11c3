#pragma once

// Brute-force reference implementations the unit and acceptance suites
// check the library against. Everything here recomputes results from first
// principles and must stay independent of the code paths under test.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "gsgraph/types.hpp"

namespace oracle {

using gsgraph::MaskGrid;
using gsgraph::SegGrid;
using gsgraph::Vec3;
using gsgraph::VecX;

// Eq.-1 style matching by scanning every pixel once per mask.
inline std::optional<int> match_mask(const MaskGrid& fg, const SegGrid& seg) {
    std::set<std::int32_t> ids;
    for (auto v : seg.data) {
        if (v >= 0) ids.insert(v);
    }
    double best_iou = 0.0;
    int best = -1;
    for (std::int32_t mask : ids) {
        std::size_t inter = 0, uni = 0;
        for (std::size_t i = 0; i < seg.data.size(); ++i) {
            const bool in_fg = fg.data[i] != 0;
            const bool in_mask = seg.data[i] == mask;
            inter += in_fg && in_mask;
            uni += in_fg || in_mask;
        }
        if (uni == 0) continue;
        const double iou = static_cast<double>(inter) / static_cast<double>(uni);
        if (iou > best_iou) {
            best_iou = iou;
            best = mask;
        }
    }
    if (best < 0 || best_iou == 0.0) return std::nullopt;
    return best;
}

// Eq.-2 style pair enumeration with scalar interval arithmetic.
struct OracleDetection {
    double x0, y0, x1, y1;
    std::vector<double> feature;  // empty = no feature
};

inline std::vector<std::pair<int, int>> candidate_pairs(const std::vector<OracleDetection>& dets, double theta) {
    auto cosine = [](const std::vector<double>& a, const std::vector<double>& b) {
        if (a.empty() || b.empty() || a.size() != b.size()) return -1.0;
        double dot = 0, na = 0, nb = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            dot += a[i] * b[i];
            na += a[i] * a[i];
            nb += b[i] * b[i];
        }
        if (na == 0 || nb == 0) return -1.0;
        return dot / (std::sqrt(na) * std::sqrt(nb));
    };
    std::vector<std::pair<int, int>> out;
    for (std::size_t i = 0; i < dets.size(); ++i) {
        for (std::size_t j = i + 1; j < dets.size(); ++j) {
            const bool semantic = cosine(dets[i].feature, dets[j].feature) > theta;
            const double ox = std::min(dets[i].x1, dets[j].x1) - std::max(dets[i].x0, dets[j].x0);
            const double oy = std::min(dets[i].y1, dets[j].y1) - std::max(dets[i].y0, dets[j].y0);
            const bool spatial = ox > 0 && oy > 0;
            if (semantic || spatial) out.emplace_back(static_cast<int>(i), static_cast<int>(j));
        }
    }
    return out;
}

// ---- polygon intersection by pairwise segment tests + point containment ----

using P2 = std::array<double, 2>;

inline double orient(const P2& a, const P2& b, const P2& c) {
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
}

inline bool on_segment(const P2& a, const P2& b, const P2& p) {
    if (orient(a, b, p) != 0.0) return false;
    return std::min(a[0], b[0]) <= p[0] && p[0] <= std::max(a[0], b[0]) && std::min(a[1], b[1]) <= p[1] &&
           p[1] <= std::max(a[1], b[1]);
}

inline bool segments_intersect(const P2& a, const P2& b, const P2& c, const P2& d) {
    const double o1 = orient(a, b, c);
    const double o2 = orient(a, b, d);
    const double o3 = orient(c, d, a);
    const double o4 = orient(c, d, b);
    if (((o1 > 0) != (o2 > 0)) && o1 != 0 && o2 != 0 && ((o3 > 0) != (o4 > 0)) && o3 != 0 && o4 != 0) return true;
    return on_segment(a, b, c) || on_segment(a, b, d) || on_segment(c, d, a) || on_segment(c, d, b);
}

inline bool point_in_convex(const std::vector<P2>& poly, const P2& p) {
    if (poly.empty()) return false;
    if (poly.size() == 1) return poly[0][0] == p[0] && poly[0][1] == p[1];
    if (poly.size() == 2) return on_segment(poly[0], poly[1], p);
    // CCW polygon: p is inside or on the boundary when it is left of (or on)
    // every edge.
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const P2& a = poly[i];
        const P2& b = poly[(i + 1) % poly.size()];
        if (orient(a, b, p) < 0.0) return false;
    }
    return true;
}

inline bool hulls_intersect(const std::vector<P2>& a, const std::vector<P2>& b) {
    if (a.empty() || b.empty()) return false;
    for (const P2& p : a) {
        if (point_in_convex(b, p)) return true;
    }
    for (const P2& p : b) {
        if (point_in_convex(a, p)) return true;
    }
    if (a.size() >= 2 && b.size() >= 2) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            for (std::size_t j = 0; j < b.size(); ++j) {
                if (segments_intersect(a[i], a[(i + 1) % a.size()], b[j], b[(j + 1) % b.size()])) return true;
            }
        }
    }
    return false;
}

// ---- scalar pinhole projection without any matrix library ----

struct ScalarCamera {
    double r[9];  // row-major world-to-camera rotation
    double t[3];
    double fx, fy, cx, cy;
};

inline bool project_scalar(const ScalarCamera& cam, const double p[3], double& u, double& v) {
    const double x = cam.r[0] * p[0] + cam.r[1] * p[1] + cam.r[2] * p[2] + cam.t[0];
    const double y = cam.r[3] * p[0] + cam.r[4] * p[1] + cam.r[5] * p[2] + cam.t[1];
    const double z = cam.r[6] * p[0] + cam.r[7] * p[1] + cam.r[8] * p[2] + cam.t[2];
    if (z <= 0.0) return false;
    u = cam.fx * x / z + cam.cx;
    v = cam.fy * y / z + cam.cy;
    return true;
}

// ---- optimal cluster->class matching by exhaustive enumeration ----

struct EnumeratedAssignment {
    std::vector<int> row_to_col;
    std::int64_t total = 0;
};

// Maximal total, lexicographically smallest row_to_col among optima
// (columns in ascending order, -1 = unmatched ordered last).
inline EnumeratedAssignment enumerate_assignment(const std::vector<std::vector<std::int64_t>>& score) {
    const std::size_t rows = score.size();
    const std::size_t cols = rows == 0 ? 0 : score[0].size();
    EnumeratedAssignment best;
    best.row_to_col.assign(rows, -1);
    best.total = -1;

    std::vector<int> current(rows, -1);
    std::vector<char> used(cols, 0);
    auto lex_less = [](const std::vector<int>& a, const std::vector<int>& b) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            const unsigned ka = a[i] < 0 ? 1u << 30 : static_cast<unsigned>(a[i]);
            const unsigned kb = b[i] < 0 ? 1u << 30 : static_cast<unsigned>(b[i]);
            if (ka != kb) return ka < kb;
        }
        return false;
    };
    std::function<void(std::size_t, std::int64_t)> rec = [&](std::size_t r, std::int64_t sum) {
        if (r == rows) {
            if (sum > best.total || (sum == best.total && lex_less(current, best.row_to_col))) {
                best.total = sum;
                best.row_to_col = current;
            }
            return;
        }
        for (std::size_t c = 0; c < cols; ++c) {
            if (used[c]) continue;
            used[c] = 1;
            current[r] = static_cast<int>(c);
            rec(r + 1, sum + score[r][c]);
            used[c] = 0;
        }
        current[r] = -1;
        rec(r + 1, sum);
    };
    rec(0, 0);
    return best;
}

// Segmentation metrics recomputed from the enumerated assignment.
struct SegMetrics {
    double miou = 0.0;
    double macc = 0.0;
};

inline SegMetrics segmentation_metrics(const std::vector<int>& predicted, const std::vector<int>& ground_truth) {
    std::vector<int> clusters, classes;
    {
        std::set<int> cs, gs;
        for (int v : predicted) {
            if (v != gsgraph::kNoLabel) cs.insert(v);
        }
        for (int v : ground_truth) gs.insert(v);
        clusters.assign(cs.begin(), cs.end());
        classes.assign(gs.begin(), gs.end());
    }
    std::map<int, std::size_t> ci, gi;
    for (std::size_t i = 0; i < clusters.size(); ++i) ci[clusters[i]] = i;
    for (std::size_t i = 0; i < classes.size(); ++i) gi[classes[i]] = i;

    std::vector<std::vector<std::int64_t>> confusion(clusters.size(),
                                                     std::vector<std::int64_t>(classes.size(), 0));
    std::int64_t counted = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] == gsgraph::kNoLabel) continue;
        ++confusion[ci.at(predicted[i])][gi.at(ground_truth[i])];
        ++counted;
    }
    const EnumeratedAssignment assign = enumerate_assignment(confusion);

    std::vector<std::int64_t> row_sum(clusters.size(), 0), col_sum(classes.size(), 0);
    for (std::size_t r = 0; r < clusters.size(); ++r) {
        for (std::size_t c = 0; c < classes.size(); ++c) {
            row_sum[r] += confusion[r][c];
            col_sum[c] += confusion[r][c];
        }
    }
    std::vector<int> class_to_cluster(classes.size(), -1);
    for (std::size_t r = 0; r < clusters.size(); ++r) {
        if (assign.row_to_col[r] >= 0) class_to_cluster[static_cast<std::size_t>(assign.row_to_col[r])] = static_cast<int>(r);
    }
    SegMetrics out;
    double iou_sum = 0.0;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        double iou = 0.0;
        const int r = class_to_cluster[c];
        if (r >= 0) {
            const std::int64_t tp = confusion[static_cast<std::size_t>(r)][c];
            const std::int64_t uni = row_sum[static_cast<std::size_t>(r)] + col_sum[c] - tp;
            iou = uni > 0 ? static_cast<double>(tp) / static_cast<double>(uni) : 0.0;
        }
        iou_sum += iou;
    }
    out.miou = classes.empty() ? 0.0 : iou_sum / static_cast<double>(classes.size());
    out.macc = counted == 0 ? 0.0 : static_cast<double>(assign.total) / static_cast<double>(counted);
    return out;
}

}  // namespace oracle
