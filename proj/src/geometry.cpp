#include "gsgraph/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gsgraph::geom {

namespace {

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// Projection interval of a polygon onto an axis.
void project(const std::vector<Vec2>& poly, const Vec2& axis, double& lo, double& hi) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (const Vec2& p : poly) {
        const double t = p.dot(axis);
        lo = std::min(lo, t);
        hi = std::max(hi, t);
    }
}

void collect_axes(const std::vector<Vec2>& poly, std::vector<Vec2>& axes) {
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 e = poly[(i + 1) % n] - poly[i];
        if (e.squaredNorm() == 0.0) continue;
        axes.emplace_back(-e.y(), e.x());  // edge normal
        axes.push_back(e);                 // edge direction, needed for collinear degenerate hulls
    }
}

}  // namespace

std::vector<Vec2> convex_hull(std::vector<Vec2> points) {
    std::sort(points.begin(), points.end(), [](const Vec2& a, const Vec2& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    points.erase(std::unique(points.begin(), points.end(),
                             [](const Vec2& a, const Vec2& b) { return a.x() == b.x() && a.y() == b.y(); }),
                 points.end());
    const std::size_t n = points.size();
    if (n <= 2) return points;

    std::vector<Vec2> hull(2 * n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {  // lower
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], points[i]) <= 0) --k;
        hull[k++] = points[i];
    }
    for (std::size_t i = n - 1, t = k + 1; i-- > 0;) {  // upper
        while (k >= t && cross(hull[k - 2], hull[k - 1], points[i]) <= 0) --k;
        hull[k++] = points[i];
    }
    hull.resize(k - 1);
    return hull;
}

bool hulls_intersect(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
    if (a.empty() || b.empty()) return false;
    if (a.size() == 1 && b.size() == 1) {
        return a[0].x() == b[0].x() && a[0].y() == b[0].y();
    }

    std::vector<Vec2> axes;
    collect_axes(a, axes);
    collect_axes(b, axes);
    if (axes.empty()) {
        // Both degenerate to points with no usable edge; compare directly.
        const Vec2 d = a[0] - b[0];
        if (d.squaredNorm() == 0.0) return true;
        axes.push_back(d);
    }

    for (const Vec2& axis : axes) {
        double alo, ahi, blo, bhi;
        project(a, axis, alo, ahi);
        project(b, axis, blo, bhi);
        if (ahi < blo || bhi < alo) return false;  // open gap on this axis
    }
    return true;
}

bool boxes_overlap_area(double ax0, double ay0, double ax1, double ay1,
                        double bx0, double by0, double bx1, double by1) {
    const double w = std::min(ax1, bx1) - std::max(ax0, bx0);
    const double h = std::min(ay1, by1) - std::max(ay0, by0);
    return w > 0.0 && h > 0.0;
}

}  // namespace gsgraph::geom
