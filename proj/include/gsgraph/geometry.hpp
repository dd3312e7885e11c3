#pragma once

#include <Eigen/Core>
#include <vector>

namespace gsgraph::geom {

using Vec2 = Eigen::Vector2d;

/// Convex hull (Andrew monotone chain), CCW, collinear points pruned.
/// Degenerate inputs yield a point (1 vertex) or a segment (2 vertices).
std::vector<Vec2> convex_hull(std::vector<Vec2> points);

/// Separating-axis test between two convex hulls. Closed sets: shared
/// boundary points count as an intersection. Handles point and segment
/// hulls.
bool hulls_intersect(const std::vector<Vec2>& a, const std::vector<Vec2>& b);

/// Positive-area rectangle intersection (shared edges and corners do not
/// count).
bool boxes_overlap_area(double ax0, double ay0, double ax1, double ay1,
                        double bx0, double by0, double bx1, double by1);

}  // namespace gsgraph::geom
