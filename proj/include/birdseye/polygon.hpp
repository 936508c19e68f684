#pragma once

#include "birdseye/geometry.hpp"

#include <span>
#include <vector>

namespace birdseye {

double cross(const Vec2& a, const Vec2& b);

// Positive for counter-clockwise vertex order.
double signed_area(std::span<const Vec2> poly);

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);

// Closed-segment intersection test, touching and collinear overlap included.
bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2);

// True when no two non-adjacent edges of the closed ring touch and no edge is degenerate.
bool is_simple_polygon(std::span<const Vec2> poly);

// Andrew's monotone chain; counter-clockwise, no collinear points.
std::vector<Vec2> convex_hull(std::vector<Vec2> pts);

}  // namespace birdseye
