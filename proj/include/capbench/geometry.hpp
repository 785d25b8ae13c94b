#pragma once

#include <vector>

namespace capbench {

// Pixel coordinates, origin at the top-left of the screenshot.
struct Point {
  double x = 0.0;
  double y = 0.0;
};

double distance(const Point& a, const Point& b);

enum class RegionShape { Circle, Box, Polygon };

// Acceptance region for one action step: the area where a coordinate counts
// as correct. Containment is boundary-inclusive for all three shapes. Every
// region declares a canonical center, used for L2 scoring.
struct Region {
  RegionShape shape = RegionShape::Circle;
  Point center;

  double radius = 0.0;          // circle
  Point box_min, box_max;       // box, closed on all sides
  std::vector<Point> vertices;  // polygon, >= 3 vertices, simple

  static Region circle(Point center, double radius);
  static Region box(Point min, Point max);  // center defaults to the midpoint
  static Region box(Point min, Point max, Point center);
  static Region polygon(std::vector<Point> vertices);  // center = vertex centroid
  static Region polygon(std::vector<Point> vertices, Point center);

  bool contains(const Point& p) const;
};

bool region_contains(const Region& region, const Point& p);

// True when p lies exactly on segment ab (collinear and within the bounding
// box). Used for the boundary-inclusive polygon rule.
bool point_on_segment(const Point& p, const Point& a, const Point& b);

// True when no two non-adjacent edges intersect (shared endpoints between
// neighbouring edges are fine). Degenerate zero-length edges count as
// self-intersection.
bool polygon_is_simple(const std::vector<Point>& vertices);

}  // namespace capbench
