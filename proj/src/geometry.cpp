#include "capbench/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace capbench {

double distance(const Point& a, const Point& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

Region Region::circle(Point center, double radius) {
  Region r;
  r.shape = RegionShape::Circle;
  r.center = center;
  r.radius = radius;
  return r;
}

Region Region::box(Point min, Point max) {
  return box(min, max, Point{(min.x + max.x) / 2.0, (min.y + max.y) / 2.0});
}

Region Region::box(Point min, Point max, Point center) {
  Region r;
  r.shape = RegionShape::Box;
  r.box_min = min;
  r.box_max = max;
  r.center = center;
  return r;
}

Region Region::polygon(std::vector<Point> vertices) {
  Point c{0.0, 0.0};
  if (!vertices.empty()) {
    for (const Point& v : vertices) {
      c.x += v.x;
      c.y += v.y;
    }
    c.x /= static_cast<double>(vertices.size());
    c.y /= static_cast<double>(vertices.size());
  }
  return polygon(std::move(vertices), c);
}

Region Region::polygon(std::vector<Point> vertices, Point center) {
  Region r;
  r.shape = RegionShape::Polygon;
  r.vertices = std::move(vertices);
  r.center = center;
  return r;
}

static double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool point_on_segment(const Point& p, const Point& a, const Point& b) {
  if (cross(a, b, p) != 0.0) return false;
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

// Winding-number interior test; boundary handled separately so the result is
// inclusive regardless of edge direction.
static bool polygon_contains(const std::vector<Point>& v, const Point& p) {
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (point_on_segment(p, v[i], v[(i + 1) % n])) return true;
  }
  int winding = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = v[i];
    const Point& b = v[(i + 1) % n];
    if (a.y <= p.y) {
      if (b.y > p.y && cross(a, b, p) > 0.0) ++winding;
    } else {
      if (b.y <= p.y && cross(a, b, p) < 0.0) --winding;
    }
  }
  return winding != 0;
}

bool Region::contains(const Point& p) const {
  switch (shape) {
    case RegionShape::Circle: {
      const double dx = p.x - center.x;
      const double dy = p.y - center.y;
      return dx * dx + dy * dy <= radius * radius;
    }
    case RegionShape::Box:
      return box_min.x <= p.x && p.x <= box_max.x && box_min.y <= p.y &&
             p.y <= box_max.y;
    case RegionShape::Polygon:
      return polygon_contains(vertices, p);
  }
  return false;
}

bool region_contains(const Region& region, const Point& p) {
  return region.contains(p);
}

static bool segments_intersect(const Point& a, const Point& b, const Point& c,
                               const Point& d) {
  const double d1 = cross(c, d, a);
  const double d2 = cross(c, d, b);
  const double d3 = cross(a, b, c);
  const double d4 = cross(a, b, d);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
      ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  if (d1 == 0.0 && point_on_segment(a, c, d)) return true;
  if (d2 == 0.0 && point_on_segment(b, c, d)) return true;
  if (d3 == 0.0 && point_on_segment(c, a, b)) return true;
  if (d4 == 0.0 && point_on_segment(d, a, b)) return true;
  return false;
}

bool polygon_is_simple(const std::vector<Point>& vertices) {
  const std::size_t n = vertices.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    // spike: consecutive edges fold back onto each other
    const Point& prev = vertices[(i + n - 1) % n];
    const Point& cur = vertices[i];
    const Point& next = vertices[(i + 1) % n];
    if (cross(cur, prev, next) == 0.0 &&
        (prev.x - cur.x) * (next.x - cur.x) +
                (prev.y - cur.y) * (next.y - cur.y) >
            0.0)
      return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = vertices[i];
    const Point& b = vertices[(i + 1) % n];
    if (a.x == b.x && a.y == b.y) return false;  // zero-length edge
    for (std::size_t j = i + 1; j < n; ++j) {
      // skip the edge itself and the two edges sharing an endpoint with it
      if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
      const Point& c = vertices[j];
      const Point& d = vertices[(j + 1) % n];
      if (segments_intersect(a, b, c, d)) return false;
    }
  }
  return true;
}

}  // namespace capbench
