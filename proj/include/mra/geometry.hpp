#pragma once

#include <compare>
#include <vector>

namespace mra {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

using PointList = std::vector<Point>;

/// Axis-aligned half-open rectangle [x_min, x_max) x [y_min, y_max).
struct BoundingBox {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool valid() const { return x_min < x_max && y_min < y_max; }
  bool contains(Point p) const {
    return x_min <= p.x && p.x < x_max && y_min <= p.y && p.y < y_max;
  }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Smallest closed box holding every point. Requires a non-empty list.
BoundingBox bounding_box(const PointList& points);

}  // namespace mra
