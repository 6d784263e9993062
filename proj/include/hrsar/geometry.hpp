#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace hrsar {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

using Ring = std::vector<Point>;

/// Exterior ring first, holes after. Filled with the even-odd rule over all rings,
/// so holes need no orientation convention.
struct Polygon {
  std::vector<Ring> rings;
};

using Polyline = std::vector<Point>;

/// Even-odd crossing test (half-open edges in y).
bool point_in_polygon(const Polygon& poly, Point p);

/// Scanline fill sampled at pixel centers (x + 0.5, y + 0.5): sets mask[y*width + x] = 1
/// for every covered center. Rings may extend past the grid; they are clipped.
void fill_polygon(const Polygon& poly, std::uint64_t width, std::uint64_t height,
                  std::span<std::uint8_t> mask);

double distance_to_segment(Point p, Point a, Point b);

/// Distance to the nearest segment of the polyline (round caps and joins).
double distance_to_polyline(const Polyline& line, Point p);

struct Box {
  double x0, y0, x1, y1;
};

Box bounding_box(std::span<const Point> pts);

}  // namespace hrsar
