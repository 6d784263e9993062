#include "hrsar/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hrsar {

bool point_in_polygon(const Polygon& poly, Point p) {
  bool inside = false;
  for (const Ring& ring : poly.rings) {
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Point& a = ring[i];
      const Point& b = ring[j];
      if ((a.y > p.y) != (b.y > p.y)) {
        const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
        if (p.x < x_cross) inside = !inside;
      }
    }
  }
  return inside;
}

void fill_polygon(const Polygon& poly, std::uint64_t width, std::uint64_t height,
                  std::span<std::uint8_t> mask) {
  double ymin = std::numeric_limits<double>::infinity();
  double ymax = -ymin;
  for (const Ring& ring : poly.rings)
    for (const Point& p : ring) {
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
  if (!(ymin < ymax)) return;

  // Pixel rows whose centers may lie inside [ymin, ymax].
  const auto row0 = static_cast<std::int64_t>(std::max(0.0, std::floor(ymin - 0.5)));
  const auto row1 = static_cast<std::int64_t>(
      std::min(static_cast<double>(height) - 1.0, std::ceil(ymax - 0.5)));

  std::vector<double> xs;
  for (std::int64_t row = row0; row <= row1; ++row) {
    const double yc = static_cast<double>(row) + 0.5;
    xs.clear();
    for (const Ring& ring : poly.rings) {
      const std::size_t n = ring.size();
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point& a = ring[i];
        const Point& b = ring[j];
        if ((a.y > yc) != (b.y > yc)) xs.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
      }
    }
    std::sort(xs.begin(), xs.end());
    // Center xc is inside iff an odd number of crossings lie strictly right of it,
    // i.e. xs[k] <= xc < xs[k+1] for even k.
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const double lo = std::ceil(xs[k] - 0.5);
      const double hi = std::ceil(xs[k + 1] - 0.5) - 1.0;
      const auto c0 = static_cast<std::int64_t>(std::max(0.0, lo));
      const auto c1 = static_cast<std::int64_t>(std::min(static_cast<double>(width) - 1.0, hi));
      auto* dst = mask.data() + static_cast<std::uint64_t>(row) * width;
      for (std::int64_t c = c0; c <= c1; ++c) dst[c] = 1;
    }
  }
}

double distance_to_segment(Point p, Point a, Point b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

double distance_to_polyline(const Polyline& line, Point p) {
  if (line.size() == 1) return std::hypot(p.x - line[0].x, p.y - line[0].y);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < line.size(); ++i)
    best = std::min(best, distance_to_segment(p, line[i], line[i + 1]));
  return best;
}

Box bounding_box(std::span<const Point> pts) {
  Box b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
        -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const Point& p : pts) {
    b.x0 = std::min(b.x0, p.x);
    b.y0 = std::min(b.y0, p.y);
    b.x1 = std::max(b.x1, p.x);
    b.y1 = std::max(b.y1, p.y);
  }
  return b;
}

}  // namespace hrsar
