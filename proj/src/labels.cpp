#include "hrsar/labels.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hrsar {

std::string normalize_rank(std::string_view rank) {
  std::string out;
  out.reserve(rank.size());
  for (char c : rank) {
    if (c == ' ' || c == '-')
      out.push_back('_');
    else
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

bool is_main_road_rank(std::string_view rank) {
  static constexpr std::array<std::string_view, 5> kMain = {"primary", "secondary", "tertiary", "residential",
                                                            "living_street"};
  const std::string r = normalize_rank(rank);
  return std::find(kMain.begin(), kMain.end(), r) != kMain.end();
}

RoadWidthTable RoadWidthTable::defaults() {
  RoadWidthTable t;
  t.widths = {
      {"primary", {6.0, 12.0}},     {"secondary", {5.0, 10.0}},   {"tertiary", {4.0, 9.0}},
      {"residential", {4.0, 8.0}},  {"living_street", {3.0, 7.0}}, {"service", {2.5, 6.0}},
      {"track", {2.0, 5.0}},        {"cycleway", {1.5, 4.0}},     {"footway", {1.5, 4.0}},
      {"path", {1.2, 4.0}},         {"pedestrian", {3.0, 8.0}},   {"unclassified", {3.0, 8.0}},
  };
  t.fallback = RoadWidth{2.0, 5.0};
  return t;
}

namespace {
std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_number(const std::string& s, int line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (trim(s.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("width table line " + std::to_string(line_no) + ": '" + s + "' is not a number");
}
}  // namespace

RoadWidthTable RoadWidthTable::parse(std::string_view text) {
  RoadWidthTable t;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("width table line " + std::to_string(line_no) + ": expected '='");
    const std::string key = normalize_rank(trim(std::string_view(line).substr(0, eq)));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key == "resolution_m") {
      t.resolution_m = parse_number(value, line_no);
      continue;
    }
    const auto comma = value.find(',');
    if (comma == std::string::npos)
      throw ConfigError("width table line " + std::to_string(line_no) + ": expected 'min_m, max_m'");
    RoadWidth w{parse_number(trim(value.substr(0, comma)), line_no),
                parse_number(trim(value.substr(comma + 1)), line_no)};
    if (key == "default")
      t.fallback = w;
    else
      t.widths[key] = w;
  }
  t.validate();
  return t;
}

RoadWidthTable RoadWidthTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void RoadWidthTable::validate() const {
  auto check = [](const std::string& name, const RoadWidth& w) {
    if (!(w.min_m > 0.0 && w.min_m <= w.max_m))
      throw ConfigError("road width '" + name + "': need 0 < min <= max");
  };
  for (const auto& [rank, w] : widths) check(rank, w);
  if (fallback) check("default", *fallback);
  if (!(resolution_m > 0.0)) throw ConfigError("road width table: resolution must be positive");
}

RoadWidth RoadWidthTable::lookup(const std::string& rank) const {
  const auto key = normalize_rank(rank);
  if (auto it = widths.find(key); it != widths.end()) return it->second;
  if (fallback) return *fallback;
  throw ConfigError("road rank '" + rank + "' missing from the width table");
}

RoadVariant parse_road_variant(std::string_view s) {
  if (s == "main-osm") return RoadVariant::MainRoadsOsm;
  if (s == "all-osm") return RoadVariant::AllRoadsOsm;
  if (s == "agree") return RoadVariant::OsmAndSwisstopoAgree;
  throw ConfigError("unknown road variant '" + std::string(s) + "' (main-osm | all-osm | agree)");
}

std::string to_string(RoadVariant v) {
  switch (v) {
    case RoadVariant::MainRoadsOsm: return "main-osm";
    case RoadVariant::AllRoadsOsm: return "all-osm";
    case RoadVariant::OsmAndSwisstopoAgree: return "agree";
  }
  return "?";
}

std::vector<std::uint8_t> building_fill(const AnnotationSet& set, std::uint64_t width, std::uint64_t height) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(width * height), 0);
  std::vector<std::uint8_t> one(mask.size());
  for (const Polygon& poly : set.buildings) {
    // Each footprint is filled on its own so that overlapping buildings do not cancel.
    std::fill(one.begin(), one.end(), 0);
    fill_polygon(poly, width, height, one);
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] |= one[i];
  }
  return mask;
}

TriPlane rasterize_buildings(const AnnotationSet& a, const AnnotationSet& b, std::uint64_t width,
                             std::uint64_t height) {
  const auto fa = building_fill(a, width, height);
  const auto fb = building_fill(b, width, height);
  TriPlane out(width, height, 1, Tri::No);
  for (std::size_t i = 0; i < fa.size(); ++i) {
    if (fa[i] && fb[i])
      out.data[i] = Tri::Yes;
    else if (fa[i] || fb[i])
      out.data[i] = Tri::Unlabeled;
  }
  return out;
}

RoadBands road_bands(const AnnotationSet& set, std::uint64_t width, std::uint64_t height,
                     const RoadWidthTable& widths, bool main_only) {
  RoadBands bands;
  bands.min_band.assign(static_cast<std::size_t>(width * height), 0);
  bands.max_band.assign(bands.min_band.size(), 0);
  for (const Road& road : set.roads) {
    if (main_only && !is_main_road_rank(road.rank)) continue;
    const RoadWidth w = widths.lookup(road.rank);
    const double r_min = 0.5 * w.min_m / widths.resolution_m;
    const double r_max = 0.5 * w.max_m / widths.resolution_m;
    const Box box = bounding_box(road.line);
    const auto x0 = static_cast<std::int64_t>(std::max(0.0, std::floor(box.x0 - r_max - 0.5)));
    const auto y0 = static_cast<std::int64_t>(std::max(0.0, std::floor(box.y0 - r_max - 0.5)));
    const auto x1 = static_cast<std::int64_t>(std::min(static_cast<double>(width) - 1.0, std::ceil(box.x1 + r_max)));
    const auto y1 = static_cast<std::int64_t>(std::min(static_cast<double>(height) - 1.0, std::ceil(box.y1 + r_max)));
    for (std::int64_t y = y0; y <= y1; ++y)
      for (std::int64_t x = x0; x <= x1; ++x) {
        const double d = distance_to_polyline(road.line, {static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5});
        const auto i = static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x);
        if (d <= r_min) bands.min_band[i] = 1;
        if (d <= r_max) bands.max_band[i] = 1;
      }
  }
  return bands;
}

namespace {
const AnnotationSet* find_source(std::span<const AnnotationSet> sets, AnnotationSource s) {
  for (const auto& set : sets)
    if (set.source == s) return &set;
  return nullptr;
}
}  // namespace

TriPlane rasterize_roads(std::span<const AnnotationSet> sets, std::uint64_t width, std::uint64_t height,
                         const RoadWidthTable& widths, RoadVariant variant) {
  widths.validate();
  TriPlane out(width, height, 1, Tri::No);
  if (variant == RoadVariant::OsmAndSwisstopoAgree) {
    if (sets.size() != 2) throw ConfigError("road agreement variant needs exactly two annotation sets");
    const auto* osm = find_source(sets, AnnotationSource::Osm);
    const auto* topo = find_source(sets, AnnotationSource::Swisstopo);
    if (!osm || !topo) throw ConfigError("road agreement variant needs one osm and one swisstopo set");
    const auto a = road_bands(*osm, width, height, widths, false);
    const auto b = road_bands(*topo, width, height, widths, false);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      if (a.min_band[i] && b.min_band[i])
        out.data[i] = Tri::Yes;
      else if (a.max_band[i] || b.max_band[i])
        out.data[i] = Tri::Unlabeled;
    }
    return out;
  }

  if (sets.empty()) throw ConfigError("road rasterization needs the osm annotation set");
  const AnnotationSet* osm = find_source(sets, AnnotationSource::Osm);
  if (!osm) throw ConfigError("road rasterization needs the osm annotation set");
  const auto bands = road_bands(*osm, width, height, widths, variant == RoadVariant::MainRoadsOsm);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (bands.min_band[i])
      out.data[i] = Tri::Yes;
    else if (bands.max_band[i])
      out.data[i] = Tri::Unlabeled;
  }
  return out;
}

LabelRaster fuse_labels(const TriPlane& buildings, const TriPlane& roads) {
  if (!buildings.same_dims(roads)) throw ShapeError("fuse_labels: building and road planes differ in size");
  LabelRaster out(buildings.width, buildings.height, 1, kOther);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const Tri b = buildings.data[i];
    const Tri r = roads.data[i];
    if (b == Tri::Yes)
      out.data[i] = kBuilding;
    else if (b == Tri::Unlabeled)
      out.data[i] = kUnlabeled;
    else if (r == Tri::Yes)
      out.data[i] = kRoad;
    else if (r == Tri::Unlabeled)
      out.data[i] = kUnlabeled;
  }
  return out;
}

}  // namespace hrsar
