#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hrsar/annotations.hpp"
#include "hrsar/raster.hpp"

namespace hrsar {

/// Per-pixel outcome of one labeling rule.
enum class Tri : std::uint8_t { No = 0, Yes = 1, Unlabeled = 2 };

using TriPlane = Grid<Tri>;

struct RoadWidth {
  double min_m = 0.0;
  double max_m = 0.0;
};

/// Minimum (labeled road) and maximum (unlabeled margin) width per road rank, in meters.
struct RoadWidthTable {
  std::map<std::string, RoadWidth> widths;
  std::optional<RoadWidth> fallback;
  double resolution_m = 0.15;

  static RoadWidthTable defaults();

  /// `rank = min_m, max_m` lines; `default = min_m, max_m` sets the fallback and
  /// `resolution_m = <m/px>` the pixel pitch. `#` starts a comment.
  static RoadWidthTable parse(std::string_view text);
  static RoadWidthTable load(const std::filesystem::path& path);

  /// Throws ConfigError listing the rank when neither an entry nor a fallback exists.
  RoadWidth lookup(const std::string& rank) const;

  void validate() const;
};

/// Lower-case, spaces and dashes to underscores ("Living Street" -> "living_street").
std::string normalize_rank(std::string_view rank);

bool is_main_road_rank(std::string_view rank);

enum class RoadVariant { MainRoadsOsm, AllRoadsOsm, OsmAndSwisstopoAgree };

RoadVariant parse_road_variant(std::string_view s);  // main-osm | all-osm | agree
std::string to_string(RoadVariant v);

/// Union of one source's building footprints (1 = covered pixel center).
std::vector<std::uint8_t> building_fill(const AnnotationSet& set, std::uint64_t width, std::uint64_t height);

/// Yes where both sources cover the pixel center, No where neither does, Unlabeled otherwise.
TriPlane rasterize_buildings(const AnnotationSet& a, const AnnotationSet& b, std::uint64_t width,
                             std::uint64_t height);

struct RoadBands {
  std::vector<std::uint8_t> min_band;  // within min_width/2 of a retained centerline
  std::vector<std::uint8_t> max_band;  // within max_width/2
};

/// Distance bands of one source. `main_only` keeps only the main road ranks.
RoadBands road_bands(const AnnotationSet& set, std::uint64_t width, std::uint64_t height,
                     const RoadWidthTable& widths, bool main_only);

/// `sets` holds the OSM set (MainRoadsOsm / AllRoadsOsm) or both sources (agreement variant).
TriPlane rasterize_roads(std::span<const AnnotationSet> sets, std::uint64_t width, std::uint64_t height,
                         const RoadWidthTable& widths, RoadVariant variant);

/// building Yes -> 1, building Unlabeled -> 255, road Yes -> 2, road Unlabeled -> 255, else 0.
LabelRaster fuse_labels(const TriPlane& buildings, const TriPlane& roads);

}  // namespace hrsar
