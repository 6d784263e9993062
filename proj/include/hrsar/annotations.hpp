#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hrsar/geometry.hpp"

namespace hrsar {

enum class AnnotationSource { Osm, Swisstopo };

std::string to_string(AnnotationSource s);

struct Road {
  Polyline line;
  std::string rank;
};

/// Vector annotations of one map source, in pixel units of the target grid.
struct AnnotationSet {
  AnnotationSource source = AnnotationSource::Osm;
  std::vector<Polygon> buildings;
  std::vector<Road> roads;

  /// Polygons need >= 3 distinct vertices per ring, polylines >= 2, ranks non-empty.
  void validate() const;
};

/// GeoJSON FeatureCollection with properties {source, kind, rank}. Building features are
/// Polygons (holes allowed, closing vertex optional), roads are LineStrings.
/// Throws ParseError naming the offending feature index.
AnnotationSet parse_annotations(std::string_view geojson);
AnnotationSet read_annotations(const std::filesystem::path& path);

std::string to_geojson(const AnnotationSet& set);
void write_annotations(const AnnotationSet& set, const std::filesystem::path& path);

}  // namespace hrsar
