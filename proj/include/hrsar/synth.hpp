#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hrsar/annotations.hpp"
#include "hrsar/labels.hpp"
#include "hrsar/raster.hpp"

namespace hrsar {

/// Parameters of a synthetic urban SAR scene. Sizes are in pixels unless noted.
struct SceneSpec {
  std::uint64_t width = 512;
  std::uint64_t height = 512;
  int flights = 2;   // 1 or 2; flight 2 looks from the opposite side
  int channels = 4;  // independent receive channels
  std::uint64_t seed = 1;

  int building_count = 12;
  double building_min = 30.0;
  double building_max = 90.0;
  double max_rotation_rad = 0.35;

  int road_count = 3;
  std::vector<std::string> road_ranks{"primary", "secondary", "residential", "service", "footway"};

  // +1: the sensor looks along +x (near edge on the left, shadow on the right); -1 mirrored.
  int illumination = 1;
  double layover_px = 4.0;
  double shadow_px = 14.0;
  int looks = 1;

  double refl_background = 1.0;
  double refl_building = 4.0;
  double refl_layover = 8.0;
  double refl_shadow = 0.1;
  double refl_road = 0.25;

  // Second annotation source: per-feature Gaussian offset and drop probability.
  double jitter_sigma_px = 1.0;
  double dropout = 0.05;

  void validate() const;
};

struct SyntheticScene {
  std::vector<ComplexRaster> recordings;  // recording_id = flight index (1, 2)
  AnnotationSet osm;
  AnnotationSet swisstopo;
  RealRaster reflectivity;  // one plane per flight, before speckle
};

/// Deterministic in spec.seed. Roads are painted with a width drawn uniformly from the rank's
/// [min, max] interval of `widths`.
SyntheticScene generate_scene(const SceneSpec& spec, const RoadWidthTable& widths = RoadWidthTable::defaults());

}  // namespace hrsar
