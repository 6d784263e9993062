#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "hrsar/features.hpp"
#include "hrsar/labels.hpp"
#include "hrsar/network.hpp"
#include "hrsar/synth.hpp"
#include "hrsar/train.hpp"

namespace hrsar {

/// Parses the TOML subset used by run configs: `[table]` headers (dotted names allowed),
/// `key = value` with strings, integers, floats, booleans and single-line arrays, `#` comments.
/// Throws ConfigError with the line number on anything else.
nlohmann::json parse_toml(std::string_view text);
nlohmann::json load_toml(const std::filesystem::path& path);

/// Inverse of parse_toml for objects of scalars/arrays nested at most one level.
std::string to_toml(const nlohmann::json& doc);

/// Everything a pipeline run needs, with the defaults of the reference setup.
struct RunConfig {
  FeatureConfig features;
  TopologyConfig topology;
  TrainHyper train;
  RoadVariant road_variant = RoadVariant::AllRoadsOsm;
  std::uint64_t tile_size = 256;
  double train_fraction = 0.8;
  SceneSpec scene;

  /// Unknown tables or keys are errors. topology.input_channels defaults to the feature count.
  static RunConfig from_json(const nlohmann::json& doc);
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  /// Applies "table.key=value" (value in TOML syntax) on top of the current settings.
  void apply_override(std::string_view assignment);

  void validate() const;
};

}  // namespace hrsar
