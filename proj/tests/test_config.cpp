#include <gtest/gtest.h>

#include "hrsar/config.hpp"

using namespace hrsar;

TEST(Toml, ParsesTheSupportedSubset) {
  const auto doc = parse_toml(R"(
# comment
[features]
flights = [1, 2]   # trailing comment
magnitude = true
range_db = 25.0
scope = "tile"

[train]
lr = 1e-3
seed = 42
)");
  EXPECT_EQ(doc["features"]["flights"], nlohmann::json::array({1, 2}));
  EXPECT_EQ(doc["features"]["scope"], "tile");
  EXPECT_DOUBLE_EQ(doc["train"]["lr"].get<double>(), 1e-3);
  EXPECT_EQ(doc["train"]["seed"].get<int>(), 42);
}

TEST(Toml, ErrorsCarryLineNumbers) {
  try {
    parse_toml("[train]\nlr = 0.1\nlr = 0.2\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_toml("[train\n"), ConfigError);
  EXPECT_THROW(parse_toml("x = \n"), ConfigError);
}

TEST(RunConfig, DefaultsRoundTripThroughToml) {
  RunConfig c;
  c.features.use_phase_cos_sin = true;
  c.topology.input_channels = static_cast<int>(c.features.plane_count());
  c.train.seed = 9;
  const auto back = RunConfig::from_json(parse_toml(to_toml(c.to_json())));
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.topology.input_channels, 24);
}

TEST(RunConfig, InputChannelsFollowFeatures) {
  const auto c = RunConfig::from_json(parse_toml("[features]\nchannels = [1]\nflights = [1]\n"));
  EXPECT_EQ(c.topology.input_channels, 1);
  EXPECT_THROW(RunConfig::from_json(parse_toml("[features]\nflights = [1]\n[topology]\ninput_channels = 8\n")),
               ConfigError);
}

TEST(RunConfig, UnknownKeysAndTablesAreErrors) {
  EXPECT_THROW(RunConfig::from_json(parse_toml("[train]\nbatchsize = 4\n")), ConfigError);
  EXPECT_THROW(RunConfig::from_json(parse_toml("[trainer]\nbatch = 4\n")), ConfigError);
  EXPECT_THROW(RunConfig::from_json(parse_toml("[train]\nbatch = \"4\"\n")), ConfigError);
}

TEST(RunConfig, Overrides) {
  RunConfig c;
  c.apply_override("train.max_epochs=3");
  c.apply_override("features.phase_cossin=true");
  c.apply_override("labels.road_variant=\"agree\"");
  EXPECT_EQ(c.train.max_epochs, 3);
  EXPECT_EQ(c.topology.input_channels, 24);
  EXPECT_EQ(c.road_variant, RoadVariant::OsmAndSwisstopoAgree);
  EXPECT_THROW(c.apply_override("train.max_epochs"), ConfigError);
  EXPECT_THROW(c.apply_override("train.nope=1"), ConfigError);
}
