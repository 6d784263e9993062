#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "hrsar/config.hpp"
#include "hrsar/eval.hpp"

namespace hrsar {

/// Building rule from both sources, road rule per `variant`, fused with building precedence.
LabelRaster make_labels(const AnnotationSet& osm, const AnnotationSet& swisstopo, std::uint64_t width,
                        std::uint64_t height, const RoadWidthTable& widths, RoadVariant variant);

/// `count` scenes seeded base.seed, base.seed + 1, ...
std::vector<SyntheticScene> generate_scenes(const SceneSpec& base, int count);

/// Feature/label tiles keyed by "s<scene>_r<row>_c<col>".
struct Dataset {
  std::vector<std::string> ids;
  std::vector<RealRaster> features;
  std::vector<LabelRaster> labels;

  std::size_t index_of(const std::string& id) const;
};

Dataset build_dataset(const std::vector<SyntheticScene>& scenes, const FeatureConfig& features, RoadVariant variant,
                      std::uint64_t tile_size, const RoadWidthTable& widths = RoadWidthTable::defaults());

struct ExperimentOutcome {
  TrainResult training;
  ConfusionMatrix confusion;
  Metrics metrics;
  std::vector<std::string> test_ids;
  std::vector<LabelRaster> predictions;
};

/// Trains on split.train and evaluates (merged confusion matrix) on split.test.
ExperimentOutcome run_experiment(const Dataset& data, const Split& split, const TopologyConfig& topology,
                                 const TrainHyper& hyper, const EpochCallback& on_epoch = {});

/// One column of the feature-selection table.
struct ExperimentRow {
  int id = 0;
  FeatureConfig features;
  bool class_balancing = true;
  RoadVariant road_variant = RoadVariant::MainRoadsOsm;
};

/// The 17 reference configurations, in order.
std::vector<ExperimentRow> table1_grid();

struct GridResult {
  int id = 0;
  std::size_t planes = 0;
  bool ok = false;
  std::string error;
  Metrics metrics;
};

/// Runs each row on the given scenes with the base run settings; a failing row is recorded
/// and the remaining rows still run.
std::vector<GridResult> run_experiment_grid(const std::vector<ExperimentRow>& rows, const RunConfig& base,
                                            const std::vector<SyntheticScene>& scenes,
                                            const std::function<void(const std::string&)>& log = {});

std::string grid_csv(const std::vector<GridResult>& results);

/// synth -> features -> labels -> tile -> split -> train -> infer -> evaluate, writing
/// weights.wts, history.csv, metrics.csv, split.txt, pred/<id>.srf and config.resolved.toml.
ExperimentOutcome run_pipeline(const RunConfig& cfg, int scene_count, const std::filesystem::path& out_dir,
                               const std::function<void(const std::string&)>& log = {});

struct BenchReport {
  double mpx_per_s = 0.0;
  double mac_per_s = 0.0;
  double wall_s = 0.0;
  double macs_per_px = 0.0;
  int reps = 0;
  int side = 0;
};

/// Times `reps` forward passes of a side x side tile after one untimed warm-up pass.
BenchReport bench_throughput(const Network& net, const WeightStore& w, int side, int reps);

/// Throughput implied by a MAC rate and a per-pixel MAC cost, in Mpx/s.
double estimated_mpx_per_s(double mac_per_s, double macs_per_px);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace hrsar
