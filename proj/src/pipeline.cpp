#include "hrsar/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

namespace hrsar {

namespace fs = std::filesystem;

LabelRaster make_labels(const AnnotationSet& osm, const AnnotationSet& swisstopo, std::uint64_t width,
                        std::uint64_t height, const RoadWidthTable& widths, RoadVariant variant) {
  const auto buildings = rasterize_buildings(osm, swisstopo, width, height);
  std::vector<AnnotationSet> road_sets{osm};
  if (variant == RoadVariant::OsmAndSwisstopoAgree) road_sets.push_back(swisstopo);
  const auto roads = rasterize_roads(road_sets, width, height, widths, variant);
  return fuse_labels(buildings, roads);
}

std::vector<SyntheticScene> generate_scenes(const SceneSpec& base, int count) {
  if (count < 1) throw ConfigError("scene count must be positive");
  std::vector<SyntheticScene> scenes;
  for (int k = 0; k < count; ++k) {
    SceneSpec s = base;
    s.seed = base.seed + static_cast<std::uint64_t>(k);
    scenes.push_back(generate_scene(s));
  }
  return scenes;
}

std::size_t Dataset::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] == id) return i;
  throw ConfigError("unknown tile id '" + id + "'");
}

Dataset build_dataset(const std::vector<SyntheticScene>& scenes, const FeatureConfig& features, RoadVariant variant,
                      std::uint64_t tile_size, const RoadWidthTable& widths) {
  features.validate();
  Dataset d;
  for (std::size_t k = 0; k < scenes.size(); ++k) {
    const auto& sc = scenes[k];
    const auto w = sc.recordings.front().width, h = sc.recordings.front().height;
    auto [label_tiles, index] = tile(make_labels(sc.osm, sc.swisstopo, w, h, widths, variant), tile_size);

    std::vector<RealRaster> feature_tiles;
    if (features.scope == NormScope::Recording) {
      feature_tiles = tile(build_feature_stack(sc.recordings, features).to_raster(), tile_size).first;
    } else {
      std::vector<std::vector<ComplexRaster>> per_flight;
      for (const auto& r : sc.recordings) per_flight.push_back(tile(r, tile_size).first);
      for (std::size_t t = 0; t < index.tiles.size(); ++t) {
        std::vector<ComplexRaster> recs;
        for (const auto& f : per_flight) recs.push_back(f[t]);
        feature_tiles.push_back(build_feature_stack(recs, features).to_raster());
      }
    }
    for (std::size_t t = 0; t < index.tiles.size(); ++t) {
      d.ids.push_back("s" + std::to_string(k) + "_" + TileIndex::tile_name(index.tiles[t]));
      d.features.push_back(std::move(feature_tiles[t]));
      d.labels.push_back(std::move(label_tiles[t]));
    }
  }
  return d;
}

ExperimentOutcome run_experiment(const Dataset& data, const Split& split, const TopologyConfig& topology,
                                 const TrainHyper& hyper, const EpochCallback& on_epoch) {
  if (split.train.empty()) throw ConfigError("the training split is empty");
  if (split.test.empty()) throw ConfigError("the test split is empty");
  std::vector<TrainSample> samples;
  for (const auto& id : split.train) {
    const auto i = data.index_of(id);
    samples.push_back({data.features[i], data.labels[i]});
  }
  ExperimentOutcome out;
  out.training = train(samples, topology, hyper, on_epoch);
  const Network net = Network::build(topology);
  out.confusion = ConfusionMatrix(topology.num_classes);
  for (const auto& id : split.test) {
    const auto i = data.index_of(id);
    auto pred = predict(net, out.training.weights, data.features[i]);
    out.confusion = merge(out.confusion, confusion(pred, data.labels[i], topology.num_classes));
    out.test_ids.push_back(id);
    out.predictions.push_back(std::move(pred));
  }
  out.metrics = metrics(out.confusion);
  return out;
}

std::vector<ExperimentRow> table1_grid() {
  struct Cols {
    bool both_flights, all_channels, mag, cossin, reim, diff;
  };
  // Columns of the reference table: flights, channels, magnitude, cos/sin, re/im, phase diff.
  static constexpr Cols kCols[17] = {
      {false, false, true, false, false, false},  {false, false, true, true, false, false},
      {false, false, false, false, true, false},  {false, false, true, false, false, true},
      {false, true, true, false, false, false},   {false, true, true, true, false, false},
      {false, true, false, false, true, false},   {false, true, true, false, false, true},
      {true, false, true, false, false, false},   {true, false, true, true, false, false},
      {true, false, false, false, true, false},   {true, true, true, false, false, false},
      {true, true, false, false, true, false},    {true, true, true, false, false, false},
      {true, true, false, false, true, false},    {true, true, true, false, false, false},
      {true, true, false, false, true, false},
  };
  std::vector<ExperimentRow> rows;
  for (int i = 0; i < 17; ++i) {
    const auto& c = kCols[i];
    ExperimentRow r;
    r.id = i + 1;
    r.features.flights = c.both_flights ? std::vector<int>{1, 2} : std::vector<int>{1};
    r.features.channels = c.all_channels ? std::vector<int>{1, 2, 3, 4} : std::vector<int>{1};
    r.features.use_magnitude = c.mag;
    r.features.use_phase_cos_sin = c.cossin;
    r.features.use_phase_re_im = c.reim;
    r.features.use_phase_diff = c.diff;
    // Rows 14-15 add the second source for roads; rows 16-17 train without class weights.
    r.road_variant = (r.id == 14 || r.id == 15) ? RoadVariant::OsmAndSwisstopoAgree : RoadVariant::MainRoadsOsm;
    r.class_balancing = r.id < 16;
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<GridResult> run_experiment_grid(const std::vector<ExperimentRow>& rows, const RunConfig& base,
                                            const std::vector<SyntheticScene>& scenes,
                                            const std::function<void(const std::string&)>& log) {
  std::vector<GridResult> results;
  for (const auto& row : rows) {
    GridResult g;
    g.id = row.id;
    try {
      FeatureConfig fc = row.features;
      fc.diff_pair = base.features.diff_pair;
      fc.percentile = base.features.percentile;
      fc.range_db = base.features.range_db;
      fc.scope = base.features.scope;
      g.planes = fc.plane_count();
      const Dataset data = build_dataset(scenes, fc, row.road_variant, base.tile_size);
      const Split split = split_dataset(data.ids, base.train_fraction, base.train.seed);
      TopologyConfig topo = base.topology;
      topo.input_channels = static_cast<int>(g.planes);
      TrainHyper hyper = base.train;
      hyper.class_balancing = row.class_balancing;
      g.metrics = run_experiment(data, split, topo, hyper).metrics;
      g.ok = true;
    } catch (const std::exception& e) {
      g.error = e.what();
    }
    if (log)
      log("experiment " + std::to_string(g.id) + (g.ok ? ": PA " + std::to_string(g.metrics.pa) + " mIoU " +
                                                             std::to_string(g.metrics.miou)
                                                       : ": failed: " + g.error));
    results.push_back(std::move(g));
  }
  return results;
}

std::string grid_csv(const std::vector<GridResult>& results) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << "experiment,planes,PA,MA,mIoU,status\n";
  for (const auto& r : results) {
    os << r.id << ',' << r.planes << ',';
    if (r.ok) {
      os << r.metrics.pa << ',' << r.metrics.ma << ',' << r.metrics.miou << ",ok\n";
    } else {
      std::string msg = r.error;
      for (auto& c : msg)
        if (c == ',' || c == '\n') c = ' ';
      os << ",,,error: " << msg << '\n';
    }
  }
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

ExperimentOutcome run_pipeline(const RunConfig& cfg, int scene_count, const fs::path& out_dir,
                               const std::function<void(const std::string&)>& log) {
  cfg.validate();
  fs::create_directories(out_dir / "pred");
  write_text(out_dir / "config.resolved.toml", to_toml(cfg.to_json()));
  auto say = [&](const std::string& m) {
    if (log) log(m);
  };

  say("generating " + std::to_string(scene_count) + " scene(s)");
  const auto scenes = generate_scenes(cfg.scene, scene_count);
  for (std::size_t k = 0; k < scenes.size(); ++k) {
    const auto dir = out_dir / ("scene" + std::to_string(k));
    fs::create_directories(dir);
    for (const auto& r : scenes[k].recordings) write_raster(r, dir / ("flight" + std::to_string(r.recording_id) + ".srf"));
    write_annotations(scenes[k].osm, dir / "osm.geojson");
    write_annotations(scenes[k].swisstopo, dir / "swisstopo.geojson");
  }

  say("building features, labels and tiles");
  const Dataset data = build_dataset(scenes, cfg.features, cfg.road_variant, cfg.tile_size);
  const Split split = split_dataset(data.ids, cfg.train_fraction, cfg.train.seed);
  {
    std::string s;
    for (const auto& id : split.train) s += "train " + id + "\n";
    for (const auto& id : split.test) s += "test " + id + "\n";
    write_text(out_dir / "split.txt", s);
  }
  say("training on " + std::to_string(split.train.size()) + " tiles, testing on " + std::to_string(split.test.size()));

  auto outcome = run_experiment(data, split, cfg.topology, cfg.train, [&](const EpochRecord& r) {
    std::ostringstream os;
    os << "epoch " << r.epoch << " loss " << r.loss << " lr " << r.lr;
    say(os.str());
  });
  save_weights(outcome.training.weights, out_dir / "weights.wts");
  write_history_csv(outcome.training.history, out_dir / "history.csv");
  for (std::size_t i = 0; i < outcome.test_ids.size(); ++i)
    write_raster(outcome.predictions[i], out_dir / "pred" / (outcome.test_ids[i] + ".srf"));
  write_metrics_csv(outcome.metrics, out_dir / "metrics.csv");
  return outcome;
}

BenchReport bench_throughput(const Network& net, const WeightStore& w, int side, int reps) {
  if (reps < 1) throw ConfigError("bench needs at least one repetition");
  net.check_input_size(side, side);
  FeatureMap<float> x(net.input_channels(), side, side);
  for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] = static_cast<float>((i * 2654435761u) % 1000) / 1000.0f;
  (void)forward_sample(net, w, x);  // warm-up, not timed

  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) (void)forward_sample(net, w, x);
  const auto t1 = std::chrono::steady_clock::now();

  BenchReport b;
  b.reps = reps;
  b.side = side;
  b.wall_s = std::chrono::duration<double>(t1 - t0).count();
  b.macs_per_px = net.macs_per_pixel();
  b.mpx_per_s = static_cast<double>(reps) * side * side / b.wall_s / 1e6;
  b.mac_per_s = b.mpx_per_s * 1e6 * b.macs_per_px;
  return b;
}

double estimated_mpx_per_s(double mac_per_s, double macs_per_px) {
  if (!(macs_per_px > 0.0)) throw ConfigError("MACs per pixel must be positive");
  return mac_per_s / macs_per_px / 1e6;
}

}  // namespace hrsar
