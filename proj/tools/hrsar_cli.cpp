// Command-line front end: one subcommand per pipeline stage plus the experiment grid.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "hrsar/pipeline.hpp"

namespace fs = std::filesystem;
using namespace hrsar;

namespace {

void info(const std::string& msg) { std::cerr << "[hrsar] " << msg << '\n'; }

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    // "1-4" ranges are accepted as a shorthand.
    const auto dash = tok.find('-');
    try {
      if (dash != std::string::npos && dash > 0) {
        const int a = std::stoi(tok.substr(0, dash)), b = std::stoi(tok.substr(dash + 1));
        for (int v = a; v <= b; ++v) out.push_back(v);
      } else {
        out.push_back(std::stoi(tok));
      }
    } catch (const std::exception&) {
      throw ConfigError("cannot parse integer list '" + s + "'");
    }
  }
  return out;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg = path.empty() ? RunConfig{} : RunConfig::load(path);
  if (path.empty()) cfg.topology.input_channels = static_cast<int>(cfg.features.plane_count());
  for (const auto& o : overrides) cfg.apply_override(o);
  cfg.validate();
  return cfg;
}

void save_resolved(const RunConfig& cfg, const fs::path& dir) {
  if (!dir.empty()) fs::create_directories(dir);
  write_text(dir / "config.resolved.toml", to_toml(cfg.to_json()));
}

fs::path dir_of(const fs::path& file) {
  auto p = file.parent_path();
  return p.empty() ? fs::path(".") : p;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty() && line[0] != '#') out.push_back(line);
  }
  return out;
}

Split read_split(const fs::path& path) {
  Split s;
  for (const auto& line : read_lines(path)) {
    std::istringstream ls(line);
    std::string which, id;
    ls >> which >> id;
    if (which == "train")
      s.train.push_back(id);
    else if (which == "test")
      s.test.push_back(id);
    else
      throw ConfigError(path.string() + ": expected 'train <id>' or 'test <id>', got '" + line + "'");
  }
  return s;
}

std::string split_text(const Split& s) {
  std::string out;
  for (const auto& id : s.train) out += "train " + id + "\n";
  for (const auto& id : s.test) out += "test " + id + "\n";
  return out;
}

template <typename R>
void write_tiles(const R& r, std::uint64_t size, const fs::path& out_dir) {
  auto [tiles, index] = tile(r, size);
  nlohmann::json idx;
  idx["tile_size"] = index.tile_size;
  idx["raster_width"] = index.raster_width;
  idx["raster_height"] = index.raster_height;
  idx["rows"] = index.rows;
  idx["cols"] = index.cols;
  idx["tiles"] = nlohmann::json::array();
  for (std::size_t k = 0; k < tiles.size(); ++k) {
    const auto& e = index.tiles[k];
    const auto name = TileIndex::tile_name(e);
    write_raster(tiles[k], out_dir / (name + ".srf"));
    idx["tiles"].push_back({{"id", name}, {"row", e.row}, {"col", e.col}, {"x0", e.x0}, {"y0", e.y0}});
  }
  write_text(out_dir / "index.json", idx.dump(2) + "\n");
  info("wrote " + std::to_string(tiles.size()) + " tile(s) to " + out_dir.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hrsar: SAR urban-scene segmentation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto add_config = [&](CLI::App* sub, bool required = false) {
    auto* opt = sub->add_option("--config", config_path, "run configuration (TOML)");
    if (required) opt->required();
    sub->add_option("--set", overrides, "override a setting, e.g. --set train.max_epochs=20");
  };

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic scene (SRF rasters + GeoJSON annotations)");
  std::string spec_path, out_dir;
  int scene_count = 1;
  synth->add_option("--spec", spec_path, "run configuration whose [scene] table describes the scene");
  synth->add_option("--set", overrides, "override a setting, e.g. --set scene.seed=7");
  synth->add_option("--out-dir", out_dir, "output directory")->required();
  synth->add_option("--count", scene_count, "number of scenes (seeds scene.seed, scene.seed+1, ...)");

  // features
  auto* feat = app.add_subcommand("features", "build a feature stack from complex recordings");
  std::string flights_s = "1,2", channels_s = "1,2,3,4", pair_s = "1,4", feat_out;
  bool mag = false, cossin = false, reim = false, pdiff = false;
  double percentile = 0.99, range_db = 25.0;
  std::vector<std::string> feat_in;
  feat->add_option("--flights", flights_s, "flights, e.g. 1,2");
  feat->add_option("--channels", channels_s, "channels, e.g. 1,2,3,4 or 1-4");
  feat->add_flag("--mag", mag, "dB-normalized magnitude");
  feat->add_flag("--phase-cossin", cossin, "cos/sin of the phase");
  feat->add_flag("--phase-reim", reim, "magnitude rotated by the phase");
  feat->add_flag("--phase-diff", pdiff, "phase difference of the channel pair");
  feat->add_option("--diff-pair", pair_s, "channel pair for the phase difference");
  feat->add_option("--percentile", percentile, "clamp percentile of the dB magnitude");
  feat->add_option("--range-db", range_db, "dB window below the percentile");
  feat->add_option("--in", feat_in, "complex SRF recordings (one per flight)")->required();
  feat->add_option("--out", feat_out, "output multi-channel f32 SRF")->required();

  // labels
  auto* labels = app.add_subcommand("labels", "rasterize and fuse the two annotation sources");
  std::string osm_path, swiss_path, variant_s = "main-osm", widths_path, size_s, labels_out;
  labels->add_option("--osm", osm_path, "OSM GeoJSON")->required();
  labels->add_option("--swisstopo", swiss_path, "swisstopo GeoJSON")->required();
  labels->add_option("--variant", variant_s, "main-osm | all-osm | agree");
  labels->add_option("--widths", widths_path, "road width table (rank = min_m, max_m)");
  labels->add_option("--size", size_s, "grid size WxH")->required();
  labels->add_option("--out", labels_out, "output u8 label SRF")->required();

  // tile
  auto* tilec = app.add_subcommand("tile", "cut a raster into square tiles");
  std::string tile_in;
  std::uint64_t tile_size = 1024;
  tilec->add_option("--input", tile_in, "any SRF raster")->required();
  tilec->add_option("--size", tile_size, "tile edge in pixels");
  tilec->add_option("--out-dir", out_dir, "output directory")->required();

  // split
  auto* splitc = app.add_subcommand("split", "seeded train/test split of tile ids");
  std::string ids_s, split_out;
  double fraction = 0.74;
  std::uint64_t seed = 1;
  splitc->add_option("--ids", ids_s, "file with one id per line, or a comma-separated list")->required();
  splitc->add_option("--fraction", fraction, "train fraction in (0, 1)");
  splitc->add_option("--seed", seed, "shuffle seed");
  splitc->add_option("--out", split_out, "split file (default: stdout)");

  // train
  auto* trainc = app.add_subcommand("train", "train the network on feature/label tiles");
  std::string feat_dir, lab_dir, split_path, weights_out;
  std::optional<std::uint64_t> train_seed;
  trainc->add_option("--features-dir", feat_dir, "directory of <id>.srf feature tiles")->required();
  trainc->add_option("--labels-dir", lab_dir, "directory of <id>.srf label tiles")->required();
  trainc->add_option("--split", split_path, "split file from the split subcommand")->required();
  add_config(trainc);
  trainc->add_option("--seed", train_seed, "training seed (overrides train.seed)");
  trainc->add_option("--out", weights_out, "output WTS weights")->required();

  // infer
  auto* inferc = app.add_subcommand("infer", "predict a label raster");
  std::string weights_in, infer_features, infer_out;
  add_config(inferc);
  inferc->add_option("--weights", weights_in, "WTS weights")->required();
  inferc->add_option("--features", infer_features, "feature SRF")->required();
  inferc->add_option("--out", infer_out, "output label SRF")->required();

  // evaluate
  auto* evalc = app.add_subcommand("evaluate", "confusion matrix and PA/MA/mIoU");
  std::string pred_path, target_path, report_path;
  evalc->add_option("--pred", pred_path, "predicted label SRF")->required();
  evalc->add_option("--target", target_path, "target label SRF")->required();
  evalc->add_option("--report", report_path, "CSV report");

  // budget
  auto* budget = app.add_subcommand("budget", "parameter and MAC counts of the topology");
  add_config(budget);
  double gpu_mac_s = 6.7e12, ref_macs = 13.0e3;
  budget->add_option("--mac-rate", gpu_mac_s, "MAC/s of the reference accelerator");
  budget->add_option("--reference-macs", ref_macs, "reference MACs per pixel for the estimate");

  // bench
  auto* bench = app.add_subcommand("bench", "measure forward throughput on this machine");
  add_config(bench);
  int bench_size = 1024, bench_reps = 20;
  std::string bench_weights;
  bench->add_option("--size", bench_size, "tile edge in pixels");
  bench->add_option("--reps", bench_reps, "timed repetitions");
  bench->add_option("--weights", bench_weights, "WTS weights (default: seeded init)");

  // grid
  auto* grid = app.add_subcommand("grid", "run the feature-selection experiment grid on synthetic data");
  add_config(grid);
  std::string rows_s, grid_out;
  int grid_scenes = 10;
  grid->add_option("--rows", rows_s, "experiment ids, e.g. 1,12,16 (default: all 17)");
  grid->add_option("--scenes", grid_scenes, "number of synthetic scenes");
  grid->add_option("--out", grid_out, "CSV report")->required();

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "synth -> features -> labels -> tile -> split -> train -> infer -> evaluate");
  add_config(pipe);
  int pipe_scenes = 10;
  pipe->add_option("--scenes", pipe_scenes, "number of synthetic scenes");
  pipe->add_option("--out-dir", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      RunConfig cfg = load_run_config(spec_path, overrides);
      const auto scenes = generate_scenes(cfg.scene, scene_count);
      fs::create_directories(out_dir);
      for (std::size_t k = 0; k < scenes.size(); ++k) {
        const fs::path dir = scene_count == 1 ? fs::path(out_dir) : fs::path(out_dir) / ("scene" + std::to_string(k));
        fs::create_directories(dir);
        for (const auto& r : scenes[k].recordings)
          write_raster(r, dir / ("flight" + std::to_string(r.recording_id) + ".srf"));
        write_annotations(scenes[k].osm, dir / "osm.geojson");
        write_annotations(scenes[k].swisstopo, dir / "swisstopo.geojson");
      }
      save_resolved(cfg, out_dir);
      info("wrote " + std::to_string(scenes.size()) + " scene(s) to " + out_dir);
    } else if (*feat) {
      FeatureConfig fc;
      fc.flights = parse_int_list(flights_s);
      fc.channels = parse_int_list(channels_s);
      fc.use_magnitude = mag;
      fc.use_phase_cos_sin = cossin;
      fc.use_phase_re_im = reim;
      fc.use_phase_diff = pdiff;
      const auto pair = parse_int_list(pair_s);
      if (pair.size() != 2) throw ConfigError("--diff-pair needs two channels");
      fc.diff_pair = {pair[0], pair[1]};
      fc.percentile = percentile;
      fc.range_db = range_db;
      std::vector<ComplexRaster> recs;
      for (std::size_t i = 0; i < feat_in.size(); ++i) {
        auto r = read_complex_raster(feat_in[i]);
        r.recording_id = static_cast<int>(i) + 1;
        recs.push_back(std::move(r));
      }
      // Inputs are taken in flight order unless a single flight other than 1 is requested.
      if (recs.size() == 1 && fc.flights.size() == 1) recs[0].recording_id = fc.flights[0];
      const auto stack = build_feature_stack(recs, fc);
      write_raster(stack.to_raster(), feat_out);
      RunConfig resolved;
      resolved.features = fc;
      resolved.topology.input_channels = static_cast<int>(fc.plane_count());
      save_resolved(resolved, dir_of(feat_out));
      std::string tags;
      for (const auto& t : stack.tags) tags += (tags.empty() ? "" : " ") + t.label();
      info(std::to_string(stack.planes.size()) + " planes: " + tags);
    } else if (*labels) {
      const auto x = size_s.find('x');
      if (x == std::string::npos) throw ConfigError("--size must look like WxH");
      const std::uint64_t w = std::stoull(size_s.substr(0, x)), h = std::stoull(size_s.substr(x + 1));
      const auto table = widths_path.empty() ? RoadWidthTable::defaults() : RoadWidthTable::load(widths_path);
      const auto lab = make_labels(read_annotations(osm_path), read_annotations(swiss_path), w, h, table,
                                   parse_road_variant(variant_s));
      write_raster(lab, labels_out);
      std::uint64_t counts[4] = {0, 0, 0, 0};
      for (auto v : lab.data) ++counts[v == kUnlabeled ? 3 : v];
      info("other " + std::to_string(counts[0]) + ", building " + std::to_string(counts[1]) + ", road " +
           std::to_string(counts[2]) + ", unlabeled " + std::to_string(counts[3]));
    } else if (*tilec) {
      fs::create_directories(out_dir);
      std::visit([&](const auto& r) { write_tiles(r, tile_size, out_dir); }, read_raster(tile_in));
    } else if (*splitc) {
      std::vector<std::string> ids;
      if (fs::is_regular_file(ids_s)) {
        ids = read_lines(ids_s);
      } else {
        std::stringstream ss(ids_s);
        std::string tok;
        while (std::getline(ss, tok, ','))
          if (!tok.empty()) ids.push_back(tok);
      }
      const auto s = split_dataset(ids, fraction, seed);
      if (split_out.empty())
        std::cout << split_text(s);
      else
        write_text(split_out, split_text(s));
      info(std::to_string(s.train.size()) + " train, " + std::to_string(s.test.size()) + " test");
    } else if (*trainc) {
      RunConfig cfg = load_run_config(config_path, overrides);
      if (train_seed) cfg.train.seed = *train_seed;
      const auto split = read_split(split_path);
      std::vector<TrainSample> samples;
      for (const auto& id : split.train) {
        TrainSample s{read_real_raster(fs::path(feat_dir) / (id + ".srf")),
                      read_label_raster(fs::path(lab_dir) / (id + ".srf"))};
        samples.push_back(std::move(s));
      }
      if (!samples.empty() && static_cast<int>(samples[0].features.channels) != cfg.topology.input_channels)
        throw ConfigError("feature tiles have " + std::to_string(samples[0].features.channels) +
                          " channels but the config selects " + std::to_string(cfg.topology.input_channels));
      const auto result = train(samples, cfg.topology, cfg.train, [](const EpochRecord& r) {
        std::ostringstream os;
        os << "epoch " << r.epoch << " loss " << std::setprecision(6) << r.loss << " lr " << r.lr;
        info(os.str());
      });
      save_weights(result.weights, weights_out);
      write_history_csv(result.history, dir_of(weights_out) / "history.csv");
      save_resolved(cfg, dir_of(weights_out));
      info("saved " + weights_out);
    } else if (*inferc) {
      RunConfig cfg = load_run_config(config_path, overrides);
      const Network net = Network::build(cfg.topology);
      const auto w = load_weights(weights_in);
      net.check_params(w);
      const auto pred = predict(net, w, read_real_raster(infer_features));
      write_raster(pred, infer_out);
      save_resolved(cfg, dir_of(infer_out));
    } else if (*evalc) {
      const auto m = metrics(confusion(read_label_raster(pred_path), read_label_raster(target_path)));
      const auto csv = metrics_csv(m);
      if (report_path.empty())
        std::cout << csv;
      else
        write_text(report_path, csv);
      std::ostringstream os;
      os << std::fixed << std::setprecision(4) << "PA " << m.pa << "  MA " << m.ma << "  mIoU " << m.miou;
      info(os.str());
    } else if (*budget) {
      RunConfig cfg = load_run_config(config_path, overrides);
      const Network net = Network::build(cfg.topology);
      const auto params = net.param_count();
      const auto macs = net.macs_per_pixel();
      std::cout << "parameters: " << params << '\n';
      std::cout << std::fixed << std::setprecision(1) << "macs_per_px: " << macs << '\n';
      std::cout << std::setprecision(2) << "reference_estimate_mpx_s: " << estimated_mpx_per_s(gpu_mac_s, ref_macs)
                << "  (" << std::scientific << std::setprecision(2) << gpu_mac_s << " MAC/s / " << ref_macs
                << " MAC/px)\n";
      std::cout << std::fixed << std::setprecision(2)
                << "this_topology_estimate_mpx_s: " << estimated_mpx_per_s(gpu_mac_s, macs) << '\n';
    } else if (*bench) {
      RunConfig cfg = load_run_config(config_path, overrides);
      const Network net = Network::build(cfg.topology);
      const auto w = bench_weights.empty() ? net.init_weights(cfg.train.seed) : load_weights(bench_weights);
      const auto r = bench_throughput(net, w, bench_size, bench_reps);
      std::cout << std::fixed << std::setprecision(3) << "size: " << r.side << "x" << r.side << "  reps: " << r.reps
                << "\nwall_s: " << r.wall_s << "\nmpx_per_s: " << r.mpx_per_s << "\nmacs_per_px: " << r.macs_per_px
                << std::scientific << "\nmac_per_s: " << r.mac_per_s << '\n';
    } else if (*grid) {
      RunConfig cfg = load_run_config(config_path, overrides);
      auto rows = table1_grid();
      if (!rows_s.empty()) {
        const auto want = parse_int_list(rows_s);
        std::vector<ExperimentRow> picked;
        for (int id : want) {
          if (id < 1 || id > static_cast<int>(rows.size())) throw ConfigError("no experiment " + std::to_string(id));
          picked.push_back(rows[id - 1]);
        }
        rows = std::move(picked);
      }
      const auto scenes = generate_scenes(cfg.scene, grid_scenes);
      const auto results = run_experiment_grid(rows, cfg, scenes, info);
      write_text(grid_out, grid_csv(results));
      save_resolved(cfg, dir_of(grid_out));
      for (const auto& r : results)
        if (!r.ok) return 1;
    } else if (*pipe) {
      RunConfig cfg = load_run_config(config_path, overrides);
      const auto out = run_pipeline(cfg, pipe_scenes, out_dir, info);
      std::ostringstream os;
      os << std::fixed << std::setprecision(4) << "test PA " << out.metrics.pa << "  MA " << out.metrics.ma
         << "  mIoU " << out.metrics.miou;
      info(os.str());
    }
  } catch (const std::exception& e) {
    std::cerr << "hrsar: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
