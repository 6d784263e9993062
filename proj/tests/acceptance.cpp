// Acceptance checks 1-10. Prints one PASS/FAIL line per criterion and exits non-zero when
// any selected criterion fails. Usage: hrsar_acceptance [criterion numbers...]

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "hrsar/pipeline.hpp"
#include "oracles.hpp"

using namespace hrsar;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 1 ------------------------------------------------------------------------------------------
Outcome budget() {
  const auto t0 = Clock::now();
  const TopologyConfig cfg;
  const auto params = count_params(cfg);
  const double macs = count_macs_per_pixel(cfg);
  const double t = seconds_since(t0);
  const bool ok = params >= 47000 && params <= 79000 && macs >= 9100 && macs <= 16900 && t < 1.0;
  return {ok, "params " + std::to_string(params) + ", MACs/px " + fmt("%.1f", macs) + ", " + fmt("%.3f s", t)};
}

// 2 ------------------------------------------------------------------------------------------
Outcome throughput() {
  const double est = estimated_mpx_per_s(6.7e12, 13.0e3);
  const Network net = Network::build(TopologyConfig{});
  const auto b = bench_throughput(net, net.init_weights(1), 256, 3);
  const bool exact = b.mac_per_s == b.mpx_per_s * 1e6 * b.macs_per_px;
  const bool ok = std::abs(est - 515.0) <= 1.0 && exact && b.mpx_per_s > 0.0;
  return {ok, "estimate " + fmt("%.2f Mpx/s", est) + ", local " + fmt("%.3f Mpx/s", b.mpx_per_s) + " = " +
                  fmt("%.3e MAC/s", b.mac_per_s)};
}

// 3 ------------------------------------------------------------------------------------------
Outcome gradients() {
  const auto t0 = Clock::now();
  CounterRng rng(0x3a);
  std::size_t checked = 0, failed = 0;
  double worst = 0.0;
  std::string first;
  auto run = [&](const Network& net, int h, int w, const std::string& kind) {
    const auto r = oracle::check_network_gradients(net, rng, h, w, 25);
    checked += r.checked;
    failed += r.failed;
    worst = std::max(worst, r.worst);
    if (r.failed && first.empty()) first = kind + ": " + r.first_failure;
  };
  const int configs = 5;
  for (int t = 0; t < configs; ++t) {
    const int ci = 1 + static_cast<int>(rng.below(3)), co = 1 + static_cast<int>(rng.below(3));
    {  // dilated 3x3, stride 1
      ConvSpec s;
      s.in_channels = ci;
      s.out_channels = co;
      s.dilation = 1 + static_cast<int>(rng.below(4));
      s.padding = s.dilation;
      Network n(ci);
      n.add_conv("conv3", 0, s, true);
      run(n, 9, 11, "conv3x3");
    }
    {  // strided 3x3
      ConvSpec s;
      s.in_channels = ci;
      s.out_channels = co;
      s.stride = 2;
      s.padding = 1;
      Network n(ci);
      n.add_conv("down", 0, s, true);
      run(n, 8, 10, "conv3x3/s2");
    }
    {  // 1x1
      ConvSpec s;
      s.in_channels = ci;
      s.out_channels = co;
      s.kernel_h = s.kernel_w = 1;
      s.padding = 0;
      Network n(ci);
      n.add_conv("fuse", 0, s, t % 2 == 0);
      run(n, 6, 7, "conv1x1");
    }
    {  // transposed 2x2/s2
      ConvSpec s;
      s.transposed = true;
      s.in_channels = ci;
      s.out_channels = co;
      s.kernel_h = s.kernel_w = 2;
      s.stride = 2;
      s.padding = 0;
      Network n(ci);
      n.add_conv("up", 0, s, true);
      run(n, 5, 6, "convT2x2/s2");
    }
    {  // concat (inside a dilated block)
      Network n(ci);
      add_dilated_block(n, "blk", 0, ci, {1, 2, 4});
      run(n, 8, 8, "dilated block/concat");
    }
    {  // instance norm
      ConvSpec s;
      s.in_channels = ci;
      s.out_channels = co;
      s.padding = 1;
      Network n(ci);
      const int c = n.add_conv("c", 0, s, false);
      n.add_instance_norm("c.norm", c, true);
      run(n, 6, 6, "instance norm");
    }
    {  // the whole encoder-decoder at toy width
      TopologyConfig cfg;
      cfg.input_channels = ci;
      cfg.width = 3;
      cfg.encoder_levels = 2;
      cfg.refine_from_level = 1;
      const Network n = Network::build(cfg);
      run(n, 8, 8, "network");
    }
  }
  // loss layer
  for (int t = 0; t < configs; ++t) {
    Tensor4<double> z(1, 3, 3, 3);
    for (auto& v : z.data) v = rng.uniform(-2, 2);
    LabelRaster l(3, 3, 1);
    for (auto& v : l.data) v = static_cast<std::uint8_t>(std::array{0, 1, 2, 255}[rng.below(4)]);
    l.data[0] = 1;
    const LabelRaster ls[] = {l};
    const double w[] = {rng.uniform(0.2, 2), rng.uniform(0.2, 2), rng.uniform(0.2, 2)};
    const auto r = ce_loss<double>(z, ls, w);
    for (std::size_t i = 0; i < z.data.size(); ++i) {
      auto zp = z, zm = z;
      zp.data[i] += 1e-6;
      zm.data[i] -= 1e-6;
      const double num = (ce_loss<double>(zp, ls, w).loss - ce_loss<double>(zm, ls, w).loss) / 2e-6;
      ++checked;
      if (!oracle::close_rel(r.grad.data[i], num, 1e-4, 1e-7)) {
        if (failed++ == 0) first = "loss";
      }
    }
  }
  const double t = seconds_since(t0);
  return {failed == 0 && t < 120.0, std::to_string(checked) + " entries, " + std::to_string(failed) +
                                        " mismatches, worst rel " + fmt("%.2e", worst) + ", " + fmt("%.1f s", t) +
                                        (first.empty() ? "" : " [" + first + "]")};
}

// 4 ------------------------------------------------------------------------------------------
Outcome adjoint() {
  const auto t0 = Clock::now();
  CounterRng rng(0x4a);
  struct Pair {
    int k, s, p, d;
  };
  // Every (kernel, stride) used by the topology: dilated 3x3/s1, 3x3/s2 downsampling,
  // 1x1 fusion and head, 2x2/s2 upsampling.
  const Pair pairs[] = {{3, 1, 1, 1}, {3, 1, 2, 2}, {3, 1, 4, 4}, {3, 2, 1, 1}, {1, 1, 0, 1}, {2, 2, 0, 1}};
  double worst = 0.0;
  int trials = 0;
  for (const auto& pr : pairs)
    for (int t = 0; t < 100; ++t) {
      ConvSpec fwd;
      fwd.in_channels = 1 + static_cast<int>(rng.below(5));
      fwd.out_channels = 1 + static_cast<int>(rng.below(5));
      fwd.kernel_h = fwd.kernel_w = pr.k;
      fwd.stride = pr.s;
      fwd.padding = pr.p;
      fwd.dilation = pr.d;
      fwd.bias = false;
      const int h = 2 * (3 + static_cast<int>(rng.below(6))), w = 2 * (3 + static_cast<int>(rng.below(20)));
      const auto [oh, ow] = fwd.output_size(h, w);
      const auto x = oracle::random_map<double>(rng, fwd.in_channels, h, w);
      const auto y = oracle::random_map<double>(rng, fwd.out_channels, oh, ow);
      const auto wt = oracle::random_vec<double>(rng, fwd.weight_count());
      const auto cx = conv2d<double>(x, fwd, wt, {});
      FeatureMap<double> ty;
      if (pr.d == 1) {
        // The transposed conv with the same buffer and geometry is the adjoint.
        ConvSpec tr = fwd;
        tr.transposed = true;
        tr.in_channels = fwd.out_channels;
        tr.out_channels = fwd.in_channels;
        const auto [th, tw] = tr.output_size(oh, ow);
        tr.output_padding = h - th;
        ty = conv2d_transposed<double>(y, tr, wt, {});
      } else {
        ty = conv2d_input_grad<double>(fwd, wt, y, h, w);  // transposed operator of the dilated conv
      }
      const double lhs = oracle::dot(cx.data, y.data), rhs = oracle::dot(x.data, ty.data);
      worst = std::max(worst, std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-12}));
      ++trials;
    }
  const double t = seconds_since(t0);
  return {worst <= 1e-4 && t < 60.0, std::to_string(trials) + " trials over 6 (kernel, stride) pairs, worst rel " +
                                         fmt("%.2e", worst) + ", " + fmt("%.2f s", t)};
}

// 5 ------------------------------------------------------------------------------------------
Outcome metrics_oracle() {
  const auto t0 = Clock::now();
  CounterRng rng(0x5a);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto target = oracle::random_labels(rng, 32, true);
    auto pred = oracle::random_labels(rng, 32, false);
    for (std::size_t i = 0; i < pred.data.size(); ++i)
      if (target.data[i] != kUnlabeled && rng.uniform() < 0.4) pred.data[i] = target.data[i];
    const auto got = metrics(confusion(pred, target));
    const auto want = oracle::brute_metrics(pred, target, 3);
    worst = std::max({worst, std::abs(got.pa - want.pa), std::abs(got.ma - want.ma), std::abs(got.miou - want.miou)});
  }
  ConfusionMatrix m(2);
  m.at(0, 0) = 3;
  m.at(0, 1) = 1;
  m.at(1, 0) = 2;
  m.at(1, 1) = 4;
  const auto ex = metrics(m);
  const bool example = std::abs(ex.pa - 0.700) <= 1e-4 && std::abs(ex.ma - 0.7083) <= 1e-4 &&
                       std::abs(ex.miou - 0.5357) <= 1e-4;
  const double t = seconds_since(t0);
  return {worst <= 1e-12 && example && t < 10.0,
          "oracle max diff " + fmt("%.1e", worst) + "; example PA " + fmt("%.4f", ex.pa) + " MA " +
              fmt("%.4f", ex.ma) + " mIoU " + fmt("%.4f", ex.miou) + ", " + fmt("%.2f s", t)};
}

// 6 ------------------------------------------------------------------------------------------
Outcome fusion() {
  CounterRng rng(0x6a);
  const std::uint64_t side = 96;
  int bad_pairs = 0;
  for (int t = 0; t < 50; ++t) {
    AnnotationSet a, b;
    b.source = AnnotationSource::Swisstopo;
    const int na = 1 + static_cast<int>(rng.below(4)), nb = 1 + static_cast<int>(rng.below(4));
    for (int k = 0; k < na; ++k) a.buildings.push_back(oracle::random_polygon(rng, side, rng.below(3) == 0));
    for (int k = 0; k < nb; ++k) b.buildings.push_back(oracle::random_polygon(rng, side, rng.below(3) == 0));
    const auto fa = building_fill(a, side, side), fb = building_fill(b, side, side);
    const auto tri = rasterize_buildings(a, b, side, side);
    std::set<std::size_t> yes, unl, inter, sym;
    for (std::size_t i = 0; i < fa.size(); ++i) {
      if (tri.data[i] == Tri::Yes) yes.insert(i);
      if (tri.data[i] == Tri::Unlabeled) unl.insert(i);
      if (fa[i] && fb[i]) inter.insert(i);
      if ((fa[i] != 0) != (fb[i] != 0)) sym.insert(i);
    }
    if (yes != inter || unl != sym) ++bad_pairs;
  }

  const auto table = RoadWidthTable::defaults();
  int bad_ranks = 0;
  for (const auto& [rank, w] : table.widths) {
    AnnotationSet osm;
    osm.roads.push_back({{{0, 60}, {120, 60}}, rank});
    const AnnotationSet sets[] = {osm};
    const auto tri = rasterize_roads(sets, 120, 120, table, RoadVariant::AllRoadsOsm);
    const double rmin = 0.5 * w.min_m / table.resolution_m, rmax = 0.5 * w.max_m / table.resolution_m;
    bool ok = true;
    for (std::uint64_t y = 0; y < 120; ++y) {
      const double d = std::abs(static_cast<double>(y) + 0.5 - 60.0);
      const Tri want = d <= rmin ? Tri::Yes : (d <= rmax ? Tri::Unlabeled : Tri::No);
      if (tri.at(0, 60, y) != want) ok = false;
    }
    if (!ok) ++bad_ranks;
  }
  return {bad_pairs == 0 && bad_ranks == 0, std::to_string(50 - bad_pairs) + "/50 building pairs exact, " +
                                                std::to_string(table.widths.size() - bad_ranks) + "/" +
                                                std::to_string(table.widths.size()) + " road ranks"};
}

// 7 ------------------------------------------------------------------------------------------
RunConfig learning_config() {
  RunConfig c;  // default net, 512^2 scenes, 256^2 tiles, 80/20 split
  c.train.max_epochs = 30;
  c.train.seed = 1;
  c.scene.seed = 1;
  return c;
}

Outcome learning(const fs::path& scratch) {
  const auto t0 = Clock::now();
  const RunConfig cfg = learning_config();
  const auto out = run_pipeline(cfg, 10, scratch / "learning", [](const std::string& m) {
    std::cerr << "  [7] " << m << '\n';
  });
  const double t = seconds_since(t0);
  const auto& h = out.training.history;
  // 10 scenes of 512^2 give 40 tiles of 256^2; the 0.8 split leaves 8 for testing.
  const bool sizes = out.test_ids.size() == 8;
  const bool loss_ok = h.size() >= 20 && h[19].loss < 0.5 * h[0].loss;
  const bool ok = sizes && loss_ok && out.metrics.pa >= 0.85 && out.metrics.miou >= 0.55;
  return {ok, "test PA " + fmt("%.4f", out.metrics.pa) + ", mIoU " + fmt("%.4f", out.metrics.miou) +
                  ", loss epoch1 " + fmt("%.4f", h.empty() ? 0.0 : h[0].loss) + " epoch20 " +
                  fmt("%.4f", h.size() >= 20 ? h[19].loss : 0.0) + ", " + std::to_string(out.test_ids.size()) +
                  " test tiles, " + fmt("%.0f s", t)};
}

// 8 ------------------------------------------------------------------------------------------
Outcome determinism(const fs::path& scratch) {
  RunConfig cfg;
  cfg.train.max_epochs = 3;
  const auto a = scratch / "det_a", b = scratch / "det_b";
  const auto ra = run_pipeline(cfg, 2, a);
  const auto rb = run_pipeline(cfg, 2, b);
  std::vector<std::string> files{"weights.wts", "metrics.csv", "history.csv", "split.txt"};
  for (const auto& id : ra.test_ids) files.push_back("pred/" + id + ".srf");
  int differing = 0;
  for (const auto& f : files)
    if (!fs::exists(a / f) || slurp(a / f) != slurp(b / f)) ++differing;
  return {differing == 0 && ra.training.weights == rb.training.weights,
          std::to_string(files.size() - differing) + "/" + std::to_string(files.size()) + " artifacts identical"};
}

// 9 ------------------------------------------------------------------------------------------
Outcome round_trips() {
  CounterRng rng(0x9a);
  int bad = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto w = 1 + rng.below(24), h = 1 + rng.below(24);
    switch (t % 3) {
      case 0: {
        RealRaster r(w, h, 1 + static_cast<std::uint32_t>(rng.below(4)));
        for (auto& v : r.data) v = static_cast<float>(rng.normal() * std::pow(10.0, rng.uniform(-30, 30)));
        if (std::get<RealRaster>(decode_srf(encode_srf(r))) != r) ++bad;
        break;
      }
      case 1: {
        ComplexRaster r(w, h, 1 + static_cast<std::uint32_t>(rng.below(4)));
        for (auto& v : r.data) v = {static_cast<float>(rng.normal()), static_cast<float>(rng.normal())};
        const auto back = std::get<ComplexRaster>(decode_srf(encode_srf(r)));
        if (back.data != r.data || back.width != r.width || back.height != r.height || back.channels != r.channels)
          ++bad;
        break;
      }
      default: {
        LabelRaster r(w, h);
        for (auto& v : r.data) v = static_cast<std::uint8_t>(std::array{0, 1, 2, 255}[rng.below(4)]);
        if (std::get<LabelRaster>(decode_srf(encode_srf(r))) != r) ++bad;
      }
    }
    WeightStore ws;
    const int tensors = 1 + static_cast<int>(rng.below(5));
    for (int k = 0; k < tensors; ++k) {
      std::vector<std::uint32_t> shape;
      const int rank = static_cast<int>(rng.below(5));
      std::size_t n = 1;
      for (int d = 0; d < rank; ++d) {
        shape.push_back(1 + static_cast<std::uint32_t>(rng.below(4)));
        n *= shape.back();
      }
      ws.add("t" + std::to_string(k) + ".w", shape, oracle::random_vec<float>(rng, n, -1e3, 1e3));
    }
    if (decode_wts(encode_wts(ws)) != ws) ++bad;
  }
  return {bad == 0, std::to_string(2000 - bad) + "/2000 SRF+WTS instances bit-exact"};
}

// 10 -----------------------------------------------------------------------------------------
Outcome feature_counts() {
  SceneSpec s;
  s.width = s.height = 32;
  s.building_count = 1;
  s.road_count = 1;
  s.building_min = 8;
  s.building_max = 12;
  const auto scene = generate_scene(s);
  int bad = 0;
  std::string counts;
  for (const auto& row : table1_grid()) {
    const auto& f = row.features;
    const auto want = oracle::plane_formula(f.flights.size(), f.channels.size(), f.use_magnitude,
                                            f.use_phase_cos_sin, f.use_phase_re_im, f.use_phase_diff);
    const auto stack = build_feature_stack(scene.recordings, f);
    if (stack.planes.size() != want || f.plane_count() != want) ++bad;
    if (row.id == 12 && want != 8) ++bad;
    counts += (counts.empty() ? "" : ",") + std::to_string(stack.planes.size());
  }
  FeatureConfig full;
  full.use_phase_cos_sin = full.use_phase_re_im = full.use_phase_diff = true;
  const auto n_full = build_feature_stack(scene.recordings, full).planes.size();
  if (n_full != 44) ++bad;
  return {bad == 0, "rows [" + counts + "], full " + std::to_string(n_full)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  const fs::path scratch = fs::temp_directory_path() / "hrsar_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"budget", budget},
      {"throughput arithmetic", throughput},
      {"gradient suite", gradients},
      {"adjoint suite", adjoint},
      {"metrics oracle", metrics_oracle},
      {"fusion properties", fusion},
      {"end-to-end learning", [&] { return learning(scratch); }},
      {"determinism", [&] { return determinism(scratch); }},
      {"format round-trips", round_trips},
      {"feature-stack counts", feature_counts},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): " << o.detail
              << std::endl;
  }
  fs::remove_all(scratch);
  return failures == 0 ? 0 : 1;
}
