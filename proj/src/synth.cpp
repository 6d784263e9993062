#include "hrsar/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hrsar/rng.hpp"

namespace hrsar {

void SceneSpec::validate() const {
  if (width < 1 || height < 1) throw ConfigError("scene: width and height must be positive");
  if (flights != 1 && flights != 2) throw ConfigError("scene: flights must be 1 or 2");
  if (channels < 1) throw ConfigError("scene: channels must be positive");
  if (building_count < 0 || road_count < 0) throw ConfigError("scene: feature counts must be non-negative");
  if (!(building_min > 0.0) || building_max < building_min) throw ConfigError("scene: bad building size range");
  if (road_count > 0 && road_ranks.empty()) throw ConfigError("scene: road_ranks is empty");
  if (illumination != 1 && illumination != -1) throw ConfigError("scene: illumination must be +1 or -1");
  if (layover_px < 0.0 || shadow_px < 0.0) throw ConfigError("scene: layover and shadow extents must be >= 0");
  if (looks < 1) throw ConfigError("scene: looks must be at least 1");
  for (double r : {refl_background, refl_building, refl_layover, refl_shadow, refl_road})
    if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("scene: reflectivities must be finite and >= 0");
  if (!(jitter_sigma_px >= 0.0)) throw ConfigError("scene: jitter sigma must be >= 0");
  if (!(dropout >= 0.0 && dropout <= 1.0)) throw ConfigError("scene: dropout must lie in [0, 1]");
}

namespace {

struct Footprint {
  Polygon poly;
  Point center;
  double radius;
};

Polygon rotated_rect(Point c, double w, double h, double angle) {
  const double ca = std::cos(angle), sa = std::sin(angle);
  Ring ring;
  for (auto [u, v] : {std::pair{-0.5, -0.5}, {0.5, -0.5}, {0.5, 0.5}, {-0.5, 0.5}}) {
    const double dx = u * w, dy = v * h;
    ring.push_back({c.x + dx * ca - dy * sa, c.y + dx * sa + dy * ca});
  }
  return Polygon{{ring}};
}

std::vector<Road> make_roads(const SceneSpec& s, CounterRng& rng) {
  std::vector<Road> roads;
  const double W = static_cast<double>(s.width), H = static_cast<double>(s.height);
  for (int k = 0; k < s.road_count; ++k) {
    Road r;
    r.rank = s.road_ranks[rng.below(s.road_ranks.size())];
    const bool horizontal = (k % 2) == 0;
    const double along = horizontal ? W : H;
    const double across = horizontal ? H : W;
    const double a0 = rng.uniform(0.1, 0.9) * across;
    const double a1 = std::clamp(a0 + rng.uniform(-0.15, 0.15) * across, 0.05 * across, 0.95 * across);
    const double mid = std::clamp(0.5 * (a0 + a1) + rng.uniform(-0.1, 0.1) * across, 0.0, across);
    const double margin = 0.05 * along + 8.0;
    const double ts[3] = {-margin, 0.5 * along, along + margin};
    const double as[3] = {a0, mid, a1};
    for (int i = 0; i < 3; ++i) r.line.push_back(horizontal ? Point{ts[i], as[i]} : Point{as[i], ts[i]});
    roads.push_back(std::move(r));
  }
  return roads;
}

std::vector<Footprint> make_buildings(const SceneSpec& s, const std::vector<Road>& roads,
                                      const std::vector<double>& road_half_max, CounterRng& rng) {
  std::vector<Footprint> out;
  const double W = static_cast<double>(s.width), H = static_cast<double>(s.height);
  for (int k = 0; k < s.building_count; ++k) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      const double bw = rng.uniform(s.building_min, s.building_max);
      const double bh = rng.uniform(s.building_min, s.building_max);
      const double angle = rng.uniform(-s.max_rotation_rad, s.max_rotation_rad);
      const Point c{rng.uniform(0.0, W), rng.uniform(0.0, H)};
      const double radius = 0.5 * std::hypot(bw, bh);
      const double clearance = 2.0 + s.shadow_px;
      bool ok = true;
      for (std::size_t r = 0; r < roads.size() && ok; ++r)
        ok = distance_to_polyline(roads[r].line, c) > radius + road_half_max[r] + clearance;
      for (const auto& f : out) {
        if (!ok) break;
        ok = std::hypot(f.center.x - c.x, f.center.y - c.y) > f.radius + radius + clearance;
      }
      if (!ok) continue;
      out.push_back({rotated_rect(c, bw, bh, angle), c, radius});
      break;
    }
  }
  return out;
}

// Reflectivity of one flight: background, road strips, then buildings with a bright stripe
// along the edge facing the sensor and a shadow behind the far edge.
std::vector<float> reflectivity(const SceneSpec& s, const std::vector<Road>& roads,
                                const std::vector<double>& road_half, const std::vector<Footprint>& buildings,
                                int look_dir) {
  const std::uint64_t W = s.width, H = s.height;
  std::vector<float> refl(W * H, static_cast<float>(s.refl_background));
  for (std::size_t r = 0; r < roads.size(); ++r) {
    const auto box = bounding_box(roads[r].line);
    const double h = road_half[r];
    const auto y0 = static_cast<std::int64_t>(std::max(0.0, std::floor(box.y0 - h)));
    const auto y1 = static_cast<std::int64_t>(std::min<double>(H, std::ceil(box.y1 + h)));
    const auto x0 = static_cast<std::int64_t>(std::max(0.0, std::floor(box.x0 - h)));
    const auto x1 = static_cast<std::int64_t>(std::min<double>(W, std::ceil(box.x1 + h)));
    for (std::int64_t y = y0; y < y1; ++y)
      for (std::int64_t x = x0; x < x1; ++x)
        if (distance_to_polyline(roads[r].line, {x + 0.5, y + 0.5}) <= h)
          refl[y * W + x] = static_cast<float>(s.refl_road);
  }

  std::vector<std::uint8_t> mask(W * H, 0);
  for (const auto& b : buildings) fill_polygon(b.poly, W, H, mask);

  const auto layover = static_cast<std::int64_t>(std::lround(s.layover_px));
  const auto shadow = static_cast<std::int64_t>(std::lround(s.shadow_px));
  for (std::uint64_t y = 0; y < H; ++y) {
    const std::uint8_t* row = &mask[y * W];
    // Distance (in px, along the look direction) since the last building pixel, and since the
    // last non-building pixel.
    std::int64_t since_building = shadow + 1, since_open = layover + 1;
    for (std::uint64_t i = 0; i < W; ++i) {
      const std::uint64_t x = look_dir > 0 ? i : W - 1 - i;
      float& v = refl[y * W + x];
      if (row[x]) {
        ++since_open;
        since_building = 0;
        v = static_cast<float>(since_open <= layover ? s.refl_layover : s.refl_building);
      } else {
        since_open = 0;
        ++since_building;
        if (since_building <= shadow) v = static_cast<float>(s.refl_shadow);
      }
    }
  }
  return refl;
}

AnnotationSet perturb(const AnnotationSet& a, const SceneSpec& s, CounterRng& rng) {
  AnnotationSet b;
  b.source = AnnotationSource::Swisstopo;
  auto offset = [&]() { return Point{s.jitter_sigma_px * rng.normal(), s.jitter_sigma_px * rng.normal()}; };
  for (const auto& poly : a.buildings) {
    const bool drop = rng.uniform() < s.dropout;
    const Point d = offset();
    if (drop) continue;
    Polygon p = poly;
    for (auto& ring : p.rings)
      for (auto& v : ring) v = {v.x + d.x, v.y + d.y};
    b.buildings.push_back(std::move(p));
  }
  for (const auto& road : a.roads) {
    const bool drop = rng.uniform() < s.dropout;
    const Point d = offset();
    if (drop) continue;
    Road r = road;
    for (auto& v : r.line) v = {v.x + d.x, v.y + d.y};
    b.roads.push_back(std::move(r));
  }
  return b;
}

}  // namespace

SyntheticScene generate_scene(const SceneSpec& spec, const RoadWidthTable& widths) {
  spec.validate();
  CounterRng geo(spec.seed, 1);
  const auto roads = make_roads(spec, geo);
  std::vector<double> half_painted, half_max;
  for (const auto& r : roads) {
    const auto w = widths.lookup(normalize_rank(r.rank));
    const double px = 1.0 / widths.resolution_m;
    half_painted.push_back(0.5 * geo.uniform(w.min_m, w.max_m) * px);
    half_max.push_back(0.5 * w.max_m * px);
  }
  const auto buildings = make_buildings(spec, roads, half_max, geo);

  SyntheticScene scene;
  scene.osm.source = AnnotationSource::Osm;
  scene.osm.roads = roads;
  for (const auto& b : buildings) scene.osm.buildings.push_back(b.poly);
  CounterRng jitter(spec.seed, 2);
  scene.swisstopo = perturb(scene.osm, spec, jitter);

  scene.reflectivity = RealRaster(spec.width, spec.height, static_cast<std::uint32_t>(spec.flights));
  for (int f = 1; f <= spec.flights; ++f) {
    const int dir = f == 1 ? spec.illumination : -spec.illumination;
    const auto refl = reflectivity(spec, roads, half_painted, buildings, dir);
    std::copy(refl.begin(), refl.end(), scene.reflectivity.channel(f - 1).begin());

    ComplexRaster rec(spec.width, spec.height, static_cast<std::uint32_t>(spec.channels));
    rec.recording_id = f;
    for (int c = 0; c < spec.channels; ++c) {
      CounterRng noise(spec.seed, 0x100 + 0x10 * static_cast<std::uint64_t>(f) + static_cast<std::uint64_t>(c));
      auto plane = rec.channel(static_cast<std::uint32_t>(c));
      for (std::size_t i = 0; i < plane.size(); ++i) {
        double speckle = 0.0;
        for (int l = 0; l < spec.looks; ++l) speckle += noise.exponential();
        speckle /= spec.looks;
        const double mag = std::sqrt(refl[i] * speckle);
        // u in [0, 1) maps to a phase in (-pi, pi].
        const double phase = std::numbers::pi * (1.0 - 2.0 * noise.uniform());
        plane[i] = std::complex<float>(static_cast<float>(mag * std::cos(phase)),
                                       static_cast<float>(mag * std::sin(phase)));
      }
    }
    scene.recordings.push_back(std::move(rec));
  }
  return scene;
}

}  // namespace hrsar
