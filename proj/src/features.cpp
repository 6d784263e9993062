#include "hrsar/features.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

namespace hrsar {

namespace {

double to_db(std::complex<float> z) {
  const double mag = std::hypot(static_cast<double>(z.real()), static_cast<double>(z.imag()));
  return 20.0 * std::log10(std::max(mag, kMagnitudeFloor));
}

bool is_zero(std::complex<float> z) { return z.real() == 0.0f && z.imag() == 0.0f; }

Plane blank(const ComplexPlaneView& c) { return Plane(c.width, c.height, 1); }

void check_view(const ComplexPlaneView& c) {
  if (c.values.size() != c.width * c.height) throw ShapeError("complex plane length mismatch");
}

void check_unique_sorted(const std::vector<int>& v, const char* what, int lo, int hi) {
  if (v.empty()) throw ConfigError(std::string("feature config: no ") + what + " selected");
  std::set<int> seen;
  for (int x : v) {
    if (x < lo || x > hi)
      throw ConfigError(std::string("feature config: ") + what + " index " + std::to_string(x) +
                        " out of range");
    if (!seen.insert(x).second)
      throw ConfigError(std::string("feature config: duplicate ") + what + " " + std::to_string(x));
  }
}

}  // namespace

void FeatureConfig::validate() const {
  if (!use_magnitude && !use_phase_cos_sin && !use_phase_re_im && !use_phase_diff)
    throw ConfigError("feature config: at least one feature kind must be enabled");
  check_unique_sorted(flights, "flight", 1, 255);
  check_unique_sorted(channels, "channel", 1, 255);
  if (use_phase_diff) {
    if (diff_pair.first < 1 || diff_pair.second < 1 || diff_pair.first == diff_pair.second)
      throw ConfigError("feature config: phase-difference pair must name two distinct channels");
  }
  if (!(percentile > 0.0 && percentile <= 1.0))
    throw ConfigError("feature config: percentile must lie in (0, 1]");
  if (!(range_db > 0.0)) throw ConfigError("feature config: dB range must be positive");
}

std::size_t FeatureConfig::plane_count() const noexcept {
  const std::size_t per_channel = (use_magnitude ? 1 : 0) + (use_phase_cos_sin ? 2 : 0) +
                                  (use_phase_re_im ? 2 : 0);
  return flights.size() * channels.size() * per_channel + flights.size() * (use_phase_diff ? 2 : 0);
}

std::string to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::Magnitude: return "mag";
    case FeatureKind::PhaseCos: return "cos";
    case FeatureKind::PhaseSin: return "sin";
    case FeatureKind::PhaseRe: return "re";
    case FeatureKind::PhaseIm: return "im";
    case FeatureKind::DiffCos: return "diffcos";
    case FeatureKind::DiffSin: return "diffsin";
  }
  return "?";
}

std::string PlaneTag::label() const {
  return "f" + std::to_string(flight) + "_c" + std::to_string(channel) + "_" + to_string(kind);
}

RealRaster FeatureStack::to_raster() const {
  if (planes.empty()) return {};
  const auto w = planes.front().width;
  const auto h = planes.front().height;
  RealRaster out(w, h, static_cast<std::uint32_t>(planes.size()));
  for (std::size_t i = 0; i < planes.size(); ++i) {
    if (planes[i].width != w || planes[i].height != h) throw ShapeError("feature planes differ in size");
    std::copy(planes[i].data.begin(), planes[i].data.end(), out.channel(static_cast<std::uint32_t>(i)).begin());
  }
  return out;
}

double magnitude_percentile_db(ComplexPlaneView c, double percentile) {
  check_view(c);
  if (c.values.empty()) throw ShapeError("percentile of an empty plane");
  std::vector<double> db(c.values.size());
  std::transform(c.values.begin(), c.values.end(), db.begin(), to_db);
  const auto n = db.size();
  auto rank = static_cast<std::size_t>(std::ceil(percentile * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n) - 1;
  std::nth_element(db.begin(), db.begin() + static_cast<std::ptrdiff_t>(rank), db.end());
  return db[rank];
}

Plane magnitude_db_norm(ComplexPlaneView c, double percentile, double range_db) {
  const double top = magnitude_percentile_db(c, percentile);
  if (top <= 20.0 * std::log10(kMagnitudeFloor))
    std::cerr << "warning: magnitude plane is all zero; normalized output saturates at 1\n";
  const double floor_db = top - range_db;
  Plane out = blank(c);
  for (std::size_t i = 0; i < c.values.size(); ++i) {
    const double v = (to_db(c.values[i]) - floor_db) / range_db;
    out.data[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return out;
}

std::pair<Plane, Plane> phase_cos_sin(ComplexPlaneView c) {
  check_view(c);
  Plane cs = blank(c), sn = blank(c);
  for (std::size_t i = 0; i < c.values.size(); ++i) {
    const auto z = c.values[i];
    if (is_zero(z)) continue;
    const double phi = std::atan2(static_cast<double>(z.imag()), static_cast<double>(z.real()));
    cs.data[i] = static_cast<float>(std::cos(phi));
    sn.data[i] = static_cast<float>(std::sin(phi));
  }
  return {std::move(cs), std::move(sn)};
}

std::pair<Plane, Plane> phase_re_im(ComplexPlaneView c, double percentile, double range_db) {
  Plane mag = magnitude_db_norm(c, percentile, range_db);
  auto [re, im] = phase_cos_sin(c);
  for (std::size_t i = 0; i < mag.data.size(); ++i) {
    re.data[i] *= mag.data[i];
    im.data[i] *= mag.data[i];
  }
  return {std::move(re), std::move(im)};
}

std::pair<Plane, Plane> phase_difference(ComplexPlaneView a, ComplexPlaneView b) {
  check_view(a);
  check_view(b);
  if (a.width != b.width || a.height != b.height)
    throw ShapeError("phase difference of planes with different dimensions");
  Plane cs = blank(a), sn = blank(a);
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const auto za = a.values[i];
    const auto zb = b.values[i];
    if (is_zero(za) || is_zero(zb)) continue;
    const std::complex<double> prod = std::complex<double>(za) * std::conj(std::complex<double>(zb));
    const double phi = std::atan2(prod.imag(), prod.real());
    cs.data[i] = static_cast<float>(std::cos(phi));
    sn.data[i] = static_cast<float>(std::sin(phi));
  }
  return {std::move(cs), std::move(sn)};
}

FeatureStack build_feature_stack(std::span<const ComplexRaster> recordings, const FeatureConfig& cfg) {
  cfg.validate();
  std::vector<int> flights = cfg.flights;
  std::vector<int> channels = cfg.channels;
  std::sort(flights.begin(), flights.end());
  std::sort(channels.begin(), channels.end());

  std::vector<const ComplexRaster*> recs;
  for (int f : flights) {
    auto it = std::find_if(recordings.begin(), recordings.end(),
                           [f](const ComplexRaster& r) { return r.recording_id == f; });
    if (it == recordings.end()) throw ConfigError("feature config: flight " + std::to_string(f) + " not provided");
    if (!recs.empty() && !it->same_dims(*recs.front()))
      throw ConfigError("feature config: recordings have different dimensions");
    auto needs = [&](int ch) {
      if (ch > static_cast<int>(it->channels))
        throw ConfigError("feature config: flight " + std::to_string(f) + " has no channel " + std::to_string(ch));
    };
    for (int ch : channels) needs(ch);
    if (cfg.use_phase_diff) {
      needs(cfg.diff_pair.first);
      needs(cfg.diff_pair.second);
    }
    recs.push_back(&*it);
  }

  FeatureStack stack;
  auto push = [&](Plane p, int flight, int channel, FeatureKind kind) {
    stack.planes.push_back(std::move(p));
    stack.tags.push_back({flight, channel, kind});
  };

  for (std::size_t fi = 0; fi < flights.size(); ++fi) {
    const ComplexRaster& r = *recs[fi];
    for (int ch : channels) {
      const auto view = ComplexPlaneView::of(r, static_cast<std::uint32_t>(ch - 1));
      Plane mag;
      if (cfg.use_magnitude || cfg.use_phase_re_im) mag = magnitude_db_norm(view, cfg.percentile, cfg.range_db);
      std::pair<Plane, Plane> cs;
      if (cfg.use_phase_cos_sin || cfg.use_phase_re_im) cs = phase_cos_sin(view);

      if (cfg.use_magnitude) push(mag, flights[fi], ch, FeatureKind::Magnitude);
      if (cfg.use_phase_cos_sin) {
        push(cs.first, flights[fi], ch, FeatureKind::PhaseCos);
        push(cs.second, flights[fi], ch, FeatureKind::PhaseSin);
      }
      if (cfg.use_phase_re_im) {
        Plane re = cs.first, im = cs.second;
        for (std::size_t i = 0; i < mag.data.size(); ++i) {
          re.data[i] *= mag.data[i];
          im.data[i] *= mag.data[i];
        }
        push(std::move(re), flights[fi], ch, FeatureKind::PhaseRe);
        push(std::move(im), flights[fi], ch, FeatureKind::PhaseIm);
      }
    }
  }
  if (cfg.use_phase_diff) {
    for (std::size_t fi = 0; fi < flights.size(); ++fi) {
      const ComplexRaster& r = *recs[fi];
      auto [dc, ds] = phase_difference(ComplexPlaneView::of(r, static_cast<std::uint32_t>(cfg.diff_pair.first - 1)),
                                       ComplexPlaneView::of(r, static_cast<std::uint32_t>(cfg.diff_pair.second - 1)));
      push(std::move(dc), flights[fi], cfg.diff_pair.first, FeatureKind::DiffCos);
      push(std::move(ds), flights[fi], cfg.diff_pair.first, FeatureKind::DiffSin);
    }
  }
  return stack;
}

}  // namespace hrsar
