#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hrsar/raster.hpp"

namespace hrsar {

/// Read-only view of one complex channel.
struct ComplexPlaneView {
  std::uint64_t width = 0;
  std::uint64_t height = 0;
  std::span<const std::complex<float>> values;

  static ComplexPlaneView of(const ComplexRaster& r, std::uint32_t channel) {
    return {r.width, r.height, r.channel(channel)};
  }
};

/// Floor applied to |z| before taking 20*log10.
inline constexpr double kMagnitudeFloor = 1e-12;

/// Where the dB percentile is taken when a pipeline builds features.
enum class NormScope { Recording, Tile };

struct FeatureConfig {
  std::vector<int> flights{1, 2};
  std::vector<int> channels{1, 2, 3, 4};
  bool use_magnitude = true;
  bool use_phase_cos_sin = false;
  bool use_phase_re_im = false;
  bool use_phase_diff = false;
  std::pair<int, int> diff_pair{1, 4};
  double percentile = 0.99;
  double range_db = 25.0;
  NormScope scope = NormScope::Recording;

  /// Throws ConfigError when no feature is selected or a list is empty/duplicated.
  void validate() const;

  /// |flights|*|channels|*(mag + 2 cos/sin + 2 re/im) + |flights|*2*diff
  std::size_t plane_count() const noexcept;
};

enum class FeatureKind { Magnitude, PhaseCos, PhaseSin, PhaseRe, PhaseIm, DiffCos, DiffSin };

std::string to_string(FeatureKind k);

struct PlaneTag {
  int flight = 1;
  int channel = 1;  // first channel of the pair for Diff* kinds
  FeatureKind kind = FeatureKind::Magnitude;

  std::string label() const;
  friend bool operator==(const PlaneTag&, const PlaneTag&) = default;
};

struct FeatureStack {
  std::vector<Plane> planes;
  std::vector<PlaneTag> tags;

  /// Packs the planes into one multi-channel raster (canonical order preserved).
  RealRaster to_raster() const;
};

/// Nearest-rank percentile (the ceil(q*N)-th smallest value) of 20*log10(max(|z|, floor)).
double magnitude_percentile_db(ComplexPlaneView c, double percentile);

/// clamp((dB - (P - range)) / range, 0, 1) with P the nearest-rank percentile of dB.
/// An all-zero plane yields all ones and logs a warning.
Plane magnitude_db_norm(ComplexPlaneView c, double percentile, double range_db);

/// (cos arg z, sin arg z); (0, 0) where z == 0.
std::pair<Plane, Plane> phase_cos_sin(ComplexPlaneView c);

/// Normalized dB magnitude rotated by the phase: (m cos arg z, m sin arg z).
std::pair<Plane, Plane> phase_re_im(ComplexPlaneView c, double percentile, double range_db);

/// (cos, sin) of arg(a * conj(b)); (0, 0) where either sample is zero.
std::pair<Plane, Plane> phase_difference(ComplexPlaneView a, ComplexPlaneView b);

/// Canonical order: flights ascending, channels ascending, per channel
/// (magnitude, cos, sin, re, im); then (diff-cos, diff-sin) for each flight ascending.
/// `recordings` are matched to flights by recording_id.
FeatureStack build_feature_stack(std::span<const ComplexRaster> recordings, const FeatureConfig& cfg);

}  // namespace hrsar
