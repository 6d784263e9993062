#pragma once

// Slow reference implementations used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hrsar/annotations.hpp"
#include "hrsar/conv.hpp"
#include "hrsar/eval.hpp"
#include "hrsar/network.hpp"
#include "hrsar/rng.hpp"

namespace oracle {

using hrsar::ConvSpec;
using hrsar::CounterRng;
using hrsar::FeatureMap;

template <typename T>
FeatureMap<T> random_map(CounterRng& rng, int c, int h, int w, double lo = -1.0, double hi = 1.0) {
  FeatureMap<T> m(c, h, w);
  for (auto& v : m.data) v = static_cast<T>(rng.uniform(lo, hi));
  return m;
}

template <typename T>
std::vector<T> random_vec(CounterRng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return v;
}

template <typename T>
double dot(const std::vector<T>& a, const std::vector<T>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

/// Direct loop: y[o][i][j] = b[o] + sum w[o][c][u][v] x[c][i*s - p + u*d][j*s - p + v*d].
template <typename T>
FeatureMap<T> conv(const FeatureMap<T>& x, const ConvSpec& s, const std::vector<T>& w, const std::vector<T>& b) {
  const auto [oh, ow] = s.output_size(x.height, x.width);
  FeatureMap<T> y(s.out_channels, oh, ow);
  for (int o = 0; o < s.out_channels; ++o)
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j) {
        double acc = b.empty() ? 0.0 : static_cast<double>(b[o]);
        for (int c = 0; c < s.in_channels; ++c)
          for (int u = 0; u < s.kernel_h; ++u)
            for (int v = 0; v < s.kernel_w; ++v) {
              const int yy = i * s.stride - s.padding + u * s.dilation;
              const int xx = j * s.stride - s.padding + v * s.dilation;
              if (yy < 0 || yy >= x.height || xx < 0 || xx >= x.width) continue;
              acc += static_cast<double>(w[((o * s.in_channels + c) * s.kernel_h + u) * s.kernel_w + v]) *
                     static_cast<double>(x.at(c, yy, xx));
            }
        y.at(o, i, j) = static_cast<T>(acc);
      }
  return y;
}

/// Direct scatter: y[o][i*s - p + u][j*s - p + v] += w[c][o][u][v] x[c][i][j], weights [in][out][kh][kw].
template <typename T>
FeatureMap<T> conv_transposed(const FeatureMap<T>& x, const ConvSpec& s, const std::vector<T>& w,
                              const std::vector<T>& b) {
  const auto [oh, ow] = s.output_size(x.height, x.width);
  std::vector<double> acc(static_cast<std::size_t>(s.out_channels) * oh * ow, 0.0);
  for (int c = 0; c < s.in_channels; ++c)
    for (int i = 0; i < x.height; ++i)
      for (int j = 0; j < x.width; ++j)
        for (int o = 0; o < s.out_channels; ++o)
          for (int u = 0; u < s.kernel_h; ++u)
            for (int v = 0; v < s.kernel_w; ++v) {
              const int yy = i * s.stride - s.padding + u;
              const int xx = j * s.stride - s.padding + v;
              if (yy < 0 || yy >= oh || xx < 0 || xx >= ow) continue;
              acc[(static_cast<std::size_t>(o) * oh + yy) * ow + xx] +=
                  static_cast<double>(w[((c * s.out_channels + o) * s.kernel_h + u) * s.kernel_w + v]) *
                  static_cast<double>(x.at(c, i, j));
            }
  FeatureMap<T> y(s.out_channels, oh, ow);
  for (int o = 0; o < s.out_channels; ++o)
    for (int k = 0; k < oh * ow; ++k)
      y.data[static_cast<std::size_t>(o) * oh * ow + k] =
          static_cast<T>(acc[static_cast<std::size_t>(o) * oh * ow + k] + (b.empty() ? 0.0 : b[o]));
  return y;
}

/// Winding-number point-in-polygon summed over all rings; odd total winding = inside for
/// the simple, non-overlapping rings the tests generate.
inline bool winding_inside(const hrsar::Polygon& poly, hrsar::Point p) {
  int total = 0;
  for (const auto& ring : poly.rings) {
    int wn = 0;
    for (std::size_t i = 0; i < ring.size(); ++i) {
      const auto& a = ring[i];
      const auto& b = ring[(i + 1) % ring.size()];
      const double cross = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
      if (a.y <= p.y) {
        if (b.y > p.y && cross > 0) ++wn;
      } else if (b.y <= p.y && cross < 0) {
        --wn;
      }
    }
    total += std::abs(wn);
  }
  return total % 2 == 1;
}

/// Sort-based nearest-rank percentile: the ceil(q*N)-th smallest value.
inline double nearest_rank(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  k = std::clamp<std::size_t>(k, 1, v.size());
  return v[k - 1];
}

struct BruteMetrics {
  double pa = 0, ma = 0, miou = 0;
};

/// Per-pixel counting without a confusion matrix.
inline BruteMetrics brute_metrics(const hrsar::LabelRaster& pred, const hrsar::LabelRaster& target, int classes) {
  std::uint64_t labeled = 0, correct = 0;
  double ma = 0, miou = 0;
  int present = 0;
  for (int c = 0; c < classes; ++c) {
    std::uint64_t tp = 0, in_target = 0, uni = 0;
    for (std::size_t i = 0; i < target.data.size(); ++i) {
      const int t = target.data[i];
      if (t == hrsar::kUnlabeled) continue;
      const int p = pred.data[i];
      if (t == c) ++in_target;
      if (t == c && p == c) ++tp;
      if (t == c || p == c) ++uni;
    }
    if (in_target == 0) continue;
    ++present;
    ma += static_cast<double>(tp) / static_cast<double>(in_target);
    miou += static_cast<double>(tp) / static_cast<double>(uni);
  }
  for (std::size_t i = 0; i < target.data.size(); ++i) {
    if (target.data[i] == hrsar::kUnlabeled) continue;
    ++labeled;
    if (pred.data[i] == target.data[i]) ++correct;
  }
  BruteMetrics m;
  m.pa = static_cast<double>(correct) / static_cast<double>(labeled);
  m.ma = ma / present;
  m.miou = miou / present;
  return m;
}

inline hrsar::LabelRaster random_labels(CounterRng& rng, int side, bool with_unlabeled) {
  hrsar::LabelRaster r(side, side, 1, 0);
  for (auto& v : r.data) {
    const auto k = rng.below(with_unlabeled ? 4 : 3);
    v = k == 3 ? static_cast<std::uint8_t>(hrsar::kUnlabeled) : static_cast<std::uint8_t>(k);
  }
  return r;
}

/// A random rotated quadrilateral, optionally with a rectangular hole, inside [0, side)^2
/// (vertices may stick out by a few pixels so clipping is exercised).
inline hrsar::Polygon random_polygon(CounterRng& rng, double side, bool hole) {
  const double cx = rng.uniform(0.1 * side, 0.9 * side);
  const double cy = rng.uniform(0.1 * side, 0.9 * side);
  const double hw = rng.uniform(2.0, 0.3 * side);
  const double hh = rng.uniform(2.0, 0.3 * side);
  const double a = rng.uniform(-1.0, 1.0);
  const double ca = std::cos(a), sa = std::sin(a);
  auto rect = [&](double w, double h) {
    hrsar::Ring r;
    const double xs[4] = {-w, w, w, -w}, ys[4] = {-h, -h, h, h};
    for (int k = 0; k < 4; ++k) r.push_back({cx + ca * xs[k] - sa * ys[k], cy + sa * xs[k] + ca * ys[k]});
    return r;
  };
  hrsar::Polygon p;
  p.rings.push_back(rect(hw, hh));
  if (hole && hw > 4 && hh > 4) p.rings.push_back(rect(hw * 0.4, hh * 0.4));
  return p;
}

/// Closed-form feature plane count.
inline std::size_t plane_formula(std::size_t flights, std::size_t channels, bool mag, bool cossin, bool reim,
                                 bool diff) {
  return flights * channels * ((mag ? 1 : 0) + (cossin ? 2 : 0) + (reim ? 2 : 0)) + (diff ? flights * 2 : 0);
}

/// Relative agreement used by the gradient checks: |a - b| <= tol * max(|a|, |b|) + floor.
inline bool close_rel(double a, double b, double tol, double floor = 1e-8) {
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b)) + floor;
}

struct GradReport {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst = 0.0;
  std::string first_failure;
};

/// Central differences of L = <upstream, forward(x)> against backward(), in double, for the
/// input and up to `per_tensor` entries of every parameter tensor.
inline GradReport check_network_gradients(const hrsar::Network& net, CounterRng& rng, int h, int w,
                                          std::size_t per_tensor, double tol = 1e-4) {
  using hrsar::ParamStore;
  using hrsar::Tensor4;
  ParamStore<double> params = net.init_weights(rng.next_u64()).cast<double>();
  for (auto& t : params)
    for (auto& v : t.values) v += rng.uniform(-0.1, 0.1);  // non-zero biases, gamma != 1
  Tensor4<double> x(1, net.input_channels(), h, w);
  for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
  const auto y0 = hrsar::forward(net, params, x);
  Tensor4<double> up(1, y0.channels, y0.height, y0.width);
  for (auto& v : up.data) v = rng.uniform(-1.0, 1.0);

  auto loss = [&](const ParamStore<double>& p, const Tensor4<double>& in) {
    const auto y = hrsar::forward(net, p, in);
    double s = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * up.data[i];
    return s;
  };
  const auto [gp, gx] = hrsar::backward(net, params, x, up);
  const double eps = 1e-6;
  GradReport rep;
  auto record = [&](double analytic, double numeric, const std::string& where) {
    ++rep.checked;
    const double err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    rep.worst = std::max(rep.worst, err);
    if (!close_rel(analytic, numeric, tol, 1e-7)) {
      if (rep.failed++ == 0)
        rep.first_failure = where + ": analytic " + std::to_string(analytic) + " numeric " + std::to_string(numeric);
    }
  };

  auto pick = [&](std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (n > per_tensor) {
      rng.shuffle(std::span<std::size_t>(idx));
      idx.resize(per_tensor);
    }
    return idx;
  };

  for (std::size_t t = 0; t < params.size(); ++t)
    for (std::size_t i : pick(params[t].values.size())) {
      auto p = params;
      p[t].values[i] += eps;
      const double lp = loss(p, x);
      p[t].values[i] -= 2 * eps;
      const double lm = loss(p, x);
      record(gp[t].values[i], (lp - lm) / (2 * eps), params[t].name + "[" + std::to_string(i) + "]");
    }
  for (std::size_t i : pick(x.data.size())) {
    auto xp = x;
    xp.data[i] += eps;
    const double lp = loss(params, xp);
    xp.data[i] -= 2 * eps;
    const double lm = loss(params, xp);
    record(gx.data[i], (lp - lm) / (2 * eps), "input[" + std::to_string(i) + "]");
  }
  return rep;
}

}  // namespace oracle
