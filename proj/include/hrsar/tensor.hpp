#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hrsar/error.hpp"

namespace hrsar {

/// Single-sample activation: channels x height x width, channel-planar, row-major.
template <typename T>
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w, T fill = T{})
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t plane_size() const noexcept { return static_cast<std::size_t>(height) * width; }
  T* plane(int c) noexcept { return data.data() + c * plane_size(); }
  const T* plane(int c) const noexcept { return data.data() + c * plane_size(); }
  T& at(int c, int y, int x) noexcept { return data[c * plane_size() + static_cast<std::size_t>(y) * width + x]; }
  const T& at(int c, int y, int x) const noexcept {
    return data[c * plane_size() + static_cast<std::size_t>(y) * width + x];
  }
  bool same_shape(const FeatureMap& o) const noexcept {
    return channels == o.channels && height == o.height && width == o.width;
  }
  std::string shape_string() const {
    return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
  }
};

/// Batch of feature maps: (batch, channels, height, width), row-major, channel-planar.
template <typename T>
struct Tensor4 {
  int batch = 0;
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Tensor4() = default;
  Tensor4(int n, int c, int h, int w, T fill = T{})
      : batch(n), channels(c), height(h), width(w), data(static_cast<std::size_t>(n) * c * h * w, fill) {}

  std::size_t sample_size() const noexcept { return static_cast<std::size_t>(channels) * height * width; }
  std::span<T> sample(int n) noexcept { return {data.data() + n * sample_size(), sample_size()}; }
  std::span<const T> sample(int n) const noexcept { return {data.data() + n * sample_size(), sample_size()}; }

  T& at(int n, int c, int y, int x) noexcept {
    return data[n * sample_size() + (static_cast<std::size_t>(c) * height + y) * width + x];
  }
  const T& at(int n, int c, int y, int x) const noexcept {
    return data[n * sample_size() + (static_cast<std::size_t>(c) * height + y) * width + x];
  }

  FeatureMap<T> get_sample(int n) const {
    FeatureMap<T> m(channels, height, width);
    auto s = sample(n);
    std::copy(s.begin(), s.end(), m.data.begin());
    return m;
  }
  void set_sample(int n, const FeatureMap<T>& m) {
    if (m.channels != channels || m.height != height || m.width != width)
      throw ShapeError("set_sample: shape " + m.shape_string() + " does not fit the batch");
    std::copy(m.data.begin(), m.data.end(), sample(n).begin());
  }
};

}  // namespace hrsar
