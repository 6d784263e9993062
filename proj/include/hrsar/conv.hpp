#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hrsar/tensor.hpp"

namespace hrsar {

/// Geometry of one (possibly transposed) 2-d convolution.
///
/// Regular weights are laid out [out][in][kh][kw]; transposed weights [in][out][kh][kw]
/// so that a transposed conv and the strided conv it inverts share one buffer layout.
struct ConvSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel_h = 3;
  int kernel_w = 3;
  int stride = 1;
  int dilation = 1;
  int padding = 0;
  int output_padding = 0;  // transposed only: extra rows/cols at the bottom/right
  bool transposed = false;
  bool bias = true;

  void validate() const;

  std::vector<std::uint32_t> weight_shape() const;
  std::size_t weight_count() const noexcept {
    return static_cast<std::size_t>(in_channels) * out_channels * kernel_h * kernel_w;
  }
  std::size_t param_count() const noexcept { return weight_count() + (bias ? out_channels : 0); }

  /// Regular: floor((H + 2p - d(k-1) - 1) / s) + 1. Transposed: (H-1)s - 2p + d(k-1) + 1 + output_padding.
  /// Throws ShapeError when a dimension would be non-positive.
  std::pair<int, int> output_size(int in_h, int in_w) const;

  /// Multiply-accumulates actually executed for an in_h x in_w input.
  double macs(int in_h, int in_w) const;

  std::string describe() const;
};

/// Auto picks the blocked kernels; Generic forces the plain per-element loops (used to
/// cross-check the fast paths).
enum class ConvPath { Auto, Generic };

template <typename T>
FeatureMap<T> conv2d(const FeatureMap<T>& x, const ConvSpec& spec, std::span<const T> weights,
                     std::span<const T> bias, ConvPath path = ConvPath::Auto);

template <typename T>
FeatureMap<T> conv2d_transposed(const FeatureMap<T>& x, const ConvSpec& spec, std::span<const T> weights,
                                std::span<const T> bias, ConvPath path = ConvPath::Auto);

template <typename T>
Tensor4<T> conv2d(const Tensor4<T>& x, const ConvSpec& spec, std::span<const T> weights, std::span<const T> bias);

template <typename T>
Tensor4<T> conv2d_transposed(const Tensor4<T>& x, const ConvSpec& spec, std::span<const T> weights,
                             std::span<const T> bias);

// Reverse-mode pieces. *_input_grad returns dL/dx for an input of in_h x in_w;
// *_param_grad accumulates (+=) into dw and db (db may be empty when the conv has no bias).

template <typename T>
FeatureMap<T> conv2d_input_grad(const ConvSpec& spec, std::span<const T> weights, const FeatureMap<T>& dy,
                                int in_h, int in_w, ConvPath path = ConvPath::Auto);

template <typename T>
void conv2d_param_grad(const ConvSpec& spec, const FeatureMap<T>& x, const FeatureMap<T>& dy, std::span<T> dw,
                       std::span<T> db);

template <typename T>
FeatureMap<T> conv2d_transposed_input_grad(const ConvSpec& spec, std::span<const T> weights,
                                           const FeatureMap<T>& dy, int in_h, int in_w);

template <typename T>
void conv2d_transposed_param_grad(const ConvSpec& spec, const FeatureMap<T>& x, const FeatureMap<T>& dy,
                                  std::span<T> dw, std::span<T> db);

}  // namespace hrsar
