#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hrsar/conv.hpp"
#include "hrsar/tensor.hpp"
#include "hrsar/weights.hpp"

namespace hrsar {

enum class Normalization { None, Instance };

/// Declarative description of the segmentation net.
///
/// stem 3x3 -> dilated block at full resolution; per encoder level a strided 3x3 conv and a
/// dilated block; per decoder level a 2x2/s2 transposed conv, concatenation with the encoder
/// output of matching resolution, a 1x1 fusion conv and (for levels >= refine_from_level)
/// a 3x3 refinement conv; 1x1 head. ReLU follows every conv except the head.
struct TopologyConfig {
  int input_channels = 8;
  int num_classes = 3;
  int width = 16;
  int encoder_levels = 4;
  int refine_from_level = 2;
  std::vector<int> dilations{1, 2, 4};
  Normalization normalization = Normalization::None;
  bool bias = true;

  void validate() const;
  int size_divisor() const noexcept { return 1 << encoder_levels; }
};

enum class LayerKind { Input, Conv, ConvTranspose, Concat, InstanceNorm };

struct Layer {
  LayerKind kind = LayerKind::Input;
  std::string name;
  std::vector<int> inputs;
  ConvSpec spec;
  int channels = 0;
  bool relu = false;
  int weight = -1;  // parameter index (gamma for instance norm)
  int bias = -1;    // parameter index (beta for instance norm)
};

struct MapShape {
  int channels = 0;
  int height = 0;
  int width = 0;
};

/// A directed acyclic graph of layers in topological order. Node 0 is the input.
class Network {
 public:
  /// Starts a graph whose input has `input_channels` planes; spatial sizes must be
  /// multiples of `size_divisor`.
  explicit Network(int input_channels, int size_divisor = 1);

  static Network build(const TopologyConfig& cfg);

  int add_conv(const std::string& name, int input, ConvSpec spec, bool relu);
  int add_concat(const std::string& name, std::vector<int> inputs);
  int add_instance_norm(const std::string& name, int input, bool relu);

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  int output_node() const noexcept { return static_cast<int>(layers_.size()) - 1; }
  int input_channels() const noexcept { return layers_.front().channels; }
  int output_channels() const noexcept { return layers_.back().channels; }
  int size_divisor() const noexcept { return size_divisor_; }

  /// Names and shapes of every parameter tensor, in storage order.
  const std::vector<std::pair<std::string, std::vector<std::uint32_t>>>& param_layout() const noexcept {
    return layout_;
  }
  std::size_t param_count() const noexcept;

  /// Kaiming-uniform (fan-in) weights, zero biases, unit gamma; deterministic in seed.
  WeightStore init_weights(std::uint64_t seed) const;

  template <typename T>
  ParamStore<T> zero_params() const;

  template <typename T>
  void check_params(const ParamStore<T>& p) const;

  /// Throws ShapeError (asking to pad) unless h and w are positive multiples of size_divisor.
  void check_input_size(int h, int w) const;
  std::vector<MapShape> infer_shapes(int h, int w) const;

  /// Sum of executed MACs over all convolutions divided by input pixels.
  double macs_per_pixel() const;

 private:
  int add(Layer layer);

  std::vector<Layer> layers_;
  std::vector<std::pair<std::string, std::vector<std::uint32_t>>> layout_;
  int size_divisor_;
};

/// Appends parallel 3x3 branches (dilation d, padding d), their concatenation and a 1x1 fusion
/// conv back to `width` channels with ReLU. Returns the fusion node.
int add_dilated_block(Network& net, const std::string& name, int input, int width, const std::vector<int>& dilations,
                      bool bias = true);

std::size_t count_params(const TopologyConfig& cfg);
double count_macs_per_pixel(const TopologyConfig& cfg);

/// Activations of every node for one sample, as needed by backward_sample.
template <typename T>
struct SampleTrace {
  std::vector<FeatureMap<T>> acts;
};

template <typename T>
SampleTrace<T> forward_trace(const Network& net, const ParamStore<T>& params, const FeatureMap<T>& x);

/// Inference for one sample; activations are released as soon as their last consumer ran.
template <typename T>
FeatureMap<T> forward_sample(const Network& net, const ParamStore<T>& params, const FeatureMap<T>& x);

/// Logits (N, classes, H, W). Samples run in parallel; each is computed independently.
template <typename T>
Tensor4<T> forward(const Network& net, const ParamStore<T>& params, const Tensor4<T>& x);

/// Reverse pass for one sample. Parameter gradients are accumulated (+=) into `grads`;
/// the trace is consumed. Returns dL/dx when `want_input_grad`, an empty map otherwise.
template <typename T>
FeatureMap<T> backward_sample(const Network& net, const ParamStore<T>& params, SampleTrace<T>& trace,
                              FeatureMap<T> upstream, ParamStore<T>& grads, bool want_input_grad);

/// Gradients of <upstream, forward(x)> with respect to the parameters (summed over the batch
/// in batch order) and to the input.
template <typename T>
std::pair<ParamStore<T>, Tensor4<T>> backward(const Network& net, const ParamStore<T>& params, const Tensor4<T>& x,
                                              const Tensor4<T>& upstream);

}  // namespace hrsar
