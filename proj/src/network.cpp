#include "hrsar/network.hpp"

#include <cmath>

#include "hrsar/rng.hpp"

namespace hrsar {

void TopologyConfig::validate() const {
  if (input_channels < 1) throw ConfigError("topology: input_channels must be positive");
  if (num_classes < 2) throw ConfigError("topology: num_classes must be at least 2");
  if (width < 1) throw ConfigError("topology: width must be positive");
  if (encoder_levels < 0 || encoder_levels > 12) throw ConfigError("topology: encoder_levels must lie in [0, 12]");
  if (refine_from_level < 1) throw ConfigError("topology: refine_from_level must be at least 1");
  if (dilations.empty()) throw ConfigError("topology: the dilated block needs at least one branch");
  for (int d : dilations)
    if (d < 1) throw ConfigError("topology: dilation factors must be positive");
}

Network::Network(int input_channels, int size_divisor) : size_divisor_(size_divisor) {
  if (input_channels < 1) throw ShapeError("network input needs at least one channel");
  if (size_divisor < 1) throw ShapeError("network size divisor must be positive");
  Layer in;
  in.kind = LayerKind::Input;
  in.name = "input";
  in.channels = input_channels;
  layers_.push_back(std::move(in));
}

int Network::add(Layer layer) {
  for (int i : layer.inputs)
    if (i < 0 || i >= static_cast<int>(layers_.size()))
      throw ShapeError("layer '" + layer.name + "' refers to an unknown node " + std::to_string(i));
  for (const auto& l : layers_)
    if (l.name == layer.name) throw ShapeError("duplicate layer name '" + layer.name + "'");
  layers_.push_back(std::move(layer));
  return static_cast<int>(layers_.size()) - 1;
}

int Network::add_conv(const std::string& name, int input, ConvSpec spec, bool relu) {
  spec.validate();
  if (input < 0 || input >= static_cast<int>(layers_.size()))
    throw ShapeError("layer '" + name + "' refers to an unknown node");
  if (layers_[input].channels != spec.in_channels)
    throw ShapeError("layer '" + name + "' expects " + std::to_string(spec.in_channels) + " channels, node '" +
                     layers_[input].name + "' provides " + std::to_string(layers_[input].channels));
  Layer l;
  l.kind = spec.transposed ? LayerKind::ConvTranspose : LayerKind::Conv;
  l.name = name;
  l.inputs = {input};
  l.spec = spec;
  l.channels = spec.out_channels;
  l.relu = relu;
  l.weight = static_cast<int>(layout_.size());
  layout_.emplace_back(name + ".weight", spec.weight_shape());
  if (spec.bias) {
    l.bias = static_cast<int>(layout_.size());
    layout_.emplace_back(name + ".bias", std::vector<std::uint32_t>{static_cast<std::uint32_t>(spec.out_channels)});
  }
  return add(std::move(l));
}

int Network::add_concat(const std::string& name, std::vector<int> inputs) {
  if (inputs.empty()) throw ShapeError("concat '" + name + "' has no inputs");
  Layer l;
  l.kind = LayerKind::Concat;
  l.name = name;
  for (int i : inputs) {
    if (i < 0 || i >= static_cast<int>(layers_.size())) throw ShapeError("concat '" + name + "' refers to an unknown node");
    l.channels += layers_[i].channels;
  }
  l.inputs = std::move(inputs);
  return add(std::move(l));
}

int Network::add_instance_norm(const std::string& name, int input, bool relu) {
  if (input < 0 || input >= static_cast<int>(layers_.size())) throw ShapeError("norm '" + name + "' refers to an unknown node");
  Layer l;
  l.kind = LayerKind::InstanceNorm;
  l.name = name;
  l.inputs = {input};
  l.channels = layers_[input].channels;
  l.relu = relu;
  const auto c = std::vector<std::uint32_t>{static_cast<std::uint32_t>(l.channels)};
  l.weight = static_cast<int>(layout_.size());
  layout_.emplace_back(name + ".gamma", c);
  l.bias = static_cast<int>(layout_.size());
  layout_.emplace_back(name + ".beta", c);
  return add(std::move(l));
}

namespace {

struct Builder {
  Network& net;
  const TopologyConfig& cfg;

  int conv(const std::string& name, int in, ConvSpec spec, bool relu = true) {
    spec.bias = cfg.bias;
    if (cfg.normalization == Normalization::Instance && relu) {
      const int c = net.add_conv(name, in, spec, false);
      return net.add_instance_norm(name + ".norm", c, true);
    }
    return net.add_conv(name, in, spec, relu);
  }

  int conv3(const std::string& name, int in, int cin, int cout, int stride = 1, int dilation = 1) {
    ConvSpec s;
    s.in_channels = cin;
    s.out_channels = cout;
    s.stride = stride;
    s.dilation = dilation;
    s.padding = dilation;
    return conv(name, in, s);
  }

  int conv1(const std::string& name, int in, int cin, int cout, bool relu = true) {
    ConvSpec s;
    s.in_channels = cin;
    s.out_channels = cout;
    s.kernel_h = s.kernel_w = 1;
    return conv(name, in, s, relu);
  }

  // Parallel dilated 3x3 branches, concatenated and fused back to `width` by a 1x1 conv.
  int dilated_block(const std::string& name, int in) {
    const int w = cfg.width;
    std::vector<int> branches;
    for (int d : cfg.dilations) branches.push_back(conv3(name + ".d" + std::to_string(d), in, w, w, 1, d));
    const int cat = net.add_concat(name + ".cat", branches);
    return conv1(name + ".fuse", cat, w * static_cast<int>(branches.size()), w);
  }
};

}  // namespace

int add_dilated_block(Network& net, const std::string& name, int input, int width, const std::vector<int>& dilations,
                      bool bias) {
  if (net.layers().at(input).channels != width)
    throw ShapeError("dilated block '" + name + "' expects " + std::to_string(width) + " input channels");
  TopologyConfig cfg;
  cfg.width = width;
  cfg.dilations = dilations;
  cfg.bias = bias;
  Builder b{net, cfg};
  return b.dilated_block(name, input);
}

Network Network::build(const TopologyConfig& cfg) {
  cfg.validate();
  Network net(cfg.input_channels, cfg.size_divisor());
  Builder b{net, cfg};
  const int w = cfg.width;

  int x = b.conv3("stem", 0, cfg.input_channels, w);
  std::vector<int> skips{b.dilated_block("enc0.block", x)};
  for (int l = 1; l <= cfg.encoder_levels; ++l) {
    const std::string p = "enc" + std::to_string(l);
    x = b.conv3(p + ".down", skips.back(), w, w, 2);
    skips.push_back(b.dilated_block(p + ".block", x));
  }

  x = skips.back();
  for (int l = cfg.encoder_levels; l >= 1; --l) {
    const std::string p = "dec" + std::to_string(l);
    ConvSpec up;
    up.in_channels = w;
    up.out_channels = w;
    up.kernel_h = up.kernel_w = 2;
    up.stride = 2;
    up.transposed = true;
    x = b.conv(p + ".up", x, up);
    x = net.add_concat(p + ".cat", {x, skips[l - 1]});
    x = b.conv1(p + ".fuse", x, 2 * w, w);
    if (l >= cfg.refine_from_level) x = b.conv3(p + ".refine", x, w, w);
  }
  b.conv1("head", x, w, cfg.num_classes, false);
  return net;
}

std::size_t Network::param_count() const noexcept {
  std::size_t n = 0;
  for (const auto& [name, shape] : layout_) {
    std::size_t k = 1;
    for (auto d : shape) k *= d;
    n += k;
  }
  return n;
}

WeightStore Network::init_weights(std::uint64_t seed) const {
  WeightStore w;
  for (std::size_t i = 0; i < layout_.size(); ++i) {
    const auto& [name, shape] = layout_[i];
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    std::vector<float> values(n, 0.0f);
    const bool is_gamma = name.ends_with(".gamma");
    if (is_gamma) std::fill(values.begin(), values.end(), 1.0f);
    if (name.ends_with(".weight")) {
      // Regular layout [out][in][kh][kw]; transposed [in][out][kh][kw] where each output
      // pixel of a stride-s transposed conv sees in*kh*kw/s^2 taps.
      const Layer* owner = nullptr;
      for (const auto& l : layers_)
        if (l.weight == static_cast<int>(i) && (l.kind == LayerKind::Conv || l.kind == LayerKind::ConvTranspose))
          owner = &l;
      const auto& s = owner->spec;
      double fan_in = static_cast<double>(s.in_channels) * s.kernel_h * s.kernel_w;
      if (s.transposed) fan_in /= static_cast<double>(s.stride) * s.stride;
      const double bound = std::sqrt(6.0 / std::max(fan_in, 1.0));
      CounterRng rng(seed, i);
      for (auto& v : values) v = static_cast<float>(rng.uniform(-bound, bound));
    }
    w.add(name, shape, std::move(values));
  }
  return w;
}

template <typename T>
ParamStore<T> Network::zero_params() const {
  ParamStore<T> p;
  for (const auto& [name, shape] : layout_) p.add(name, shape);
  return p;
}

template <typename T>
void Network::check_params(const ParamStore<T>& p) const {
  if (p.size() != layout_.size())
    throw ShapeError("weights hold " + std::to_string(p.size()) + " tensors, the network needs " +
                     std::to_string(layout_.size()));
  for (std::size_t i = 0; i < layout_.size(); ++i) {
    if (p[i].name != layout_[i].first)
      throw ShapeError("tensor " + std::to_string(i) + " is '" + p[i].name + "', expected '" + layout_[i].first + "'");
    if (p[i].shape != layout_[i].second) {
      std::string want, got;
      for (auto d : layout_[i].second) want += (want.empty() ? "" : "x") + std::to_string(d);
      for (auto d : p[i].shape) got += (got.empty() ? "" : "x") + std::to_string(d);
      throw ShapeError("tensor '" + p[i].name + "' has shape " + (got.empty() ? "scalar" : got) + ", expected " + want);
    }
  }
}

void Network::check_input_size(int h, int w) const {
  if (h < 1 || w < 1) throw ShapeError("network input must be non-empty");
  if (h % size_divisor_ != 0 || w % size_divisor_ != 0)
    throw ShapeError("input " + std::to_string(h) + "x" + std::to_string(w) + " is not divisible by " +
                     std::to_string(size_divisor_) + "; pad the features to a multiple of " +
                     std::to_string(size_divisor_) + " on both axes");
}

std::vector<MapShape> Network::infer_shapes(int h, int w) const {
  check_input_size(h, w);
  std::vector<MapShape> shapes(layers_.size());
  shapes[0] = {layers_[0].channels, h, w};
  for (std::size_t k = 1; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    const auto& in = shapes[l.inputs[0]];
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::ConvTranspose: {
        const auto [oh, ow] = l.spec.output_size(in.height, in.width);
        shapes[k] = {l.channels, oh, ow};
        break;
      }
      case LayerKind::Concat:
        for (int i : l.inputs)
          if (shapes[i].height != in.height || shapes[i].width != in.width)
            throw ShapeError("concat '" + l.name + "': node '" + layers_[i].name + "' is " +
                             std::to_string(shapes[i].height) + "x" + std::to_string(shapes[i].width) + ", expected " +
                             std::to_string(in.height) + "x" + std::to_string(in.width));
        shapes[k] = {l.channels, in.height, in.width};
        break;
      case LayerKind::InstanceNorm:
        shapes[k] = in;
        break;
      case LayerKind::Input:
        throw ShapeError("second input node '" + l.name + "'");
    }
  }
  return shapes;
}

double Network::macs_per_pixel() const {
  const int side = size_divisor_ * 4;
  const auto shapes = infer_shapes(side, side);
  double total = 0.0;
  for (std::size_t k = 1; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    if (l.kind != LayerKind::Conv && l.kind != LayerKind::ConvTranspose) continue;
    const auto& in = shapes[l.inputs[0]];
    total += l.spec.macs(in.height, in.width);
  }
  return total / (static_cast<double>(side) * side);
}

std::size_t count_params(const TopologyConfig& cfg) { return Network::build(cfg).param_count(); }
double count_macs_per_pixel(const TopologyConfig& cfg) { return Network::build(cfg).macs_per_pixel(); }

namespace {

constexpr double kNormEps = 1e-5;

template <typename T>
std::span<const T> tensor_span(const ParamStore<T>& p, int index) {
  if (index < 0) return {};
  return {p[index].values.data(), p[index].values.size()};
}

template <typename T>
std::span<T> tensor_span(ParamStore<T>& p, int index) {
  if (index < 0) return {};
  return {p[index].values.data(), p[index].values.size()};
}

template <typename T>
void relu_inplace(FeatureMap<T>& m) {
  for (auto& v : m.data) v = v > T(0) ? v : T(0);
}

template <typename T>
FeatureMap<T> concat(const std::vector<const FeatureMap<T>*>& parts) {
  int channels = 0;
  for (const auto* p : parts) channels += p->channels;
  FeatureMap<T> out(channels, parts[0]->height, parts[0]->width);
  auto it = out.data.begin();
  for (const auto* p : parts) it = std::copy(p->data.begin(), p->data.end(), it);
  return out;
}

template <typename T>
FeatureMap<T> instance_norm(const FeatureMap<T>& x, std::span<const T> gamma, std::span<const T> beta) {
  FeatureMap<T> y(x.channels, x.height, x.width);
  const std::size_t n = x.plane_size();
  for (int c = 0; c < x.channels; ++c) {
    const T* src = x.plane(c);
    T* dst = y.plane(c);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += src[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (src[i] - mean) * (src[i] - mean);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + kNormEps);
    for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<T>(gamma[c] * ((src[i] - mean) * inv) + beta[c]);
  }
  return y;
}

// Given g = dL/dy for y = gamma * xhat + beta, returns dL/dx and accumulates dgamma, dbeta.
template <typename T>
FeatureMap<T> instance_norm_backward(const FeatureMap<T>& x, const FeatureMap<T>& g, std::span<const T> gamma,
                                     std::span<T> dgamma, std::span<T> dbeta) {
  FeatureMap<T> dx(x.channels, x.height, x.width);
  const std::size_t n = x.plane_size();
  const double nn = static_cast<double>(n);
  for (int c = 0; c < x.channels; ++c) {
    const T* src = x.plane(c);
    const T* gc = g.plane(c);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += src[i];
    mean /= nn;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (src[i] - mean) * (src[i] - mean);
    var /= nn;
    const double inv = 1.0 / std::sqrt(var + kNormEps);
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sum_g += gc[i];
      sum_gx += gc[i] * ((src[i] - mean) * inv);
    }
    dgamma[c] += static_cast<T>(sum_gx);
    dbeta[c] += static_cast<T>(sum_g);
    const double scale = gamma[c] * inv / nn;
    T* out = dx.plane(c);
    for (std::size_t i = 0; i < n; ++i) {
      const double xhat = (src[i] - mean) * inv;
      out[i] = static_cast<T>(scale * (nn * gc[i] - sum_g - xhat * sum_gx));
    }
  }
  return dx;
}

template <typename T>
FeatureMap<T> eval_node(const Network& net, const ParamStore<T>& params, std::size_t k,
                        const std::vector<FeatureMap<T>>& acts) {
  const auto& l = net.layers()[k];
  FeatureMap<T> y;
  switch (l.kind) {
    case LayerKind::Conv:
      y = conv2d(acts[l.inputs[0]], l.spec, tensor_span(params, l.weight), tensor_span(params, l.bias));
      break;
    case LayerKind::ConvTranspose:
      y = conv2d_transposed(acts[l.inputs[0]], l.spec, tensor_span(params, l.weight), tensor_span(params, l.bias));
      break;
    case LayerKind::Concat: {
      std::vector<const FeatureMap<T>*> parts;
      for (int i : l.inputs) parts.push_back(&acts[i]);
      y = concat(parts);
      break;
    }
    case LayerKind::InstanceNorm:
      y = instance_norm(acts[l.inputs[0]], tensor_span(params, l.weight), tensor_span(params, l.bias));
      break;
    case LayerKind::Input:
      throw ShapeError("unexpected input node '" + l.name + "'");
  }
  if (l.relu) relu_inplace(y);
  return y;
}

template <typename T>
void check_sample(const Network& net, const FeatureMap<T>& x) {
  if (x.channels != net.input_channels())
    throw ShapeError("network expects " + std::to_string(net.input_channels()) + " input channels, got " +
                     std::to_string(x.channels));
  net.check_input_size(x.height, x.width);
}

template <typename T>
void add_into(FeatureMap<T>& dst, FeatureMap<T>&& src) {
  if (dst.data.empty()) {
    dst = std::move(src);
    return;
  }
  if (!dst.same_shape(src)) throw ShapeError("gradient shape mismatch " + dst.shape_string() + " vs " + src.shape_string());
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

template <typename T>
SampleTrace<T> forward_trace(const Network& net, const ParamStore<T>& params, const FeatureMap<T>& x) {
  check_sample(net, x);
  net.check_params(params);
  SampleTrace<T> trace;
  trace.acts.resize(net.layers().size());
  trace.acts[0] = x;
  for (std::size_t k = 1; k < net.layers().size(); ++k) trace.acts[k] = eval_node(net, params, k, trace.acts);
  return trace;
}

template <typename T>
FeatureMap<T> forward_sample(const Network& net, const ParamStore<T>& params, const FeatureMap<T>& x) {
  check_sample(net, x);
  net.check_params(params);
  const auto& layers = net.layers();
  std::vector<std::size_t> last_use(layers.size(), 0);
  for (std::size_t k = 1; k < layers.size(); ++k)
    for (int i : layers[k].inputs) last_use[i] = k;

  std::vector<FeatureMap<T>> acts(layers.size());
  acts[0] = x;
  for (std::size_t k = 1; k < layers.size(); ++k) {
    acts[k] = eval_node(net, params, k, acts);
    for (int i : layers[k].inputs)
      if (last_use[i] == k) acts[i] = FeatureMap<T>();
  }
  return std::move(acts.back());
}

template <typename T>
Tensor4<T> forward(const Network& net, const ParamStore<T>& params, const Tensor4<T>& x) {
  if (x.batch < 1) throw ShapeError("forward: empty batch");
  if (x.channels != net.input_channels())
    throw ShapeError("network expects " + std::to_string(net.input_channels()) + " input channels, got " +
                     std::to_string(x.channels));
  net.check_input_size(x.height, x.width);
  net.check_params(params);
  const auto shapes = net.infer_shapes(x.height, x.width);
  const auto& out_shape = shapes.back();
  Tensor4<T> y(x.batch, out_shape.channels, out_shape.height, out_shape.width);
  for (int n = 0; n < x.batch; ++n) y.set_sample(n, forward_sample(net, params, x.get_sample(n)));
  return y;
}

template <typename T>
FeatureMap<T> backward_sample(const Network& net, const ParamStore<T>& params, SampleTrace<T>& trace,
                              FeatureMap<T> upstream, ParamStore<T>& grads, bool want_input_grad) {
  const auto& layers = net.layers();
  if (trace.acts.size() != layers.size()) throw ShapeError("backward: trace does not belong to this network");
  if (!upstream.same_shape(trace.acts.back()))
    throw ShapeError("backward: upstream gradient " + upstream.shape_string() + " does not match output " +
                     trace.acts.back().shape_string());
  net.check_params(grads);

  std::vector<FeatureMap<T>> d(layers.size());
  d.back() = std::move(upstream);
  for (std::size_t k = layers.size() - 1; k >= 1; --k) {
    const auto& l = layers[k];
    FeatureMap<T> g = std::move(d[k]);
    if (g.data.empty()) {
      trace.acts[k] = FeatureMap<T>();
      continue;
    }
    if (l.relu) {
      const auto& y = trace.acts[k];
      for (std::size_t i = 0; i < g.data.size(); ++i)
        if (!(y.data[i] > T(0))) g.data[i] = T(0);
    }
    trace.acts[k] = FeatureMap<T>();

    const int src = l.inputs[0];
    const bool need_dx = src != 0 || want_input_grad;
    const auto& x = trace.acts[src];
    try {
      switch (l.kind) {
        case LayerKind::Conv:
          conv2d_param_grad(l.spec, x, g, tensor_span(grads, l.weight), tensor_span(grads, l.bias));
          if (need_dx)
            add_into(d[src], conv2d_input_grad(l.spec, tensor_span(params, l.weight), g, x.height, x.width));
          break;
        case LayerKind::ConvTranspose:
          conv2d_transposed_param_grad(l.spec, x, g, tensor_span(grads, l.weight), tensor_span(grads, l.bias));
          if (need_dx)
            add_into(d[src],
                     conv2d_transposed_input_grad(l.spec, tensor_span(params, l.weight), g, x.height, x.width));
          break;
        case LayerKind::Concat: {
          std::size_t offset = 0;
          for (int i : l.inputs) {
            const auto& part = trace.acts[i];
            const std::size_t n = part.data.size();
            if (i != 0 || want_input_grad) {
              FeatureMap<T> slice(part.channels, part.height, part.width);
              std::copy(g.data.begin() + offset, g.data.begin() + offset + n, slice.data.begin());
              add_into(d[i], std::move(slice));
            }
            offset += n;
          }
          break;
        }
        case LayerKind::InstanceNorm: {
          auto dx = instance_norm_backward(x, g, tensor_span(params, l.weight), tensor_span(grads, l.weight),
                                           tensor_span(grads, l.bias));
          if (need_dx) add_into(d[src], std::move(dx));
          break;
        }
        case LayerKind::Input:
          break;
      }
    } catch (const ShapeError& e) {
      throw ShapeError("layer '" + l.name + "': " + e.what());
    }
  }
  FeatureMap<T> dx = std::move(d[0]);
  if (want_input_grad && dx.data.empty()) dx = FeatureMap<T>(trace.acts[0].channels, trace.acts[0].height, trace.acts[0].width);
  return dx;
}

template <typename T>
std::pair<ParamStore<T>, Tensor4<T>> backward(const Network& net, const ParamStore<T>& params, const Tensor4<T>& x,
                                              const Tensor4<T>& upstream) {
  if (upstream.batch != x.batch) throw ShapeError("backward: upstream batch does not match the input batch");
  auto grads = net.template zero_params<T>();
  Tensor4<T> dx(x.batch, x.channels, x.height, x.width);
  for (int n = 0; n < x.batch; ++n) {
    auto trace = forward_trace(net, params, x.get_sample(n));
    dx.set_sample(n, backward_sample(net, params, trace, upstream.get_sample(n), grads, true));
  }
  return {std::move(grads), std::move(dx)};
}

#define HRSAR_INSTANTIATE_NET(T)                                                                                    \
  template ParamStore<T> Network::zero_params<T>() const;                                                           \
  template void Network::check_params<T>(const ParamStore<T>&) const;                                               \
  template SampleTrace<T> forward_trace<T>(const Network&, const ParamStore<T>&, const FeatureMap<T>&);             \
  template FeatureMap<T> forward_sample<T>(const Network&, const ParamStore<T>&, const FeatureMap<T>&);             \
  template Tensor4<T> forward<T>(const Network&, const ParamStore<T>&, const Tensor4<T>&);                          \
  template FeatureMap<T> backward_sample<T>(const Network&, const ParamStore<T>&, SampleTrace<T>&, FeatureMap<T>,   \
                                            ParamStore<T>&, bool);                                                  \
  template std::pair<ParamStore<T>, Tensor4<T>> backward<T>(const Network&, const ParamStore<T>&, const Tensor4<T>&, \
                                                            const Tensor4<T>&);

HRSAR_INSTANTIATE_NET(float)
HRSAR_INSTANTIATE_NET(double)

}  // namespace hrsar
