#include <cmath>
#include <numeric>

#include "hrsar/train.hpp"

namespace hrsar {

std::vector<double> class_weights_from_counts(std::span<const std::uint64_t> counts) {
  const double c = static_cast<double>(counts.size());
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}));
  std::vector<double> w(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0)
      throw NumericError("class " + std::to_string(k) +
                         " has no labeled pixels; class weights are undefined (train without class balancing)");
    w[k] = total / (c * static_cast<double>(counts[k]));
  }
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / c;
  for (auto& v : w) v /= mean;
  return w;
}

std::vector<double> class_weights(std::span<const LabelRaster> labels, int num_classes) {
  if (num_classes < 1) throw ConfigError("class_weights: num_classes must be positive");
  std::vector<std::uint64_t> counts(num_classes, 0);
  for (const auto& r : labels)
    for (auto v : r.data)
      if (v != kUnlabeled && v < num_classes) ++counts[v];
  return class_weights_from_counts(counts);
}

template <typename T>
LossResult<T> ce_loss(const Tensor4<T>& logits, std::span<const LabelRaster> labels, std::span<const double> weights,
                      std::uint8_t ignore) {
  const int c = logits.channels;
  if (static_cast<int>(weights.size()) != c)
    throw ShapeError("ce_loss: " + std::to_string(weights.size()) + " class weights for " + std::to_string(c) +
                     " logit channels");
  if (static_cast<int>(labels.size()) != logits.batch)
    throw ShapeError("ce_loss: " + std::to_string(labels.size()) + " label rasters for a batch of " +
                     std::to_string(logits.batch));
  const std::size_t hw = static_cast<std::size_t>(logits.height) * logits.width;
  for (const auto& l : labels)
    if (l.width != static_cast<std::uint64_t>(logits.width) || l.height != static_cast<std::uint64_t>(logits.height))
      throw ShapeError("ce_loss: label raster is " + std::to_string(l.width) + "x" + std::to_string(l.height) +
                       ", logits are " + std::to_string(logits.width) + "x" + std::to_string(logits.height));

  LossResult<T> r;
  r.grad = Tensor4<T>(logits.batch, c, logits.height, logits.width);
  double num = 0.0;
  std::vector<double> p(c);
  for (int n = 0; n < logits.batch; ++n) {
    const T* z = logits.data.data() + n * logits.sample_size();
    for (std::size_t i = 0; i < hw; ++i) {
      const auto y = labels[n].data[i];
      if (y == ignore) continue;
      if (y >= c) throw ShapeError("ce_loss: label " + std::to_string(y) + " outside the class range");
      double zmax = z[i];
      for (int k = 1; k < c; ++k) zmax = std::max<double>(zmax, z[k * hw + i]);
      double sum = 0.0;
      for (int k = 0; k < c; ++k) sum += (p[k] = std::exp(static_cast<double>(z[k * hw + i]) - zmax));
      const double wy = weights[y];
      num += wy * (std::log(sum) - (static_cast<double>(z[y * hw + i]) - zmax));
      r.weight_sum += wy;
      T* g = r.grad.data.data() + n * r.grad.sample_size();
      for (int k = 0; k < c; ++k) g[k * hw + i] = static_cast<T>(wy * (p[k] / sum - (k == y ? 1.0 : 0.0)));
    }
  }
  if (!(r.weight_sum > 0.0)) throw NumericError("ce_loss: batch has no labeled pixels");
  r.loss = num / r.weight_sum;
  const T inv = static_cast<T>(1.0 / r.weight_sum);
  for (auto& g : r.grad.data) g *= inv;
  return r;
}

template LossResult<float> ce_loss<float>(const Tensor4<float>&, std::span<const LabelRaster>, std::span<const double>,
                                          std::uint8_t);
template LossResult<double> ce_loss<double>(const Tensor4<double>&, std::span<const LabelRaster>,
                                            std::span<const double>, std::uint8_t);

}  // namespace hrsar
