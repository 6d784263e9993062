#include <cmath>
#include <fstream>
#include <numeric>

#include "hrsar/rng.hpp"
#include "hrsar/train.hpp"

namespace hrsar {

FeatureMap<float> to_feature_map(const RealRaster& r) {
  FeatureMap<float> m;
  m.channels = static_cast<int>(r.channels);
  m.height = static_cast<int>(r.height);
  m.width = static_cast<int>(r.width);
  m.data = r.data;
  return m;
}

LabelRaster predict(const Network& net, const WeightStore& w, const RealRaster& features) {
  const auto logits = forward_sample(net, w, to_feature_map(features));
  LabelRaster out(features.width, features.height);
  const std::size_t hw = logits.plane_size();
  for (std::size_t i = 0; i < hw; ++i) {
    int best = 0;
    for (int k = 1; k < logits.channels; ++k)
      if (logits.data[k * hw + i] > logits.data[best * hw + i]) best = k;
    out.data[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

namespace {

struct SampleOutcome {
  GradStore<float> grads;
  double loss = 0.0;
  double weight_sum = 0.0;
};

SampleOutcome run_sample(const Network& net, const WeightStore& w, const TrainSample& s,
                         std::span<const double> cw) {
  SampleOutcome out;
  out.grads = w.zeros_like();
  auto trace = forward_trace(net, w, to_feature_map(s.features));
  const auto& logits = trace.acts.back();
  Tensor4<float> batch(1, logits.channels, logits.height, logits.width);
  batch.data = logits.data;
  std::span<const LabelRaster> lab(&s.labels, 1);
  bool any = false;
  for (auto v : s.labels.data)
    if (v != kUnlabeled) {
      any = true;
      break;
    }
  if (!any) return out;
  auto r = ce_loss(batch, lab, cw);
  out.loss = r.loss;
  out.weight_sum = r.weight_sum;
  backward_sample(net, w, trace, r.grad.get_sample(0), out.grads, false);
  return out;
}

}  // namespace

TrainResult train(std::span<const TrainSample> data, const TopologyConfig& topology, const TrainHyper& hyper,
                  const EpochCallback& on_epoch) {
  if (data.empty()) throw ConfigError("training set is empty");
  if (hyper.batch < 1) throw ConfigError("batch size must be positive");
  if (hyper.max_epochs < 1) throw ConfigError("max_epochs must be positive");
  const Network net = Network::build(topology);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data[i];
    if (static_cast<int>(s.features.channels) != topology.input_channels)
      throw ShapeError("training sample " + std::to_string(i) + " has " + std::to_string(s.features.channels) +
                       " feature channels, the topology expects " + std::to_string(topology.input_channels));
    if (!s.features.same_dims(RealRaster(s.labels.width, s.labels.height)))
      throw ShapeError("training sample " + std::to_string(i) + ": feature and label rasters differ in size");
    net.check_input_size(static_cast<int>(s.features.height), static_cast<int>(s.features.width));
  }

  TrainResult result;
  if (hyper.class_balancing) {
    std::vector<std::uint64_t> counts(topology.num_classes, 0);
    for (const auto& s : data)
      for (auto v : s.labels.data)
        if (v != kUnlabeled && v < topology.num_classes) ++counts[v];
    result.class_weights = class_weights_from_counts(counts);
  } else {
    result.class_weights.assign(topology.num_classes, 1.0);
  }

  WeightStore w = net.init_weights(hyper.seed);
  AdamState adam = make_adam(w, hyper.lr);
  PlateauState plateau;
  plateau.lr = hyper.lr;
  plateau.factor = hyper.plateau_factor;
  plateau.patience = hyper.plateau_patience;
  plateau.threshold = hyper.plateau_threshold;

  std::vector<std::size_t> order(data.size());
  for (int epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(hyper.seed, 0x7e40000000ULL + static_cast<std::uint64_t>(epoch));
    rng.shuffle(std::span<std::size_t>(order));

    adam.lr = plateau.lr;
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(hyper.batch));
      const int nb = static_cast<int>(end - start);
      std::vector<SampleOutcome> outcomes(nb);
#pragma omp parallel for schedule(dynamic, 1)
      for (int b = 0; b < nb; ++b) outcomes[b] = run_sample(net, w, data[order[start + b]], result.class_weights);

      // Fixed-order reduction keeps the result independent of the thread count.
      double wsum = 0.0;
      for (const auto& o : outcomes) wsum += o.weight_sum;
      if (!(wsum > 0.0)) continue;
      GradStore<float> g = w.zeros_like();
      double loss = 0.0;
      for (const auto& o : outcomes) {
        if (o.weight_sum == 0.0) continue;
        const double share = o.weight_sum / wsum;
        loss += share * o.loss;
        for (std::size_t k = 0; k < g.size(); ++k) {
          auto& dst = g[k].values;
          const auto& src = o.grads[k].values;
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += static_cast<float>(share * src[i]);
        }
      }
      adam_step(adam, w, g);
      epoch_loss += loss;
      ++batches;
    }
    if (batches == 0) throw NumericError("no training batch contained labeled pixels");
    const EpochRecord rec{epoch, epoch_loss / batches, plateau.lr};
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    plateau_update(plateau, rec.loss);
  }
  result.weights = std::move(w);
  return result;
}

void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "epoch,loss,lr\n";
  out.precision(9);
  for (const auto& r : history) out << r.epoch << ',' << r.loss << ',' << r.lr << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace hrsar
