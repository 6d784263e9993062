#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "hrsar/network.hpp"
#include "hrsar/raster.hpp"

namespace hrsar {

template <typename T>
using GradStore = ParamStore<T>;

// ---- loss ------------------------------------------------------------------

/// Per-class loss weights w_c = N / (C * N_c), rescaled to mean 1. Pixels coded 255 are not
/// counted. Throws NumericError when some class never occurs.
std::vector<double> class_weights(std::span<const LabelRaster> labels, int num_classes = 3);

/// Same rule from already accumulated per-class counts.
std::vector<double> class_weights_from_counts(std::span<const std::uint64_t> counts);

template <typename T>
struct LossResult {
  double loss = 0.0;
  double weight_sum = 0.0;  // normalizer: sum of w_y over labeled pixels
  Tensor4<T> grad;          // dL/dlogits, zero at ignored pixels
};

/// Weighted softmax cross-entropy averaged by the summed weights of labeled pixels.
/// `labels` holds one raster per batch entry; pixels equal to `ignore` contribute nothing.
template <typename T>
LossResult<T> ce_loss(const Tensor4<T>& logits, std::span<const LabelRaster> labels, std::span<const double> weights,
                      std::uint8_t ignore = kUnlabeled);

// ---- optimizer -------------------------------------------------------------

struct AdamState {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  ParamStore<double> m;
  ParamStore<double> v;
};

AdamState make_adam(const WeightStore& w, double lr);

/// Bias-corrected Adam update. Throws NumericError on a non-finite gradient before
/// touching any parameter.
void adam_step(AdamState& state, WeightStore& w, const GradStore<float>& g);

struct PlateauState {
  double lr = 1e-2;
  double factor = 0.1;
  int patience = 10;
  double threshold = 1e-4;  // relative
  double best = 0.0;
  bool has_best = false;
  int bad_epochs = 0;
};

/// Reduce-on-plateau for a metric where lower is better. Returns true when lr was reduced.
bool plateau_update(PlateauState& state, double metric);

// ---- training loop ---------------------------------------------------------

struct TrainSample {
  RealRaster features;  // channels = network input channels
  LabelRaster labels;
};

struct TrainHyper {
  int batch = 8;
  int max_epochs = 80;
  double lr = 1e-2;
  std::uint64_t seed = 1;
  bool class_balancing = true;
  int plateau_patience = 10;
  double plateau_factor = 0.1;
  double plateau_threshold = 1e-4;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  WeightStore weights;
  std::vector<EpochRecord> history;
  std::vector<double> class_weights;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch training. Pure function of (data, topology, hyper): shuffling and init derive
/// from hyper.seed and per-sample gradients are reduced in batch order.
TrainResult train(std::span<const TrainSample> data, const TopologyConfig& topology, const TrainHyper& hyper,
                  const EpochCallback& on_epoch = {});

/// Per-pixel argmax of logits for one feature raster.
LabelRaster predict(const Network& net, const WeightStore& w, const RealRaster& features);

FeatureMap<float> to_feature_map(const RealRaster& r);

void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

}  // namespace hrsar
