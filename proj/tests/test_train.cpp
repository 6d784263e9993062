#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "hrsar/train.hpp"
#include "oracles.hpp"

using namespace hrsar;

TEST(ClassWeights, InverseFrequencyWithUnitMean) {
  const std::uint64_t counts[] = {600, 300, 100};
  const auto w = class_weights_from_counts(counts);
  // raw N/(C N_c) = 0.5556, 1.1111, 3.3333; mean 1.6667
  EXPECT_NEAR(w[0], 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(w[1], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(w[2], 2.0, 1e-12);
  EXPECT_NEAR((w[0] + w[1] + w[2]) / 3.0, 1.0, 1e-12);

  LabelRaster l(4, 1, 1);
  l.data = {0, 1, 255, 2};
  const LabelRaster ls[] = {l};
  const auto e = class_weights(ls);
  EXPECT_NEAR(e[0], 1.0, 1e-12);
  EXPECT_NEAR(e[2], 1.0, 1e-12);
  l.data = {0, 0, 255, 1};
  const LabelRaster missing[] = {l};
  EXPECT_THROW(class_weights(missing), NumericError);
}

TEST(Loss, HandComputedValue) {
  Tensor4<double> z(1, 3, 1, 2);
  // pixel 0: logits (0, ln 2, 0) label 1; pixel 1: ignored
  z.at(0, 1, 0, 0) = std::log(2.0);
  LabelRaster l(2, 1, 1);
  l.data = {1, kUnlabeled};
  const LabelRaster ls[] = {l};
  const double w[] = {1.0, 3.0, 1.0};
  const auto r = ce_loss<double>(z, ls, w);
  EXPECT_NEAR(r.loss, -std::log(0.5), 1e-12);
  EXPECT_NEAR(r.weight_sum, 3.0, 1e-12);
  // d/dz = w_y (p - onehot) / sum w = (0.25, -0.5, 0.25)
  EXPECT_NEAR(r.grad.at(0, 0, 0, 0), 0.25, 1e-12);
  EXPECT_NEAR(r.grad.at(0, 1, 0, 0), -0.5, 1e-12);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(r.grad.at(0, k, 0, 1), 0.0);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  CounterRng rng(41);
  for (int t = 0; t < 5; ++t) {
    Tensor4<double> z(2, 3, 3, 4);
    for (auto& v : z.data) v = rng.uniform(-3, 3);
    std::vector<LabelRaster> ls(2, LabelRaster(4, 3, 1));
    for (auto& l : ls)
      for (auto& v : l.data) v = static_cast<std::uint8_t>(std::array{0, 1, 2, 255}[rng.below(4)]);
    ls[0].data[0] = 0;
    const double w[] = {0.5, 1.2, 1.3};
    const auto r = ce_loss<double>(z, ls, w);
    for (std::size_t i = 0; i < z.data.size(); ++i) {
      auto zp = z, zm = z;
      zp.data[i] += 1e-6;
      zm.data[i] -= 1e-6;
      const double num = (ce_loss<double>(zp, ls, w).loss - ce_loss<double>(zm, ls, w).loss) / 2e-6;
      EXPECT_TRUE(oracle::close_rel(r.grad.data[i], num, 1e-4, 1e-9)) << i << " " << r.grad.data[i] << " " << num;
    }
  }
}

TEST(Loss, ShapeAndLabelErrors) {
  Tensor4<float> z(1, 3, 2, 2);
  LabelRaster l(2, 2, 1, 0);
  const LabelRaster ls[] = {l};
  const double two[] = {1, 1};
  EXPECT_THROW(ce_loss<float>(z, ls, two), ShapeError);
  const double w[] = {1, 1, 1};
  LabelRaster all_ignored(2, 2, 1, kUnlabeled);
  const LabelRaster li[] = {all_ignored};
  EXPECT_THROW(ce_loss<float>(z, li, w), NumericError);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  WeightStore w;
  w.add("p", {3}, {1.0f, -2.0f, 0.5f});
  GradStore<float> g;
  g.add("p", {3}, {0.3f, -4.0f, 0.0f});
  auto st = make_adam(w, 0.1);
  adam_step(st, w, g);
  // bias-corrected first step: -lr * g / (|g| + eps)
  EXPECT_NEAR(w[0].values[0], 0.9f, 1e-6);
  EXPECT_NEAR(w[0].values[1], -1.9f, 1e-6);
  EXPECT_EQ(w[0].values[2], 0.5f);
  EXPECT_EQ(st.step, 1u);

  // second step, constant gradient: m_hat = g, v_hat = g^2 -> again lr * sign(g)
  adam_step(st, w, g);
  EXPECT_NEAR(w[0].values[0], 0.8f, 1e-6);
}

TEST(Adam, RejectsNonFiniteGradientWithoutTouchingWeights) {
  WeightStore w;
  w.add("a", {1}, {1.0f});
  w.add("b", {1}, {2.0f});
  GradStore<float> g;
  g.add("a", {1}, {1.0f});
  g.add("b", {1}, {std::numeric_limits<float>::infinity()});
  auto st = make_adam(w, 0.1);
  EXPECT_THROW(adam_step(st, w, g), NumericError);
  EXPECT_EQ(w[0].values[0], 1.0f);
  EXPECT_EQ(st.step, 0u);
}

TEST(Plateau, ReducesAfterPatienceExceeded) {
  PlateauState s;
  s.patience = 2;
  EXPECT_FALSE(plateau_update(s, 1.0));
  EXPECT_FALSE(plateau_update(s, 0.99999));  // within the relative threshold: a bad epoch
  EXPECT_FALSE(plateau_update(s, 1.0));
  EXPECT_TRUE(plateau_update(s, 1.0));
  EXPECT_NEAR(s.lr, 1e-3, 1e-15);
  EXPECT_EQ(s.bad_epochs, 0);
  EXPECT_FALSE(plateau_update(s, 0.5));
  EXPECT_DOUBLE_EQ(s.best, 0.5);
}

namespace {

std::vector<TrainSample> toy_data(int n) {
  // Two planes; the class is a per-pixel threshold rule on them, learnable by 1x1 convs.
  CounterRng rng(43);
  std::vector<TrainSample> d;
  for (int k = 0; k < n; ++k) {
    TrainSample s{RealRaster(16, 16, 2), LabelRaster(16, 16, 1)};
    for (std::size_t i = 0; i < 256; ++i) {
      const float a = static_cast<float>(rng.uniform()), b = static_cast<float>(rng.uniform());
      s.features.data[i] = a;
      s.features.data[256 + i] = b;
      s.labels.data[i] = a > 0.6f && a > b ? 1 : (b > 0.6f ? 2 : 0);
    }
    d.push_back(std::move(s));
  }
  return d;
}

}  // namespace

TEST(Training, DeterministicAndLossDecreases) {
  const auto data = toy_data(6);
  TopologyConfig topo;
  topo.input_channels = 2;
  topo.width = 4;
  topo.encoder_levels = 1;
  TrainHyper h;
  h.batch = 2;
  h.max_epochs = 25;
  h.seed = 5;
  const auto a = train(data, topo, h);
  const auto b = train(data, topo, h);
  EXPECT_EQ(a.weights, b.weights);
  ASSERT_EQ(a.history.size(), 25u);
  EXPECT_LT(a.history.back().loss, 0.7 * a.history.front().loss);
  EXPECT_EQ(a.class_weights.size(), 3u);
  h.seed = 6;
  EXPECT_NE(train(data, topo, h).weights, a.weights);

  const Network net = Network::build(topo);
  const auto pred = predict(net, a.weights, data[0].features);
  EXPECT_EQ(pred.width, 16u);
  for (auto v : pred.data) EXPECT_LT(v, 3);
}

TEST(Training, RejectsMismatchedFeatureChannels) {
  auto data = toy_data(2);
  TopologyConfig topo;
  topo.input_channels = 3;
  topo.encoder_levels = 1;
  TrainHyper h;
  h.max_epochs = 1;
  EXPECT_THROW(train(data, topo, h), Error);
}
