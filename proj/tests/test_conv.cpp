#include <gtest/gtest.h>

#include "hrsar/conv.hpp"
#include "oracles.hpp"

using namespace hrsar;

namespace {

ConvSpec random_spec(CounterRng& rng, bool transposed) {
  ConvSpec s;
  s.transposed = transposed;
  s.in_channels = 1 + static_cast<int>(rng.below(6));
  s.out_channels = 1 + static_cast<int>(rng.below(6));
  s.kernel_h = 1 + static_cast<int>(rng.below(3));
  s.kernel_w = 1 + static_cast<int>(rng.below(3));
  s.stride = 1 + static_cast<int>(rng.below(2));
  s.dilation = transposed ? 1 : 1 + static_cast<int>(rng.below(3));
  s.padding = static_cast<int>(rng.below(3));
  s.bias = rng.below(2) == 0;
  if (transposed && s.stride > 1) s.output_padding = static_cast<int>(rng.below(s.stride));
  return s;
}

template <typename T>
double max_abs_diff(const FeatureMap<T>& a, const FeatureMap<T>& b) {
  EXPECT_TRUE(a.same_shape(b)) << a.shape_string() << " vs " << b.shape_string();
  double m = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(double(a.data[i]) - double(b.data[i])));
  return m;
}

}  // namespace

TEST(ConvSpec, OutputSizeFormula) {
  ConvSpec s;
  s.kernel_h = s.kernel_w = 3;
  s.padding = 2;
  s.dilation = 2;
  EXPECT_EQ(s.output_size(16, 10), std::make_pair(16, 10));
  s.stride = 2;
  s.padding = 1;
  s.dilation = 1;
  EXPECT_EQ(s.output_size(16, 10), std::make_pair(8, 5));
  ConvSpec t;
  t.transposed = true;
  t.kernel_h = t.kernel_w = 2;
  t.stride = 2;
  EXPECT_EQ(t.output_size(8, 5), std::make_pair(16, 10));
}

TEST(ConvSpec, RejectsBadGeometry) {
  ConvSpec s;
  s.stride = 0;
  EXPECT_THROW(s.validate(), ShapeError);
  ConvSpec t;
  t.output_padding = 1;  // not transposed
  EXPECT_THROW(t.validate(), ShapeError);
  ConvSpec big;
  big.kernel_h = big.kernel_w = 5;
  EXPECT_THROW(big.output_size(3, 3), ShapeError);
}

TEST(Conv, MatchesDirectLoopBothPaths) {
  CounterRng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const ConvSpec s = random_spec(rng, false);
    const int h = 7 + static_cast<int>(rng.below(14)), w = 7 + static_cast<int>(rng.below(70));
    const auto x = oracle::random_map<float>(rng, s.in_channels, h, w);
    const auto wt = oracle::random_vec<float>(rng, s.weight_count());
    const auto b = s.bias ? oracle::random_vec<float>(rng, s.out_channels) : std::vector<float>{};
    const auto ref = oracle::conv(x, s, wt, b);
    EXPECT_LT(max_abs_diff(conv2d<float>(x, s, wt, b), ref), 1e-4) << s.describe();
    EXPECT_LT(max_abs_diff(conv2d<float>(x, s, wt, b, ConvPath::Generic), ref), 1e-4) << s.describe();
  }
}

TEST(ConvTransposed, MatchesDirectScatter) {
  CounterRng rng(12);
  for (int trial = 0; trial < 60; ++trial) {
    const ConvSpec s = random_spec(rng, true);
    const int h = 3 + static_cast<int>(rng.below(10)), w = 3 + static_cast<int>(rng.below(40));
    const auto x = oracle::random_map<double>(rng, s.in_channels, h, w);
    const auto wt = oracle::random_vec<double>(rng, s.weight_count());
    const auto b = s.bias ? oracle::random_vec<double>(rng, s.out_channels) : std::vector<double>{};
    ConvSpec probe = s;
    try {
      (void)probe.output_size(h, w);
    } catch (const ShapeError&) {
      continue;
    }
    EXPECT_LT(max_abs_diff(conv2d_transposed<double>(x, s, wt, b), oracle::conv_transposed(x, s, wt, b)), 1e-12)
        << s.describe();
    EXPECT_LT(max_abs_diff(conv2d_transposed<double>(x, s, wt, b, ConvPath::Generic),
                           oracle::conv_transposed(x, s, wt, b)),
              1e-12);
  }
}

// Both gradients of a linear map are determined by inner-product identities:
// <dx, x'> = <dy, W x'> and <dW, W'> = <dy, W' x>.
TEST(ConvGrad, InputAndParamGradientsSatisfyLinearIdentities) {
  CounterRng rng(13);
  for (int trial = 0; trial < 40; ++trial) {
    const bool tr = trial % 2 == 1;
    ConvSpec s = random_spec(rng, tr);
    s.bias = true;
    const int h = 4 + static_cast<int>(rng.below(10)), w = 4 + static_cast<int>(rng.below(40));
    std::pair<int, int> out;
    try {
      out = s.output_size(h, w);
    } catch (const ShapeError&) {
      continue;
    }
    const auto x = oracle::random_map<double>(rng, s.in_channels, h, w);
    const auto x2 = oracle::random_map<double>(rng, s.in_channels, h, w);
    const auto wt = oracle::random_vec<double>(rng, s.weight_count());
    const auto w2 = oracle::random_vec<double>(rng, s.weight_count());
    const std::vector<double> nob(s.out_channels, 0.0);
    const auto dy = oracle::random_map<double>(rng, s.out_channels, out.first, out.second);

    auto apply = [&](const FeatureMap<double>& in, const std::vector<double>& k) {
      return tr ? oracle::conv_transposed(in, s, k, nob) : oracle::conv(in, s, k, nob);
    };
    const auto dx = tr ? conv2d_transposed_input_grad<double>(s, wt, dy, h, w)
                       : conv2d_input_grad<double>(s, wt, dy, h, w);
    EXPECT_NEAR(oracle::dot(dx.data, x2.data), oracle::dot(dy.data, apply(x2, wt).data), 1e-9) << s.describe();

    std::vector<double> dw(s.weight_count(), 0.0), db(s.out_channels, 0.0);
    if (tr)
      conv2d_transposed_param_grad<double>(s, x, dy, dw, db);
    else
      conv2d_param_grad<double>(s, x, dy, dw, db);
    EXPECT_NEAR(oracle::dot(dw, w2), oracle::dot(dy.data, apply(x, w2).data), 1e-9) << s.describe();
    for (int o = 0; o < s.out_channels; ++o) {
      double sum = 0;
      for (std::size_t k = 0; k < dy.plane_size(); ++k) sum += dy.plane(o)[k];
      EXPECT_NEAR(db[o], sum, 1e-9);
    }
  }
}

TEST(ConvGrad, ParamGradAccumulates) {
  CounterRng rng(14);
  ConvSpec s;
  s.in_channels = 3;
  s.out_channels = 5;
  s.padding = 1;
  const auto x = oracle::random_map<float>(rng, 3, 9, 20);
  const auto dy = oracle::random_map<float>(rng, 5, 9, 20);
  std::vector<float> once(s.weight_count()), twice(s.weight_count()), b1(5), b2(5);
  conv2d_param_grad<float>(s, x, dy, once, b1);
  conv2d_param_grad<float>(s, x, dy, twice, b2);
  conv2d_param_grad<float>(s, x, dy, twice, b2);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_NEAR(twice[i], 2 * once[i], 1e-4);
}

TEST(Conv, RejectsMismatchedBuffers) {
  ConvSpec s;
  s.in_channels = 2;
  FeatureMap<float> x(3, 8, 8);
  std::vector<float> w(s.weight_count()), b(1);
  EXPECT_THROW(conv2d<float>(x, s, w, b), ShapeError);
  FeatureMap<float> ok(2, 8, 8);
  std::vector<float> short_w(3);
  EXPECT_THROW(conv2d<float>(ok, s, short_w, b), ShapeError);
}

TEST(Conv, BatchedMatchesPerSample) {
  CounterRng rng(15);
  ConvSpec s;
  s.in_channels = 4;
  s.out_channels = 4;
  s.stride = 2;
  s.padding = 1;
  Tensor4<float> x(3, 4, 12, 12);
  for (auto& v : x.data) v = static_cast<float>(rng.uniform(-1, 1));
  const auto wt = oracle::random_vec<float>(rng, s.weight_count());
  const auto b = oracle::random_vec<float>(rng, 4);
  const auto y = conv2d<float>(x, s, wt, b);
  for (int n = 0; n < 3; ++n) {
    const auto ys = conv2d<float>(x.get_sample(n), s, wt, b);
    EXPECT_EQ(ys.data, y.get_sample(n).data);
  }
}
