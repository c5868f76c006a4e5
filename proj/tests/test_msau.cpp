#include <gtest/gtest.h>

#include "ecmnet/msau.hpp"
#include "support/gradcheck.hpp"
#include "support/module_util.hpp"
#include "support/reference.hpp"

using namespace ecmnet;
using msau::MSAU;
using msau::MSAUConfig;
using testutil::as_map;
using testutil::max_abs_diff;
using Td = Tensor<double>;
using W = std::map<std::string, std::vector<double>>;

namespace {

ref::Map conv1(const ref::Map& x, const W& w, const std::string& p, int cout) {
  const auto* bias = w.count(p + ".bias") ? &w.at(p + ".bias") : nullptr;
  return ref::conv(x, w.at(p + ".weight"), bias, cout, 1, 1, 1, 0, 0, 1, 1, 1);
}

ref::Map depthwise(const ref::Map& x, const W& w, const std::string& p, int k) {
  return ref::conv(x, w.at(p + ".weight"), &w.at(p + ".bias"), x.c, k, k, 1, k / 2, k / 2, 1, 1, x.c);
}

ref::Map separable(const ref::Map& x, const W& w, const std::string& p, int k, int cout) {
  return conv1(depthwise(x, w, p + ".dw", k), w, p + ".pw", cout);
}

// Spatial gate: pool height to 1, 7x7 separable conv, 1x1 conv, sigmoid.
ref::Map gate_oracle(const ref::Map& x, const W& w) {
  const int h = x.c / 2;
  return ref::sigmoid(conv1(separable(ref::mean_h(x), w, "gate_sep", 7, h), w, "gate_pw", h));
}

std::pair<ref::Map, ref::Map> aggregation_oracle(const ref::Map& x, const W& w, int reduction) {
  const int c = x.c, r = std::max(1, c / reduction);
  auto f = depthwise(x, w, "agg_dw", 3);
  auto mlp = [&](const ref::Map& v) { return conv1(ref::relu(conv1(v, w, "mlp1", r)), w, "mlp2", c); };
  return {mlp(ref::mean_hw(f)), mlp(ref::max_hw(f))};
}

ref::Map msau_oracle(const ref::Map& x, const W& w, const std::vector<int>& kernels, int reduction) {
  const int c = x.c, h = c / 2;
  // multi-kernel spatial aggregation
  auto reduced = conv1(x, w, "reduce", h);
  ref::Map x1(x.b, h, x.h, x.w);
  for (int k : kernels) x1 = ref::add(x1, separable(reduced, w, "branch" + std::to_string(k), k, h));
  // gated and expanded back to C
  auto x2 = conv1(ref::mul(x1, gate_oracle(x, w)), w, "expand", c);
  // mean- and max-pooled channel aggregation
  auto [x3, x4] = aggregation_oracle(x, w, reduction);
  // residual combine
  return ref::add(x, ref::mul(x2, ref::add(x3, x4)));
}

}  // namespace

TEST(MSAU, MatchesStepByStepOracle) {
  for (auto cfg : {MSAUConfig{4, {3, 5, 7}, 4}, MSAUConfig{8, {3, 5, 7}, 2}, MSAUConfig{6, {1, 3}, 3}}) {
    nn::Rng rng(1);
    MSAU<double> m(cfg, rng);
    testutil::randomize(m, 2);
    auto x = gradcheck::random({2, cfg.channels, 6, 6}, 3);
    const auto w = testutil::weights(m);
    auto y = m.forward(x);
    EXPECT_EQ(y.shape(), x.shape());
    EXPECT_LT(max_abs_diff(y, msau_oracle(as_map(x), w, cfg.kernel_set, cfg.channel_reduction)), 1e-10);
  }
}

TEST(MSAU, SpatialGateOracleAndTrivialCases) {
  nn::Rng rng(1);
  MSAU<double> m(MSAUConfig{4, {3, 5, 7}, 4}, rng);
  testutil::randomize(m, 4);
  auto x = gradcheck::random({1, 4, 3, 5}, 5);
  auto g = m.spatial_gate(x);
  EXPECT_EQ(g.shape(), (Shape{1, 2, 1, 5}));
  EXPECT_LT(max_abs_diff(g, gate_oracle(as_map(x), testutil::weights(m))), 1e-12);
  for (double v : g.data()) EXPECT_TRUE(v > 0 && v < 1);

  auto constant = Td::full({1, 4, 3, 5}, 0.7);
  // A constant map pools to a constant strip, but the zero-padded 7x7 conv
  // still sees the borders, so only the pooled input is checked here.
  auto pooled = ops::mean(constant, {2});
  for (double v : pooled.data()) EXPECT_DOUBLE_EQ(v, 0.7);

  m.zero_parameters();
  const auto flat = m.spatial_gate(x);
  for (double v : flat.data()) EXPECT_EQ(v, 0.5);
}

TEST(MSAU, ChannelAggregationOracleAndTrivialCases) {
  nn::Rng rng(1);
  MSAU<double> m(MSAUConfig{8, {3, 5, 7}, 4}, rng);
  testutil::randomize(m, 6);
  auto x = gradcheck::random({1, 8, 4, 4}, 7);
  auto [x3, x4] = m.channel_aggregation(x);
  auto [w3, w4] = aggregation_oracle(as_map(x), testutil::weights(m), 4);
  EXPECT_LT(max_abs_diff(x3, w3), 1e-12);
  EXPECT_LT(max_abs_diff(x4, w4), 1e-12);

  // With only the centre tap of the depth-wise kernel set, a
  // constant input gives identical average and max descriptors.
  auto& dw = m.agg_dw.weight();
  for (std::int64_t c = 0; c < 8; ++c)
    for (int t = 0; t < 9; ++t) dw.data()[c * 9 + t] = t == 4 ? 1.0 : 0.0;
  auto [c3, c4] = m.channel_aggregation(Td::full({1, 8, 4, 4}, 1.3));
  // Equal up to the rounding of the 16-term mean.
  for (std::int64_t i = 0; i < 8; ++i) EXPECT_NEAR(c3.data()[i], c4.data()[i], 1e-14);

  m.zero_parameters();
  for (auto& v : m.mlp2.bias().data()) v = 0.25;
  auto [z3, z4] = m.channel_aggregation(x);
  for (std::int64_t i = 0; i < 8; ++i) {
    EXPECT_EQ(z3.data()[i], 0.25);
    EXPECT_EQ(z4.data()[i], 0.25);
  }
}

TEST(MSAU, ZeroWeightsGiveIdentity) {
  nn::Rng rng(1);
  MSAU<double> m(MSAUConfig{16, {3, 5, 7}, 2}, rng);
  m.zero_parameters();
  auto x = gradcheck::random({2, 16, 5, 7}, 1);
  auto y = m.forward(x);
  for (std::int64_t i = 0; i < x.numel(); ++i) ASSERT_EQ(y.data()[i], x.data()[i]);
}

TEST(MSAU, ShapeAndConfigErrors) {
  nn::Rng rng(1);
  MSAU<double> m(MSAUConfig{32, {3, 5, 7}, 4}, rng);
  EXPECT_EQ(m.forward(gradcheck::random({1, 32, 16, 16}, 1)).shape(), (Shape{1, 32, 16, 16}));
  EXPECT_THROW(MSAU<double>(MSAUConfig{5, {3}, 4}, rng), ConfigError);
  EXPECT_THROW(MSAU<double>(MSAUConfig{4, {4}, 4}, rng), ConfigError);
  EXPECT_THROW(m.forward(gradcheck::random({1, 16, 4, 4}, 1)), ConfigError);
}

TEST(MSAU, ParameterCountMatchesHandCountForC32) {
  // C=32, h=16, kernels 3/5/7, reduction 4 (r=8):
  //   reduce 32·16+16 = 528
  //   branch k: dw 16k²+16, pw 16·16+16 -> k=3: 160+272, k=5: 416+272, k=7: 800+272 -> 2192
  //   gate: dw7 on 32 = 32·49+32 = 1600, pw 32→16 = 528, gate_pw 16·16+16 = 272 -> 2400
  //   expand 16·32+32 = 544
  //   agg dw3 32·9+32 = 320, mlp 32·8+8 + 8·32+32 = 552
  const std::int64_t want = 528 + 2192 + 2400 + 544 + 320 + 552;
  nn::Rng rng(0);
  MSAU<double> m(MSAUConfig{32, {3, 5, 7}, 4}, rng);
  EXPECT_EQ(m.parameter_count(), want);
  EXPECT_EQ(MSAU<double>::count(MSAUConfig{32, {3, 5, 7}, 4}), want);
}

TEST(MSAU, GradientsMatchFiniteDifferences) {
  nn::Rng rng(2);
  MSAU<double> m(MSAUConfig{4, {3, 5, 7}, 2}, rng);
  testutil::randomize(m, 3);
  auto x = gradcheck::random({1, 4, 5, 5}, 4);
  auto params = testutil::parameters(m);
  params.push_back(x);
  auto r = gradcheck::check(params, [&] { return gradcheck::project(m.forward(x), 5); }, 20, 6);
  EXPECT_EQ(r.directions, 20);
  EXPECT_LT(r.worst_rel_error, 1e-4) << r.detail;
}
