#include <gtest/gtest.h>

#include "ecmnet/blocks.hpp"
#include "support/gradcheck.hpp"
#include "support/module_util.hpp"
#include "support/reference.hpp"

using namespace ecmnet;
using blocks::EDAB;
using blocks::EDABConfig;
using testutil::as_map;
using testutil::max_abs_diff;
using Td = Tensor<double>;
using W = std::map<std::string, std::vector<double>>;

namespace {

// Conv (+ batch-norm in training mode) straight from the weight table.
ref::Map conv_bn(const ref::Map& x, const W& w, const std::string& p, int cout, int kh, int kw, int dh, int dw,
                 int groups, bool relu) {
  const auto& bias = w.count(p + ".conv.bias") ? &w.at(p + ".conv.bias") : nullptr;
  auto y = ref::conv(x, w.at(p + ".conv.weight"), bias, cout, kh, kw, 1, dh * (kh - 1) / 2, dw * (kw - 1) / 2, dh, dw,
                     groups);
  y = ref::batch_norm_train(y, w.at(p + ".bn.weight"), w.at(p + ".bn.bias"), 1e-5);
  return relu ? ref::relu(y) : y;
}

ref::Map ca_oracle(const ref::Map& x, const W& w, const std::string& p) {
  const int c = x.c, hidden = std::max(1, c / 4);
  auto s = ref::mean_hw(x);
  s = ref::conv(s, w.at(p + ".fc1.weight"), &w.at(p + ".fc1.bias"), hidden, 1, 1, 1, 0, 0, 1, 1, 1);
  s = ref::relu(s);
  s = ref::conv(s, w.at(p + ".fc2.weight"), &w.at(p + ".fc2.bias"), c, 1, 1, 1, 0, 0, 1, 1, 1);
  return ref::mul(x, ref::sigmoid(s));
}

ref::Map dda_oracle(const ref::Map& x, const W& w, const std::string& p) {
  const int c = x.c;
  auto gh = ref::sigmoid(ref::conv(ref::mean_w(x), w.at(p + ".conv_h.weight"), &w.at(p + ".conv_h.bias"), c, 3, 1, 1,
                                   1, 0, 1, 1, 1));
  auto gw = ref::sigmoid(ref::conv(ref::mean_h(x), w.at(p + ".conv_w.weight"), &w.at(p + ".conv_w.bias"), c, 1, 3, 1,
                                   0, 1, 1, 1, 1));
  return ref::mul(ref::mul(x, gh), gw);
}

ref::Map edab_oracle(const ref::Map& x, const W& w, int r, int g) {
  const int c = x.c, h = c / 2;
  auto t = conv_bn(x, w, "reduce", h, 1, 1, 1, 1, 1, true);
  t = conv_bn(t, w, "trunk_31", h, 3, 1, 1, 1, 1, true);
  t = conv_bn(t, w, "trunk_13", h, 1, 3, 1, 1, 1, true);
  auto local = conv_bn(t, w, "dw_31", h, 3, 1, 1, 1, h, false);
  local = conv_bn(local, w, "dw_13", h, 1, 3, 1, 1, h, false);
  local = ca_oracle(local, w, "ca");
  auto ctx = conv_bn(t, w, "ddw_31", h, 3, 1, r, 1, h, false);
  ctx = conv_bn(ctx, w, "ddw_13", h, 1, 3, 1, r, h, false);
  ctx = dda_oracle(ctx, w, "dda");
  auto sum = ref::add(ref::add(t, local), ctx);
  auto y = conv_bn(sum, w, "restore", c, 1, 1, 1, 1, 1, false);
  return ref::shuffle(ref::add(y, x), g);
}

}  // namespace

TEST(ChannelShuffle, MatchesClosedFormIndexMap) {
  for (int c = 1; c <= 16; ++c)
    for (int g = 1; g <= c; ++g) {
      if (c % g) continue;
      auto x = gradcheck::random({1, c, 2, 3}, static_cast<std::uint64_t>(c * 32 + g));
      auto y = ops::channel_shuffle(x, g);
      for (int i = 0; i < c; ++i) {
        const int src = (i % g) * (c / g) + i / g;
        for (int p = 0; p < 6; ++p) ASSERT_EQ(y.data()[i * 6 + p], x.data()[src * 6 + p]) << c << "/" << g;
      }
    }
}

TEST(ChannelShuffle, SmallCasesAndInverse) {
  auto x = Td::from({1, 4, 1, 1}, {0, 1, 2, 3});
  auto y = ops::channel_shuffle(x, 2);
  EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()), (std::vector<double>{0, 2, 1, 3}));
  auto z = gradcheck::random({2, 6, 3, 3}, 3);
  auto back = ops::channel_shuffle(ops::channel_shuffle(z, 3), 2);
  for (std::int64_t i = 0; i < z.numel(); ++i) ASSERT_EQ(back.data()[i], z.data()[i]);
  auto id = ops::channel_shuffle(z, 1);
  for (std::int64_t i = 0; i < z.numel(); ++i) ASSERT_EQ(id.data()[i], z.data()[i]);
  EXPECT_THROW(ops::channel_shuffle(z, 4), ConfigError);
}

TEST(ChannelAttention, TrivialGatesAndOracle) {
  nn::Rng rng(1);
  blocks::ChannelAttention<double> ca(8, rng);
  auto x = gradcheck::random({1, 8, 4, 4}, 2);
  ca.zero_parameters();
  auto half = ca.forward(x);
  for (std::int64_t i = 0; i < x.numel(); ++i) ASSERT_DOUBLE_EQ(half.data()[i], 0.5 * x.data()[i]);
  for (auto& v : ca.excite().bias().data()) v = 20.0;
  EXPECT_LT(max_abs_diff(ca.forward(x), as_map(x)), 1e-6 * 4);
  testutil::randomize(ca, 3);
  auto w = testutil::weights(ca);
  W prefixed;
  for (auto& [k, v] : w) prefixed["ca." + k] = v;
  EXPECT_LT(max_abs_diff(ca.forward(x), ca_oracle(as_map(x), prefixed, "ca")), 1e-12);
  auto g = ca.gate(gradcheck::random({2, 8, 3, 3}, 4, 10.0));
  for (double v : g.data()) EXPECT_TRUE(v > 0 && v < 1);
}

TEST(DualDirectionAttention, TrivialGatesAndOracle) {
  nn::Rng rng(1);
  blocks::DualDirectionAttention<double> dda(4, rng);
  auto x = gradcheck::random({1, 4, 5, 7}, 2);
  testutil::randomize(dda, 5);
  W prefixed;
  for (auto& [k, v] : testutil::weights(dda)) prefixed["dda." + k] = v;
  EXPECT_LT(max_abs_diff(dda.forward(x), dda_oracle(as_map(x), prefixed, "dda")), 1e-12);
  auto zero = dda.forward(Td::zeros({1, 4, 5, 7}));
  for (double v : zero.data()) EXPECT_EQ(v, 0.0);
  dda.zero_parameters();
  for (auto& v : dda.conv_h().bias().data()) v = 20.0;
  for (auto& v : dda.conv_w().bias().data()) v = 20.0;
  EXPECT_LT(max_abs_diff(dda.forward(x), as_map(x)), 1e-6 * 4);
  // Large but not saturating: σ rounds to exactly 1 past ~37.
  testutil::randomize(dda, 6, 2.0);
  auto big = gradcheck::random({1, 4, 5, 7}, 9, 3.0);
  for (const auto& gv : {dda.gate_h(big), dda.gate_w(big)})
    for (double v : gv.data()) EXPECT_TRUE(v > 0 && v < 1);
  EXPECT_EQ(dda.gate_h(x).shape(), (Shape{1, 4, 5, 1}));
  EXPECT_EQ(dda.gate_w(x).shape(), (Shape{1, 4, 1, 7}));
}

class EDABOracle : public ::testing::TestWithParam<std::tuple<int, int, int>> {};

TEST_P(EDABOracle, MatchesStraightLineComposition) {
  const auto [c, r, g] = GetParam();
  nn::Rng rng(7);
  EDAB<double> block(EDABConfig{c, r, nn::NormKind::batch, g}, rng);
  testutil::randomize(block, 8);
  auto x = gradcheck::random({2, c, 8, 8}, 9);
  auto y = block.forward(x);
  EXPECT_EQ(y.shape(), x.shape());
  EXPECT_LT(max_abs_diff(y, edab_oracle(as_map(x), testutil::weights(block), r, g)), 1e-10);
}

INSTANTIATE_TEST_SUITE_P(Configs, EDABOracle,
                         ::testing::Values(std::make_tuple(4, 1, 2), std::make_tuple(4, 2, 4), std::make_tuple(8, 4, 2),
                                           std::make_tuple(6, 16, 3)));

TEST(EDAB, ShapePreservedAcrossSizes) {
  nn::Rng rng(1);
  EDAB<double> block(EDABConfig{64, 2, nn::NormKind::batch, 2}, rng);
  auto y = block.forward(gradcheck::random({2, 64, 32, 32}, 1));
  EXPECT_EQ(y.shape(), (Shape{2, 64, 32, 32}));
  EDAB<double> small(EDABConfig{4, 1, nn::NormKind::batch, 2}, rng);
  for (auto [h, w] : {std::pair{3, 3}, std::pair{5, 9}, std::pair{8, 3}})
    EXPECT_EQ(small.forward(gradcheck::random({1, 4, h, w}, 2)).shape(), (Shape{1, 4, h, w}));
}

TEST(EDAB, ZeroWeightsReduceToShuffle) {
  for (auto kind : {nn::NormKind::identity, nn::NormKind::batch}) {
    nn::Rng rng(1);
    EDAB<double> block(EDABConfig{8, 2, kind, 2}, rng);
    block.zero_parameters();
    auto x = gradcheck::random({2, 8, 6, 6}, 3);
    auto y = block.forward(x);
    auto want = ops::channel_shuffle(x, 2);
    for (std::int64_t i = 0; i < x.numel(); ++i) ASSERT_EQ(y.data()[i], want.data()[i]);
  }
}

TEST(EDAB, ConfigErrors) {
  nn::Rng rng(1);
  EXPECT_THROW(EDAB<double>(EDABConfig{5, 1, nn::NormKind::batch, 1}, rng), ConfigError);
  EXPECT_THROW(EDAB<double>(EDABConfig{8, 0, nn::NormKind::batch, 2}, rng), ConfigError);
  EXPECT_THROW(EDAB<double>(EDABConfig{8, 1, nn::NormKind::batch, 3}, rng), ConfigError);
  EDAB<double> block(EDABConfig{8, 1, nn::NormKind::batch, 2}, rng);
  EXPECT_THROW(block.forward(gradcheck::random({1, 6, 4, 4}, 1)), ConfigError);
  // A dilation wider than the map is fine: zero padding keeps the size.
  EDAB<double> wide(EDABConfig{4, 16, nn::NormKind::batch, 2}, rng);
  EXPECT_EQ(wide.forward(gradcheck::random({1, 4, 3, 3}, 1)).shape(), (Shape{1, 4, 3, 3}));
}

TEST(EDAB, ParameterCountMatchesHandCount) {
  // Hand counts, h = C/2, no conv bias under batch norm (2 per channel):
  //   reduce C·h+2h, trunk 2·(3h²+2h), four depth-wise 4·(3h+2h),
  //   CA h·m+m+m·h+h with m = max(1, h/4), DDA 2·(3h²+h), restore h·C+2C.
  struct Case {
    EDABConfig cfg;
    std::int64_t want;
  };
  // C=4:  h=2, m=1 -> 12 + 32 + 40 + 7 + 28 + 16 = 135
  // C=16: h=8, m=2 -> 144 + 416 + 160 + 42 + 400 + 160 = 1322
  // C=16 with identity norm drops 2h+4h+8h+2C = 14·8 + 32 -> 1322 - 144 = 1178
  for (const auto& [cfg, want] : {Case{{4, 1, nn::NormKind::batch, 2}, 135}, Case{{16, 4, nn::NormKind::batch, 4}, 1322},
                                  Case{{16, 2, nn::NormKind::identity, 2}, 1178}}) {
    nn::Rng rng(0);
    EDAB<double> block(cfg, rng);
    EXPECT_EQ(block.parameter_count(), want);
    EXPECT_EQ(EDAB<double>::count(cfg), want);
  }
}

TEST(EDAB, GradientsMatchFiniteDifferences) {
  nn::Rng rng(3);
  EDAB<double> block(EDABConfig{2, 2, nn::NormKind::batch, 2}, rng);
  testutil::randomize(block, 4);
  auto x = gradcheck::random({2, 2, 5, 5}, 5);
  auto params = testutil::parameters(block);
  params.push_back(x);
  auto r = gradcheck::check(params, [&] { return ops::sum(block.forward(x)); }, 20, 6);
  EXPECT_EQ(r.directions, 20);
  EXPECT_LT(r.worst_rel_error, 1e-4) << r.detail;
  r = gradcheck::check(params, [&] { return gradcheck::project(block.forward(x), 7); }, 20, 8);
  EXPECT_LT(r.worst_rel_error, 1e-4) << r.detail;
}
