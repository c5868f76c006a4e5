#include <gtest/gtest.h>

#include <map>
#include <random>

#include "ecmnet/analysis.hpp"
#include "ecmnet/model.hpp"
#include "support/gradcheck.hpp"

using namespace ecmnet;
using model::ECMNet;
using model::ModelConfig;

namespace {

template <typename T>
Tensor<T> image(std::int64_t b, std::int64_t h, std::int64_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<T> v(static_cast<std::size_t>(b * 3 * h * w));
  for (auto& e : v) e = static_cast<T>(dist(rng));
  return Tensor<T>::from({b, 3, h, w}, std::move(v));
}

ModelConfig small(const std::string& variant, std::int64_t k = 11) {
  auto cfg = model::make_variant(variant);
  cfg.num_classes = k;
  return cfg;
}

// Copies every parameter and buffer of `to` from the same path in `from`.
template <typename T>
void copy_shared(const nn::Module<T>& from, nn::Module<T>& to) {
  std::map<std::string, Tensor<T>> src;
  for (const auto& [k, v] : from.named_parameters()) src[k] = v;
  for (const auto& [k, v] : from.named_buffers()) src[k] = v;
  auto copy = [&](const nn::Named<T>& dst) {
    for (auto [k, v] : dst) {
      auto it = src.find(k);
      ASSERT_NE(it, src.end()) << k;
      ASSERT_EQ(it->second.shape(), v.shape()) << k;
      std::copy(it->second.data().begin(), it->second.data().end(), v.data().begin());
    }
  };
  copy(to.named_parameters());
  copy(to.named_buffers());
}

}  // namespace

TEST(Model, VariantSwitches) {
  auto a1 = model::make_variant("A1");
  EXPECT_EQ(a1.connections, (std::array<bool, 3>{true, false, false}));
  EXPECT_EQ(a1.msau, (std::array<bool, 3>{false, false, false}));
  EXPECT_FALSE(a1.ffm);
  auto b2 = model::make_variant("B2");
  EXPECT_EQ(b2.msau, (std::array<bool, 3>{true, true, false}));
  auto c1 = model::make_variant("C1");
  EXPECT_EQ(c1.connections, (std::array<bool, 3>{false, false, false}));
  EXPECT_TRUE(c1.ffm);
  auto c3 = model::make_variant("C3");
  EXPECT_EQ(c3.msau, (std::array<bool, 3>{true, true, true}));
  EXPECT_TRUE(c3.ffm);
  auto base = model::make_variant("Baseline");
  EXPECT_EQ(base.connections, (std::array<bool, 3>{false, false, false}));
  EXPECT_FALSE(base.ffm);
  EXPECT_THROW(model::make_variant("D1"), ConfigError);
  EXPECT_EQ(model::variant_names().size(), 10u);
}

TEST(Model, ParameterCountIsKnownBeforeAllocation) {
  for (const auto& name : model::variant_names()) {
    auto cfg = model::make_variant(name);
    ECMNet<float> net(cfg, 0);
    EXPECT_EQ(net.parameter_count(), model::expected_parameter_count(cfg)) << name;
  }
}

TEST(Model, ParameterOrderingAcrossLattice) {
  std::map<std::string, std::int64_t> p;
  for (const auto& name : model::variant_names()) p[name] = model::expected_parameter_count(model::make_variant(name));
  EXPECT_LT(p["Baseline"], p["A1"]);
  EXPECT_LT(p["A1"], p["A2"]);
  EXPECT_LT(p["A2"], p["A3"]);
  EXPECT_LT(p["A3"], p["C2"]);
  EXPECT_LT(p["C2"], p["C3"]);
  for (const char* k : {"1", "2", "3"}) EXPECT_GT(p[std::string("B") + k], p[std::string("A") + k]);
  EXPECT_LT(p["B1"], p["B2"]);
  EXPECT_LT(p["B2"], p["B3"]);
  EXPECT_LT(p["C1"], p["C2"]);
  for (const auto& [name, n] : p)
    if (name != "C3") EXPECT_GT(p["C3"], n) << name;
  // Compositionality: each variant is the baseline plus its enabled parts.
  const auto c3 = model::make_variant("C3");
  const auto diff = p["C3"] - p["Baseline"];
  const auto parts = (p["A3"] - p["Baseline"]) + (p["B3"] - p["A3"]) + (p["C1"] - p["Baseline"]);
  EXPECT_EQ(diff, parts);
  (void)c3;
}

TEST(Model, DefaultBudgetBand) {
  const auto n = model::expected_parameter_count(model::make_variant("C3"));
  EXPECT_GE(n, 800'000);
  EXPECT_LE(n, 950'000);
}

TEST(Model, ShapeContract) {
  for (const auto& name : {"Baseline", "C3"}) {
    ECMNet<float> net(small(name), 1);
    net.eval();
    NoGradGuard ng;
    EXPECT_EQ(net.forward(image<float>(1, 64, 64, 1)).shape(), (Shape{1, 11, 64, 64}));
    EXPECT_EQ(net.forward(image<float>(2, 40, 72, 1)).shape(), (Shape{2, 11, 40, 72}));
  }
  auto cfg = small("C3", 19);
  ECMNet<float> net(cfg, 1);
  net.eval();
  NoGradGuard ng;
  EXPECT_EQ(net.forward(image<float>(1, 8, 16, 1)).shape(), (Shape{1, 19, 8, 16}));
  for (auto [h, w] : {std::pair{60, 64}, std::pair{64, 100}, std::pair{4, 8}}) {
    try {
      net.forward(image<float>(1, h, w, 1));
      ADD_FAILURE() << h << "x" << w << " accepted";
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find("multiples of 8"), std::string::npos);
    }
  }
  EXPECT_THROW(net.forward(Tensor<float>::zeros({1, 1, 64, 64})), ConfigError);
}

TEST(Model, EvalForwardIsBitwiseRepeatableAndBatchEquivariant) {
  ECMNet<float> net(small("C3"), 3);
  net.eval();
  NoGradGuard ng;
  auto a = image<float>(1, 32, 32, 1);
  auto b = image<float>(1, 32, 32, 2);
  auto ab = ops::concat<float>({a, b}, 0);
  auto ba = ops::concat<float>({b, a}, 0);
  auto y1 = net.forward(ab);
  auto y2 = net.forward(ab);
  ASSERT_EQ(y1.numel(), y2.numel());
  EXPECT_TRUE(std::equal(y1.data().begin(), y1.data().end(), y2.data().begin()));
  auto y3 = net.forward(ba);
  const auto half = y1.numel() / 2;
  // Per-sample results do not depend on batch position.
  for (std::int64_t i = 0; i < half; ++i) {
    ASSERT_NEAR(y1.data()[i], y3.data()[half + i], 1e-5);
    ASSERT_NEAR(y1.data()[half + i], y3.data()[i], 1e-5);
  }
}

TEST(Model, DisablingFusionAtRuntimeMatchesConnectionsOnlyModel) {
  auto c3 = small("C3");
  auto b3 = small("B3");
  ECMNet<double> full(c3, 5);
  ECMNet<double> masked(b3, 6);
  copy_shared(full, masked);
  full.eval();
  masked.eval();
  NoGradGuard ng;
  auto x = image<double>(1, 32, 24, 3);
  full.use_ffm = false;
  auto y = full.forward(x);
  auto want = masked.forward(x);
  for (std::int64_t i = 0; i < y.numel(); ++i) ASSERT_EQ(y.data()[i], want.data()[i]);
  full.use_ffm = true;
  auto on = full.forward(x);
  double diff = 0;
  for (std::int64_t i = 0; i < y.numel(); ++i) diff = std::max(diff, std::abs(on.data()[i] - y.data()[i]));
  EXPECT_GT(diff, 0.0);
}

TEST(Model, EveryParameterReceivesGradient) {
  auto cfg = small("C3", 3);
  ECMNet<double> net(cfg, 7);
  std::map<std::string, bool> reached;
  for (const auto& [name, _] : net.named_parameters()) reached[name] = false;
  // Narrow ReLU bottlenecks can be inactive for a given input, so a
  // parameter passes once any of a few random input/label pairs reaches it.
  for (std::uint64_t trial = 0; trial < 6; ++trial) {
    auto x = image<double>(2, 32, 32, 8 + trial);
    std::mt19937_64 rng(9 + trial);
    std::vector<std::int32_t> labels(2 * 32 * 32);
    for (auto& l : labels) l = static_cast<std::int32_t>(rng() % 3);
    net.zero_grad();
    ops::cross_entropy<double>(net.forward(x), labels, 255, nullptr).backward();
    for (auto [name, p] : net.named_parameters()) {
      if (!p.has_grad()) continue;
      for (double g : p.grad()) reached[name] = reached[name] || g != 0.0;
    }
  }
  for (const auto& [name, ok] : reached) EXPECT_TRUE(ok) << name;
}

TEST(Model, SubmoduleParamsSumToTotal) {
  ECMNet<float> net(small("C3"), 0);
  for (int depth : {1, 2, 3}) {
    std::int64_t sum = 0;
    for (const auto& [_, n] : analysis::count_params(net, depth)) sum += n;
    EXPECT_EQ(sum, net.parameter_count());
  }
}
