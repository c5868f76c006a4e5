#include <gtest/gtest.h>

#include "ecmnet/ops.hpp"
#include "ecmnet/profiler.hpp"
#include "support/gradcheck.hpp"
#include "support/reference.hpp"

using namespace ecmnet;
using gradcheck::random;
using Td = Tensor<double>;

namespace {

ref::Map as_map(const Td& t) { return ref::from(int(t.dim(0)), int(t.dim(1)), int(t.dim(2)), int(t.dim(3)), t.data()); }

std::vector<double> vec(const Td& t) { return {t.data().begin(), t.data().end()}; }

void expect_close(const Td& got, const ref::Map& want, double tol = 1e-12) {
  ASSERT_EQ(got.numel(), static_cast<std::int64_t>(want.v.size()));
  for (std::size_t i = 0; i < want.v.size(); ++i) ASSERT_NEAR(got.data()[i], want.v[i], tol) << "at " << i;
}

void expect_grad_ok(std::vector<Td> params, const std::function<Td()>& f, int dirs = 8) {
  auto r = gradcheck::check(std::move(params), f, dirs, 99);
  EXPECT_LT(r.worst_rel_error, 1e-6) << r.detail;
}

struct ConvCase {
  int cin, cout, kh, kw, stride, ph, pw, dh, dw, groups, h, w;
};

}  // namespace

class ConvOracle : public ::testing::TestWithParam<ConvCase> {};

TEST_P(ConvOracle, MatchesNaiveLoopsAndGradients) {
  const auto c = GetParam();
  auto x = random({2, c.cin, c.h, c.w}, 1);
  auto w = random({c.cout, c.cin / c.groups, c.kh, c.kw}, 2);
  auto b = random({c.cout}, 3);
  ops::Conv2dOptions o{c.stride, c.stride, c.ph, c.pw, c.dh, c.dw, c.groups};
  auto y = ops::conv2d(x, w, &b, o);
  auto bias = vec(b);
  auto want = ref::conv(as_map(x), vec(w), &bias, c.cout, c.kh, c.kw, c.stride, c.ph, c.pw, c.dh, c.dw, c.groups);
  EXPECT_EQ(y.dim(2), want.h);
  EXPECT_EQ(y.dim(3), want.w);
  expect_close(y, want);
  expect_grad_ok({x, w, b}, [&] { return gradcheck::project(ops::conv2d(x, w, &b, o), 5); });
}

INSTANTIATE_TEST_SUITE_P(Shapes, ConvOracle,
                         ::testing::Values(ConvCase{3, 4, 3, 3, 1, 1, 1, 1, 1, 1, 5, 6},   // dense 3x3
                                           ConvCase{3, 4, 3, 3, 2, 1, 1, 1, 1, 1, 8, 8},   // strided
                                           ConvCase{4, 6, 1, 1, 1, 0, 0, 1, 1, 1, 3, 5},   // pointwise
                                           ConvCase{4, 4, 3, 1, 1, 1, 0, 1, 1, 1, 5, 5},   // factorized
                                           ConvCase{4, 4, 1, 3, 1, 0, 2, 1, 2, 4, 5, 7},   // dilated depth-wise
                                           ConvCase{4, 4, 3, 3, 1, 3, 3, 3, 3, 4, 4, 4},   // dilation > size
                                           ConvCase{6, 4, 3, 3, 1, 1, 1, 1, 1, 2, 5, 5},   // grouped
                                           ConvCase{4, 4, 7, 7, 1, 3, 3, 1, 1, 4, 1, 6},   // 7x7 on a strip
                                           ConvCase{8, 12, 1, 1, 1, 0, 0, 1, 1, 4, 6, 1},  // grouped pointwise
                                           ConvCase{3, 3, 3, 3, 2, 1, 1, 1, 1, 3, 7, 9}));  // strided depth-wise

TEST(Ops, BroadcastBinaryOpsMatchOracleAndGradients) {
  auto a = random({2, 3, 4, 5}, 1);
  auto b = random({1, 3, 1, 5}, 2);
  auto c = random({2, 3, 4, 1}, 3);
  expect_close(ops::add(a, b), ref::add(as_map(a), as_map(b)));
  expect_close(ops::mul(a, c), ref::mul(as_map(a), as_map(c)));
  expect_close(ops::sub(a, b), ref::zip(as_map(a), as_map(b), [](double p, double q) { return p - q; }));
  expect_grad_ok({a, b, c}, [&] { return gradcheck::project(ops::mul(ops::sub(a, b), ops::add(c, b)), 4); });
}

TEST(Ops, ActivationsMatchOracleAndGradients) {
  auto x = random({1, 2, 3, 4}, 7, 2.0);
  expect_close(ops::relu(x), ref::relu(as_map(x)));
  expect_close(ops::sigmoid(x), ref::sigmoid(as_map(x)));
  expect_close(ops::silu(x), ref::silu(as_map(x)));
  expect_close(ops::gelu(x), ref::gelu(as_map(x)));
  expect_close(ops::softplus(x), ref::softplus(as_map(x)));
  for (auto f : std::vector<Td (*)(const Td&)>{ops::sigmoid<double>, ops::silu<double>, ops::gelu<double>,
                                               ops::softplus<double>, ops::exp<double>, ops::neg<double>}) {
    expect_grad_ok({x}, [&] { return gradcheck::project(f(x), 3); });
  }
}

TEST(Ops, SoftplusIsStableForLargeInputs) {
  auto x = Td::from({3}, {50.0, -50.0, 0.0});
  auto y = ops::softplus(x);
  EXPECT_DOUBLE_EQ(y.data()[0], 50.0);
  EXPECT_GT(y.data()[1], 0.0);
  EXPECT_NEAR(y.data()[2], std::log(2.0), 1e-15);
}

TEST(Ops, ReductionsMatchOracle) {
  auto x = random({2, 3, 4, 5}, 11);
  expect_close(ops::mean(x, {2, 3}), ref::mean_hw(as_map(x)));
  expect_close(ops::amax(x, {2, 3}), ref::max_hw(as_map(x)));
  expect_close(ops::mean(x, {2}), ref::mean_h(as_map(x)));
  expect_close(ops::mean(x, {3}), ref::mean_w(as_map(x)));
  expect_grad_ok({x}, [&] {
    return ops::add(gradcheck::project(ops::mean(x, {2}), 1), gradcheck::project(ops::amax(x, {2, 3}), 2));
  });
  EXPECT_NEAR(ops::sum(x).item(), std::accumulate(x.data().begin(), x.data().end(), 0.0), 1e-12);
}

TEST(Ops, BatchNormTrainAndEvalMatchOracle) {
  auto x = random({2, 3, 4, 5}, 1, 3.0);
  auto g = random({3}, 2);
  auto b = random({3}, 3);
  auto rm = Td::zeros({3});
  auto rv = Td::full({3}, 1.0);
  auto y = ops::batch_norm(x, g, b, rm, rv, true, 0.1, 1e-5);
  expect_close(y, ref::batch_norm_train(as_map(x), vec(g), vec(b), 1e-5), 1e-10);
  // running stats moved towards the batch statistics
  EXPECT_NE(rm.data()[0], 0.0);
  auto ye = ops::batch_norm(x, g, b, rm, rv, false, 0.1, 1e-5);
  expect_close(ye, ref::batch_norm_eval(as_map(x), vec(g), vec(b), vec(rm), vec(rv), 1e-5), 1e-10);
  expect_grad_ok({x, g, b}, [&] { return gradcheck::project(ops::batch_norm(x, g, b, rm, rv, true, 0.1, 1e-5), 9); });
  expect_grad_ok({x, g, b}, [&] { return gradcheck::project(ops::batch_norm(x, g, b, rm, rv, false, 0.1, 1e-5), 9); });
}

TEST(Ops, LayerNormMatchesOracleAndGradients) {
  auto x = random({2, 5, 3, 2}, 4, 2.0);
  auto g = random({5}, 5);
  auto b = random({5}, 6);
  expect_close(ops::channel_layer_norm(x, g, b, 1e-5), ref::layer_norm_c(as_map(x), vec(g), vec(b), 1e-5), 1e-10);
  expect_grad_ok({x, g, b}, [&] { return gradcheck::project(ops::channel_layer_norm(x, g, b, 1e-5), 1); });
}

TEST(Ops, PoolingAndResizeMatchOracle) {
  auto x = random({1, 2, 8, 4}, 3);
  expect_close(ops::avg_pool2d(x, 2), ref::avg_pool(as_map(x), 2));
  expect_close(ops::avg_pool2d(x, 4), ref::avg_pool(as_map(x), 4));
  expect_close(ops::upsample_bilinear(x, 16, 8), ref::resize(as_map(x), 16, 8));
  expect_close(ops::upsample_bilinear(x, 13, 7), ref::resize(as_map(x), 13, 7));
  expect_grad_ok({x}, [&] { return gradcheck::project(ops::upsample_bilinear(x, 13, 7), 2); });
  expect_grad_ok({x}, [&] { return gradcheck::project(ops::avg_pool2d(x, 2), 2); });
  EXPECT_THROW(ops::avg_pool2d(random({1, 1, 6, 6}, 1), 4), ConfigError);
}

TEST(Ops, LayoutOpsRoundTrip) {
  auto a = random({2, 3, 2, 2}, 1);
  auto b = random({2, 1, 2, 2}, 2);
  auto c = ops::concat<double>({a, b}, 1);
  expect_close(c, ref::concat_c({as_map(a), as_map(b)}));
  expect_close(ops::narrow(c, 1, 0, 3), as_map(a));
  expect_close(ops::narrow(c, 1, 3, 1), as_map(b));
  expect_grad_ok({a, b}, [&] {
    auto cc = ops::concat<double>({a, b}, 1);
    return gradcheck::project(ops::reshape(ops::narrow(cc, 1, 1, 3), {2, 12}), 3);
  });
  EXPECT_THROW(ops::narrow(c, 1, 2, 5), ConfigError);
  EXPECT_THROW(ops::reshape(c, {5}), ConfigError);
}

TEST(Ops, CrossEntropyMatchesHandOracleAndGradient) {
  // 2x2 image, K=3, one ignored pixel.
  auto z = Td::from({1, 3, 2, 2}, {1.0, 0.5, -1.0, 2.0, 0.0, 0.0, 0.3, 1.0, -2.0, 1.5, 0.2, 0.0});
  std::vector<std::int32_t> y{0, 2, 255, 1};
  double want = 0;
  int counted = 0;
  for (int p = 0; p < 4; ++p) {
    if (y[p] == 255) continue;
    double m = 0;
    for (int k = 0; k < 3; ++k) m += std::exp(z.data()[k * 4 + p]);
    want += std::log(m) - z.data()[y[p] * 4 + p];
    ++counted;
  }
  want /= counted;
  bool ignored = true;
  auto l = ops::cross_entropy<double>(z, y, 255, nullptr, &ignored);
  EXPECT_NEAR(l.item(), want, 1e-14);
  EXPECT_FALSE(ignored);
  expect_grad_ok({z}, [&] { return ops::cross_entropy<double>(z, y, 255, nullptr); });
  std::vector<double> weights{0.5, 2.0, 1.0};
  expect_grad_ok({z}, [&] { return ops::cross_entropy(z, y, 255, &weights); });
}

TEST(Ops, CostsAreRecordedPerScope) {
  profile::Recorder rec;
  {
    profile::Scope s("a");
    MetaModeGuard meta;
    auto x = Td::zeros({1, 16, 32, 32});
    auto w = Td::zeros({16, 16, 3, 3});
    auto b = Td::zeros({16});
    ops::Conv2dOptions o;
    o.pad_h = o.pad_w = 1;
    auto y = ops::conv2d(x, w, &b, o);
    EXPECT_TRUE(y.is_meta());
    EXPECT_EQ(y.shape(), (Shape{1, 16, 32, 32}));
  }
  const auto& c = rec.by_scope().at("a");
  EXPECT_EQ(c.macs, 9 * 16 * 16 * 32 * 32);
  EXPECT_EQ(c.ops, 16 * 32 * 32);
}
