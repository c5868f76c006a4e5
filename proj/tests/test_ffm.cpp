#include <gtest/gtest.h>

#include "ecmnet/ffm.hpp"
#include "support/gradcheck.hpp"
#include "support/module_util.hpp"
#include "support/reference.hpp"

using namespace ecmnet;
using ffm::FFM;
using ffm::FFMConfig;
using ffm::SS2D;
using ffm::SS2DConfig;
using testutil::as_map;
using testutil::max_abs_diff;
using Td = Tensor<double>;
using W = std::map<std::string, std::vector<double>>;

namespace {

ref::Map conv1(const ref::Map& x, const W& w, const std::string& p, int cout) {
  const auto* bias = w.count(p + ".bias") ? &w.at(p + ".bias") : nullptr;
  return ref::conv(x, w.at(p + ".weight"), bias, cout, 1, 1, 1, 0, 0, 1, 1, 1);
}

// Position of step t along direction k, enumerated with explicit 2-D loops.
std::vector<int> order(int k, int h, int w) {
  std::vector<int> row, col;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) row.push_back(i * w + j);
  for (int j = 0; j < w; ++j)
    for (int i = 0; i < h; ++i) col.push_back(i * w + j);
  switch (k) {
    case 0: return row;
    case 1: return col;
    case 2: return {row.rbegin(), row.rend()};
    default: return {col.rbegin(), col.rend()};
  }
}

double softplus(double v) { return std::log1p(std::exp(v)); }

ref::Map ss2d_oracle(const ref::Map& x, const W& w, const std::string& p, int di, int n, int r) {
  const int h = x.h, wd = x.w, len = h * wd, dm = x.c;
  ref::Map out(x.b, dm, h, wd);
  // Stage 1: input projection, depth-wise conv, SiLU.
  auto xz = conv1(x, w, p + ".in_proj", 2 * di);
  ref::Map xi(x.b, di, h, wd), z(x.b, di, h, wd);
  for (int b = 0; b < x.b; ++b)
    for (int c = 0; c < di; ++c)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < wd; ++j) {
          xi.at(b, c, i, j) = xz.at(b, c, i, j);
          z.at(b, c, i, j) = xz.at(b, di + c, i, j);
        }
  xi = ref::silu(ref::conv(xi, w.at(p + ".conv.weight"), &w.at(p + ".conv.bias"), di, 3, 3, 1, 1, 1, 1, 1, di));
  const auto& wx = w.at(p + ".x_proj.weight");
  const auto& wdt = w.at(p + ".dt_proj.weight");
  const auto& bdt = w.at(p + ".dt_proj.bias");
  const auto& alog = w.at(p + ".A_log");
  const auto& dskip = w.at(p + ".D");
  const int rows = r + 2 * n;
  ref::Map merged(x.b, di, h, wd);
  for (int b = 0; b < x.b; ++b)
    for (int k = 0; k < 4; ++k) {
      // Stage 2: flatten along direction k.
      const auto pos = order(k, h, wd);
      std::vector<std::vector<double>> seq(di, std::vector<double>(len));
      for (int c = 0; c < di; ++c)
        for (int t = 0; t < len; ++t) seq[c][t] = xi.v[(std::size_t(b) * di + c) * len + pos[t]];
      // Stage 3: per-position projections.
      std::vector<std::vector<double>> proj(rows, std::vector<double>(len, 0.0));
      for (int j = 0; j < rows; ++j)
        for (int t = 0; t < len; ++t)
          for (int c = 0; c < di; ++c) proj[j][t] += wx[(std::size_t(k) * rows + j) * di + c] * seq[c][t];
      std::vector<std::vector<double>> bm(proj.begin() + r, proj.begin() + r + n), cm(proj.begin() + r + n, proj.end());
      for (int c = 0; c < di; ++c) {
        const int ch = k * di + c;
        std::vector<double> dt(len), a(n);
        for (int t = 0; t < len; ++t) {
          double s = bdt[ch];
          for (int q = 0; q < r; ++q) s += wdt[std::size_t(ch) * r + q] * proj[q][t];
          dt[t] = softplus(s);
        }
        for (int q = 0; q < n; ++q) a[q] = -std::exp(alog[std::size_t(ch) * n + q]);
        // Stage 4: scan, then scatter back and sum over directions.
        auto y = ref::scan_unrolled(seq[c], dt, a, bm, cm, dskip[ch]);
        for (int t = 0; t < len; ++t) merged.v[(std::size_t(b) * di + c) * len + pos[t]] += y[t];
      }
    }
  // Stage 5: norm, gate, output projection.
  auto gated = ref::mul(ref::layer_norm_c(merged, w.at(p + ".norm.weight"), w.at(p + ".norm.bias"), 1e-5), ref::silu(z));
  return conv1(gated, w, p + ".out_proj", dm);
}

ref::Map ffn_oracle(const ref::Map& x, const W& w, const std::string& p, int expansion) {
  auto y = ref::layer_norm_c(x, w.at(p + ".norm.weight"), w.at(p + ".norm.bias"), 1e-5);
  y = ref::gelu(conv1(y, w, p + ".fc1", expansion * x.c));
  return conv1(y, w, p + ".fc2", x.c);
}

SS2DConfig tiny_ss2d(std::int64_t dm, std::int64_t n) { return SS2DConfig{dm, n, 1, 0}; }

}  // namespace

TEST(SS2D, MatchesStagedOracle) {
  for (auto [dm, n, hh, ww] : {std::tuple{4, 2, 3, 3}, std::tuple{4, 3, 2, 5}, std::tuple{20, 4, 3, 4}}) {
    const auto cfg = tiny_ss2d(dm, n);
    nn::Rng rng(1);
    SS2D<double> block(cfg, rng);
    testutil::randomize(block, 2, 0.4);
    auto x = gradcheck::random({2, dm, hh, ww}, 3);
    W w;
    for (auto& [k, v] : testutil::weights(block)) w["s." + k] = v;
    auto y = block.forward(x);
    EXPECT_EQ(y.shape(), x.shape());
    EXPECT_LT(max_abs_diff(y, ss2d_oracle(as_map(x), w, "s", static_cast<int>(cfg.inner()), static_cast<int>(n),
                                          static_cast<int>(cfg.rank()))),
              1e-10)
        << dm << " " << n;
  }
}

TEST(SS2D, ShapeAndZeroProjection) {
  nn::Rng rng(1);
  SS2D<double> block(tiny_ss2d(16, 8), rng);
  auto x = gradcheck::random({1, 16, 8, 8}, 1);
  EXPECT_EQ(block.forward(x).shape(), (Shape{1, 16, 8, 8}));
  for (auto& v : block.out_proj.weight().data()) v = 0;
  const auto y = block.forward(x);
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(block.forward(gradcheck::random({1, 8, 4, 4}, 1)), ConfigError);
}

TEST(SS2D, DecayStaysInUnitIntervalAndStepsArePositive) {
  nn::Rng rng(1);
  SS2D<double> block(tiny_ss2d(8, 4), rng);
  for (double v : block.a_log.data()) EXPECT_LT(-std::exp(v), 0.0);
  auto xs = gradcheck::random({1, 4, 8, 12}, 2, 3.0);
  auto p = block.project(xs);
  for (double dt : p.delta.data()) {
    EXPECT_GT(dt, 0.0);
    for (double a : block.a_log.data()) {
      const double decay = std::exp(dt * -std::exp(a));
      EXPECT_TRUE(decay > 0.0 && decay <= 1.0);
    }
  }
}

TEST(SS2D, GradientsMatchFiniteDifferences) {
  nn::Rng rng(4);
  SS2D<double> block(tiny_ss2d(2, 2), rng);
  testutil::randomize(block, 5, 0.4);
  auto x = gradcheck::random({1, 2, 3, 3}, 6);
  auto params = testutil::parameters(block);
  params.push_back(x);
  auto r = gradcheck::check(params, [&] { return gradcheck::project(block.forward(x), 7); }, 20, 8);
  EXPECT_EQ(r.directions, 20);
  EXPECT_LT(r.worst_rel_error, 1e-4) << r.detail;
}

TEST(FFM, MatchesStagedOracle) {
  FFMConfig cfg{12, 6, 4, 2, 2, 1};
  nn::Rng rng(1);
  FFM<double> m(cfg, rng);
  testutil::randomize(m, 2, 0.4);
  auto xe = gradcheck::random({1, 6, 3, 3}, 3);
  auto x1 = gradcheck::random({1, 2, 3, 3}, 4);
  auto x2 = gradcheck::random({1, 4, 3, 3}, 5);
  const auto w = testutil::weights(m);
  // fuse, scan, feed-forward
  auto f = conv1(ref::concat_c({as_map(xe), as_map(x1), as_map(x2)}), w, "fuse", 4);
  f = ffn_oracle(ss2d_oracle(f, w, "layer0.ss2d", 4, 2, 1), w, "layer0.ffn", 2);
  // project and add the encoder features
  auto want = ref::add(conv1(f, w, "project", 6), as_map(xe));
  EXPECT_LT(max_abs_diff(m.forward(xe, x1, x2), want), 1e-10);
}

TEST(FFM, ZeroFeedForwardReturnsEncoderFeatures) {
  nn::Rng rng(1);
  FFM<double> m(FFMConfig{12, 6, 4, 2, 2, 1}, rng);
  testutil::randomize(m, 3);
  for (auto& v : m.layers[0]->ffn.fc2.weight().data()) v = 0;
  for (auto& v : m.layers[0]->ffn.fc2.bias().data()) v = 0;
  auto xe = gradcheck::random({2, 6, 4, 4}, 1);
  auto y = m.forward(xe, gradcheck::random({2, 2, 4, 4}, 2), gradcheck::random({2, 4, 4, 4}, 3));
  ASSERT_EQ(y.shape(), xe.shape());
  for (std::int64_t i = 0; i < xe.numel(); ++i) ASSERT_EQ(y.data()[i], xe.data()[i]);
}

TEST(FFM, RejectsMismatchedInputs) {
  nn::Rng rng(1);
  FFM<double> m(FFMConfig{12, 6, 4, 2, 2, 1}, rng);
  auto xe = gradcheck::random({1, 6, 4, 4}, 1);
  EXPECT_THROW(m.forward(xe, gradcheck::random({1, 2, 4, 3}, 2), gradcheck::random({1, 4, 4, 4}, 3)), ConfigError);
  EXPECT_THROW(m.forward(xe, gradcheck::random({1, 3, 4, 4}, 2), gradcheck::random({1, 4, 4, 4}, 3)), ConfigError);
}

TEST(FFM, ParameterCountMatchesHandCount) {
  // fused 12 → d 4 (bias): 52. SS2D d=4, n=2, r=1: in_proj 32, conv 40,
  // x_proj 4·5·4 = 80, dt_proj 4·(4+4) = 32, A 32, D 16, norm 8, out 16 -> 256.
  // FFN d=4, x2: norm 8, fc1 40, fc2 36 -> 84. project 4·6 = 24.
  const std::int64_t want = 52 + 256 + 84 + 24;
  nn::Rng rng(0);
  FFM<double> m(FFMConfig{12, 6, 4, 2, 2, 1}, rng);
  EXPECT_EQ(m.parameter_count(), want);
  EXPECT_EQ(FFM<double>::count(FFMConfig{12, 6, 4, 2, 2, 1}), want);
  FFM<double> deep(FFMConfig{12, 6, 4, 2, 2, 2}, rng);
  EXPECT_EQ(deep.parameter_count(), want + 256 + 84);
}

TEST(FFM, GradientsMatchFiniteDifferences) {
  nn::Rng rng(5);
  FFM<double> m(FFMConfig{6, 3, 2, 2, 2, 1}, rng);
  testutil::randomize(m, 6, 0.4);
  auto xe = gradcheck::random({1, 3, 3, 3}, 7);
  auto x1 = gradcheck::random({1, 1, 3, 3}, 8);
  auto x2 = gradcheck::random({1, 2, 3, 3}, 9);
  auto params = testutil::parameters(m);
  for (auto* t : {&xe, &x1, &x2}) params.push_back(*t);
  auto r = gradcheck::check(params, [&] { return gradcheck::project(m.forward(xe, x1, x2), 10); }, 20, 11);
  EXPECT_EQ(r.directions, 20);
  EXPECT_LT(r.worst_rel_error, 1e-4) << r.detail;
}
