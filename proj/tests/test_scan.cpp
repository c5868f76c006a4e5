#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "ecmnet/scan.hpp"
#include "support/gradcheck.hpp"
#include "support/reference.hpp"

using namespace ecmnet;
using Td = Tensor<double>;

namespace {

struct ScanInputs {
  Td u, delta, a, b, c, d;
};

// Inputs in the regime the fusion module produces: positive steps,
// negative state matrix.
ScanInputs make_inputs(std::int64_t batch, std::int64_t groups, std::int64_t dpg, std::int64_t n, std::int64_t len,
                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> step(0.01, 0.5), decay(0.1, 2.0);
  const auto kd = groups * dpg;
  auto fill = [&](Shape s, auto& dist, double sign = 1.0) {
    std::vector<double> v(static_cast<std::size_t>(numel(s)));
    for (auto& e : v) e = sign * dist(rng);
    return Td::from(std::move(s), std::move(v));
  };
  ScanInputs in;
  in.u = fill({batch, kd, len}, normal);
  in.delta = fill({batch, kd, len}, step);
  in.a = fill({kd, n}, decay, -1.0);
  in.b = fill({batch, groups, n, len}, normal);
  in.c = fill({batch, groups, n, len}, normal);
  in.d = fill({kd}, normal);
  return in;
}

std::vector<double> oracle_channel(const ScanInputs& in, std::int64_t bi, std::int64_t ch, std::int64_t dpg) {
  const auto kd = in.u.dim(1), len = in.u.dim(2), n = in.a.dim(1), groups = in.b.dim(1);
  const auto g = ch / dpg;
  std::vector<double> u(len), dt(len), a(n);
  std::vector<std::vector<double>> b(n, std::vector<double>(len)), c = b;
  for (std::int64_t t = 0; t < len; ++t) {
    u[t] = in.u.data()[(bi * kd + ch) * len + t];
    dt[t] = in.delta.data()[(bi * kd + ch) * len + t];
  }
  for (std::int64_t k = 0; k < n; ++k) {
    a[k] = in.a.data()[ch * n + k];
    for (std::int64_t t = 0; t < len; ++t) {
      b[k][t] = in.b.data()[((bi * groups + g) * n + k) * len + t];
      c[k][t] = in.c.data()[((bi * groups + g) * n + k) * len + t];
    }
  }
  return ref::scan_unrolled(u, dt, a, b, c, in.d.data()[ch]);
}

}  // namespace

TEST(Scan, RecurrenceMatchesUnrolledOracleOn200Instances) {
  std::mt19937_64 rng(2024);
  double worst = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const auto len = std::uniform_int_distribution<std::int64_t>(1, 32)(rng);
    const auto n = std::uniform_int_distribution<std::int64_t>(1, 8)(rng);
    const auto groups = std::uniform_int_distribution<std::int64_t>(1, 4)(rng);
    const auto dpg = std::uniform_int_distribution<std::int64_t>(1, 3)(rng);
    auto in = make_inputs(2, groups, dpg, n, len, 1000 + inst);
    auto y = scan::selective_scan(in.u, in.delta, in.a, in.b, in.c, in.d);
    for (std::int64_t bi = 0; bi < 2; ++bi)
      for (std::int64_t ch = 0; ch < groups * dpg; ++ch) {
        const auto want = oracle_channel(in, bi, ch, dpg);
        for (std::int64_t t = 0; t < len; ++t)
          worst = std::max(worst, std::abs(y.data()[(bi * groups * dpg + ch) * len + t] - want[t]));
      }
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(Scan, GradientsMatchFiniteDifferences) {
  auto in = make_inputs(2, 2, 2, 3, 7, 5);
  auto r = gradcheck::check({in.u, in.delta, in.a, in.b, in.c, in.d}, [&] {
    return gradcheck::project(scan::selective_scan(in.u, in.delta, in.a, in.b, in.c, in.d), 77);
  }, 24, 3);
  EXPECT_LT(r.worst_rel_error, 1e-6) << r.detail;
}

TEST(Scan, NonFiniteInputIsRejected) {
  auto in = make_inputs(1, 1, 1, 2, 4, 1);
  in.u.data()[2] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(scan::selective_scan(in.u, in.delta, in.a, in.b, in.c, in.d), NumericalError);
}

TEST(Scan, TwoByTwoDirectionOrder) {
  // Grid [[a, b], [c, d]] stored row-major as positions 0..3.
  const std::vector<std::vector<std::int64_t>> want{{0, 1, 2, 3}, {0, 2, 1, 3}, {3, 2, 1, 0}, {3, 1, 2, 0}};
  for (int dir = 0; dir < 4; ++dir)
    for (int t = 0; t < 4; ++t) EXPECT_EQ(scan::scan_position(dir, t, 2, 2), want[dir][t]) << dir << "," << t;

  auto x = Td::from({1, 1, 2, 2}, {10, 20, 30, 40});
  auto s = scan::cross_scan(x);
  const std::vector<double> flat{10, 20, 30, 40, 10, 30, 20, 40, 40, 30, 20, 10, 40, 20, 30, 10};
  ASSERT_EQ(s.shape(), (Shape{1, 4, 1, 4}));
  for (std::size_t i = 0; i < flat.size(); ++i) EXPECT_EQ(s.data()[i], flat[i]);
}

TEST(Scan, MergeOfScanIsFourTimesInputOnSmallGrids) {
  for (std::int64_t h = 1; h <= 8; ++h)
    for (std::int64_t w = 1; w <= 8; ++w) {
      auto x = gradcheck::random({2, 3, h, w}, static_cast<std::uint64_t>(h * 16 + w));
      auto m = scan::cross_merge(scan::cross_scan(x), h, w);
      for (std::int64_t i = 0; i < x.numel(); ++i) ASSERT_NEAR(m.data()[i], 4 * x.data()[i], 1e-12) << h << "x" << w;
    }
}

TEST(Scan, EveryDirectionIsAPermutation) {
  for (std::int64_t h = 1; h <= 8; ++h)
    for (std::int64_t w = 1; w <= 8; ++w)
      for (int dir = 0; dir < 4; ++dir) {
        std::vector<int> seen(static_cast<std::size_t>(h * w), 0);
        for (std::int64_t t = 0; t < h * w; ++t) ++seen[static_cast<std::size_t>(scan::scan_position(dir, t, h, w))];
        for (int v : seen) ASSERT_EQ(v, 1);
      }
}

TEST(Scan, FaultHookBreaksRoundTrip) {
  scan::set_cross_scan_fault(true);
  auto x = gradcheck::random({1, 1, 3, 4}, 1);
  auto m = scan::cross_merge(scan::cross_scan(x), 3, 4);
  scan::set_cross_scan_fault(false);
  double diff = 0;
  for (std::int64_t i = 0; i < x.numel(); ++i) diff = std::max(diff, std::abs(m.data()[i] - 4 * x.data()[i]));
  EXPECT_GT(diff, 1e-3);
}

TEST(Scan, ScanAndMergeGradients) {
  auto x = gradcheck::random({1, 2, 3, 5}, 4);
  auto r = gradcheck::check({x}, [&] { return gradcheck::project(scan::cross_scan(x), 1); }, 8, 1);
  EXPECT_LT(r.worst_rel_error, 1e-6) << r.detail;
  auto y = gradcheck::random({1, 4, 2, 15}, 5);
  r = gradcheck::check({y}, [&] { return gradcheck::project(scan::cross_merge(y, 3, 5), 2); }, 8, 1);
  EXPECT_LT(r.worst_rel_error, 1e-6) << r.detail;
}

TEST(Scan, StableOnLongSequences) {
  auto in = make_inputs(1, 2, 2, 8, 16384, 77);
  auto y = scan::selective_scan(in.u, in.delta, in.a, in.b, in.c, in.d);
  for (double v : y.data()) ASSERT_TRUE(std::isfinite(v));
  // Bounded input keeps the state bounded: |h| ≤ max|δbu| / (1 − max decay).
  double peak = 0;
  for (double v : y.data()) peak = std::max(peak, std::abs(v));
  EXPECT_LT(peak, 1e4);
}

TEST(Scan, RuntimeGrowsLinearly) {
  auto time_at = [](std::int64_t len) {
    auto in = make_inputs(1, 4, 4, 8, len, 3);
    double best = 1e30;
    for (int rep = 0; rep < 5; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      NoGradGuard ng;
      auto y = scan::selective_scan(in.u, in.delta, in.a, in.b, in.c, in.d);
      best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
  };
  // Timing noise gets 3 attempts.
  double ratio = 1e30;
  for (int attempt = 0; attempt < 3 && ratio > 10; ++attempt) ratio = time_at(4096) / time_at(512);
  EXPECT_LE(ratio, 10.0);
}
