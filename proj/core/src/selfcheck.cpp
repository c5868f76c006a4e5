#include "ecmnet/selfcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "ecmnet/blocks.hpp"
#include "ecmnet/ffm.hpp"
#include "ecmnet/metrics.hpp"
#include "ecmnet/msau.hpp"
#include "ecmnet/ops.hpp"
#include "ecmnet/scan.hpp"
#include "ecmnet/train.hpp"

namespace ecmnet::selfcheck {
namespace {

using Td = Tensor<double>;

struct Outcome {
  bool passed;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << std::scientific << v;
  return os.str();
}

Td normal_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0, double shift = 0.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(static_cast<std::size_t>(numel(shape)));
  for (auto& e : v) e = shift + dist(rng);
  return Td::from(std::move(shape), std::move(v));
}

Td uniform_tensor(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(numel(shape)));
  for (auto& e : v) e = dist(rng);
  return Td::from(std::move(shape), std::move(v));
}

// Position visited at step t, written out from the traversal definitions.
std::int64_t naive_position(int dir, std::int64_t t, std::int64_t h, std::int64_t w) {
  const auto n = h * w;
  if (dir >= 2) t = n - 1 - t;
  if (dir % 2 == 0) return t;
  return (t % h) * w + t / h;
}

Outcome check_cross_scan() {
  std::mt19937_64 rng(11);
  int cases = 0;
  for (std::int64_t h = 1; h <= 8; ++h)
    for (std::int64_t w = 1; w <= 8; ++w) {
      auto x = normal_tensor({2, 3, h, w}, rng);
      auto y = scan::cross_scan(x);
      const auto n = h * w;
      for (std::int64_t b = 0; b < 2; ++b)
        for (int dir = 0; dir < 4; ++dir)
          for (std::int64_t c = 0; c < 3; ++c)
            for (std::int64_t t = 0; t < n; ++t) {
              const double got = y.data()[static_cast<std::size_t>(((b * 4 + dir) * 3 + c) * n + t)];
              const double want = x.data()[static_cast<std::size_t>((b * 3 + c) * n + naive_position(dir, t, h, w))];
              if (got != want)
                return {false, "direction " + std::to_string(dir) + " at " + std::to_string(h) + "x" +
                                   std::to_string(w) + " visits the wrong position at step " + std::to_string(t)};
              if (scan::scan_position(dir, t, h, w) != naive_position(dir, t, h, w))
                return {false, "scan_position disagrees for direction " + std::to_string(dir)};
            }
      auto back = scan::cross_merge(y, h, w);
      for (std::size_t i = 0; i < back.data().size(); ++i)
        if (std::abs(back.data()[i] - 4.0 * x.data()[i]) > 1e-12 * std::max(1.0, std::abs(x.data()[i])))
          return {false, "merge(scan(x)) != 4x at " + std::to_string(h) + "x" + std::to_string(w)};
      ++cases;
    }
  return {true, std::to_string(cases) + " grids"};
}

std::vector<double> unrolled(const std::vector<double>& u, const std::vector<double>& dt, const std::vector<double>& a,
                             const std::vector<std::vector<double>>& b, const std::vector<std::vector<double>>& c,
                             double d) {
  const std::size_t len = u.size(), n = a.size();
  std::vector<double> y(len);
  for (std::size_t t = 0; t < len; ++t) {
    double acc = d * u[t];
    for (std::size_t k = 0; k < n; ++k) {
      double h = 0;
      for (std::size_t s = 0; s <= t; ++s) {
        double sum_dt = 0;
        for (std::size_t r = s + 1; r <= t; ++r) sum_dt += dt[r];
        h += std::exp(a[k] * sum_dt) * dt[s] * b[k][s] * u[s];
      }
      acc += c[k][t] * h;
    }
    y[t] = acc;
  }
  return y;
}

Outcome check_selective_scan() {
  std::mt19937_64 rng(2024);
  double worst = 0;
  constexpr int kInstances = 200;
  for (int inst = 0; inst < kInstances; ++inst) {
    const auto len = std::uniform_int_distribution<std::int64_t>(1, 32)(rng);
    const auto n = std::uniform_int_distribution<std::int64_t>(1, 8)(rng);
    const auto groups = std::uniform_int_distribution<std::int64_t>(1, 4)(rng);
    const auto dpg = std::uniform_int_distribution<std::int64_t>(1, 3)(rng);
    const auto kd = groups * dpg;
    const std::int64_t batch = 2;
    auto u = normal_tensor({batch, kd, len}, rng);
    auto delta = uniform_tensor({batch, kd, len}, rng, 0.01, 0.5);
    auto a = uniform_tensor({kd, n}, rng, -2.0, -0.1);
    auto b = normal_tensor({batch, groups, n, len}, rng);
    auto c = normal_tensor({batch, groups, n, len}, rng);
    auto d = normal_tensor({kd}, rng);
    auto y = scan::selective_scan(u, delta, a, b, c, d);
    for (std::int64_t bi = 0; bi < batch; ++bi)
      for (std::int64_t ch = 0; ch < kd; ++ch) {
        const auto g = ch / dpg;
        std::vector<double> uu(len), dt(len), aa(n);
        std::vector<std::vector<double>> bb(n, std::vector<double>(len)), cc = bb;
        for (std::int64_t t = 0; t < len; ++t) {
          uu[t] = u.data()[(bi * kd + ch) * len + t];
          dt[t] = delta.data()[(bi * kd + ch) * len + t];
        }
        for (std::int64_t k = 0; k < n; ++k) {
          aa[k] = a.data()[ch * n + k];
          for (std::int64_t t = 0; t < len; ++t) {
            bb[k][t] = b.data()[((bi * groups + g) * n + k) * len + t];
            cc[k][t] = c.data()[((bi * groups + g) * n + k) * len + t];
          }
        }
        const auto want = unrolled(uu, dt, aa, bb, cc, d.data()[ch]);
        for (std::int64_t t = 0; t < len; ++t)
          worst = std::max(worst, std::abs(y.data()[(bi * kd + ch) * len + t] - want[t]));
      }
  }
  return {worst < 1e-10, std::to_string(kInstances) + " instances, max abs error " + fmt(worst)};
}

Outcome check_channel_shuffle() {
  std::mt19937_64 rng(5);
  int cases = 0;
  for (std::int64_t ch : {2, 4, 6, 8, 12, 16})
    for (int g = 1; g <= ch; ++g) {
      if (ch % g != 0) continue;
      const std::int64_t hw = 3;
      auto x = normal_tensor({2, ch, 1, hw}, rng);
      auto y = ops::channel_shuffle(x, g);
      const auto per = ch / g;
      for (std::int64_t b = 0; b < 2; ++b)
        for (std::int64_t i = 0; i < ch; ++i) {
          const auto src = (i % g) * per + i / g;
          for (std::int64_t p = 0; p < hw; ++p)
            if (y.data()[(b * ch + i) * hw + p] != x.data()[(b * ch + src) * hw + p])
              return {false, "C=" + std::to_string(ch) + " g=" + std::to_string(g) + ": output channel " +
                                 std::to_string(i) + " is not input channel " + std::to_string(src)};
        }
      auto back = ops::channel_shuffle(y, static_cast<int>(per));
      if (!std::equal(back.data().begin(), back.data().end(), x.data().begin()))
        return {false, "shuffle by C/g does not invert shuffle by g (C=" + std::to_string(ch) + ")"};
      ++cases;
    }
  return {true, std::to_string(cases) + " (C, g) pairs"};
}

Outcome check_metrics() {
  // Hand-counted case: classes 0..2, one ignored pixel, class 2 never seen.
  {
    metrics::ConfusionMatrix cm(3);
    const std::vector<std::int32_t> gt{0, 0, 1, 1, 1, 255};
    const std::vector<std::int32_t> pr{0, 1, 1, 1, 0, 2};
    cm.accumulate(pr, gt);
    const auto iou = metrics::iou_per_class(cm);
    // class 0: TP 1, FP 1, FN 1 → 1/3; class 1: TP 2, FP 1, FN 1 → 1/2.
    if (cm.total() != 5 || !iou[0] || !iou[1] || iou[2] || std::abs(*iou[0] - 1.0 / 3) > 1e-15 ||
        std::abs(*iou[1] - 0.5) > 1e-15)
      return {false, "hand-counted IoU mismatch"};
    const auto m = metrics::mean_iou(cm);
    if (!m || std::abs(*m - 5.0 / 12) > 1e-15) return {false, "hand-counted mIoU mismatch"};
  }
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = std::uniform_int_distribution<int>(2, 19)(rng);
    std::uniform_int_distribution<int> cls(0, k - 1), coin(0, 9);
    std::vector<std::int32_t> gt(500), pr(500);
    for (std::size_t i = 0; i < gt.size(); ++i) {
      gt[i] = coin(rng) == 0 ? 255 : cls(rng);
      pr[i] = coin(rng) < 7 && gt[i] != 255 ? gt[i] : cls(rng);
    }
    metrics::ConfusionMatrix cm(k);
    cm.accumulate(pr, gt);
    double sum = 0;
    int defined = 0;
    for (int c = 0; c < k; ++c) {
      std::int64_t tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt[i] == 255) continue;
        tp += gt[i] == c && pr[i] == c;
        fp += gt[i] != c && pr[i] == c;
        fn += gt[i] == c && pr[i] != c;
      }
      if (tp + fp + fn == 0) continue;
      sum += static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
      ++defined;
    }
    const auto m = metrics::mean_iou(cm);
    if (!m || std::abs(*m - sum / defined) > 1e-12)
      return {false, "mIoU disagrees with direct counting on trial " + std::to_string(trial)};
  }
  return {true, "hand case and 50 random confusion matrices"};
}

// Directional finite differences: for each random direction v compare
// <grad, v> against (f(p + εv) − f(p − εv)) / 2ε.
Outcome gradient_check(std::vector<Td> params, const std::function<Td()>& loss, std::uint64_t seed,
                       int directions = 20) {
  constexpr double kStep = 1e-5, kTolerance = 1e-4;
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  loss().backward();
  std::vector<std::vector<double>> grads;
  for (auto& p : params) {
    std::vector<double> g(static_cast<std::size_t>(p.numel()), 0.0);
    if (p.has_grad()) g.assign(p.grad().begin(), p.grad().end());
    grads.push_back(std::move(g));
    p.zero_grad();
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  double worst = 0;
  NoGradGuard ng;
  for (int d = 0; d < directions; ++d) {
    std::vector<std::vector<double>> dir;
    double analytic = 0;
    for (std::size_t k = 0; k < params.size(); ++k) {
      std::vector<double> v(grads[k].size());
      for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = dist(rng);
        analytic += v[i] * grads[k][i];
      }
      dir.push_back(std::move(v));
    }
    auto shift = [&](double s) {
      for (std::size_t k = 0; k < params.size(); ++k) {
        auto data = params[k].data();
        for (std::size_t i = 0; i < data.size(); ++i) data[i] += s * dir[k][i];
      }
    };
    shift(kStep);
    const double fp = loss().item();
    shift(-2 * kStep);
    const double fm = loss().item();
    shift(kStep);
    const double numeric = (fp - fm) / (2 * kStep);
    worst = std::max(worst, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6}));
  }
  return {worst < kTolerance, std::to_string(directions) + " directions, worst relative error " + fmt(worst)};
}

template <typename M>
std::vector<Td> params_of(const M& m, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<Td> out;
  for (auto& [name, p] : m.named_parameters()) {
    for (auto& v : p.data()) v = dist(rng);
    out.push_back(p);
  }
  return out;
}

Td projection_loss(const Td& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto w = normal_tensor(out.shape(), rng);
  return ops::sum(ops::mul(out, w));
}

Outcome check_grad_edab() {
  nn::Rng rng(3);
  blocks::EDAB<double> block(blocks::EDABConfig{2, 2, nn::NormKind::batch, 2}, rng);
  auto params = params_of(block, 4, 0.5);
  std::mt19937_64 xr(5);
  auto x = normal_tensor({2, 2, 5, 5}, xr);
  params.push_back(x);
  return gradient_check(params, [&] { return projection_loss(block.forward(x), 7); }, 8);
}

Outcome check_grad_msau() {
  nn::Rng rng(2);
  msau::MSAU<double> m(msau::MSAUConfig{4, {3, 5, 7}, 2}, rng);
  auto params = params_of(m, 3, 0.5);
  std::mt19937_64 xr(4);
  auto x = normal_tensor({1, 4, 5, 5}, xr);
  params.push_back(x);
  return gradient_check(params, [&] { return projection_loss(m.forward(x), 5); }, 6);
}

Outcome check_grad_ss2d() {
  nn::Rng rng(4);
  ffm::SS2D<double> block(ffm::SS2DConfig{2, 2, 1, 0}, rng);
  auto params = params_of(block, 5, 0.4);
  std::mt19937_64 xr(6);
  auto x = normal_tensor({1, 2, 3, 3}, xr);
  params.push_back(x);
  return gradient_check(params, [&] { return projection_loss(block.forward(x), 7); }, 8);
}

Outcome check_grad_ffm() {
  nn::Rng rng(5);
  ffm::FFM<double> m(ffm::FFMConfig{6, 3, 2, 2, 2, 1}, rng);
  auto params = params_of(m, 6, 0.4);
  std::mt19937_64 xr(7);
  auto xe = normal_tensor({1, 3, 3, 3}, xr);
  auto x1 = normal_tensor({1, 1, 3, 3}, xr);
  auto x2 = normal_tensor({1, 2, 3, 3}, xr);
  for (auto* t : {&xe, &x1, &x2}) params.push_back(*t);
  return gradient_check(params, [&] { return projection_loss(m.forward(xe, x1, x2), 10); }, 11);
}

Outcome check_grad_loss() {
  std::mt19937_64 rng(12);
  auto logits = normal_tensor({2, 4, 3, 3}, rng, 2.0);
  std::vector<std::int32_t> labels(18);
  std::uniform_int_distribution<int> cls(0, 3);
  for (auto& l : labels) l = cls(rng);
  labels[4] = 255;
  const std::vector<double> weights{0.5, 1.0, 2.0, 1.5};
  return gradient_check({logits}, [&] { return train::segmentation_loss<double>(logits, labels, &weights); }, 13);
}

struct Suite {
  const char* name;
  Outcome (*fn)();
};

const std::vector<Suite>& suites() {
  static const std::vector<Suite> all{
      {"cross_scan", check_cross_scan},         {"selective_scan", check_selective_scan},
      {"channel_shuffle", check_channel_shuffle}, {"metrics", check_metrics},
      {"grad_edab", check_grad_edab},           {"grad_msau", check_grad_msau},
      {"grad_ss2d", check_grad_ss2d},           {"grad_ffm", check_grad_ffm},
      {"grad_loss", check_grad_loss},
  };
  return all;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& s : suites()) n.emplace_back(s.name);
    return n;
  }();
  return names;
}

std::vector<SuiteResult> run(const std::vector<std::string>& wanted, std::ostream* log) {
  for (const auto& w : wanted)
    if (std::find(suite_names().begin(), suite_names().end(), w) == suite_names().end())
      throw ConfigError("unknown selfcheck suite: " + w);
  std::vector<SuiteResult> out;
  for (const auto& s : suites()) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), s.name) == wanted.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o{false, {}};
    try {
      o = s.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back({s.name, o.passed, secs, o.detail});
    if (log)
      *log << (o.passed ? "PASS " : "FAIL ") << std::left << std::setw(16) << s.name << std::right << std::fixed
           << std::setprecision(2) << std::setw(7) << secs << "s  " << o.detail << '\n'
           << std::defaultfloat;
  }
  return out;
}

}  // namespace ecmnet::selfcheck
