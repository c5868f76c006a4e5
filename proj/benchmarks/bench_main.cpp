#include <benchmark/benchmark.h>

#include <random>

#include "ecmnet/model.hpp"
#include "ecmnet/ops.hpp"
#include "ecmnet/scan.hpp"

using namespace ecmnet;

namespace {

template <typename T>
Tensor<T> filled(Shape shape, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<T> v(static_cast<std::size_t>(numel(shape)));
  for (auto& e : v) e = static_cast<T>(dist(rng));
  return Tensor<T>::from(std::move(shape), std::move(v));
}

// One SS2D-sized scan: 4 directions × 32 channels, state 8.
void BM_SelectiveScan(benchmark::State& state) {
  const std::int64_t len = state.range(0), groups = 4, dpg = 32, n = 8;
  auto u = filled<float>({1, groups * dpg, len}, 1, -1, 1);
  auto delta = filled<float>({1, groups * dpg, len}, 2, 0.01, 0.5);
  auto a = filled<float>({groups * dpg, n}, 3, -2, -0.1);
  auto b = filled<float>({1, groups, n, len}, 4, -1, 1);
  auto c = filled<float>({1, groups, n, len}, 5, -1, 1);
  auto d = filled<float>({groups * dpg}, 6, -1, 1);
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(scan::selective_scan(u, delta, a, b, c, d));
  state.SetComplexityN(len);
}
BENCHMARK(BM_SelectiveScan)->RangeMultiplier(2)->Range(512, 16384)->Complexity(benchmark::oN);

void BM_CrossScanMerge(benchmark::State& state) {
  const std::int64_t side = state.range(0);
  auto x = filled<float>({1, 32, side, side}, 1, -1, 1);
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(scan::cross_merge(scan::cross_scan(x), side, side));
}
BENCHMARK(BM_CrossScanMerge)->Arg(16)->Arg(32)->Arg(64);

// args: channels, kernel, dilation, depthwise
void BM_Conv2d(benchmark::State& state) {
  const auto ch = state.range(0);
  const int k = static_cast<int>(state.range(1)), dil = static_cast<int>(state.range(2));
  const bool dw = state.range(3) != 0;
  auto x = filled<float>({1, ch, 64, 64}, 1, -1, 1);
  auto w = filled<float>({ch, dw ? 1 : ch, k, k}, 2, -0.1, 0.1);
  ops::Conv2dOptions opt;
  opt.pad_h = opt.pad_w = dil * (k / 2);
  opt.dilation_h = opt.dilation_w = dil;
  opt.groups = dw ? static_cast<int>(ch) : 1;
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d<float>(x, w, nullptr, opt));
  state.SetItemsProcessed(state.iterations() * ch * 64 * 64 * k * k * (dw ? 1 : ch));
}
BENCHMARK(BM_Conv2d)
    ->Args({32, 3, 1, 0})
    ->Args({32, 1, 1, 0})
    ->Args({64, 3, 1, 1})
    ->Args({64, 3, 4, 1})
    ->Unit(benchmark::kMicrosecond);

void BM_ModelForward(benchmark::State& state) {
  const auto side = state.range(1);
  auto cfg = model::make_variant(state.range(0) ? "C3" : "Baseline");
  cfg.num_classes = 19;
  model::ECMNet<float> net(cfg, 0);
  net.eval();
  auto x = filled<float>({1, 3, side, side}, 1, 0, 1);
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
  state.SetLabel(cfg.variant);
}
BENCHMARK(BM_ModelForward)->Args({0, 128})->Args({1, 128})->Args({1, 256})->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  auto cfg = model::make_variant("C3");
  cfg.num_classes = 3;
  model::ECMNet<float> net(cfg, 0);
  auto x = filled<float>({8, 3, 64, 64}, 1, 0, 1);
  std::vector<std::int32_t> labels(8 * 64 * 64);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::int32_t>(i % 3);
  for (auto _ : state) {
    net.zero_grad();
    ops::cross_entropy(net.forward(x), labels, 255, static_cast<const std::vector<float>*>(nullptr)).backward();
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
