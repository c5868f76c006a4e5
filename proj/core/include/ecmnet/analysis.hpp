#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecmnet/model.hpp"
#include "ecmnet/profiler.hpp"

namespace ecmnet::analysis {

struct LatencyStats {
  std::vector<double> samples_ms;
  int warmup = 0;
  double median_ms = 0, min_ms = 0, max_ms = 0, p10_ms = 0, p90_ms = 0;
  std::string hardware;
};

struct BudgetReport {
  std::string variant;
  std::int64_t total_params = 0;
  std::map<std::string, std::int64_t> params_by_module;
  std::int64_t input_h = 0, input_w = 0;
  int ops_per_mac = 1;
  profile::Cost cost;
  std::map<std::string, profile::Cost> cost_by_module;
  std::optional<LatencyStats> latency;

  std::int64_t flops() const { return cost.flops(ops_per_mac); }
  /// Plain-text report; `depth` controls how many path components are kept
  /// in the itemization (0 prints totals only).
  std::string to_text(int depth = 1) const;
};

/// Groups a dotted path by its first `depth` components.
std::string path_prefix(const std::string& path, int depth);

template <typename T>
std::map<std::string, std::int64_t> count_params(const nn::Module<T>& module, int depth = 1);

/// Shape-only forward at (1,3,h,w) with the profiler attached.
/// Costs are keyed by the full scope path.
template <typename T>
std::map<std::string, profile::Cost> count_flops(model::ECMNet<T>& net, std::int64_t h, std::int64_t w);

template <typename T>
LatencyStats benchmark_latency(model::ECMNet<T>& net, std::int64_t h, std::int64_t w, int trials, int warmup = 2);

/// CPU model string plus thread count.
std::string hardware_descriptor();

/// Full budget for a config at the given input size (no latency).
BudgetReport analyze(const model::ModelConfig& cfg, std::int64_t h, std::int64_t w, int ops_per_mac, int depth = 1);

}  // namespace ecmnet::analysis
