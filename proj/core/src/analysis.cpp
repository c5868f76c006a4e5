#include "ecmnet/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <thread>

namespace ecmnet::analysis {

std::string path_prefix(const std::string& path, int depth) {
  if (depth <= 0) return "";
  std::size_t pos = 0;
  for (int i = 0; i < depth; ++i) {
    pos = path.find('.', pos);
    if (pos == std::string::npos) return path;
    if (i + 1 < depth) ++pos;
  }
  return path.substr(0, pos);
}

template <typename T>
std::map<std::string, std::int64_t> count_params(const nn::Module<T>& module, int depth) {
  std::map<std::string, std::int64_t> out;
  for (const auto& [name, p] : module.named_parameters()) {
    // Drop the trailing tensor name so depth counts modules.
    const auto cut = name.rfind('.');
    const std::string owner = cut == std::string::npos ? "" : name.substr(0, cut);
    out[path_prefix(owner, depth)] += p.numel();
  }
  return out;
}

template <typename T>
std::map<std::string, profile::Cost> count_flops(model::ECMNet<T>& net, std::int64_t h, std::int64_t w) {
  const bool was_training = net.is_training();
  net.eval();
  profile::Recorder recorder;
  {
    MetaModeGuard meta;
    net.forward(Tensor<T>::zeros({1, 3, h, w}));
  }
  net.train(was_training);
  return recorder.by_scope();
}

template <typename T>
LatencyStats benchmark_latency(model::ECMNet<T>& net, std::int64_t h, std::int64_t w, int trials, int warmup) {
  if (trials < 3) throw ConfigError("benchmark_latency needs at least 3 trials");
  const bool was_training = net.is_training();
  net.eval();
  NoGradGuard no_grad;
  std::mt19937_64 rng(0);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<T> values(static_cast<std::size_t>(3 * h * w));
  for (auto& v : values) v = static_cast<T>(dist(rng));
  auto x = Tensor<T>::from({1, 3, h, w}, values);
  LatencyStats stats;
  stats.warmup = warmup;
  for (int i = 0; i < warmup; ++i) net.forward(x);
  for (int i = 0; i < trials; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    net.forward(x);
    const auto t1 = std::chrono::steady_clock::now();
    stats.samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  net.train(was_training);
  auto sorted = stats.samples_ms;
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  stats.median_ms = quantile(0.5);
  stats.p10_ms = quantile(0.1);
  stats.p90_ms = quantile(0.9);
  stats.min_ms = sorted.front();
  stats.max_ms = sorted.back();
  stats.hardware = hardware_descriptor();
  return stats;
}

std::string hardware_descriptor() {
  std::string cpu = "unknown cpu";
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) cpu = line.substr(colon + 2);
      break;
    }
  }
  return cpu + ", " + std::to_string(std::thread::hardware_concurrency()) + " hw threads, single-threaded run";
}

BudgetReport analyze(const model::ModelConfig& cfg, std::int64_t h, std::int64_t w, int ops_per_mac, int depth) {
  if (ops_per_mac != 1 && ops_per_mac != 2) throw ConfigError("ops per MAC must be 1 or 2");
  model::check_input_size(h, w);
  BudgetReport r;
  r.variant = cfg.variant;
  r.input_h = h;
  r.input_w = w;
  r.ops_per_mac = ops_per_mac;
  auto net = std::make_unique<model::ECMNet<float>>(cfg, 0);
  r.params_by_module = count_params(*net, std::max(depth, 1));
  for (const auto& [_, n] : r.params_by_module) r.total_params += n;
  for (const auto& [path, cost] : count_flops(*net, h, w)) {
    r.cost += cost;
    r.cost_by_module[path_prefix(path, std::max(depth, 1))] += cost;
  }
  return r;
}

std::string BudgetReport::to_text(int depth) const {
  std::ostringstream os;
  os << "variant " << variant << "\n";
  os << "input " << input_h << "x" << input_w << "\n";
  os << "flop_convention mac=" << ops_per_mac << "\n";
  os << "total_params " << total_params << "\n";
  os << std::fixed << std::setprecision(4);
  os << "total_flops " << flops() << " (" << static_cast<double>(flops()) / 1e9 << " G)\n";
  os << "total_macs " << cost.macs << "\n";
  if (depth > 0) {
    std::map<std::string, std::pair<std::int64_t, std::int64_t>> rows;
    for (const auto& [k, v] : params_by_module) rows[path_prefix(k, depth)].first += v;
    for (const auto& [k, v] : cost_by_module) rows[path_prefix(k, depth)].second += v.flops(ops_per_mac);
    os << "\n" << std::left << std::setw(28) << "module" << std::right << std::setw(12) << "params" << std::setw(18)
       << "flops" << "\n";
    for (const auto& [k, v] : rows) {
      os << std::left << std::setw(28) << (k.empty() ? "(root)" : k) << std::right << std::setw(12) << v.first
         << std::setw(18) << v.second << "\n";
    }
  }
  if (latency) {
    os << "\nlatency_ms median " << latency->median_ms << " p10 " << latency->p10_ms << " p90 " << latency->p90_ms
       << " min " << latency->min_ms << " max " << latency->max_ms << " trials " << latency->samples_ms.size()
       << " warmup " << latency->warmup << "\n";
    os << "hardware " << latency->hardware << "\n";
  }
  return os.str();
}

template std::map<std::string, std::int64_t> count_params(const nn::Module<float>&, int);
template std::map<std::string, std::int64_t> count_params(const nn::Module<double>&, int);
template std::map<std::string, profile::Cost> count_flops(model::ECMNet<float>&, std::int64_t, std::int64_t);
template std::map<std::string, profile::Cost> count_flops(model::ECMNet<double>&, std::int64_t, std::int64_t);
template LatencyStats benchmark_latency(model::ECMNet<float>&, std::int64_t, std::int64_t, int, int);
template LatencyStats benchmark_latency(model::ECMNet<double>&, std::int64_t, std::int64_t, int, int);

}  // namespace ecmnet::analysis
