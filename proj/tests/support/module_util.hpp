#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "ecmnet/nn.hpp"
#include "support/reference.hpp"

namespace testutil {

/// Overwrites every parameter with N(0, scale²) draws so no structure of the
/// default initialisation (unit norms, zero biases) hides wiring mistakes.
template <typename T>
void randomize(ecmnet::nn::Module<T>& m, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  for (auto& [name, p] : m.named_parameters())
    for (auto& v : p.data()) v = static_cast<T>(dist(rng));
}

/// Parameter values keyed by dotted path.
template <typename T>
std::map<std::string, std::vector<double>> weights(const ecmnet::nn::Module<T>& m) {
  std::map<std::string, std::vector<double>> out;
  for (const auto& [name, p] : m.named_parameters()) out[name] = {p.data().begin(), p.data().end()};
  return out;
}

template <typename T>
std::vector<ecmnet::Tensor<T>> parameters(const ecmnet::nn::Module<T>& m) {
  std::vector<ecmnet::Tensor<T>> out;
  for (const auto& [name, p] : m.named_parameters()) out.push_back(p);
  return out;
}

inline ref::Map as_map(const ecmnet::Tensor<double>& t) {
  return ref::from(static_cast<int>(t.dim(0)), static_cast<int>(t.dim(1)), static_cast<int>(t.dim(2)),
                   static_cast<int>(t.dim(3)), t.data());
}

inline double max_abs_diff(const ecmnet::Tensor<double>& a, const ref::Map& b) {
  if (a.numel() != static_cast<std::int64_t>(b.v.size())) return 1e300;
  double d = 0;
  for (std::size_t i = 0; i < b.v.size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.v[i]));
  return d;
}

}  // namespace testutil
