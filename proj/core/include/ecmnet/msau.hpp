#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "ecmnet/nn.hpp"

namespace ecmnet::msau {

using nn::Rng;

struct MSAUConfig {
  std::int64_t channels = 16;
  std::vector<int> kernel_set{3, 5, 7};
  int channel_reduction = 4;

  void validate() const;
  std::int64_t reduced_width() const { return std::max<std::int64_t>(1, channels / channel_reduction); }
};

/// Depth-wise k×k followed by point-wise 1×1, both with bias.
template <typename T>
class SeparableConv : public nn::Module<T> {
 public:
  SeparableConv(std::int64_t in, std::int64_t out, int k, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const { return pw.forward(dw.forward(x)); }
  static std::int64_t count(std::int64_t in, std::int64_t out, int k) { return in * k * k + in + in * out + out; }

  nn::Conv2d<T> dw, pw;
};

/// Y = x + X2 ⊙ (X3 + X4):
///   X1 = Σ_k sep_k(reduce(x))
///   X2 = expand(X1 ⊙ gate(x)),  gate = σ(conv1x1(sep7(mean_h x)))
///   X3 = mlp(gap(dw3(x))),  X4 = mlp(gmp(dw3(x)))
template <typename T>
class MSAU : public nn::Module<T> {
 public:
  MSAU(const MSAUConfig& cfg, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const;

  Tensor<T> multi_scale(const Tensor<T>& x) const;
  /// Spatial gate of shape (B, C/2, 1, W).
  Tensor<T> spatial_gate(const Tensor<T>& x) const;
  /// (X3, X4), each (B, C, 1, 1).
  std::pair<Tensor<T>, Tensor<T>> channel_aggregation(const Tensor<T>& x) const;

  const MSAUConfig& config() const { return cfg_; }
  static std::int64_t count(const MSAUConfig& cfg);

  nn::Conv2d<T> reduce;
  std::vector<std::unique_ptr<SeparableConv<T>>> branches;
  SeparableConv<T> gate_sep;
  nn::Conv2d<T> gate_pw, expand;
  nn::Conv2d<T> agg_dw, mlp1, mlp2;

 private:
  MSAUConfig cfg_;
};

}  // namespace ecmnet::msau
