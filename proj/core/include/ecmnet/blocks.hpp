#pragma once

#include <cstdint>

#include "ecmnet/nn.hpp"

namespace ecmnet::blocks {

using nn::NormKind;
using nn::Rng;

struct EDABConfig {
  std::int64_t channels = 16;
  int dilation_rate = 1;
  NormKind norm_kind = NormKind::batch;
  int shuffle_groups = 2;

  void validate() const;
};

/// Channel attention: x ⊙ σ(W2·relu(W1·gap(x) + b1) + b2).
template <typename T>
class ChannelAttention : public nn::Module<T> {
 public:
  ChannelAttention(std::int64_t channels, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const;
  /// The per-channel gate σ(...), shape (B,C,1,1).
  Tensor<T> gate(const Tensor<T>& x) const;

  static std::int64_t hidden_width(std::int64_t channels) { return std::max<std::int64_t>(1, channels / 4); }
  static std::int64_t count(std::int64_t channels);

  nn::Conv2d<T>& squeeze() { return fc1_; }
  nn::Conv2d<T>& excite() { return fc2_; }

 private:
  nn::Conv2d<T> fc1_, fc2_;
};

/// Dual-direction attention: x ⊙ A_h ⊙ A_w with A_h = σ(conv3x1(mean_w x))
/// of shape (B,C,H,1) and A_w = σ(conv1x3(mean_h x)) of shape (B,C,1,W).
template <typename T>
class DualDirectionAttention : public nn::Module<T> {
 public:
  DualDirectionAttention(std::int64_t channels, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const;
  Tensor<T> gate_h(const Tensor<T>& x) const;
  Tensor<T> gate_w(const Tensor<T>& x) const;

  static std::int64_t count(std::int64_t channels);

  nn::Conv2d<T>& conv_h() { return conv_h_; }
  nn::Conv2d<T>& conv_w() { return conv_w_; }

 private:
  nn::Conv2d<T> conv_h_, conv_w_;
};

template <typename T>
class EDAB : public nn::Module<T> {
 public:
  EDAB(const EDABConfig& cfg, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x);
  const EDABConfig& config() const { return cfg_; }

  static std::int64_t count(const EDABConfig& cfg);

  // Stages, exposed for the step-by-step oracle tests.
  nn::ConvNorm<T> reduce, trunk_31, trunk_13;
  nn::ConvNorm<T> dw_31, dw_13;
  ChannelAttention<T> ca;
  nn::ConvNorm<T> ddw_31, ddw_13;
  DualDirectionAttention<T> dda;
  nn::ConvNorm<T> restore;

 private:
  EDABConfig cfg_;
};

}  // namespace ecmnet::blocks
