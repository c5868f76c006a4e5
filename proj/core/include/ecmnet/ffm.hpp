#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "ecmnet/nn.hpp"

namespace ecmnet::ffm {

using nn::Rng;

struct SS2DConfig {
  std::int64_t model_dim = 32;
  std::int64_t state_dim = 8;
  int ssm_ratio = 1;
  /// 0 selects ceil(model_dim / 16).
  std::int64_t dt_rank = 0;

  void validate() const;
  std::int64_t inner() const { return model_dim * ssm_ratio; }
  std::int64_t rank() const { return dt_rank > 0 ? dt_rank : (model_dim + 15) / 16; }
};

/// Four-direction selective-scan block:
///   (x, z) = in_proj(x);  x = silu(dwconv3(x))
///   y = cross_merge(selective_scan(cross_scan(x), Δ, A, B, C, D))
///   out = out_proj(layer_norm(y) ⊙ silu(z))
template <typename T>
class SS2D : public nn::Module<T> {
 public:
  SS2D(const SS2DConfig& cfg, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const;
  const SS2DConfig& config() const { return cfg_; }
  static std::int64_t count(const SS2DConfig& cfg);

  struct Projections {
    Tensor<T> delta;  // (B, 4·Di, L), after softplus
    Tensor<T> b, c;   // (B, 4, N, L)
  };
  /// x_proj and dt_proj applied to scanned sequences (B, 4, Di, L).
  Projections project(const Tensor<T>& xs) const;

  nn::Conv2d<T> in_proj, conv;
  nn::Conv2d<T> x_proj, dt_proj;
  Tensor<T> a_log, d;
  nn::LayerNorm2d<T> norm;
  nn::Conv2d<T> out_proj;

 private:
  SS2DConfig cfg_;
};

struct FFMConfig {
  std::int64_t fused_channels = 152;
  std::int64_t encoder_channels = 128;
  std::int64_t model_dim = 32;
  std::int64_t state_dim = 8;
  int expansion = 2;
  int depth = 1;

  void validate() const;
  SS2DConfig ss2d() const { return SS2DConfig{model_dim, state_dim, 1, 0}; }
};

/// LN → 1×1 expand → GELU → 1×1 contract.
template <typename T>
class FeedForward : public nn::Module<T> {
 public:
  FeedForward(std::int64_t dim, int expansion, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const;
  static std::int64_t count(std::int64_t dim, int expansion);

  nn::LayerNorm2d<T> norm;
  nn::Conv2d<T> fc1, fc2;
};

template <typename T>
class FFMLayer : public nn::Module<T> {
 public:
  FFMLayer(const FFMConfig& cfg, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const { return ffn.forward(ss2d.forward(x)); }

  SS2D<T> ss2d;
  FeedForward<T> ffn;
};

/// Y = x_enc + proj(FFN(SS2D(fuse(concat(x_enc, x1, x2))))).
template <typename T>
class FFM : public nn::Module<T> {
 public:
  FFM(const FFMConfig& cfg, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x_encoder, const Tensor<T>& x1, const Tensor<T>& x2) const;
  const FFMConfig& config() const { return cfg_; }
  static std::int64_t count(const FFMConfig& cfg);

  nn::Conv2d<T> fuse;
  std::vector<std::unique_ptr<FFMLayer<T>>> layers;
  nn::Conv2d<T> project;

 private:
  FFMConfig cfg_;
};

}  // namespace ecmnet::ffm
