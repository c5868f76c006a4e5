#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ecmnet/blocks.hpp"
#include "ecmnet/ffm.hpp"
#include "ecmnet/msau.hpp"

namespace ecmnet::model {

using nn::NormKind;
using nn::Rng;

struct ModelConfig {
  std::array<std::int64_t, 3> stage_channels{8, 16, 128};
  std::array<std::vector<int>, 3> encoder_dilations{{{1, 1, 2}, {1, 1, 2}, {2, 2, 4, 4, 8, 8, 16, 16}}};
  std::array<std::vector<int>, 3> decoder_dilations{{{1}, {1}, {2, 2}}};
  std::int64_t num_classes = 19;
  std::int64_t input_h = 1024, input_w = 1024;

  std::array<bool, 3> connections{true, true, true};
  std::array<bool, 3> msau{true, true, true};
  bool ffm = true;

  int shuffle_groups = 2;
  NormKind norm = NormKind::batch;
  std::vector<int> msau_kernels{3, 5, 7};
  int msau_reduction = 2;
  std::int64_t ffm_model_dim = 32;
  std::int64_t ffm_state_dim = 8;
  int ffm_expansion = 2;
  int ffm_depth = 1;

  std::string variant = "C3";

  void validate() const;
  std::array<int, 3> blocks_per_stage() const;
  ffm::FFMConfig ffm_config() const;
  msau::MSAUConfig msau_config(int stage) const;
  blocks::EDABConfig edab_config(int stage, int dilation) const;
};

/// Variant names of the ablation lattice, Baseline first and C3 last.
const std::vector<std::string>& variant_names();

/// Switch settings for a named variant on top of `base` (default widths).
/// Throws ConfigError for unknown names.
ModelConfig make_variant(const std::string& name, ModelConfig base = {});

/// Trainable-scalar count, computed without allocating weights.
std::int64_t expected_parameter_count(const ModelConfig& cfg);

/// Throws ConfigError naming the required multiple unless h, w are positive
/// multiples of 8.
void check_input_size(std::int64_t h, std::int64_t w);

template <typename T>
class Stage : public nn::Module<T> {
 public:
  Stage() = default;
  void append(std::unique_ptr<blocks::EDAB<T>> block);
  Tensor<T> forward(const Tensor<T>& x);
  std::size_t size() const { return blocks_.size(); }

 private:
  std::vector<std::unique_ptr<blocks::EDAB<T>>> blocks_;
};

template <typename T>
class ECMNet : public nn::Module<T> {
 public:
  ECMNet(const ModelConfig& cfg, std::uint64_t seed);
  /// (B,3,H,W) → (B,K,H,W) logits.
  Tensor<T> forward(const Tensor<T>& x);
  const ModelConfig& config() const { return cfg_; }

  /// Runtime switch: skip the fusion module even when it was built.
  bool use_ffm = true;

 private:
  ModelConfig cfg_;
  Rng rng_;
  nn::ConvNorm<T> stem_;
  Stage<T> enc1_;
  nn::ConvNorm<T> down2_;
  Stage<T> enc2_;
  nn::ConvNorm<T> down3_;
  Stage<T> enc3_;
  std::array<std::unique_ptr<nn::ConvNorm<T>>, 3> conn_;
  std::array<std::unique_ptr<msau::MSAU<T>>, 3> msau_;
  std::unique_ptr<ffm::FFM<T>> ffm_;
  Stage<T> dec3_;
  nn::ConvNorm<T> up3_;
  Stage<T> dec2_;
  nn::ConvNorm<T> up2_;
  Stage<T> dec1_;
  nn::Conv2d<T> classifier_;
};

}  // namespace ecmnet::model
