#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ecmnet/ops.hpp"
#include "ecmnet/tensor.hpp"

namespace ecmnet::nn {

using Rng = std::mt19937_64;

template <typename T>
using Named = std::vector<std::pair<std::string, Tensor<T>>>;

/// Base for layers: owns named parameters and buffers and links to child
/// modules held as members of the derived class.
template <typename T>
class Module {
 public:
  Module() = default;
  virtual ~Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;

  Named<T> named_parameters() const;
  Named<T> named_buffers() const;
  std::int64_t parameter_count() const;

  void train(bool on = true);
  void eval() { train(false); }
  bool is_training() const { return training_; }

  /// Sets every parameter to zero. Buffers are left alone.
  void zero_parameters();
  void zero_grad();

 protected:
  Tensor<T> add_parameter(const std::string& name, Tensor<T> t);
  Tensor<T> add_buffer(const std::string& name, Tensor<T> t);
  void add_child(const std::string& name, Module& child);

 private:
  void collect(const std::string& prefix, Named<T>& out, bool buffers) const;

  Named<T> params_;
  Named<T> buffers_;
  std::vector<std::pair<std::string, Module*>> children_;
  bool training_ = true;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename T>
Tensor<T> uniform_init(Shape shape, std::int64_t fan_in, Rng& rng);

struct ConvSpec {
  std::int64_t in = 1, out = 1;
  int kh = 1, kw = 1;
  int stride = 1;
  int dilation_h = 1, dilation_w = 1;
  int groups = 1;
  bool bias = true;
};

/// Conv with "same" padding for stride 1 (pad = dilation·(k−1)/2).
template <typename T>
class Conv2d : public Module<T> {
 public:
  Conv2d(const ConvSpec& spec, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const;
  const ConvSpec& spec() const { return spec_; }
  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }

  static std::int64_t count(const ConvSpec& spec);

 private:
  ConvSpec spec_;
  ops::Conv2dOptions options_;
  Tensor<T> weight_, bias_;
};

enum class NormKind { batch, identity };

template <typename T>
class BatchNorm2d : public Module<T> {
 public:
  BatchNorm2d(std::int64_t channels, NormKind kind = NormKind::batch);
  Tensor<T> forward(const Tensor<T>& x);
  static std::int64_t count(std::int64_t channels, NormKind kind = NormKind::batch) {
    return kind == NormKind::batch ? 2 * channels : 0;
  }

  T momentum = T(0.1);
  T eps = T(1e-5);

 private:
  NormKind kind_;
  Tensor<T> gamma_, beta_, running_mean_, running_var_;
};

/// Layer norm over channels at each spatial position.
template <typename T>
class LayerNorm2d : public Module<T> {
 public:
  explicit LayerNorm2d(std::int64_t channels);
  Tensor<T> forward(const Tensor<T>& x) const;
  static std::int64_t count(std::int64_t channels) { return 2 * channels; }

 private:
  Tensor<T> gamma_, beta_;
};

/// Conv → norm → optional ReLU.
template <typename T>
class ConvNorm : public Module<T> {
 public:
  ConvNorm(const ConvSpec& spec, bool relu, NormKind norm, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x);
  static std::int64_t count(const ConvSpec& spec, NormKind norm) {
    return Conv2d<T>::count(spec) + BatchNorm2d<T>::count(spec.out, norm);
  }

 private:
  Conv2d<T> conv_;
  BatchNorm2d<T> norm_;
  bool relu_;
};

}  // namespace ecmnet::nn
