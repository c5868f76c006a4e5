#include "ecmnet/nn.hpp"

#include <cmath>

#include "ecmnet/profiler.hpp"

namespace ecmnet::nn {

template <typename T>
Named<T> Module<T>::named_parameters() const {
  Named<T> out;
  collect("", out, false);
  return out;
}

template <typename T>
Named<T> Module<T>::named_buffers() const {
  Named<T> out;
  collect("", out, true);
  return out;
}

template <typename T>
std::int64_t Module<T>::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& [_, p] : named_parameters()) n += p.numel();
  return n;
}

template <typename T>
void Module<T>::train(bool on) {
  training_ = on;
  for (auto& [_, c] : children_) c->train(on);
}

template <typename T>
void Module<T>::zero_parameters() {
  for (auto& [_, p] : named_parameters()) {
    for (auto& v : p.data()) v = T(0);
  }
}

template <typename T>
void Module<T>::zero_grad() {
  for (auto& [_, p] : named_parameters()) p.zero_grad();
}

template <typename T>
Tensor<T> Module<T>::add_parameter(const std::string& name, Tensor<T> t) {
  t.set_requires_grad(true);
  params_.emplace_back(name, t);
  return t;
}

template <typename T>
Tensor<T> Module<T>::add_buffer(const std::string& name, Tensor<T> t) {
  buffers_.emplace_back(name, t);
  return t;
}

template <typename T>
void Module<T>::add_child(const std::string& name, Module& child) {
  children_.emplace_back(name, &child);
}

template <typename T>
void Module<T>::collect(const std::string& prefix, Named<T>& out, bool buffers) const {
  for (const auto& [name, t] : buffers ? buffers_ : params_) out.emplace_back(prefix + name, t);
  for (const auto& [name, c] : children_) c->collect(prefix + name + ".", out, buffers);
}

template <typename T>
Tensor<T> uniform_init(Shape shape, std::int64_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::int64_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<T> values(static_cast<std::size_t>(numel(shape)));
  for (auto& v : values) v = static_cast<T>(dist(rng));
  return Tensor<T>::from(std::move(shape), std::move(values));
}

template <typename T>
Conv2d<T>::Conv2d(const ConvSpec& spec, Rng& rng) : spec_(spec) {
  if (spec.in < 1 || spec.out < 1 || spec.kh < 1 || spec.kw < 1 || spec.groups < 1 || spec.in % spec.groups ||
      spec.out % spec.groups) {
    throw ConfigError("invalid conv spec " + std::to_string(spec.in) + "->" + std::to_string(spec.out) + " groups " +
                      std::to_string(spec.groups));
  }
  options_.stride_h = options_.stride_w = spec.stride;
  options_.dilation_h = spec.dilation_h;
  options_.dilation_w = spec.dilation_w;
  options_.pad_h = spec.dilation_h * (spec.kh - 1) / 2;
  options_.pad_w = spec.dilation_w * (spec.kw - 1) / 2;
  options_.groups = spec.groups;
  const std::int64_t fan_in = spec.in / spec.groups * spec.kh * spec.kw;
  weight_ = this->add_parameter("weight", uniform_init<T>({spec.out, spec.in / spec.groups, spec.kh, spec.kw}, fan_in, rng));
  if (spec.bias) bias_ = this->add_parameter("bias", uniform_init<T>({spec.out}, fan_in, rng));
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) const {
  return ops::conv2d(x, weight_, spec_.bias ? &bias_ : nullptr, options_);
}

template <typename T>
std::int64_t Conv2d<T>::count(const ConvSpec& s) {
  return s.out * (s.in / s.groups) * s.kh * s.kw + (s.bias ? s.out : 0);
}

template <typename T>
BatchNorm2d<T>::BatchNorm2d(std::int64_t channels, NormKind kind) : kind_(kind) {
  if (kind != NormKind::batch) return;
  gamma_ = this->add_parameter("weight", Tensor<T>::full({channels}, T(1)));
  beta_ = this->add_parameter("bias", Tensor<T>::zeros({channels}));
  running_mean_ = this->add_buffer("running_mean", Tensor<T>::zeros({channels}));
  running_var_ = this->add_buffer("running_var", Tensor<T>::full({channels}, T(1)));
}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x) {
  if (kind_ == NormKind::identity) return x;
  return ops::batch_norm(x, gamma_, beta_, running_mean_, running_var_, this->is_training(), momentum, eps);
}

template <typename T>
LayerNorm2d<T>::LayerNorm2d(std::int64_t channels) {
  gamma_ = this->add_parameter("weight", Tensor<T>::full({channels}, T(1)));
  beta_ = this->add_parameter("bias", Tensor<T>::zeros({channels}));
}

template <typename T>
Tensor<T> LayerNorm2d<T>::forward(const Tensor<T>& x) const {
  return ops::channel_layer_norm(x, gamma_, beta_, T(1e-5));
}

template <typename T>
ConvNorm<T>::ConvNorm(const ConvSpec& spec, bool relu, NormKind norm, Rng& rng)
    : conv_(spec, rng), norm_(spec.out, norm), relu_(relu) {
  this->add_child("conv", conv_);
  this->add_child("bn", norm_);
}

template <typename T>
Tensor<T> ConvNorm<T>::forward(const Tensor<T>& x) {
  auto y = norm_.forward(conv_.forward(x));
  return relu_ ? ops::relu(y) : y;
}

#define ECMNET_INSTANTIATE_NN(T)                                \
  template class Module<T>;                                     \
  template class Conv2d<T>;                                     \
  template class BatchNorm2d<T>;                                \
  template class LayerNorm2d<T>;                                \
  template class ConvNorm<T>;                                   \
  template Tensor<T> uniform_init<T>(Shape, std::int64_t, Rng&);

ECMNET_INSTANTIATE_NN(float)
ECMNET_INSTANTIATE_NN(double)

#undef ECMNET_INSTANTIATE_NN

}  // namespace ecmnet::nn
