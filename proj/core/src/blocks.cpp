#include "ecmnet/blocks.hpp"

#include "ecmnet/profiler.hpp"

namespace ecmnet::blocks {

namespace {

nn::ConvSpec spec(std::int64_t in, std::int64_t out, int kh, int kw, int groups = 1, int dil = 1, bool bias = false) {
  nn::ConvSpec s;
  s.in = in;
  s.out = out;
  s.kh = kh;
  s.kw = kw;
  s.groups = groups;
  s.dilation_h = kh > 1 ? dil : 1;
  s.dilation_w = kw > 1 ? dil : 1;
  s.bias = bias;
  return s;
}

std::int64_t half(const EDABConfig& cfg) {
  cfg.validate();
  return cfg.channels / 2;
}

}  // namespace

void EDABConfig::validate() const {
  if (channels < 2 || channels % 2) {
    throw ConfigError("EDAB channels must be even and >= 2, got " + std::to_string(channels));
  }
  if (dilation_rate < 1) throw ConfigError("EDAB dilation_rate must be >= 1");
  if (shuffle_groups < 1 || channels % shuffle_groups) {
    throw ConfigError("EDAB shuffle_groups " + std::to_string(shuffle_groups) + " must divide " +
                      std::to_string(channels));
  }
}

template <typename T>
ChannelAttention<T>::ChannelAttention(std::int64_t c, Rng& rng)
    : fc1_(spec(c, hidden_width(c), 1, 1, 1, 1, true), rng), fc2_(spec(hidden_width(c), c, 1, 1, 1, 1, true), rng) {
  // The pooled input is batch-normalized and near zero, so a negative
  // starting bias would leave the narrow hidden layer dead.
  for (auto& b : fc1_.bias().data()) b = T(0);
  this->add_child("fc1", fc1_);
  this->add_child("fc2", fc2_);
}

template <typename T>
Tensor<T> ChannelAttention<T>::gate(const Tensor<T>& x) const {
  auto pooled = ops::mean(x, {2, 3});
  return ops::sigmoid(fc2_.forward(ops::relu(fc1_.forward(pooled))));
}

template <typename T>
Tensor<T> ChannelAttention<T>::forward(const Tensor<T>& x) const {
  profile::Scope scope("ca");
  return ops::mul(x, gate(x));
}

template <typename T>
std::int64_t ChannelAttention<T>::count(std::int64_t c) {
  const std::int64_t h = hidden_width(c);
  return c * h + h + h * c + c;
}

template <typename T>
DualDirectionAttention<T>::DualDirectionAttention(std::int64_t c, Rng& rng)
    : conv_h_(spec(c, c, 3, 1, 1, 1, true), rng), conv_w_(spec(c, c, 1, 3, 1, 1, true), rng) {
  this->add_child("conv_h", conv_h_);
  this->add_child("conv_w", conv_w_);
}

template <typename T>
Tensor<T> DualDirectionAttention<T>::gate_h(const Tensor<T>& x) const {
  return ops::sigmoid(conv_h_.forward(ops::mean(x, {3})));
}

template <typename T>
Tensor<T> DualDirectionAttention<T>::gate_w(const Tensor<T>& x) const {
  return ops::sigmoid(conv_w_.forward(ops::mean(x, {2})));
}

template <typename T>
Tensor<T> DualDirectionAttention<T>::forward(const Tensor<T>& x) const {
  profile::Scope scope("dda");
  return ops::mul(ops::mul(x, gate_h(x)), gate_w(x));
}

template <typename T>
std::int64_t DualDirectionAttention<T>::count(std::int64_t c) {
  return 2 * (3 * c * c + c);
}

template <typename T>
EDAB<T>::EDAB(const EDABConfig& cfg, Rng& rng)
    : reduce(spec(cfg.channels, half(cfg), 1, 1), true, cfg.norm_kind, rng),
      trunk_31(spec(half(cfg), half(cfg), 3, 1), true, cfg.norm_kind, rng),
      trunk_13(spec(half(cfg), half(cfg), 1, 3), true, cfg.norm_kind, rng),
      dw_31(spec(half(cfg), half(cfg), 3, 1, static_cast<int>(half(cfg))), false, cfg.norm_kind, rng),
      dw_13(spec(half(cfg), half(cfg), 1, 3, static_cast<int>(half(cfg))), false, cfg.norm_kind, rng),
      ca(half(cfg), rng),
      ddw_31(spec(half(cfg), half(cfg), 3, 1, static_cast<int>(half(cfg)), cfg.dilation_rate), false, cfg.norm_kind,
             rng),
      ddw_13(spec(half(cfg), half(cfg), 1, 3, static_cast<int>(half(cfg)), cfg.dilation_rate), false, cfg.norm_kind,
             rng),
      dda(half(cfg), rng),
      restore(spec(half(cfg), cfg.channels, 1, 1), false, cfg.norm_kind, rng),
      cfg_(cfg) {
  this->add_child("reduce", reduce);
  this->add_child("trunk_31", trunk_31);
  this->add_child("trunk_13", trunk_13);
  this->add_child("dw_31", dw_31);
  this->add_child("dw_13", dw_13);
  this->add_child("ca", ca);
  this->add_child("ddw_31", ddw_31);
  this->add_child("ddw_13", ddw_13);
  this->add_child("dda", dda);
  this->add_child("restore", restore);
}

template <typename T>
Tensor<T> EDAB<T>::forward(const Tensor<T>& x) {
  if (x.rank() != 4 || x.dim(1) != cfg_.channels) {
    throw ConfigError("EDAB expects " + std::to_string(cfg_.channels) + " channels, got input " +
                      to_string(x.shape()));
  }
  auto trunk = trunk_13.forward(trunk_31.forward(reduce.forward(x)));
  auto local = ca.forward(dw_13.forward(dw_31.forward(trunk)));
  auto context = dda.forward(ddw_13.forward(ddw_31.forward(trunk)));
  auto merged = ops::add(ops::add(trunk, local), context);
  auto y = ops::add(restore.forward(merged), x);
  return ops::channel_shuffle(y, cfg_.shuffle_groups);
}

template <typename T>
std::int64_t EDAB<T>::count(const EDABConfig& cfg) {
  const std::int64_t c = cfg.channels, h = half(cfg);
  const std::int64_t bn = cfg.norm_kind == NormKind::batch ? 2 : 0;
  return (c * h + bn * h)                       // reduce
         + 2 * (3 * h * h + bn * h)             // trunk 3x1, 1x3
         + 4 * (3 * h + bn * h)                 // depth-wise pairs in both branches
         + ChannelAttention<T>::count(h)        //
         + DualDirectionAttention<T>::count(h)  //
         + (h * c + bn * c);                    // restore
}

template class ChannelAttention<float>;
template class ChannelAttention<double>;
template class DualDirectionAttention<float>;
template class DualDirectionAttention<double>;
template class EDAB<float>;
template class EDAB<double>;

}  // namespace ecmnet::blocks
