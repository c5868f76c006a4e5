#include "ecmnet/msau.hpp"

#include "ecmnet/profiler.hpp"

namespace ecmnet::msau {

namespace {

nn::ConvSpec spec(std::int64_t in, std::int64_t out, int k = 1, int groups = 1) {
  nn::ConvSpec s;
  s.in = in;
  s.out = out;
  s.kh = s.kw = k;
  s.groups = groups;
  s.bias = true;
  return s;
}

const MSAUConfig& checked(const MSAUConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

void MSAUConfig::validate() const {
  if (channels < 2 || channels % 2) {
    throw ConfigError("MSAU channels must be even and >= 2, got " + std::to_string(channels));
  }
  if (kernel_set.empty()) throw ConfigError("MSAU kernel_set is empty");
  for (int k : kernel_set) {
    if (k < 1 || k % 2 == 0) throw ConfigError("MSAU kernel sizes must be odd, got " + std::to_string(k));
  }
  if (channel_reduction < 1) throw ConfigError("MSAU channel_reduction must be >= 1");
}

template <typename T>
SeparableConv<T>::SeparableConv(std::int64_t in, std::int64_t out, int k, Rng& rng)
    : dw(spec(in, in, k, static_cast<int>(in)), rng), pw(spec(in, out), rng) {
  this->add_child("dw", dw);
  this->add_child("pw", pw);
}

template <typename T>
MSAU<T>::MSAU(const MSAUConfig& cfg, Rng& rng)
    : reduce(spec(checked(cfg).channels, cfg.channels / 2), rng),
      gate_sep(cfg.channels, cfg.channels / 2, 7, rng),
      gate_pw(spec(cfg.channels / 2, cfg.channels / 2), rng),
      expand(spec(cfg.channels / 2, cfg.channels), rng),
      agg_dw(spec(cfg.channels, cfg.channels, 3, static_cast<int>(cfg.channels)), rng),
      mlp1(spec(cfg.channels, cfg.reduced_width()), rng),
      mlp2(spec(cfg.reduced_width(), cfg.channels), rng),
      cfg_(cfg) {
  const std::int64_t h = cfg.channels / 2;
  this->add_child("reduce", reduce);
  for (int k : cfg.kernel_set) {
    branches.push_back(std::make_unique<SeparableConv<T>>(h, h, k, rng));
    this->add_child("branch" + std::to_string(k), *branches.back());
  }
  this->add_child("gate_sep", gate_sep);
  this->add_child("gate_pw", gate_pw);
  this->add_child("expand", expand);
  this->add_child("agg_dw", agg_dw);
  this->add_child("mlp1", mlp1);
  this->add_child("mlp2", mlp2);
}

template <typename T>
Tensor<T> MSAU<T>::multi_scale(const Tensor<T>& x) const {
  auto r = reduce.forward(x);
  Tensor<T> acc;
  for (const auto& b : branches) {
    auto y = b->forward(r);
    acc = acc.defined() ? ops::add(acc, y) : y;
  }
  return acc;
}

template <typename T>
Tensor<T> MSAU<T>::spatial_gate(const Tensor<T>& x) const {
  auto pooled = ops::mean(x, {2});
  return ops::sigmoid(gate_pw.forward(gate_sep.forward(pooled)));
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> MSAU<T>::channel_aggregation(const Tensor<T>& x) const {
  auto f = agg_dw.forward(x);
  auto mlp = [&](const Tensor<T>& v) { return mlp2.forward(ops::relu(mlp1.forward(v))); };
  return {mlp(ops::mean(f, {2, 3})), mlp(ops::amax(f, {2, 3}))};
}

template <typename T>
Tensor<T> MSAU<T>::forward(const Tensor<T>& x) const {
  if (x.rank() != 4 || x.dim(1) != cfg_.channels) {
    throw ConfigError("MSAU expects " + std::to_string(cfg_.channels) + " channels, got input " +
                      to_string(x.shape()));
  }
  auto x2 = expand.forward(ops::mul(multi_scale(x), spatial_gate(x)));
  auto [x3, x4] = channel_aggregation(x);
  return ops::add(x, ops::mul(x2, ops::add(x3, x4)));
}

template <typename T>
std::int64_t MSAU<T>::count(const MSAUConfig& cfg) {
  cfg.validate();
  const std::int64_t c = cfg.channels, h = c / 2, r = cfg.reduced_width();
  std::int64_t n = c * h + h;
  for (int k : cfg.kernel_set) n += SeparableConv<T>::count(h, h, k);
  n += SeparableConv<T>::count(c, h, 7) + (h * h + h);
  n += h * c + c;
  n += 9 * c + c;
  n += (c * r + r) + (r * c + c);
  return n;
}

template class SeparableConv<float>;
template class SeparableConv<double>;
template class MSAU<float>;
template class MSAU<double>;

}  // namespace ecmnet::msau
