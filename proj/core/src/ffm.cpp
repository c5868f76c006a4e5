#include "ecmnet/ffm.hpp"

#include <cmath>

#include "ecmnet/profiler.hpp"
#include "ecmnet/scan.hpp"

namespace ecmnet::ffm {

namespace {

nn::ConvSpec spec(std::int64_t in, std::int64_t out, int k = 1, int groups = 1, bool bias = true) {
  nn::ConvSpec s;
  s.in = in;
  s.out = out;
  s.kh = s.kw = k;
  s.groups = groups;
  s.bias = bias;
  return s;
}

const SS2DConfig& checked(const SS2DConfig& cfg) {
  cfg.validate();
  return cfg;
}

const FFMConfig& checked(const FFMConfig& cfg) {
  cfg.validate();
  return cfg;
}

constexpr int kDirs = scan::kDirections;

}  // namespace

void SS2DConfig::validate() const {
  if (model_dim < 1 || state_dim < 1 || ssm_ratio < 1 || dt_rank < 0) {
    throw ConfigError("SS2D dimensions must be positive");
  }
}

void FFMConfig::validate() const {
  if (fused_channels < 1 || encoder_channels < 1 || model_dim < 1 || state_dim < 1 || expansion < 1 || depth < 1) {
    throw ConfigError("FFM dimensions must be positive");
  }
}

template <typename T>
SS2D<T>::SS2D(const SS2DConfig& cfg, Rng& rng)
    : in_proj(spec(checked(cfg).model_dim, 2 * cfg.inner(), 1, 1, false), rng),
      conv(spec(cfg.inner(), cfg.inner(), 3, static_cast<int>(cfg.inner())), rng),
      x_proj(spec(kDirs * cfg.inner(), kDirs * (cfg.rank() + 2 * cfg.state_dim), 1, kDirs, false), rng),
      dt_proj(spec(kDirs * cfg.rank(), kDirs * cfg.inner(), 1, kDirs), rng),
      norm(cfg.inner()),
      out_proj(spec(cfg.inner(), cfg.model_dim, 1, 1, false), rng),
      cfg_(cfg) {
  const std::int64_t di = cfg.inner(), n = cfg.state_dim, r = cfg.rank();
  // Δ bias: inverse softplus of a log-uniform step in [1e-3, 1e-1].
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& b : dt_proj.bias().data()) {
    const double dt = std::exp(unit(rng) * (std::log(0.1) - std::log(1e-3)) + std::log(1e-3));
    b = static_cast<T>(dt + std::log(-std::expm1(-dt)));
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(r));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& w : dt_proj.weight().data()) w = static_cast<T>(dist(rng));
  std::vector<T> alog(static_cast<std::size_t>(kDirs * di * n));
  for (std::size_t i = 0; i < alog.size(); ++i) alog[i] = static_cast<T>(std::log(static_cast<double>(i % n + 1)));
  a_log = this->add_parameter("A_log", Tensor<T>::from({kDirs * di, n}, std::move(alog)));
  d = this->add_parameter("D", Tensor<T>::full({kDirs * di}, T(1)));
  this->add_child("in_proj", in_proj);
  this->add_child("conv", conv);
  this->add_child("x_proj", x_proj);
  this->add_child("dt_proj", dt_proj);
  this->add_child("norm", norm);
  this->add_child("out_proj", out_proj);
}

template <typename T>
typename SS2D<T>::Projections SS2D<T>::project(const Tensor<T>& xs) const {
  const std::int64_t batch = xs.dim(0), di = cfg_.inner(), n = cfg_.state_dim, r = cfg_.rank(), l = xs.dim(3);
  auto proj = x_proj.forward(ops::reshape(xs, {batch, kDirs * di, l, 1}));
  proj = ops::reshape(proj, {batch, kDirs, r + 2 * n, l});
  auto dts = ops::narrow(proj, 2, 0, r);
  Projections p;
  p.b = ops::narrow(proj, 2, r, n);
  p.c = ops::narrow(proj, 2, r + n, n);
  auto dt = dt_proj.forward(ops::reshape(dts, {batch, kDirs * r, l, 1}));
  p.delta = ops::reshape(ops::softplus(dt), {batch, kDirs * di, l});
  return p;
}

template <typename T>
Tensor<T> SS2D<T>::forward(const Tensor<T>& x) const {
  profile::Scope scope("ss2d");
  if (x.rank() != 4 || x.dim(1) != cfg_.model_dim) {
    throw ConfigError("SS2D expects " + std::to_string(cfg_.model_dim) + " channels, got " + to_string(x.shape()));
  }
  const std::int64_t batch = x.dim(0), h = x.dim(2), w = x.dim(3), l = h * w, di = cfg_.inner();
  auto xz = in_proj.forward(x);
  auto xin = ops::silu(conv.forward(ops::narrow(xz, 1, 0, di)));
  auto z = ops::narrow(xz, 1, di, di);
  auto xs = scan::cross_scan(xin);
  auto p = project(xs);
  auto a = ops::neg(ops::exp(a_log));
  auto y = scan::selective_scan(ops::reshape(xs, {batch, kDirs * di, l}), p.delta, a, p.b, p.c, d);
  auto merged = scan::cross_merge(ops::reshape(y, {batch, kDirs, di, l}), h, w);
  return out_proj.forward(ops::mul(norm.forward(merged), ops::silu(z)));
}

template <typename T>
std::int64_t SS2D<T>::count(const SS2DConfig& cfg) {
  cfg.validate();
  const std::int64_t dm = cfg.model_dim, di = cfg.inner(), n = cfg.state_dim, r = cfg.rank();
  return dm * 2 * di              // in_proj
         + 9 * di + di            // depth-wise conv
         + kDirs * (r + 2 * n) * di  // x_proj
         + kDirs * (r * di + di)  // dt_proj
         + kDirs * di * n         // A_log
         + kDirs * di             // D
         + 2 * di                 // norm
         + di * dm;               // out_proj
}

template <typename T>
FeedForward<T>::FeedForward(std::int64_t dim, int expansion, Rng& rng)
    : norm(dim), fc1(spec(dim, expansion * dim), rng), fc2(spec(expansion * dim, dim), rng) {
  this->add_child("norm", norm);
  this->add_child("fc1", fc1);
  this->add_child("fc2", fc2);
}

template <typename T>
Tensor<T> FeedForward<T>::forward(const Tensor<T>& x) const {
  profile::Scope scope("ffn");
  return fc2.forward(ops::gelu(fc1.forward(norm.forward(x))));
}

template <typename T>
std::int64_t FeedForward<T>::count(std::int64_t dim, int expansion) {
  const std::int64_t hidden = expansion * dim;
  return 2 * dim + (dim * hidden + hidden) + (hidden * dim + dim);
}

template <typename T>
FFMLayer<T>::FFMLayer(const FFMConfig& cfg, Rng& rng) : ss2d(cfg.ss2d(), rng), ffn(cfg.model_dim, cfg.expansion, rng) {
  this->add_child("ss2d", ss2d);
  this->add_child("ffn", ffn);
}

template <typename T>
FFM<T>::FFM(const FFMConfig& cfg, Rng& rng)
    : fuse(spec(checked(cfg).fused_channels, cfg.model_dim), rng),
      project(spec(cfg.model_dim, cfg.encoder_channels, 1, 1, false), rng),
      cfg_(cfg) {
  this->add_child("fuse", fuse);
  for (int i = 0; i < cfg.depth; ++i) {
    layers.push_back(std::make_unique<FFMLayer<T>>(cfg, rng));
    this->add_child("layer" + std::to_string(i), *layers.back());
  }
  this->add_child("project", project);
}

template <typename T>
Tensor<T> FFM<T>::forward(const Tensor<T>& x_encoder, const Tensor<T>& x1, const Tensor<T>& x2) const {
  for (const auto* t : {&x1, &x2}) {
    if (t->rank() != 4 || x_encoder.rank() != 4 || t->dim(0) != x_encoder.dim(0) || t->dim(2) != x_encoder.dim(2) ||
        t->dim(3) != x_encoder.dim(3)) {
      throw ConfigError("FFM inputs must share batch and spatial size: " + to_string(x_encoder.shape()) + " vs " +
                        to_string(t->shape()));
    }
  }
  if (x_encoder.dim(1) != cfg_.encoder_channels ||
      x_encoder.dim(1) + x1.dim(1) + x2.dim(1) != cfg_.fused_channels) {
    throw ConfigError("FFM channel count mismatch: expected " + std::to_string(cfg_.fused_channels) + " fused");
  }
  auto y = fuse.forward(ops::concat<T>({x_encoder, x1, x2}, 1));
  for (const auto& layer : layers) y = layer->forward(y);
  return ops::add(project.forward(y), x_encoder);
}

template <typename T>
std::int64_t FFM<T>::count(const FFMConfig& cfg) {
  cfg.validate();
  return (cfg.fused_channels * cfg.model_dim + cfg.model_dim) +
         cfg.depth * (SS2D<T>::count(cfg.ss2d()) + FeedForward<T>::count(cfg.model_dim, cfg.expansion)) +
         cfg.model_dim * cfg.encoder_channels;
}

template class SS2D<float>;
template class SS2D<double>;
template class FeedForward<float>;
template class FeedForward<double>;
template class FFMLayer<float>;
template class FFMLayer<double>;
template class FFM<float>;
template class FFM<double>;

}  // namespace ecmnet::ffm
