#include "ecmnet/model.hpp"

#include <algorithm>

#include "ecmnet/profiler.hpp"

namespace ecmnet::model {

namespace {

nn::ConvSpec spec(std::int64_t in, std::int64_t out, int k, int stride = 1, bool bias = false) {
  nn::ConvSpec s;
  s.in = in;
  s.out = out;
  s.kh = s.kw = k;
  s.stride = stride;
  s.bias = bias;
  return s;
}

// Long connection: depth-wise 3x3 + BN on the skip feature.
nn::ConvSpec connection_spec(std::int64_t c) {
  auto s = spec(c, c, 3);
  s.groups = static_cast<int>(c);
  return s;
}

const ModelConfig& checked(const ModelConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

void ModelConfig::validate() const {
  for (int i = 0; i < 3; ++i) {
    if (stage_channels[i] < 2 || stage_channels[i] % 2) {
      throw ConfigError("stage_channels must be even and >= 2");
    }
    if (encoder_dilations[i].empty()) throw ConfigError("each encoder stage needs at least one block");
    for (const auto* ds : {&encoder_dilations[i], &decoder_dilations[i]}) {
      for (int d : *ds) {
        if (d < 1) throw ConfigError("dilation rates must be >= 1");
      }
    }
    if (msau[i] && !connections[i]) {
      throw ConfigError("MSAU " + std::to_string(i + 1) + " requires long connection " + std::to_string(i + 1));
    }
    if (stage_channels[i] % shuffle_groups) throw ConfigError("shuffle_groups must divide every stage width");
  }
  if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
  if (input_h < 1 || input_w < 1) throw ConfigError("input size must be positive");
  ffm_config().validate();
  msau_config(0).validate();
}

std::array<int, 3> ModelConfig::blocks_per_stage() const {
  return {static_cast<int>(encoder_dilations[0].size()), static_cast<int>(encoder_dilations[1].size()),
          static_cast<int>(encoder_dilations[2].size())};
}

ffm::FFMConfig ModelConfig::ffm_config() const {
  ffm::FFMConfig f;
  f.fused_channels = stage_channels[0] + stage_channels[1] + stage_channels[2];
  f.encoder_channels = stage_channels[2];
  f.model_dim = ffm_model_dim;
  f.state_dim = ffm_state_dim;
  f.expansion = ffm_expansion;
  f.depth = ffm_depth;
  return f;
}

msau::MSAUConfig ModelConfig::msau_config(int stage) const {
  return msau::MSAUConfig{stage_channels[stage], msau_kernels, msau_reduction};
}

blocks::EDABConfig ModelConfig::edab_config(int stage, int dilation) const {
  return blocks::EDABConfig{stage_channels[stage], dilation, norm, shuffle_groups};
}

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names{"Baseline", "A1", "A2", "A3", "B1",
                                              "B2",       "B3", "C1", "C2", "C3"};
  return names;
}

ModelConfig make_variant(const std::string& name, ModelConfig base) {
  base.connections = {false, false, false};
  base.msau = {false, false, false};
  base.ffm = false;
  if (name == "Baseline") {
  } else if (name.size() == 2 && (name[0] == 'A' || name[0] == 'B') && name[1] >= '1' && name[1] <= '3') {
    const int k = name[1] - '0';
    for (int i = 0; i < k; ++i) {
      base.connections[i] = true;
      base.msau[i] = name[0] == 'B';
    }
  } else if (name == "C1") {
    base.ffm = true;
  } else if (name == "C2") {
    base.connections = {true, true, true};
    base.ffm = true;
  } else if (name == "C3") {
    base.connections = {true, true, true};
    base.msau = {true, true, true};
    base.ffm = true;
  } else {
    throw ConfigError("unknown variant '" + name + "' (expected Baseline, A1-A3, B1-B3 or C1-C3)");
  }
  base.variant = name;
  return base;
}

void check_input_size(std::int64_t h, std::int64_t w) {
  if (h < 8 || w < 8 || h % 8 || w % 8) {
    throw ConfigError("input " + std::to_string(h) + "x" + std::to_string(w) +
                      " rejected: height and width must be multiples of 8");
  }
}

std::int64_t expected_parameter_count(const ModelConfig& cfg) {
  cfg.validate();
  using Cn = nn::ConvNorm<float>;
  const auto& c = cfg.stage_channels;
  std::int64_t n = Cn::count(spec(3, c[0], 3, 2), cfg.norm);
  n += Cn::count(spec(c[0], c[1], 3, 2), cfg.norm) + Cn::count(spec(c[1], c[2], 3, 2), cfg.norm);
  for (int s = 0; s < 3; ++s) {
    for (int d : cfg.encoder_dilations[s]) n += blocks::EDAB<float>::count(cfg.edab_config(s, d));
    for (int d : cfg.decoder_dilations[s]) n += blocks::EDAB<float>::count(cfg.edab_config(s, d));
    if (cfg.connections[s]) n += Cn::count(connection_spec(c[s]), cfg.norm);
    if (cfg.msau[s]) n += msau::MSAU<float>::count(cfg.msau_config(s));
  }
  if (cfg.ffm) n += ffm::FFM<float>::count(cfg.ffm_config());
  n += Cn::count(spec(c[2], c[1], 1), cfg.norm) + Cn::count(spec(c[1], c[0], 1), cfg.norm);
  n += nn::Conv2d<float>::count(spec(c[0], cfg.num_classes, 1, 1, true));
  return n;
}

template <typename T>
void Stage<T>::append(std::unique_ptr<blocks::EDAB<T>> block) {
  blocks_.push_back(std::move(block));
  this->add_child(std::to_string(blocks_.size() - 1), *blocks_.back());
}

template <typename T>
Tensor<T> Stage<T>::forward(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    profile::Scope scope(std::to_string(i));
    y = blocks_[i]->forward(y);
  }
  return y;
}

template <typename T>
ECMNet<T>::ECMNet(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(checked(cfg)),
      rng_(seed),
      stem_(spec(3, cfg.stage_channels[0], 3, 2), true, cfg.norm, rng_),
      down2_(spec(cfg.stage_channels[0], cfg.stage_channels[1], 3, 2), true, cfg.norm, rng_),
      down3_(spec(cfg.stage_channels[1], cfg.stage_channels[2], 3, 2), true, cfg.norm, rng_),
      up3_(spec(cfg.stage_channels[2], cfg.stage_channels[1], 1), true, cfg.norm, rng_),
      up2_(spec(cfg.stage_channels[1], cfg.stage_channels[0], 1), true, cfg.norm, rng_),
      classifier_(spec(cfg.stage_channels[0], cfg.num_classes, 1, 1, true), rng_) {
  const auto& c = cfg.stage_channels;
  std::array<Stage<T>*, 3> enc{&enc1_, &enc2_, &enc3_};
  std::array<Stage<T>*, 3> dec{&dec1_, &dec2_, &dec3_};
  for (int s = 0; s < 3; ++s) {
    for (int d : cfg.encoder_dilations[s]) enc[s]->append(std::make_unique<blocks::EDAB<T>>(cfg.edab_config(s, d), rng_));
    for (int d : cfg.decoder_dilations[s]) dec[s]->append(std::make_unique<blocks::EDAB<T>>(cfg.edab_config(s, d), rng_));
    if (cfg.connections[s]) conn_[s] = std::make_unique<nn::ConvNorm<T>>(connection_spec(c[s]), false, cfg.norm, rng_);
    if (cfg.msau[s]) msau_[s] = std::make_unique<msau::MSAU<T>>(cfg.msau_config(s), rng_);
  }
  if (cfg.ffm) ffm_ = std::make_unique<ffm::FFM<T>>(cfg.ffm_config(), rng_);

  this->add_child("stem", stem_);
  this->add_child("enc1", enc1_);
  this->add_child("down2", down2_);
  this->add_child("enc2", enc2_);
  this->add_child("down3", down3_);
  this->add_child("enc3", enc3_);
  for (int s = 0; s < 3; ++s) {
    if (conn_[s]) this->add_child("conn" + std::to_string(s + 1), *conn_[s]);
    if (msau_[s]) this->add_child("msau" + std::to_string(s + 1), *msau_[s]);
  }
  if (ffm_) this->add_child("ffm", *ffm_);
  this->add_child("dec3", dec3_);
  this->add_child("up3", up3_);
  this->add_child("dec2", dec2_);
  this->add_child("up2", up2_);
  this->add_child("dec1", dec1_);
  this->add_child("classifier", classifier_);
}

template <typename T>
Tensor<T> ECMNet<T>::forward(const Tensor<T>& x) {
  if (x.rank() != 4 || x.dim(1) != 3) throw ConfigError("model expects (B,3,H,W) input, got " + to_string(x.shape()));
  const std::int64_t h = x.dim(2), w = x.dim(3);
  check_input_size(h, w);
  auto scoped = [](const char* name, auto&& fn) {
    profile::Scope scope(name);
    return fn();
  };
  std::array<Tensor<T>, 3> e;
  auto s0 = scoped("stem", [&] { return stem_.forward(x); });
  e[0] = scoped("enc1", [&] { return enc1_.forward(s0); });
  auto s1 = scoped("down2", [&] { return down2_.forward(e[0]); });
  e[1] = scoped("enc2", [&] { return enc2_.forward(s1); });
  auto s2 = scoped("down3", [&] { return down3_.forward(e[1]); });
  e[2] = scoped("enc3", [&] { return enc3_.forward(s2); });

  std::array<Tensor<T>, 3> skip = e;
  for (int s = 0; s < 3; ++s) {
    if (!msau_[s]) continue;
    profile::Scope scope("msau" + std::to_string(s + 1));
    skip[s] = msau_[s]->forward(e[s]);
  }

  Tensor<T> bottom = e[2];
  if (ffm_ && use_ffm) {
    profile::Scope scope("ffm");
    bottom = ffm_->forward(e[2], ops::avg_pool2d(skip[0], 4), ops::avg_pool2d(skip[1], 2));
  }

  auto join = [&](int s, Tensor<T> y) {
    if (!conn_[s]) return y;
    profile::Scope scope("conn" + std::to_string(s + 1));
    return ops::add(y, conn_[s]->forward(skip[s]));
  };
  auto j3 = join(2, bottom);
  auto d3 = scoped("dec3", [&] { return dec3_.forward(j3); });
  auto u3 = scoped("up3", [&] { return ops::upsample_bilinear(up3_.forward(d3), e[1].dim(2), e[1].dim(3)); });
  auto j2 = join(1, u3);
  auto d2 = scoped("dec2", [&] { return dec2_.forward(j2); });
  auto u2 = scoped("up2", [&] { return ops::upsample_bilinear(up2_.forward(d2), e[0].dim(2), e[0].dim(3)); });
  auto j1 = join(0, u2);
  auto d1 = scoped("dec1", [&] { return dec1_.forward(j1); });
  return scoped("classifier", [&] { return ops::upsample_bilinear(classifier_.forward(d1), h, w); });
}

template class Stage<float>;
template class Stage<double>;
template class ECMNet<float>;
template class ECMNet<double>;

}  // namespace ecmnet::model
