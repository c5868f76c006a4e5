#include "ecmnet/train.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "ecmnet/analysis.hpp"

namespace ecmnet::train {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'E', 'C', 'M', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint64_t kAugmentStream = 0x6175676d656e7431ULL;

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian hosts");

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

Json array_manifest(const std::vector<NamedArray>& arrays, std::uint64_t& offset) {
  Json out = Json::array();
  for (const auto& a : arrays) {
    out.push_back({{"name", a.name}, {"shape", a.shape}, {"offset", offset}, {"count", a.values.size()}});
    offset += a.values.size() * sizeof(float);
  }
  return out;
}

std::vector<NamedArray> read_arrays(const Json& manifest, const std::string& blob, const fs::path& path) {
  std::vector<NamedArray> out;
  for (const auto& e : manifest) {
    NamedArray a;
    a.name = e.at("name").get<std::string>();
    a.shape = e.at("shape").get<Shape>();
    const auto offset = e.at("offset").get<std::uint64_t>();
    const auto count = e.at("count").get<std::uint64_t>();
    if (static_cast<std::uint64_t>(numel(a.shape)) != count || offset + count * sizeof(float) > blob.size()) {
      throw data::DataError("checkpoint " + path.string() + ": array '" + a.name + "' is out of bounds");
    }
    a.values.resize(count);
    std::memcpy(a.values.data(), blob.data() + offset, count * sizeof(float));
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<NamedArray> to_arrays(const nn::Named<float>& named, const std::string& prefix = {}) {
  std::vector<NamedArray> out;
  for (const auto& [name, t] : named) out.push_back({prefix + name, t.shape(), {t.data().begin(), t.data().end()}});
  return out;
}

std::vector<std::int32_t> argmax_channels(const Tensor<float>& logits) {
  const auto b = logits.dim(0), k = logits.dim(1), hw = logits.dim(2) * logits.dim(3);
  std::vector<std::int32_t> out(static_cast<std::size_t>(b * hw));
  const auto d = logits.data();
  for (std::int64_t n = 0; n < b; ++n) {
    for (std::int64_t i = 0; i < hw; ++i) {
      std::int32_t best = 0;
      float best_v = d[static_cast<std::size_t>(n * k * hw + i)];
      for (std::int64_t c = 1; c < k; ++c) {
        const float v = d[static_cast<std::size_t>((n * k + c) * hw + i)];
        if (v > best_v) {
          best_v = v;
          best = static_cast<std::int32_t>(c);
        }
      }
      out[static_cast<std::size_t>(n * hw + i)] = best;
    }
  }
  return out;
}

void write_line(const fs::path& file, const Json& record) {
  std::ofstream out(file, std::ios::app);
  out << record.dump() << "\n";
}

}  // namespace

TrainingDiverged::TrainingDiverged(int it, double lr_, double norm, double loss_)
    : NumericalError("training diverged at iteration " + std::to_string(it) + ": loss " + fmt(loss_) + ", lr " +
                     fmt(lr_) + ", grad-norm " + fmt(norm)),
      iteration(it),
      lr(lr_),
      grad_norm(norm),
      loss(loss_) {}

template <typename T>
Tensor<T> segmentation_loss(const Tensor<T>& logits, const std::vector<std::int32_t>& labels,
                            const std::vector<T>* class_weights, bool* all_ignored) {
  if (logits.rank() != 4) throw ConfigError("loss expects logits (B,K,H,W), got " + to_string(logits.shape()));
  const auto k = logits.dim(1);
  for (auto l : labels) {
    if (l != data::kIgnoreIndex && (l < 0 || l >= k)) {
      throw ConfigError("label " + std::to_string(l) + " outside [0," + std::to_string(k) + ") and not 255");
    }
  }
  return ops::cross_entropy<T>(logits, labels, data::kIgnoreIndex, class_weights, all_ignored);
}

template Tensor<float> segmentation_loss(const Tensor<float>&, const std::vector<std::int32_t>&,
                                         const std::vector<float>*, bool*);
template Tensor<double> segmentation_loss(const Tensor<double>&, const std::vector<std::int32_t>&,
                                          const std::vector<double>*, bool*);

double poly_lr(double base, int iter, int max_iters, double power) {
  if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
  const double frac = std::clamp(static_cast<double>(iter) / max_iters, 0.0, 1.0);
  return base * std::pow(1.0 - frac, power);
}

std::vector<float> median_frequency_weights(const std::vector<double>& freq) {
  std::vector<double> present;
  for (double f : freq)
    if (f > 0) present.push_back(f);
  std::vector<float> w(freq.size(), 1.0f);
  if (present.empty()) return w;
  const double med = median(present);
  for (std::size_t c = 0; c < freq.size(); ++c)
    if (freq[c] > 0) w[c] = static_cast<float>(med / freq[c]);
  return w;
}

Optimizer::Optimizer(const config::TrainConfig& cfg, nn::Named<float> params) : cfg_(cfg), params_(std::move(params)) {
  if (cfg_.optimizer != "adamw" && cfg_.optimizer != "sgd") throw ConfigError("unknown optimizer " + cfg_.optimizer);
  for (const auto& [_, p] : params_) {
    m_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0f);
    if (cfg_.optimizer == "adamw") v_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0f);
  }
}

void Optimizer::step(double lr) {
  ++steps_;
  const float lr_f = static_cast<float>(lr);
  const float wd = static_cast<float>(cfg_.weight_decay);
  const bool adam = cfg_.optimizer == "adamw";
  const float b1 = static_cast<float>(cfg_.beta1), b2 = static_cast<float>(cfg_.beta2);
  const float eps = static_cast<float>(cfg_.eps), mom = static_cast<float>(cfg_.momentum);
  const float c1 = static_cast<float>(1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_)));
  const float c2 = static_cast<float>(1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_)));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k].second;
    if (!p.has_grad()) continue;
    const bool decay = p.rank() >= 2;
    auto w = p.data();
    const auto g = std::as_const(p).grad();
    auto& m = m_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (adam) {
        auto& v = v_[k];
        m[i] = b1 * m[i] + (1 - b1) * g[i];
        v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
        const float update = (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        w[i] -= lr_f * (update + (decay ? wd * w[i] : 0.0f));
      } else {
        m[i] = mom * m[i] + g[i] + (decay ? wd * w[i] : 0.0f);
        w[i] -= lr_f * m[i];
      }
    }
  }
}

std::vector<NamedArray> Optimizer::state() const {
  std::vector<NamedArray> out;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const auto& [name, p] = params_[k];
    out.push_back({"m." + name, p.shape(), m_[k]});
    if (!v_.empty()) out.push_back({"v." + name, p.shape(), v_[k]});
  }
  return out;
}

void Optimizer::load_state(std::int64_t steps, const std::vector<NamedArray>& state) {
  const auto want = this->state();
  if (state.size() != want.size()) throw ConfigError("optimizer state does not match the model parameters");
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (state[i].name != want[i].name || state[i].values.size() != want[i].values.size()) {
      throw ConfigError("optimizer state entry '" + state[i].name + "' does not match '" + want[i].name + "'");
    }
  }
  for (std::size_t k = 0, i = 0; k < params_.size(); ++k) {
    m_[k] = state[i++].values;
    if (!v_.empty()) v_[k] = state[i++].values;
  }
  steps_ = steps;
}

double grad_norm(const nn::Named<float>& params) {
  double s = 0;
  for (const auto& [_, p] : params) {
    if (!p.has_grad()) continue;
    for (float g : p.grad()) s += static_cast<double>(g) * g;
  }
  return std::sqrt(s);
}

void save_checkpoint(const Checkpoint& c, const fs::path& path) {
  std::uint64_t offset = 0;
  Json header{{"kind", c.kind},
              {"iteration", c.iteration},
              {"config_hash", c.config_hash},
              {"model_hash", c.model_hash},
              {"config", c.config},
              {"metrics", c.metrics},
              {"optimizer", c.optimizer},
              {"optimizer_steps", c.optimizer_steps}};
  header["weights"] = array_manifest(c.weights, offset);
  header["optimizer_state"] = array_manifest(c.optimizer_state, offset);
  const std::string text = header.dump();

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof kMagic);
    const std::uint64_t n = text.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(text.data(), static_cast<std::streamsize>(n));
    for (const auto* group : {&c.weights, &c.optimizer_state})
      for (const auto& a : *group)
        out.write(reinterpret_cast<const char*>(a.values.data()),
                  static_cast<std::streamsize>(a.values.size() * sizeof(float)));
    if (!out) throw ConfigError("failed writing checkpoint " + path.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("checkpoint not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  char magic[sizeof kMagic];
  std::uint64_t n = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw data::DataError("not an ecmnet checkpoint: " + path.string());
  }
  std::string text(n, '\0');
  in.read(text.data(), static_cast<std::streamsize>(n));
  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Json h = Json::parse(text, nullptr, false);
  if (h.is_discarded()) throw data::DataError("corrupt checkpoint header in " + path.string());
  Checkpoint c;
  try {
    c.kind = h.at("kind").get<std::string>();
    c.iteration = h.at("iteration").get<int>();
    c.config_hash = h.at("config_hash").get<std::string>();
    c.model_hash = h.at("model_hash").get<std::string>();
    c.config = h.at("config");
    c.metrics = h.at("metrics");
    c.optimizer = h.at("optimizer").get<std::string>();
    c.optimizer_steps = h.at("optimizer_steps").get<std::int64_t>();
    c.weights = read_arrays(h.at("weights"), blob, path);
    c.optimizer_state = read_arrays(h.at("optimizer_state"), blob, path);
  } catch (const nlohmann::json::exception& e) {
    throw data::DataError("corrupt checkpoint header in " + path.string() + ": " + e.what());
  }
  return c;
}

Checkpoint snapshot(const model::ECMNet<float>& net, const RunConfig& cfg, int iteration, const Optimizer* opt,
                    Json metrics) {
  Checkpoint c;
  c.config = config::to_json(cfg);
  c.config_hash = config::hex(config::config_hash(cfg));
  c.model_hash = config::hex(config::model_hash(cfg.model));
  c.iteration = iteration;
  c.metrics = std::move(metrics);
  c.weights = to_arrays(net.named_parameters(), "param.");
  for (auto& b : to_arrays(net.named_buffers(), "buffer.")) c.weights.push_back(std::move(b));
  if (opt) {
    c.optimizer = cfg.train.optimizer;
    c.optimizer_steps = opt->steps();
    c.optimizer_state = opt->state();
  }
  return c;
}

void restore_weights(model::ECMNet<float>& net, const Checkpoint& c) {
  if (c.kind != "ecmnet") throw ConfigError("checkpoint of kind '" + c.kind + "' holds no model weights");
  std::map<std::string, const NamedArray*> by_name;
  for (const auto& a : c.weights) by_name[a.name] = &a;
  std::size_t used = 0;
  auto fill = [&](const nn::Named<float>& named, const std::string& prefix) {
    for (auto [name, t] : named) {
      auto it = by_name.find(prefix + name);
      if (it == by_name.end()) throw ConfigError("checkpoint lacks '" + prefix + name + "'");
      if (it->second->shape != t.shape()) {
        throw ConfigError("checkpoint array '" + prefix + name + "' has shape " + to_string(it->second->shape) +
                          ", model expects " + to_string(t.shape()));
      }
      std::copy(it->second->values.begin(), it->second->values.end(), t.data().begin());
      ++used;
    }
  };
  fill(net.named_parameters(), "param.");
  fill(net.named_buffers(), "buffer.");
  if (used != c.weights.size()) throw ConfigError("checkpoint holds arrays the model does not have");
}

Checkpoint label_oracle_checkpoint(const RunConfig& cfg) {
  Checkpoint c;
  c.kind = "label_oracle";
  c.config = config::to_json(cfg);
  c.config_hash = config::hex(config::config_hash(cfg));
  c.model_hash = config::hex(config::model_hash(cfg.model));
  return c;
}

DataSource::DataSource(const config::DataConfig& cfg) : cfg_(cfg) {
  if (cfg_.dataset == "synthetic") {
    num_classes_ = cfg_.num_classes;
    class_names_ = data::synth_class_names(num_classes_);
    return;
  }
  const fs::path root = cfg_.root;
  train_set_.emplace(data::make_spec(cfg_.dataset, cfg_.train_split, root));
  val_set_.emplace(data::make_spec(cfg_.dataset, cfg_.val_split, root));
  num_classes_ = train_set_->spec().num_classes;
  class_names_ = train_set_->spec().class_names;
  if (train_set_->size() == 0) throw data::DataError("no training images under " + train_set_->spec().root.string());
}

data::SegSample DataSource::train_sample(std::int64_t index, std::uint64_t seed) const {
  data::SegSample s;
  if (!train_set_) {
    s = data::synth_sample(seed, index, cfg_.height, cfg_.width, num_classes_, cfg_.synth);
    if (cfg_.paint_labels) s = data::paint_labels(s);
  } else {
    // Epoch-wise permutation derived from (seed, epoch).
    const auto n = static_cast<std::int64_t>(train_set_->size());
    const auto epoch = static_cast<std::uint64_t>(index / n);
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(data::mix_seed(seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    s = train_set_->load(order[static_cast<std::size_t>(index % n)]);
  }
  s = data::augment(s, cfg_.augment, data::mix_seed(seed ^ kAugmentStream, static_cast<std::uint64_t>(index)));
  return data::pad_to_multiple(s, 8);
}

data::Batch DataSource::train_batch(int iteration, int batch_size, std::uint64_t seed) const {
  std::vector<data::SegSample> samples;
  for (int j = 0; j < batch_size; ++j)
    samples.push_back(train_sample(static_cast<std::int64_t>(iteration) * batch_size + j, seed));
  return data::collate(samples);
}

std::size_t DataSource::val_size() const {
  if (!val_set_) return static_cast<std::size_t>(cfg_.val_samples);
  const auto n = val_set_->size();
  return cfg_.val_samples > 0 ? std::min(n, static_cast<std::size_t>(cfg_.val_samples)) : n;
}

data::SegSample DataSource::val_sample(std::size_t index) const {
  if (index >= val_size()) throw std::out_of_range("validation sample " + std::to_string(index));
  if (!val_set_) {
    auto s = data::synth_sample(cfg_.val_seed, static_cast<std::int64_t>(index), cfg_.height, cfg_.width, num_classes_,
                                cfg_.synth);
    return cfg_.paint_labels ? data::paint_labels(s) : s;
  }
  return val_set_->load(index);
}

std::vector<double> DataSource::class_frequencies() const {
  if (!train_set_) return data::synth_class_priors(cfg_.height, cfg_.width, num_classes_, cfg_.synth);
  std::vector<double> count(static_cast<std::size_t>(num_classes_), 0.0);
  double total = 0;
  const auto n = std::min<std::size_t>(train_set_->size(), 50);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto l : train_set_->load(i).label) {
      if (l == data::kIgnoreIndex) continue;
      count[static_cast<std::size_t>(l)] += 1;
      total += 1;
    }
  }
  for (auto& c : count) c = total > 0 ? c / total : 0.0;
  return count;
}

Predictor model_predictor(model::ECMNet<float>& net) {
  return [&net](const Tensor<float>& images) {
    const bool was_training = net.is_training();
    net.eval();
    NoGradGuard ng;
    auto out = argmax_channels(net.forward(images));
    net.train(was_training);
    return out;
  };
}

Predictor label_oracle_predictor(int num_classes) {
  if (num_classes < 2 || num_classes > data::kMaxSynthClasses) {
    throw ConfigError("the label oracle needs synthetic classes in [2, 11]");
  }
  return [num_classes](const Tensor<float>& images) {
    const auto b = images.dim(0), hw = images.dim(2) * images.dim(3);
    const auto d = images.data();
    std::vector<std::int32_t> out(static_cast<std::size_t>(b * hw));
    for (std::int64_t n = 0; n < b; ++n) {
      for (std::int64_t i = 0; i < hw; ++i) {
        double best = 1e30;
        for (int c = 0; c < num_classes; ++c) {
          const auto col = data::class_color(c);
          double dist = 0;
          for (std::int64_t ch = 0; ch < 3; ++ch) {
            const double diff = d[static_cast<std::size_t>((n * 3 + ch) * hw + i)] - col[static_cast<std::size_t>(ch)];
            dist += diff * diff;
          }
          if (dist < best) {
            best = dist;
            out[static_cast<std::size_t>(n * hw + i)] = c;
          }
        }
      }
    }
    return out;
  };
}

metrics::ConfusionMatrix evaluate(const Predictor& predict, const DataSource& src, int batch_size) {
  metrics::ConfusionMatrix cm(src.num_classes());
  std::vector<data::SegSample> pending;
  auto flush = [&] {
    if (pending.empty()) return;
    auto batch = data::collate(pending);
    cm.accumulate(predict(batch.images), batch.labels);
    pending.clear();
  };
  for (std::size_t i = 0; i < src.val_size(); ++i) {
    auto s = data::pad_to_multiple(src.val_sample(i), 8);
    if (!pending.empty() && (s.height != pending.front().height || s.width != pending.front().width)) flush();
    pending.push_back(std::move(s));
    if (static_cast<int>(pending.size()) >= batch_size) flush();
  }
  flush();
  return cm;
}

TrainResult train_loop(model::ECMNet<float>& net, const DataSource& src, const RunConfig& cfg,
                       const TrainOptions& opts) {
  cfg.validate();
  if (net.config().num_classes != src.num_classes()) throw ConfigError("model and data class counts differ");
  const auto& t = cfg.train;
  const auto start_time = std::chrono::steady_clock::now();
  auto params = net.named_parameters();
  Optimizer opt(t, params);
  TrainResult result;

  int start = 0;
  std::optional<double> best;
  if (opts.resume) {
    const auto ckpt = load_checkpoint(*opts.resume);
    const auto want = config::hex(config::config_hash(cfg));
    if (ckpt.config_hash != want) {
      throw ConfigError("checkpoint " + opts.resume->string() + " was written under config " + ckpt.config_hash +
                        ", current config is " + want);
    }
    restore_weights(net, ckpt);
    opt.load_state(ckpt.optimizer_steps, ckpt.optimizer_state);
    start = ckpt.iteration;
    if (ckpt.metrics.contains("best_miou")) best = ckpt.metrics["best_miou"].get<double>();
  }

  std::vector<float> weights;
  if (t.class_weighting) weights = median_frequency_weights(src.class_frequencies());

  const bool write = !opts.out_dir.empty();
  const fs::path ckpt_dir = opts.out_dir / "checkpoints";
  const fs::path history_file = opts.out_dir / "history.jsonl";
  if (write) fs::create_directories(ckpt_dir);

  auto record = [&](Json r) {
    if (write) write_line(history_file, r);
    if (opts.log) *opts.log << r.dump() << "\n" << std::flush;
    result.history.push_back(std::move(r));
  };
  auto metrics_json = [&](std::optional<double> last) {
    Json m = Json::object();
    if (best) m["best_miou"] = *best;
    if (last) m["val_miou"] = *last;
    return m;
  };
  auto validate_now = [&](int iteration) {
    if (src.val_size() == 0) return;
    const auto cm = evaluate(model_predictor(net), src, t.batch_size);
    const auto miou = metrics::mean_iou(cm).value_or(0.0);
    result.final_miou = miou;
    record(Json{{"type", "val"}, {"iter", iteration}, {"miou", miou}});
    if (!best || miou > *best) {
      best = miou;
      if (write) save_checkpoint(snapshot(net, cfg, iteration, &opt, metrics_json(miou)), ckpt_dir / "best.ckpt");
    }
  };

  net.train();
  const int stop = opts.stop_after > 0 ? std::min(opts.stop_after, t.max_iters) : t.max_iters;
  int it = start;
  for (; it < stop; ++it) {
    const double lr = poly_lr(t.lr, it, t.max_iters, t.poly_power);
    auto batch = src.train_batch(it, t.batch_size, t.seed);
    net.zero_grad();
    bool all_ignored = false;
    auto loss = segmentation_loss(net.forward(batch.images), batch.labels, weights.empty() ? nullptr : &weights,
                                  &all_ignored);
    const double loss_v = loss.item();
    double norm = 0;
    if (!all_ignored) {
      loss.backward();
      norm = grad_norm(params);
    }
    if (!std::isfinite(loss_v) || !std::isfinite(norm)) throw TrainingDiverged(it, lr, norm, loss_v);
    if (!all_ignored) opt.step(lr);

    const int done = it + 1;
    if (t.log_every > 0 && (done % t.log_every == 0 || done == t.max_iters)) {
      Json r{{"type", "train"}, {"iter", done}, {"loss", loss_v}, {"lr", lr}, {"grad_norm", norm}};
      if (all_ignored) r["all_ignored"] = true;
      record(std::move(r));
    }
    if ((t.eval_every > 0 && done % t.eval_every == 0) || done == t.max_iters) validate_now(done);
    if (write && t.checkpoint_every > 0 && done % t.checkpoint_every == 0) {
      std::ostringstream name;
      name << "iter_" << std::setw(6) << std::setfill('0') << done << ".ckpt";
      save_checkpoint(snapshot(net, cfg, done, &opt, metrics_json(result.final_miou)), ckpt_dir / name.str());
    }
  }
  result.iterations = it;
  result.best_miou = best;
  if (write) save_checkpoint(snapshot(net, cfg, it, &opt, metrics_json(result.final_miou)), ckpt_dir / "last.ckpt");
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return result;
}

double median(std::vector<double> v) {
  if (v.empty()) throw ConfigError("median of an empty list");
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

AblationReport run_ablation_suite(const std::vector<std::string>& variants, const std::vector<std::uint64_t>& seeds,
                                  const RunConfig& base, const TrainOptions& opts) {
  if (variants.empty()) throw ConfigError("ablation needs at least one variant");
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
  AblationReport report;
  report.flop_h = base.model.input_h;
  report.flop_w = base.model.input_w;
  DataSource src(base.data);
  for (const auto& name : variants) {
    RunConfig cfg = base;
    cfg.model = model::make_variant(name, base.model);
    AblationRow row;
    row.variant = name;
    row.connections = cfg.model.connections;
    row.msau = cfg.model.msau;
    row.ffm = cfg.model.ffm;
    const auto budget = analysis::analyze(cfg.model, report.flop_h, report.flop_w, 1, 0);
    row.params = budget.total_params;
    row.flops = budget.flops();
    for (auto seed : seeds) {
      cfg.train.seed = seed;
      model::ECMNet<float> net(cfg.model, seed);
      TrainOptions run = opts;
      if (!opts.out_dir.empty()) run.out_dir = opts.out_dir / (name + "_seed" + std::to_string(seed));
      run.resume.reset();
      const auto r = train_loop(net, src, cfg, run);
      row.miou.push_back(r.final_miou.value_or(0.0));
      if (opts.log) {
        *opts.log << "ablation " << name << " seed " << seed << " miou " << fmt(row.miou.back(), 4) << " ("
                  << fmt(r.seconds, 3) << " s)\n";
      }
    }
    row.median_miou = median(row.miou);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string AblationReport::to_text() const {
  std::ostringstream os;
  os << "# ecmnet ablation v1 (FLOPs at " << flop_h << "x" << flop_w << ", MAC = 1)\n";
  os << "variant\tconn1\tconn2\tconn3\tmsau1\tmsau2\tmsau3\tffm\tparams\tflops\tmiou_median\tmiou_per_seed\n";
  auto mark = [](bool b) { return b ? "x" : "-"; };
  for (const auto& r : rows) {
    os << r.variant;
    for (bool b : r.connections) os << "\t" << mark(b);
    for (bool b : r.msau) os << "\t" << mark(b);
    os << "\t" << mark(r.ffm) << "\t" << r.params << "\t" << r.flops << "\t" << std::fixed << std::setprecision(2)
       << 100.0 * r.median_miou << "\t";
    for (std::size_t i = 0; i < r.miou.size(); ++i) os << (i ? "," : "") << 100.0 * r.miou[i];
    os << std::defaultfloat << "\n";
  }
  return os.str();
}

Json AblationReport::to_json() const {
  Json rows_json = Json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"variant", r.variant},
                         {"connections", r.connections},
                         {"msau", r.msau},
                         {"ffm", r.ffm},
                         {"params", r.params},
                         {"flops", r.flops},
                         {"miou", r.miou},
                         {"median_miou", r.median_miou}});
  }
  return Json{{"flop_h", flop_h}, {"flop_w", flop_w}, {"rows", rows_json}};
}

}  // namespace ecmnet::train
