#include "ecmnet/config.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace ecmnet::config {

namespace {

// Reads fields out of one JSON object and rejects any key left unread.
class Section {
 public:
  Section(const Json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
  }

  template <typename V>
  void get(const char* key, V& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<V>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config key '" + name_ + "." + key + "' has the wrong type: " + it->dump());
    }
  }

  const Json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [k, _] : j_.items())
      if (!seen_.contains(k)) throw ConfigError("unknown config key '" + (name_.empty() ? k : name_ + "." + k) + "'");
  }

 private:
  const Json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

std::string norm_name(nn::NormKind k) { return k == nn::NormKind::batch ? "batch" : "identity"; }

Json augment_json(const data::AugmentPolicy& a) {
  return Json{{"flip_prob", a.flip_prob},
              {"crop_h", a.crop_h},
              {"crop_w", a.crop_w},
              {"scale_min", a.scale_min},
              {"scale_max", a.scale_max}};
}

}  // namespace

Json to_json(const model::ModelConfig& m) {
  return Json{{"variant", m.variant},
              {"num_classes", m.num_classes},
              {"input_h", m.input_h},
              {"input_w", m.input_w},
              {"stage_channels", m.stage_channels},
              {"encoder_dilations", m.encoder_dilations},
              {"decoder_dilations", m.decoder_dilations},
              {"shuffle_groups", m.shuffle_groups},
              {"norm", norm_name(m.norm)},
              {"msau_kernels", m.msau_kernels},
              {"msau_reduction", m.msau_reduction},
              {"ffm_model_dim", m.ffm_model_dim},
              {"ffm_state_dim", m.ffm_state_dim},
              {"ffm_expansion", m.ffm_expansion},
              {"ffm_depth", m.ffm_depth}};
}

Json to_json(const RunConfig& c) {
  const auto& d = c.data;
  const auto& t = c.train;
  return Json{{"schema_version", c.schema_version},
              {"model", to_json(c.model)},
              {"data",
               {{"dataset", d.dataset},
                {"root", d.root},
                {"height", d.height},
                {"width", d.width},
                {"num_classes", d.num_classes},
                {"synth_cell", d.synth.cell},
                {"synth_empty_prob", d.synth.empty_prob},
                {"paint_labels", d.paint_labels},
                {"val_seed", d.val_seed},
                {"val_samples", d.val_samples},
                {"train_split", d.train_split},
                {"val_split", d.val_split},
                {"augment", augment_json(d.augment)}}},
              {"train",
               {{"optimizer", t.optimizer},
                {"lr", t.lr},
                {"weight_decay", t.weight_decay},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"eps", t.eps},
                {"momentum", t.momentum},
                {"poly_power", t.poly_power},
                {"max_iters", t.max_iters},
                {"batch_size", t.batch_size},
                {"seed", t.seed},
                {"class_weighting", t.class_weighting},
                {"checkpoint_every", t.checkpoint_every},
                {"eval_every", t.eval_every},
                {"log_every", t.log_every}}}};
}

model::ModelConfig model_from_json(const Json& j) {
  model::ModelConfig m;
  Section s(j, "model");
  std::string variant = m.variant, norm = norm_name(m.norm);
  s.get("variant", variant);
  s.get("num_classes", m.num_classes);
  s.get("input_h", m.input_h);
  s.get("input_w", m.input_w);
  s.get("stage_channels", m.stage_channels);
  s.get("encoder_dilations", m.encoder_dilations);
  s.get("decoder_dilations", m.decoder_dilations);
  s.get("shuffle_groups", m.shuffle_groups);
  s.get("norm", norm);
  s.get("msau_kernels", m.msau_kernels);
  s.get("msau_reduction", m.msau_reduction);
  s.get("ffm_model_dim", m.ffm_model_dim);
  s.get("ffm_state_dim", m.ffm_state_dim);
  s.get("ffm_expansion", m.ffm_expansion);
  s.get("ffm_depth", m.ffm_depth);
  s.finish();
  if (norm == "batch") {
    m.norm = nn::NormKind::batch;
  } else if (norm == "identity") {
    m.norm = nn::NormKind::identity;
  } else {
    throw ConfigError("model.norm must be batch or identity, got '" + norm + "'");
  }
  m = model::make_variant(variant, m);
  m.validate();
  return m;
}

RunConfig from_json(const Json& j) {
  RunConfig c;
  Section top(j, "");
  top.get("schema_version", c.schema_version);
  if (c.schema_version != kSchemaVersion) {
    throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version) + " (expected " +
                      std::to_string(kSchemaVersion) + ")");
  }
  if (const auto* m = top.child("model")) c.model = model_from_json(*m);
  if (const auto* dj = top.child("data")) {
    auto& d = c.data;
    Section s(*dj, "data");
    s.get("dataset", d.dataset);
    s.get("root", d.root);
    s.get("height", d.height);
    s.get("width", d.width);
    s.get("num_classes", d.num_classes);
    s.get("synth_cell", d.synth.cell);
    s.get("synth_empty_prob", d.synth.empty_prob);
    s.get("paint_labels", d.paint_labels);
    s.get("val_seed", d.val_seed);
    s.get("val_samples", d.val_samples);
    s.get("train_split", d.train_split);
    s.get("val_split", d.val_split);
    if (const auto* aj = s.child("augment")) {
      Section a(*aj, "data.augment");
      a.get("flip_prob", d.augment.flip_prob);
      a.get("crop_h", d.augment.crop_h);
      a.get("crop_w", d.augment.crop_w);
      a.get("scale_min", d.augment.scale_min);
      a.get("scale_max", d.augment.scale_max);
      a.finish();
    }
    s.finish();
  }
  if (const auto* tj = top.child("train")) {
    auto& t = c.train;
    Section s(*tj, "train");
    s.get("optimizer", t.optimizer);
    s.get("lr", t.lr);
    s.get("weight_decay", t.weight_decay);
    s.get("beta1", t.beta1);
    s.get("beta2", t.beta2);
    s.get("eps", t.eps);
    s.get("momentum", t.momentum);
    s.get("poly_power", t.poly_power);
    s.get("max_iters", t.max_iters);
    s.get("batch_size", t.batch_size);
    s.get("seed", t.seed);
    s.get("class_weighting", t.class_weighting);
    s.get("checkpoint_every", t.checkpoint_every);
    s.get("eval_every", t.eval_every);
    s.get("log_every", t.log_every);
    s.finish();
  }
  top.finish();
  c.validate();
  return c;
}

void RunConfig::validate() const {
  model.validate();
  const auto& d = data;
  if (d.dataset == "synthetic") {
    if (d.num_classes < 2 || d.num_classes > data::kMaxSynthClasses) {
      throw ConfigError("data.num_classes must be in [2, 11] for synthetic data");
    }
    model::check_input_size(d.height, d.width);
    if (d.synth.cell < 4 || d.height < d.synth.cell || d.width < d.synth.cell) {
      throw ConfigError("data.synth_cell must be >= 4 and fit in the image");
    }
    if (d.synth.empty_prob < 0 || d.synth.empty_prob > 1) throw ConfigError("data.synth_empty_prob must be in [0,1]");
  } else if (d.dataset != "cityscapes" && d.dataset != "camvid") {
    throw ConfigError("data.dataset must be synthetic, cityscapes or camvid, got '" + d.dataset + "'");
  }
  const int k = d.dataset == "synthetic" ? d.num_classes : (d.dataset == "cityscapes" ? 19 : 11);
  if (model.num_classes != k) {
    throw ConfigError("model.num_classes is " + std::to_string(model.num_classes) + " but the " + d.dataset +
                      " data has " + std::to_string(k) + " classes");
  }
  if (d.val_samples < 0) throw ConfigError("data.val_samples must be >= 0");
  if (d.augment.flip_prob < 0 || d.augment.flip_prob > 1) throw ConfigError("data.augment.flip_prob must be in [0,1]");
  if (d.augment.crop_h < 0 || d.augment.crop_w < 0) throw ConfigError("data.augment crop sizes must be >= 0");
  if (d.augment.crop_h % 8 || d.augment.crop_w % 8) throw ConfigError("data.augment crop sizes must be multiples of 8");
  if (d.augment.scale_min <= 0 || d.augment.scale_max < d.augment.scale_min) {
    throw ConfigError("data.augment scale range must satisfy 0 < scale_min <= scale_max");
  }
  const auto& t = train;
  if (t.optimizer != "adamw" && t.optimizer != "sgd") {
    throw ConfigError("train.optimizer must be adamw or sgd, got '" + t.optimizer + "'");
  }
  if (!(t.lr > 0)) throw ConfigError("train.lr must be > 0");
  if (t.weight_decay < 0) throw ConfigError("train.weight_decay must be >= 0");
  if (t.max_iters < 1) throw ConfigError("train.max_iters must be >= 1");
  if (t.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (t.poly_power < 0) throw ConfigError("train.poly_power must be >= 0");
  if (t.checkpoint_every < 0 || t.eval_every < 0 || t.log_every < 0) {
    throw ConfigError("train cadences must be >= 0");
  }
}

RunConfig defaults_for(const std::string& dataset) {
  RunConfig c;
  c.data.dataset = dataset;
  if (dataset == "synthetic") {
    c.model.num_classes = c.data.num_classes;
    c.model.input_h = c.data.height;
    c.model.input_w = c.data.width;
    c.data.augment = data::AugmentPolicy{0.5, 0, 0, 1.0, 1.0};
  } else if (dataset == "cityscapes") {
    c.model.num_classes = 19;
    c.data.augment = data::AugmentPolicy::cityscapes();
  } else if (dataset == "camvid") {
    c.model.num_classes = 11;
    c.model.input_h = 360;
    c.model.input_w = 480;
    c.data.augment = data::AugmentPolicy::camvid();
  } else {
    throw ConfigError("unknown dataset '" + dataset + "'");
  }
  return c;
}

void apply_override(Json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const auto key = assignment.substr(0, eq);
  const auto text = assignment.substr(eq + 1);
  Json* node = &j;
  std::istringstream path(key);
  std::string part;
  while (std::getline(path, part, '.')) {
    if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown config key '" + key + "'");
    node = &(*node)[part];
  }
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  // Integral fields accept integral text only; strings stay strings.
  if (node->is_string() && !value.is_string()) value = text;
  *node = std::move(value);
}

RunConfig resolve(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  Json j;
  if (path.empty()) {
    // The dataset choice picks the other defaults, so apply it first.
    std::string dataset = "synthetic";
    for (const auto& o : overrides)
      if (o.rfind("data.dataset=", 0) == 0) dataset = o.substr(13);
    j = to_json(defaults_for(dataset));
  } else {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    j = Json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file " + path.string() + " is not valid JSON");
    if (!j.is_object()) throw ConfigError("config file " + path.string() + " must hold a JSON object");
    // Fill defaults so every key is overridable; unknown file keys survive
    // the merge and are rejected below.
    std::string dataset = "synthetic";
    if (auto d = j.find("data"); d != j.end() && d->is_object() && d->contains("dataset") && (*d)["dataset"].is_string())
      dataset = (*d)["dataset"].get<std::string>();
    auto base = to_json(defaults_for(dataset));
    base.merge_patch(j);
    j = std::move(base);
  }
  for (const auto& o : overrides) apply_override(j, o);
  return from_json(j);
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::uint64_t config_hash(const RunConfig& cfg) { return fnv1a(to_json(cfg).dump()); }

std::uint64_t model_hash(const model::ModelConfig& cfg) { return fnv1a(to_json(cfg).dump()); }

}  // namespace ecmnet::config
