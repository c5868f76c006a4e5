#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ecmnet/data.hpp"
#include "ecmnet/model.hpp"
#include "json.hpp"

namespace ecmnet::config {

using Json = nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

struct DataConfig {
  std::string dataset = "synthetic";
  std::string root;  // empty: $ECMNET_DATA_ROOT/<dataset>
  std::int64_t height = 64, width = 64;  // synthetic sample size
  int num_classes = 3;                   // synthetic only
  data::SynthConfig synth;
  bool paint_labels = false;  // synthetic images painted in flat class colours
  std::uint64_t val_seed = 1000003;
  int val_samples = 64;
  std::string train_split = "train", val_split = "val";
  data::AugmentPolicy augment = data::AugmentPolicy::none();
};

struct TrainConfig {
  std::string optimizer = "adamw";  // adamw or sgd
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double momentum = 0.9;
  double poly_power = 0.9;
  int max_iters = 2000;
  int batch_size = 8;
  std::uint64_t seed = 0;
  bool class_weighting = false;
  int checkpoint_every = 0;  // 0: only the final and best checkpoints
  int eval_every = 100;
  int log_every = 10;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  model::ModelConfig model;
  DataConfig data;
  TrainConfig train;

  /// Cross-section checks: class counts agree, positive sizes and rates.
  void validate() const;
};

/// Model settings for the chosen dataset: class count and input geometry.
RunConfig defaults_for(const std::string& dataset);

Json to_json(const RunConfig& cfg);
Json to_json(const model::ModelConfig& cfg);
/// Missing keys keep their defaults; unknown keys, wrong types and a wrong
/// schema version throw ConfigError.
RunConfig from_json(const Json& j);
model::ModelConfig model_from_json(const Json& j);

/// Applies "section.key=value". The value is parsed as JSON when possible,
/// otherwise taken as a string. The key must already exist in `j`.
void apply_override(Json& j, const std::string& assignment);

/// Reads a config file (or defaults when `path` is empty) and applies the
/// overrides in order.
RunConfig resolve(const std::filesystem::path& path, const std::vector<std::string>& overrides);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex(std::uint64_t v);
/// Hash of the whole resolved config; fixes a training trajectory.
std::uint64_t config_hash(const RunConfig& cfg);
/// Hash of the architecture alone; fixes the weight layout.
std::uint64_t model_hash(const model::ModelConfig& cfg);

}  // namespace ecmnet::config
