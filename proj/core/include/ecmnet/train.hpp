#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ecmnet/config.hpp"
#include "ecmnet/data.hpp"
#include "ecmnet/metrics.hpp"
#include "ecmnet/model.hpp"

namespace ecmnet::train {

using config::Json;
using config::RunConfig;

/// Non-finite loss or gradient during training.
class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(int iteration, double lr, double grad_norm, double loss);
  int iteration;
  double lr, grad_norm, loss;
};

/// Mean cross-entropy over pixels whose label is not 255, optionally class
/// weighted. Labels outside [0,K) other than 255 throw ConfigError. When
/// every pixel is ignored the loss is 0 and `all_ignored` is set.
template <typename T>
Tensor<T> segmentation_loss(const Tensor<T>& logits, const std::vector<std::int32_t>& labels,
                            const std::vector<T>* class_weights = nullptr, bool* all_ignored = nullptr);

/// base · (1 − iter/max_iters)^power.
double poly_lr(double base, int iter, int max_iters, double power);

/// Median-frequency weights: median(f) / f_c, with 1 for absent classes.
std::vector<float> median_frequency_weights(const std::vector<double>& freq);

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<float> values;
  bool operator==(const NamedArray&) const = default;
};

/// AdamW with decoupled decay, or SGD with momentum. Decay applies to
/// tensors of rank two and above.
class Optimizer {
 public:
  Optimizer(const config::TrainConfig& cfg, nn::Named<float> params);
  void step(double lr);
  std::int64_t steps() const { return steps_; }

  std::vector<NamedArray> state() const;
  /// Throws ConfigError unless names and sizes match this optimizer.
  void load_state(std::int64_t steps, const std::vector<NamedArray>& state);

 private:
  config::TrainConfig cfg_;
  nn::Named<float> params_;
  std::vector<std::vector<float>> m_, v_;
  std::int64_t steps_ = 0;
};

double grad_norm(const nn::Named<float>& params);

struct Checkpoint {
  std::string kind = "ecmnet";  // or "label_oracle"
  Json config;                  // resolved run config
  std::string config_hash, model_hash;
  int iteration = 0;
  Json metrics = Json::object();
  std::vector<NamedArray> weights;  // parameters and buffers
  std::string optimizer;
  std::int64_t optimizer_steps = 0;
  std::vector<NamedArray> optimizer_state;
};

/// Binary container: magic, JSON header with the array manifest, then raw
/// little-endian float32 data. Written to a temporary file and renamed.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws ConfigError naming the path when it does not exist and
/// DataError when the file is malformed.
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint snapshot(const model::ECMNet<float>& net, const RunConfig& cfg, int iteration,
                    const Optimizer* opt = nullptr, Json metrics = Json::object());
/// Copies weights into `net`; every name and shape must match.
void restore_weights(model::ECMNet<float>& net, const Checkpoint& ckpt);
/// A checkpoint whose predictor reads classes back from painted images.
Checkpoint label_oracle_checkpoint(const RunConfig& cfg);

/// Training and validation samples for one run config.
class DataSource {
 public:
  explicit DataSource(const config::DataConfig& cfg);

  int num_classes() const { return num_classes_; }
  const std::vector<std::string>& class_names() const { return class_names_; }

  /// Batch for one iteration; depends only on (seed, iteration).
  data::Batch train_batch(int iteration, int batch_size, std::uint64_t seed) const;
  std::size_t val_size() const;
  data::SegSample val_sample(std::size_t index) const;
  /// Pixel frequency per class over the training data or its priors.
  std::vector<double> class_frequencies() const;

 private:
  data::SegSample train_sample(std::int64_t index, std::uint64_t seed) const;

  config::DataConfig cfg_;
  int num_classes_ = 0;
  std::vector<std::string> class_names_;
  std::optional<data::Dataset> train_set_, val_set_;
};

/// (B,3,H,W) images → B·H·W class indices.
using Predictor = std::function<std::vector<std::int32_t>(const Tensor<float>&)>;

Predictor model_predictor(model::ECMNet<float>& net);
Predictor label_oracle_predictor(int num_classes);

/// Confusion over the validation samples, padded to multiples of 8.
metrics::ConfusionMatrix evaluate(const Predictor& predict, const DataSource& data, int batch_size);

struct TrainOptions {
  std::filesystem::path out_dir;                 // empty: nothing written
  std::optional<std::filesystem::path> resume;   // checkpoint to continue from
  int stop_after = 0;                            // >0: halt and checkpoint at this iteration
  std::ostream* log = nullptr;
};

struct TrainResult {
  std::vector<Json> history;
  int iterations = 0;
  std::optional<double> best_miou, final_miou;
  double seconds = 0;
};

/// Deterministic for a given config: batches, augmentation and
/// initialization derive from train.seed. Throws TrainingDiverged on a
/// non-finite loss or gradient, and ConfigError when a resume checkpoint
/// was written under a different config.
TrainResult train_loop(model::ECMNet<float>& net, const DataSource& data, const RunConfig& cfg,
                       const TrainOptions& opts);

struct AblationRow {
  std::string variant;
  std::array<bool, 3> connections{}, msau{};
  bool ffm = false;
  std::int64_t params = 0, flops = 0;
  std::vector<double> miou;  // one per seed
  double median_miou = 0;
};

struct AblationReport {
  std::int64_t flop_h = 0, flop_w = 0;
  std::vector<AblationRow> rows;
  std::string to_text() const;
  Json to_json() const;
};

double median(std::vector<double> v);

/// Trains each variant once per seed on `base`'s data and reports the
/// final validation mIoU beside params and FLOPs (MAC counted once).
AblationReport run_ablation_suite(const std::vector<std::string>& variants, const std::vector<std::uint64_t>& seeds,
                                  const RunConfig& base, const TrainOptions& opts);

}  // namespace ecmnet::train
