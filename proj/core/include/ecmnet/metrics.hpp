#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ecmnet::metrics {

constexpr std::int32_t kIgnoreIndex = 255;

/// K×K pixel counts, rows indexed by ground truth and columns by prediction.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  /// Adds one map pair. Ground truth may hold kIgnoreIndex; any other value
  /// outside [0, K) in either map throws std::out_of_range.
  void accumulate(std::span<const std::int32_t> pred, std::span<const std::int32_t> gt);
  /// Elementwise sum with a matrix of the same size.
  void merge(const ConfusionMatrix& other);

  int num_classes() const { return k_; }
  std::int64_t at(int gt, int pred) const { return counts_[static_cast<std::size_t>(gt * k_ + pred)]; }
  std::int64_t& at(int gt, int pred) { return counts_[static_cast<std::size_t>(gt * k_ + pred)]; }
  std::int64_t total() const;
  const std::vector<std::int64_t>& counts() const { return counts_; }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int k_;
  std::vector<std::int64_t> counts_;
};

/// TP / (TP + FP + FN) per class; empty when the class is absent from both
/// ground truth and prediction.
std::vector<std::optional<double>> iou_per_class(const ConfusionMatrix& cm);

/// Mean over defined classes; empty when none is defined.
std::optional<double> mean_iou(const ConfusionMatrix& cm);

struct MetricReport {
  std::vector<std::string> class_names;
  std::vector<std::optional<double>> iou;
  std::optional<double> miou;
  ConfusionMatrix confusion{1};

  /// Tab-separated text: one row per class with IoU in percent at 0.1
  /// precision, the mean, then the raw confusion rows.
  std::string to_text() const;
  /// Rebuilds a report from to_text() output. IoU values are recomputed
  /// from the confusion rows, so the round trip is exact.
  static MetricReport parse(const std::string& text);
};

/// Throws ConfigError when the name count differs from K.
MetricReport report(const ConfusionMatrix& cm, const std::vector<std::string>& class_names);

}  // namespace ecmnet::metrics
