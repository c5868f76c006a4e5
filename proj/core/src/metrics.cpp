#include "ecmnet/metrics.hpp"

#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ecmnet/tensor.hpp"

namespace ecmnet::metrics {

namespace {

constexpr const char* kHeader = "# ecmnet metric report v1";

std::string percent(const std::optional<double>& v) {
  if (!v) return "undefined";
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << *v * 100.0;
  return os.str();
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, '\t')) out.push_back(field);
  return out;
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(int num_classes) : k_(num_classes) {
  if (num_classes < 1) throw ConfigError("confusion matrix needs at least one class");
  counts_.assign(static_cast<std::size_t>(k_) * static_cast<std::size_t>(k_), 0);
}

void ConfusionMatrix::accumulate(std::span<const std::int32_t> pred, std::span<const std::int32_t> gt) {
  if (pred.size() != gt.size()) {
    throw ConfigError("prediction and label sizes differ: " + std::to_string(pred.size()) + " vs " +
                      std::to_string(gt.size()));
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const auto g = gt[i], p = pred[i];
    if (g == kIgnoreIndex) continue;
    if (g < 0 || g >= k_) throw std::out_of_range("label " + std::to_string(g) + " outside [0," + std::to_string(k_) + ")");
    if (p < 0 || p >= k_) {
      throw std::out_of_range("prediction " + std::to_string(p) + " outside [0," + std::to_string(k_) + ")");
    }
    ++at(g, p);
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.k_ != k_) throw ConfigError("cannot merge confusion matrices of different size");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::int64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0}); }

std::vector<std::optional<double>> iou_per_class(const ConfusionMatrix& cm) {
  const int k = cm.num_classes();
  std::vector<std::optional<double>> out(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    std::int64_t row = 0, col = 0;
    for (int j = 0; j < k; ++j) {
      row += cm.at(c, j);
      col += cm.at(j, c);
    }
    const std::int64_t tp = cm.at(c, c);
    const std::int64_t denom = row + col - tp;
    if (denom > 0) out[static_cast<std::size_t>(c)] = static_cast<double>(tp) / static_cast<double>(denom);
  }
  return out;
}

std::optional<double> mean_iou(const ConfusionMatrix& cm) {
  double sum = 0;
  int n = 0;
  for (const auto& v : iou_per_class(cm)) {
    if (!v) continue;
    sum += *v;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

MetricReport report(const ConfusionMatrix& cm, const std::vector<std::string>& class_names) {
  if (static_cast<int>(class_names.size()) != cm.num_classes()) {
    throw ConfigError("got " + std::to_string(class_names.size()) + " class names for " +
                      std::to_string(cm.num_classes()) + " classes");
  }
  for (const auto& n : class_names) {
    if (n.empty() || n.find_first_of("\t\n") != std::string::npos) {
      throw ConfigError("class names must be non-empty and free of tabs and newlines");
    }
  }
  MetricReport r;
  r.class_names = class_names;
  r.iou = iou_per_class(cm);
  r.miou = mean_iou(cm);
  r.confusion = cm;
  return r;
}

std::string MetricReport::to_text() const {
  std::ostringstream os;
  const int k = confusion.num_classes();
  os << kHeader << "\n";
  os << "classes\t" << k << "\n";
  os << "pixels\t" << confusion.total() << "\n";
  os << "class\tname\tiou_percent\n";
  for (int c = 0; c < k; ++c) {
    os << c << "\t" << class_names[static_cast<std::size_t>(c)] << "\t" << percent(iou[static_cast<std::size_t>(c)])
       << "\n";
  }
  os << "miou\t" << percent(miou) << "\n";
  for (int g = 0; g < k; ++g) {
    os << "confusion\t" << g;
    for (int p = 0; p < k; ++p) os << "\t" << confusion.at(g, p);
    os << "\n";
  }
  return os.str();
}

MetricReport MetricReport::parse(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto fail = [](const std::string& what) { return ConfigError("malformed metric report: " + what); };
  if (!std::getline(in, line) || line != kHeader) throw fail("missing header");
  if (!std::getline(in, line)) throw fail("missing class count");
  auto f = split_tabs(line);
  if (f.size() != 2 || f[0] != "classes") throw fail("bad class count line");
  const int k = std::stoi(f[1]);
  if (k < 1) throw fail("class count must be positive");
  std::getline(in, line);  // pixels
  std::getline(in, line);  // column header
  std::vector<std::string> names;
  for (int c = 0; c < k; ++c) {
    if (!std::getline(in, line)) throw fail("missing class row");
    f = split_tabs(line);
    if (f.size() != 3 || std::stoi(f[0]) != c) throw fail("bad class row '" + line + "'");
    names.push_back(f[1]);
  }
  std::getline(in, line);  // miou
  ConfusionMatrix cm(k);
  for (int g = 0; g < k; ++g) {
    if (!std::getline(in, line)) throw fail("missing confusion row");
    f = split_tabs(line);
    if (static_cast<int>(f.size()) != k + 2 || f[0] != "confusion" || std::stoi(f[1]) != g) {
      throw fail("bad confusion row '" + line + "'");
    }
    for (int p = 0; p < k; ++p) cm.at(g, p) = std::stoll(f[static_cast<std::size_t>(p + 2)]);
  }
  return report(cm, names);
}

}  // namespace ecmnet::metrics
