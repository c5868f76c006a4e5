#include "ecmnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <unordered_map>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace ecmnet::data {

namespace fs = std::filesystem;

namespace {

// labelId -> trainId for the 34 Cityscapes label ids.
constexpr std::array<std::int32_t, 34> kCityscapesTrainIds = {
    255, 255, 255, 255, 255, 255, 255, 0,   1,   255, 255, 2,  3,  4,  255, 255, 255,
    5,   255, 6,   7,   8,   9,   10,  11,  12,  13,  14,  15, 255, 255, 16, 17, 18};

std::string read_error(const fs::path& p) { return "cannot read image " + p.string(); }

cv::Mat read_image(const fs::path& p, int flags) {
  if (!fs::exists(p)) throw DataError("missing file " + p.string());
  cv::Mat m = cv::imread(p.string(), flags);
  if (m.empty()) throw DataError(read_error(p));
  return m;
}

// BGR uint8 Mat -> planar RGB floats in [0,1].
std::vector<float> planar_rgb(const cv::Mat& bgr) {
  const auto h = static_cast<std::size_t>(bgr.rows), w = static_cast<std::size_t>(bgr.cols);
  std::vector<float> out(3 * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(static_cast<int>(y));
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) out[c * h * w + y * w + x] = row[x][2 - static_cast<int>(c)] / 255.0f;
  }
  return out;
}

cv::Mat image_mat(const SegSample& s) {
  cv::Mat m(static_cast<int>(s.height), static_cast<int>(s.width), CV_32FC3);
  const auto hw = static_cast<std::size_t>(s.height * s.width);
  for (int y = 0; y < m.rows; ++y) {
    auto* row = m.ptr<cv::Vec3f>(y);
    for (int x = 0; x < m.cols; ++x) {
      const auto i = static_cast<std::size_t>(y) * static_cast<std::size_t>(s.width) + static_cast<std::size_t>(x);
      for (int c = 0; c < 3; ++c) row[x][c] = s.image[static_cast<std::size_t>(c) * hw + i];
    }
  }
  return m;
}

cv::Mat label_mat(const SegSample& s) {
  cv::Mat m(static_cast<int>(s.height), static_cast<int>(s.width), CV_32SC1);
  std::copy(s.label.begin(), s.label.end(), m.ptr<std::int32_t>(0));
  return m;
}

SegSample from_mats(const cv::Mat& img, const cv::Mat& lab) {
  SegSample s;
  s.height = img.rows;
  s.width = img.cols;
  const auto hw = static_cast<std::size_t>(s.height * s.width);
  s.image.resize(3 * hw);
  s.label.resize(hw);
  for (int y = 0; y < img.rows; ++y) {
    const auto* row = img.ptr<cv::Vec3f>(y);
    const auto* lrow = lab.ptr<std::int32_t>(y);
    for (int x = 0; x < img.cols; ++x) {
      const auto i = static_cast<std::size_t>(y) * static_cast<std::size_t>(s.width) + static_cast<std::size_t>(x);
      for (int c = 0; c < 3; ++c) s.image[static_cast<std::size_t>(c) * hw + i] = row[x][c];
      s.label[i] = lrow[x];
    }
  }
  return s;
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Shape masks for the synthetic set, one per class and cell size.
struct Mask {
  int size = 0;
  std::vector<std::uint8_t> on;
  std::int64_t area = 0;
};

Mask shape_mask(int cls, int cell) {
  Mask m;
  m.size = std::max(1, static_cast<int>(std::lround(0.75 * cell)));
  const int d = m.size;
  m.on.assign(static_cast<std::size_t>(d * d), 0);
  const double c = (d - 1) / 2.0, r = d / 2.0;
  for (int y = 0; y < d; ++y) {
    for (int x = 0; x < d; ++x) {
      const double dy = y - c, dx = x - c;
      bool in = false;
      switch ((cls - 1) % 4) {
        case 0: in = dx * dx + dy * dy <= r * r; break;                   // disk
        case 1: in = std::abs(dx) <= 0.36 * d && std::abs(dy) <= 0.36 * d; break;  // square
        case 2: in = std::abs(dx) <= (y + 0.5) / 2.0; break;                // triangle
        default: in = std::abs(dx) + std::abs(dy) <= r; break;             // diamond
      }
      m.on[static_cast<std::size_t>(y * d + x)] = in;
      m.area += in;
    }
  }
  return m;
}

constexpr std::array<std::array<float, 3>, 10> kShapeColors = {{{0.90f, 0.15f, 0.15f},
                                                                 {0.15f, 0.35f, 0.90f},
                                                                 {0.95f, 0.85f, 0.10f},
                                                                 {0.10f, 0.75f, 0.25f},
                                                                 {0.80f, 0.20f, 0.85f},
                                                                 {0.10f, 0.85f, 0.85f},
                                                                 {0.95f, 0.55f, 0.10f},
                                                                 {0.55f, 0.30f, 0.10f},
                                                                 {1.00f, 1.00f, 1.00f},
                                                                 {0.05f, 0.05f, 0.05f}}};

void check_synth(std::int64_t h, std::int64_t w, int k, const SynthConfig& cfg) {
  if (k < 2 || k > kMaxSynthClasses) {
    throw ConfigError("synthetic class count must be in [2, " + std::to_string(kMaxSynthClasses) + "], got " +
                      std::to_string(k));
  }
  if (cfg.cell < 4) throw ConfigError("synthetic cell size must be at least 4");
  if (cfg.empty_prob < 0.0 || cfg.empty_prob > 1.0) throw ConfigError("synthetic empty_prob must be in [0,1]");
  if (h < cfg.cell || w < cfg.cell) {
    throw ConfigError("synthetic image " + std::to_string(h) + "x" + std::to_string(w) + " is smaller than one cell");
  }
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

void SegSample::validate(int num_classes) const {
  const auto hw = static_cast<std::size_t>(height * width);
  if (height <= 0 || width <= 0 || image.size() != 3 * hw || label.size() != hw) {
    throw DataError("sample buffers do not match " + std::to_string(height) + "x" + std::to_string(width));
  }
  for (float v : image)
    if (!std::isfinite(v)) throw DataError("sample image holds a non-finite value");
  for (auto l : label) {
    if (l != kIgnoreIndex && (l < 0 || l >= num_classes)) {
      throw DataError("label value " + std::to_string(l) + " outside [0," + std::to_string(num_classes) + ")");
    }
  }
}

fs::path data_root() {
  if (const char* env = std::getenv("ECMNET_DATA_ROOT"); env && *env) return env;
  return "datasets";
}

const std::vector<std::string>& cityscapes_class_names() {
  static const std::vector<std::string> names{"road",  "sidewalk",      "building",     "wall",       "fence",
                                              "pole",  "traffic_light", "traffic_sign", "vegetation", "terrain",
                                              "sky",   "person",        "rider",        "car",        "truck",
                                              "bus",   "train",         "motorcycle",   "bicycle"};
  return names;
}

const std::vector<std::string>& camvid_class_names() {
  static const std::vector<std::string> names{"Sky",        "Building", "Pole", "Road",       "Sidewalk", "Tree",
                                              "SignSymbol", "Fence",    "Car",  "Pedestrian", "Bicyclist"};
  return names;
}

const std::vector<std::string>& synth_class_names(int k) {
  static const std::vector<std::vector<std::string>> all = [] {
    const std::vector<std::string> shapes{"disk", "square", "triangle", "diamond"};
    std::vector<std::vector<std::string>> out(kMaxSynthClasses + 1);
    for (int n = 2; n <= kMaxSynthClasses; ++n) {
      out[static_cast<std::size_t>(n)].push_back("background");
      for (int c = 1; c < n; ++c) {
        auto name = shapes[static_cast<std::size_t>((c - 1) % 4)];
        if (c > 4) name += "_" + std::to_string((c - 1) / 4 + 1);
        out[static_cast<std::size_t>(n)].push_back(name);
      }
    }
    return out;
  }();
  if (k < 2 || k > kMaxSynthClasses) throw ConfigError("synthetic class count must be in [2, 11]");
  return all[static_cast<std::size_t>(k)];
}

DatasetSpec make_spec(const std::string& name, const std::string& split, fs::path root) {
  if (split != "train" && split != "val" && split != "test") {
    throw ConfigError("split must be train, val or test, got '" + split + "'");
  }
  DatasetSpec spec;
  spec.name = name;
  spec.split = split;
  if (name == "cityscapes") {
    spec.class_names = cityscapes_class_names();
  } else if (name == "camvid") {
    spec.class_names = camvid_class_names();
  } else if (name == "synthetic") {
    spec.class_names = synth_class_names(3);
  } else {
    throw ConfigError("unknown dataset '" + name + "' (expected cityscapes, camvid or synthetic)");
  }
  spec.num_classes = static_cast<int>(spec.class_names.size());
  spec.root = root.empty() && name != "synthetic" ? data_root() / name : root;
  return spec;
}

std::optional<std::size_t> expected_split_size(const DatasetSpec& spec) {
  if (spec.name != "cityscapes") return std::nullopt;
  if (spec.split == "train") return 2975;
  if (spec.split == "val") return 500;
  return 1525;
}

std::int32_t cityscapes_train_id(int label_id) {
  if (label_id == kIgnoreIndex) return kIgnoreIndex;
  if (label_id < 0 || label_id >= static_cast<int>(kCityscapesTrainIds.size())) {
    throw DataError("Cityscapes label id " + std::to_string(label_id) + " has no train id");
  }
  return kCityscapesTrainIds[static_cast<std::size_t>(label_id)];
}

fs::path default_palette_path() {
  if (const char* env = std::getenv("ECMNET_PALETTE"); env && *env) return env;
  return fs::path(ECMNET_DATA_DIR) / "camvid_palette.txt";
}

std::vector<PaletteEntry> load_palette(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open palette " + path.string());
  std::vector<PaletteEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    int r, g, b, id;
    std::string name;
    if (!(ls >> r)) continue;
    if (!(ls >> g >> b >> id >> name) || r < 0 || r > 255 || g < 0 || g > 255 || b < 0 || b > 255) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 'r g b train_id name'");
    }
    PaletteEntry e;
    e.rgb = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
    e.train_id = id;
    e.name = name;
    for (const auto& prev : out)
      if (prev.rgb == e.rgb) throw DataError(path.string() + ":" + std::to_string(lineno) + ": duplicate colour");
    out.push_back(std::move(e));
  }
  if (out.empty()) throw DataError("palette " + path.string() + " has no entries");
  return out;
}

Dataset::Dataset(DatasetSpec spec) : spec_(std::move(spec)) {
  if (spec_.name == "cityscapes") {
    const auto images = spec_.root / "leftImg8bit" / spec_.split;
    if (!fs::is_directory(images)) throw DataError("missing Cityscapes image directory " + images.string());
    const std::string suffix = "_leftImg8bit.png";
    for (const auto& e : fs::recursive_directory_iterator(images)) {
      const auto file = e.path().filename().string();
      if (!e.is_regular_file() || !file.ends_with(suffix)) continue;
      const auto stem = file.substr(0, file.size() - suffix.size());
      const auto city = e.path().parent_path().filename();
      auto label = spec_.root / "gtFine" / spec_.split / city / (stem + "_gtFine_labelIds.png");
      if (!fs::exists(label)) throw DataError("missing label for " + e.path().string() + ": " + label.string());
      pairs_.emplace_back(e.path(), std::move(label));
    }
  } else if (spec_.name == "camvid") {
    const auto images = spec_.root / spec_.split;
    const auto labels = spec_.root / (spec_.split + "_labels");
    if (!fs::is_directory(images)) throw DataError("missing CamVid image directory " + images.string());
    for (const auto& e : fs::directory_iterator(images)) {
      if (!e.is_regular_file() || e.path().extension() != ".png") continue;
      auto label = labels / (e.path().stem().string() + "_L.png");
      if (!fs::exists(label)) throw DataError("missing label for " + e.path().string() + ": " + label.string());
      pairs_.emplace_back(e.path(), std::move(label));
    }
    palette_ = load_palette(default_palette_path());
  } else {
    throw ConfigError("dataset '" + spec_.name + "' is not file backed");
  }
  std::sort(pairs_.begin(), pairs_.end());
  if (auto want = expected_split_size(spec_); want && *want != pairs_.size()) {
    std::clog << "warning: " << spec_.name << " " << spec_.split << " has " << pairs_.size() << " images, expected "
              << *want << "\n";
  }
}

const std::pair<fs::path, fs::path>& Dataset::files(std::size_t index) const {
  if (index >= pairs_.size()) {
    throw std::out_of_range("sample " + std::to_string(index) + " of " + std::to_string(pairs_.size()));
  }
  return pairs_[index];
}

SegSample Dataset::load(std::size_t index) const {
  const auto& [img, lab] = files(index);
  return load_pair(spec_, img, lab, palette_);
}

SegSample load_pair(const DatasetSpec& spec, const fs::path& image, const fs::path& label,
                    const std::vector<PaletteEntry>& palette) {
  const cv::Mat img = read_image(image, cv::IMREAD_COLOR);
  SegSample s;
  s.height = img.rows;
  s.width = img.cols;
  s.image = planar_rgb(img);
  const auto hw = static_cast<std::size_t>(s.height * s.width);
  s.label.resize(hw);

  auto check_size = [&](const cv::Mat& lab) {
    if (lab.rows != img.rows || lab.cols != img.cols) {
      throw DataError("label " + label.string() + " is " + std::to_string(lab.cols) + "x" + std::to_string(lab.rows) +
                      " but image is " + std::to_string(img.cols) + "x" + std::to_string(img.rows));
    }
  };

  if (spec.name == "cityscapes") {
    const cv::Mat lab = read_image(label, cv::IMREAD_UNCHANGED);
    if (lab.type() != CV_8UC1) throw DataError("Cityscapes label " + label.string() + " is not 8-bit single channel");
    check_size(lab);
    std::array<std::int32_t, 256> table;
    for (int i = 0; i < 256; ++i) {
      const bool known = i < static_cast<int>(kCityscapesTrainIds.size()) || i == kIgnoreIndex;
      table[static_cast<std::size_t>(i)] = known ? cityscapes_train_id(i) : -1;
    }
    for (int y = 0; y < lab.rows; ++y) {
      const auto* row = lab.ptr<std::uint8_t>(y);
      for (int x = 0; x < lab.cols; ++x) {
        const auto id = table[row[x]];
        if (id < 0) throw DataError("Cityscapes label id " + std::to_string(row[x]) + " in " + label.string() +
                                    " has no train id");
        s.label[static_cast<std::size_t>(y * lab.cols + x)] = id;
      }
    }
  } else if (spec.name == "camvid") {
    const auto& pal = palette.empty() ? load_palette(default_palette_path()) : palette;
    std::unordered_map<std::uint32_t, std::int32_t> lookup;
    for (const auto& e : pal) lookup[(e.rgb[0] << 16u) | (e.rgb[1] << 8u) | e.rgb[2]] = e.train_id;
    const cv::Mat lab = read_image(label, cv::IMREAD_COLOR);
    check_size(lab);
    for (int y = 0; y < lab.rows; ++y) {
      const auto* row = lab.ptr<cv::Vec3b>(y);
      for (int x = 0; x < lab.cols; ++x) {
        const std::uint32_t r = row[x][2], g = row[x][1], b = row[x][0];
        auto it = lookup.find((r << 16u) | (g << 8u) | b);
        if (it == lookup.end()) {
          throw DataError("unknown CamVid label colour (" + std::to_string(r) + "," + std::to_string(g) + "," +
                          std::to_string(b) + ") at " + std::to_string(x) + "," + std::to_string(y) + " in " +
                          label.string());
        }
        s.label[static_cast<std::size_t>(y * lab.cols + x)] = it->second;
      }
    }
  } else {
    throw ConfigError("dataset '" + spec.name + "' is not file backed");
  }
  s.validate(spec.num_classes);
  return s;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) { return splitmix(splitmix(seed) ^ index); }

SegSample synth_sample(std::uint64_t seed, std::int64_t index, std::int64_t h, std::int64_t w, int k,
                       const SynthConfig& cfg) {
  check_synth(h, w, k, cfg);
  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(index)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SegSample s;
  s.height = h;
  s.width = w;
  const auto hw = static_cast<std::size_t>(h * w);
  s.image.resize(3 * hw);
  s.label.assign(hw, 0);

  // Textured background: a grey level, a random stripe pattern and noise.
  const double base = 0.3 + 0.4 * unit(rng);
  const double tint[3] = {0.06 * (unit(rng) - 0.5), 0.06 * (unit(rng) - 0.5), 0.06 * (unit(rng) - 0.5)};
  const double angle = std::numbers::pi * unit(rng);
  const double freq = 0.15 + 0.5 * unit(rng);
  const double phase = 2 * std::numbers::pi * unit(rng);
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      const double stripe = 0.08 * std::sin(freq * (std::cos(angle) * x + std::sin(angle) * y) + phase);
      const auto i = static_cast<std::size_t>(y * w + x);
      for (std::size_t c = 0; c < 3; ++c) s.image[c * hw + i] = clamp01(base + tint[c] + stripe + 0.1 * (unit(rng) - 0.5));
    }
  }

  std::vector<Mask> masks(static_cast<std::size_t>(k));
  for (int c = 1; c < k; ++c) masks[static_cast<std::size_t>(c)] = shape_mask(c, cfg.cell);
  const std::int64_t rows = h / cfg.cell, cols = w / cfg.cell;
  for (std::int64_t cy = 0; cy < rows; ++cy) {
    for (std::int64_t cx = 0; cx < cols; ++cx) {
      if (unit(rng) < cfg.empty_prob) continue;
      const int cls = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(k - 1));
      const auto& m = masks[static_cast<std::size_t>(cls)];
      const int slack = cfg.cell - m.size;
      const std::int64_t oy = cy * cfg.cell + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(slack + 1));
      const std::int64_t ox = cx * cfg.cell + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(slack + 1));
      const auto& base_color = kShapeColors[static_cast<std::size_t>(cls - 1)];
      double color[3];
      for (int c = 0; c < 3; ++c) color[c] = base_color[static_cast<std::size_t>(c)] + 0.16 * (unit(rng) - 0.5);
      for (int y = 0; y < m.size; ++y) {
        for (int x = 0; x < m.size; ++x) {
          if (!m.on[static_cast<std::size_t>(y * m.size + x)]) continue;
          const auto i = static_cast<std::size_t>((oy + y) * w + ox + x);
          s.label[i] = cls;
          for (std::size_t c = 0; c < 3; ++c) s.image[c * hw + i] = clamp01(color[c] + 0.1 * (unit(rng) - 0.5));
        }
      }
    }
  }
  return s;
}

std::vector<SegSample> synth_batch(std::uint64_t seed, std::int64_t batch, std::int64_t h, std::int64_t w, int k,
                                   const SynthConfig& cfg) {
  std::vector<SegSample> out;
  out.reserve(static_cast<std::size_t>(std::max<std::int64_t>(batch, 0)));
  for (std::int64_t i = 0; i < batch; ++i) out.push_back(synth_sample(seed, i, h, w, k, cfg));
  return out;
}

std::vector<double> synth_class_priors(std::int64_t h, std::int64_t w, int k, const SynthConfig& cfg) {
  check_synth(h, w, k, cfg);
  const double cells = static_cast<double>((h / cfg.cell) * (w / cfg.cell));
  const double pixels = static_cast<double>(h * w);
  std::vector<double> p(static_cast<std::size_t>(k), 0.0);
  double shapes = 0;
  for (int c = 1; c < k; ++c) {
    const double area = static_cast<double>(shape_mask(c, cfg.cell).area);
    p[static_cast<std::size_t>(c)] = cells * (1.0 - cfg.empty_prob) / (k - 1) * area / pixels;
    shapes += p[static_cast<std::size_t>(c)];
  }
  p[0] = 1.0 - shapes;
  return p;
}

std::array<float, 3> class_color(int cls) {
  if (cls == 0) return {0.5f, 0.5f, 0.5f};
  if (cls < 1 || cls > static_cast<int>(kShapeColors.size())) throw ConfigError("no colour for class " + std::to_string(cls));
  return kShapeColors[static_cast<std::size_t>(cls - 1)];
}

SegSample paint_labels(const SegSample& s) {
  SegSample out = s;
  const auto hw = s.label.size();
  for (std::size_t i = 0; i < hw; ++i) {
    const std::array<float, 3> c = s.label[i] == kIgnoreIndex ? std::array<float, 3>{0, 0, 0} : class_color(s.label[i]);
    for (std::size_t ch = 0; ch < 3; ++ch) out.image[ch * hw + i] = c[ch];
  }
  return out;
}

SegSample hflip(const SegSample& s) {
  SegSample out = s;
  const auto w = static_cast<std::size_t>(s.width);
  const auto rows = static_cast<std::size_t>(s.height);
  for (std::size_t r = 0; r < 3 * rows; ++r) std::reverse(out.image.begin() + r * w, out.image.begin() + (r + 1) * w);
  for (std::size_t r = 0; r < rows; ++r) std::reverse(out.label.begin() + r * w, out.label.begin() + (r + 1) * w);
  return out;
}

SegSample crop(const SegSample& s, std::int64_t y, std::int64_t x, std::int64_t h, std::int64_t w) {
  if (h <= 0 || w <= 0 || y < 0 || x < 0 || y + h > s.height || x + w > s.width) {
    throw ConfigError("crop " + std::to_string(h) + "x" + std::to_string(w) + " at (" + std::to_string(y) + "," +
                      std::to_string(x) + ") exceeds image " + std::to_string(s.height) + "x" + std::to_string(s.width));
  }
  SegSample out;
  out.height = h;
  out.width = w;
  const auto src_hw = static_cast<std::size_t>(s.height * s.width), hw = static_cast<std::size_t>(h * w);
  out.image.resize(3 * hw);
  out.label.resize(hw);
  for (std::int64_t r = 0; r < h; ++r) {
    const auto src = static_cast<std::size_t>((y + r) * s.width + x), dst = static_cast<std::size_t>(r * w);
    for (std::size_t c = 0; c < 3; ++c)
      std::copy_n(s.image.begin() + static_cast<std::ptrdiff_t>(c * src_hw + src), w,
                  out.image.begin() + static_cast<std::ptrdiff_t>(c * hw + dst));
    std::copy_n(s.label.begin() + static_cast<std::ptrdiff_t>(src), w, out.label.begin() + static_cast<std::ptrdiff_t>(dst));
  }
  return out;
}

SegSample resize(const SegSample& s, std::int64_t h, std::int64_t w) {
  if (h <= 0 || w <= 0) throw ConfigError("resize target must be positive");
  if (h == s.height && w == s.width) return s;
  cv::Mat img, lab;
  const cv::Size size(static_cast<int>(w), static_cast<int>(h));
  cv::resize(image_mat(s), img, size, 0, 0, cv::INTER_LINEAR);
  cv::resize(label_mat(s), lab, size, 0, 0, cv::INTER_NEAREST);
  return from_mats(img, lab);
}

SegSample augment(const SegSample& s, const AugmentPolicy& p, std::uint64_t seed) {
  const std::int64_t ch = p.crop_h > 0 ? p.crop_h : s.height;
  const std::int64_t cw = p.crop_w > 0 ? p.crop_w : s.width;
  if (ch > s.height || cw > s.width) {
    throw ConfigError("crop " + std::to_string(ch) + "x" + std::to_string(cw) + " is larger than image " +
                      std::to_string(s.height) + "x" + std::to_string(s.width));
  }
  if (p.scale_min <= 0 || p.scale_max < p.scale_min) throw ConfigError("scale range must satisfy 0 < min <= max");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double scale = p.scale_min + (p.scale_max - p.scale_min) * unit(rng);
  SegSample out = resize(s, std::max<std::int64_t>(1, std::llround(s.height * scale)),
                         std::max<std::int64_t>(1, std::llround(s.width * scale)));
  if (out.height < ch || out.width < cw) {
    cv::Mat img, lab;
    const int bottom = static_cast<int>(std::max<std::int64_t>(0, ch - out.height));
    const int right = static_cast<int>(std::max<std::int64_t>(0, cw - out.width));
    cv::copyMakeBorder(image_mat(out), img, 0, bottom, 0, right, cv::BORDER_REFLECT_101);
    cv::copyMakeBorder(label_mat(out), lab, 0, bottom, 0, right, cv::BORDER_CONSTANT, cv::Scalar(kIgnoreIndex));
    out = from_mats(img, lab);
  }
  const auto y = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(out.height - ch + 1));
  const auto x = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(out.width - cw + 1));
  if (y != 0 || x != 0 || ch != out.height || cw != out.width) out = crop(out, y, x, ch, cw);
  if (unit(rng) < p.flip_prob) out = hflip(out);
  return out;
}

SegSample pad_to_multiple(const SegSample& s, std::int64_t multiple) {
  if (multiple < 1) throw ConfigError("pad multiple must be positive");
  const std::int64_t h = (s.height + multiple - 1) / multiple * multiple;
  const std::int64_t w = (s.width + multiple - 1) / multiple * multiple;
  if (h == s.height && w == s.width) return s;
  std::clog << "warning: input " << s.height << "x" << s.width << " is not a multiple of " << multiple
            << "; reflect-padded to " << h << "x" << w << "\n";
  // Reflection needs at least two pixels; tiny inputs fall back to edge copies.
  const int mode = s.height > 1 && s.width > 1 ? cv::BORDER_REFLECT_101 : cv::BORDER_REPLICATE;
  cv::Mat img, lab;
  cv::copyMakeBorder(image_mat(s), img, 0, static_cast<int>(h - s.height), 0, static_cast<int>(w - s.width), mode);
  cv::copyMakeBorder(label_mat(s), lab, 0, static_cast<int>(h - s.height), 0, static_cast<int>(w - s.width),
                     cv::BORDER_CONSTANT, cv::Scalar(kIgnoreIndex));
  return from_mats(img, lab);
}

Batch collate(const std::vector<SegSample>& samples) {
  if (samples.empty()) throw ConfigError("cannot collate an empty batch");
  const auto h = samples.front().height, w = samples.front().width;
  std::vector<float> images;
  Batch b;
  images.reserve(samples.size() * static_cast<std::size_t>(3 * h * w));
  b.labels.reserve(samples.size() * static_cast<std::size_t>(h * w));
  for (const auto& s : samples) {
    if (s.height != h || s.width != w) throw ConfigError("batch samples differ in size");
    images.insert(images.end(), s.image.begin(), s.image.end());
    b.labels.insert(b.labels.end(), s.label.begin(), s.label.end());
  }
  b.images = Tensor<float>::from({static_cast<std::int64_t>(samples.size()), 3, h, w}, std::move(images));
  return b;
}

}  // namespace ecmnet::data
