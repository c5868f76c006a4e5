#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecmnet/tensor.hpp"

namespace ecmnet::data {

constexpr std::int32_t kIgnoreIndex = 255;
constexpr int kMaxSynthClasses = 11;

/// Missing or unreadable files and label values outside a remap table.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Image stored planar RGB (3,H,W) in [0,1]; label (H,W).
struct SegSample {
  std::int64_t height = 0, width = 0;
  std::vector<float> image;
  std::vector<std::int32_t> label;

  /// Throws DataError on a size mismatch, a non-finite pixel or a label
  /// outside [0,K) other than the ignore index.
  void validate(int num_classes) const;
  bool operator==(const SegSample&) const = default;
};

struct DatasetSpec {
  std::string name;  // cityscapes, camvid or synthetic
  std::filesystem::path root;
  std::string split = "train";
  int num_classes = 0;
  std::vector<std::string> class_names;
};

/// $ECMNET_DATA_ROOT, or ./datasets when unset.
std::filesystem::path data_root();

/// Fills class names and count. An empty root resolves to
/// data_root()/<name>. Throws ConfigError for an unknown name or split.
DatasetSpec make_spec(const std::string& name, const std::string& split, std::filesystem::path root = {});

/// Published image counts for Cityscapes fine annotations.
std::optional<std::size_t> expected_split_size(const DatasetSpec& spec);

const std::vector<std::string>& cityscapes_class_names();
const std::vector<std::string>& camvid_class_names();

/// Train id for a raw Cityscapes labelId (0..33, or 255 for ignore).
/// Other raw ids throw DataError.
std::int32_t cityscapes_train_id(int label_id);

struct PaletteEntry {
  std::array<std::uint8_t, 3> rgb{};
  std::int32_t train_id = kIgnoreIndex;
  std::string name;
};

/// $ECMNET_PALETTE when set, otherwise the palette shipped with the library.
std::filesystem::path default_palette_path();
/// Lines of "r g b train_id name"; '#' starts a comment.
std::vector<PaletteEntry> load_palette(const std::filesystem::path& path);

/// Indexes image/label pairs on construction; each load reads from disk.
class Dataset {
 public:
  explicit Dataset(DatasetSpec spec);

  const DatasetSpec& spec() const { return spec_; }
  std::size_t size() const { return pairs_.size(); }
  const std::pair<std::filesystem::path, std::filesystem::path>& files(std::size_t index) const;
  SegSample load(std::size_t index) const;

 private:
  DatasetSpec spec_;
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> pairs_;
  std::vector<PaletteEntry> palette_;
};

/// Reads one pair. Cityscapes labels are remapped to train ids, CamVid
/// colours go through the palette.
SegSample load_pair(const DatasetSpec& spec, const std::filesystem::path& image, const std::filesystem::path& label,
                    const std::vector<PaletteEntry>& palette = {});

/// Layout of the synthetic shapes set. The image is tiled into cells; each
/// cell is left empty or holds one shape whose class is drawn uniformly
/// from 1..K-1. Shape masks have a fixed size per class, so the expected
/// pixel fraction of every class is known in closed form.
struct SynthConfig {
  int cell = 16;
  double empty_prob = 0.25;
};

/// Deterministic in (seed, sample index). Throws ConfigError for K outside
/// [2, 11] or an image smaller than one cell.
SegSample synth_sample(std::uint64_t seed, std::int64_t index, std::int64_t h, std::int64_t w, int k,
                       const SynthConfig& cfg = {});
std::vector<SegSample> synth_batch(std::uint64_t seed, std::int64_t batch, std::int64_t h, std::int64_t w, int k,
                                   const SynthConfig& cfg = {});
/// Expected fraction of pixels per class for the generator above.
std::vector<double> synth_class_priors(std::int64_t h, std::int64_t w, int k, const SynthConfig& cfg = {});
const std::vector<std::string>& synth_class_names(int k);

/// Flat colour of a synthetic class: grey background, then the shape colours.
std::array<float, 3> class_color(int cls);
/// Replaces the image with flat class colours; void pixels turn black.
SegSample paint_labels(const SegSample& s);

struct AugmentPolicy {
  double flip_prob = 0.5;
  std::int64_t crop_h = 0, crop_w = 0;  // 0 keeps the full extent
  double scale_min = 1.0, scale_max = 1.0;

  static AugmentPolicy none() { return {0.0, 0, 0, 1.0, 1.0}; }
  static AugmentPolicy cityscapes() { return {0.5, 512, 512, 0.75, 1.5}; }
  static AugmentPolicy camvid() { return {0.5, 360, 480, 0.75, 1.5}; }
};

SegSample hflip(const SegSample& s);
/// Throws ConfigError when the window leaves the image.
SegSample crop(const SegSample& s, std::int64_t y, std::int64_t x, std::int64_t h, std::int64_t w);
/// Bilinear for the image, nearest neighbour for the label.
SegSample resize(const SegSample& s, std::int64_t h, std::int64_t w);

/// Scale jitter, then random crop, then flip. A crop larger than the input
/// throws ConfigError; when scaling shrinks the image below the crop, the
/// image is reflect-padded and the label padded with the ignore index.
SegSample augment(const SegSample& s, const AugmentPolicy& policy, std::uint64_t seed);

/// Reflect-pads bottom and right up to multiples of `multiple`, labels
/// padded with the ignore index. Writes a warning to std::clog when padding.
SegSample pad_to_multiple(const SegSample& s, std::int64_t multiple);

/// Stateless seed derivation so each sample's randomness is independent of
/// evaluation order.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

struct Batch {
  Tensor<float> images;  // (B,3,H,W)
  std::vector<std::int32_t> labels;
};
/// All samples must share one size.
Batch collate(const std::vector<SegSample>& samples);

}  // namespace ecmnet::data
