#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "ecmnet/config.hpp"

using namespace ecmnet;
using config::Json;

namespace {

std::filesystem::path write_temp(const std::string& text) {
  auto p = std::filesystem::temp_directory_path() / ("ecmnet_cfg_" + std::to_string(std::random_device{}()) + ".json");
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST(Config, RoundTripIsExact) {
  for (const char* ds : {"synthetic", "cityscapes", "camvid"}) {
    auto cfg = config::defaults_for(ds);
    const auto j = config::to_json(cfg);
    auto back = config::from_json(j);
    EXPECT_EQ(config::to_json(back).dump(), j.dump()) << ds;
    EXPECT_EQ(config::config_hash(back), config::config_hash(cfg));
  }
  auto cs = config::defaults_for("cityscapes");
  EXPECT_EQ(cs.model.num_classes, 19);
  EXPECT_EQ(cs.data.augment.crop_h, 512);
  EXPECT_EQ(cs.data.augment.scale_min, 0.75);
  EXPECT_EQ(cs.data.augment.scale_max, 1.5);
  EXPECT_EQ(cs.data.augment.flip_prob, 0.5);
  auto cv = config::defaults_for("camvid");
  EXPECT_EQ(cv.model.num_classes, 11);
  EXPECT_EQ(cv.data.augment.crop_h, 360);
  EXPECT_EQ(cv.data.augment.crop_w, 480);
  auto syn = config::defaults_for("synthetic");
  EXPECT_EQ(syn.train.optimizer, "adamw");
  EXPECT_EQ(syn.train.lr, 1e-3);
  EXPECT_EQ(syn.train.poly_power, 0.9);
}

TEST(Config, UnknownKeysAndBadValuesRejected) {
  auto j = config::to_json(config::defaults_for("synthetic"));
  auto bad = j;
  bad["train"]["learning_rate"] = 0.1;
  EXPECT_THROW(config::from_json(bad), ConfigError);
  bad = j;
  bad["extra"] = 1;
  EXPECT_THROW(config::from_json(bad), ConfigError);
  bad = j;
  bad["data"]["augment"]["rotate"] = true;
  EXPECT_THROW(config::from_json(bad), ConfigError);
  bad = j;
  bad["train"]["lr"] = "fast";
  EXPECT_THROW(config::from_json(bad), ConfigError);
  bad = j;
  bad["schema_version"] = 2;
  EXPECT_THROW(config::from_json(bad), ConfigError);
  bad = j;
  bad["train"]["lr"] = 0.0;
  EXPECT_THROW(config::from_json(bad), ConfigError);
  bad = j;
  bad["train"]["max_iters"] = 0;
  EXPECT_THROW(config::from_json(bad), ConfigError);
  bad = j;
  bad["model"]["num_classes"] = 5;
  EXPECT_THROW(config::from_json(bad), ConfigError);
  bad = j;
  bad["model"]["variant"] = "D4";
  EXPECT_THROW(config::from_json(bad), ConfigError);
  bad = j;
  bad["data"]["height"] = 60;
  EXPECT_THROW(config::from_json(bad), ConfigError);
}

TEST(Config, OverridesWinAndAreTyped) {
  auto cfg = config::resolve({}, {"train.lr=0.002", "model.variant=B2", "train.class_weighting=true",
                                  "data.augment.scale_max=1.25", "model.stage_channels=[16,32,64]"});
  EXPECT_EQ(cfg.train.lr, 0.002);
  EXPECT_EQ(cfg.model.variant, "B2");
  EXPECT_EQ(cfg.model.msau, (std::array<bool, 3>{true, true, false}));
  EXPECT_TRUE(cfg.train.class_weighting);
  EXPECT_EQ(cfg.data.augment.scale_max, 1.25);
  EXPECT_EQ(cfg.model.stage_channels[2], 64);
  EXPECT_THROW(config::resolve({}, {"train.momentom=0.5"}), ConfigError);
  EXPECT_THROW(config::resolve({}, {"train.lr"}), ConfigError);
  EXPECT_THROW(config::resolve({}, {"train.max_iters=many"}), ConfigError);

  auto camvid = config::resolve({}, {"data.dataset=camvid"});
  EXPECT_EQ(camvid.model.num_classes, 11);
  auto j = config::to_json(cfg);
  config::apply_override(j, "data.dataset=camvid");
  EXPECT_EQ(j["data"]["dataset"], "camvid");
  // A string field keeps numeric-looking text as a string.
  config::apply_override(j, "data.root=2024");
  EXPECT_EQ(j["data"]["root"], "2024");
}

TEST(Config, FileValuesThenOverrides) {
  const auto path = write_temp(R"({"schema_version": 1, "train": {"lr": 0.005, "max_iters": 50}})");
  auto cfg = config::resolve(path, {"train.max_iters=70"});
  EXPECT_EQ(cfg.train.lr, 0.005);
  EXPECT_EQ(cfg.train.max_iters, 70);
  EXPECT_EQ(cfg.model.num_classes, 3);
  std::filesystem::remove(path);

  const auto unknown = write_temp(R"({"schema_version": 1, "train": {"lr": 0.005, "warmup": 5}})");
  EXPECT_THROW(config::resolve(unknown, {}), ConfigError);
  std::filesystem::remove(unknown);
  const auto broken = write_temp("{ not json");
  EXPECT_THROW(config::resolve(broken, {}), ConfigError);
  std::filesystem::remove(broken);
  EXPECT_THROW(config::resolve("/nonexistent/cfg.json", {}), ConfigError);
}

TEST(Config, Hashes) {
  EXPECT_EQ(config::fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(config::fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(config::hex(0xabcULL), "0000000000000abc");
  auto a = config::defaults_for("synthetic");
  auto b = a;
  b.train.lr = 0.002;
  EXPECT_NE(config::config_hash(a), config::config_hash(b));
  EXPECT_EQ(config::model_hash(a.model), config::model_hash(b.model));
  b.model = model::make_variant("C1", b.model);
  EXPECT_NE(config::model_hash(a.model), config::model_hash(b.model));
}
