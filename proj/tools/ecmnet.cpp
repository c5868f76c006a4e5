// ecmnet command-line tool.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "CLI11.hpp"
#include "ecmnet/analysis.hpp"
#include "ecmnet/config.hpp"
#include "ecmnet/data.hpp"
#include "ecmnet/scan.hpp"
#include "ecmnet/selfcheck.hpp"
#include "ecmnet/train.hpp"

namespace fs = std::filesystem;
using namespace ecmnet;
using config::Json;

namespace {

constexpr int kExitOk = 0, kExitCheckFailed = 1, kExitUsage = 2;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args, const std::string& default_out) {
  args.out_dir = default_out;
  cmd->add_option("-c,--config", args.config_path, "JSON run config")->check(CLI::ExistingFile);
  cmd->add_option("-s,--set", args.overrides, "Override a config value, e.g. train.lr=0.002")->take_all();
  cmd->add_option("-o,--out", args.out_dir, "Output directory")->capture_default_str();
}

std::pair<std::int64_t, std::int64_t> parse_size(const std::string& text) {
  static const std::regex re(R"((\d+)x(\d+))");
  std::smatch m;
  if (!std::regex_match(text, m, re)) throw CLI::ValidationError("--input", "expected HxW, got '" + text + "'");
  return {std::stoll(m[1]), std::stoll(m[2])};
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// Output directory of one command; every file goes through here so the
// manifest can list it.
class RunDir {
 public:
  RunDir(fs::path root, std::string command, int argc, char** argv)
      : root_(std::move(root)), command_(std::move(command)), started_(utc_now()),
        t0_(std::chrono::steady_clock::now()) {
    for (int i = 0; i < argc; ++i) argv_.emplace_back(argv[i]);
    fs::create_directories(root_);
  }

  const fs::path& root() const { return root_; }

  fs::path write(const std::string& rel, const std::string& text) {
    const auto p = root_ / rel;
    fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    f << text;
    if (!f) throw std::runtime_error("cannot write " + p.string());
    note(rel);
    return p;
  }
  fs::path write_json(const std::string& rel, const Json& j) { return write(rel, j.dump(2) + "\n"); }
  void note(const std::string& rel) {
    if (std::find(files_.begin(), files_.end(), rel) == files_.end()) files_.push_back(rel);
  }

  void snapshot(const config::RunConfig& cfg) {
    write_json("resolved_config.json", config::to_json(cfg));
    config_hash_ = config::hex(config::config_hash(cfg));
  }

  void finish(int exit_code, Json extra = Json::object()) {
    Json m;
    m["command"] = command_;
    m["argv"] = argv_;
    m["started"] = started_;
    m["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    m["exit_code"] = exit_code;
    if (!config_hash_.empty()) m["config_hash"] = config_hash_;
    m["hardware"] = analysis::hardware_descriptor();
    Json files = Json::array();
    for (const auto& rel : files_) {
      std::error_code ec;
      const auto size = fs::file_size(root_ / rel, ec);
      files.push_back({{"path", rel}, {"bytes", ec ? 0 : size}});
    }
    m["files"] = files;
    for (auto& [k, v] : extra.items()) m[k] = v;
    std::ofstream(root_ / "manifest.json") << m.dump(2) << "\n";
  }

 private:
  fs::path root_;
  std::string command_, started_, config_hash_;
  std::chrono::steady_clock::time_point t0_;
  std::vector<std::string> argv_, files_;
};

config::RunConfig resolve(const CommonArgs& args) { return config::resolve(args.config_path, args.overrides); }

Json budget_json(const analysis::BudgetReport& r) {
  Json j;
  j["variant"] = r.variant;
  j["input"] = {r.input_h, r.input_w};
  j["ops_per_mac"] = r.ops_per_mac;
  j["total_params"] = r.total_params;
  j["total_flops"] = r.flops();
  j["total_macs"] = r.cost.macs;
  Json params = Json::object(), flops = Json::object();
  for (const auto& [k, v] : r.params_by_module) params[k.empty() ? "(root)" : k] = v;
  for (const auto& [k, v] : r.cost_by_module) flops[k.empty() ? "(root)" : k] = v.flops(r.ops_per_mac);
  j["params_by_module"] = params;
  j["flops_by_module"] = flops;
  if (r.latency) {
    j["latency_ms"] = {{"median", r.latency->median_ms}, {"p10", r.latency->p10_ms}, {"p90", r.latency->p90_ms},
                       {"samples", r.latency->samples_ms}, {"warmup", r.latency->warmup}};
    j["hardware"] = r.latency->hardware;
  }
  return j;
}

Json report_json(const metrics::MetricReport& r) {
  Json j;
  Json per_class = Json::object();
  for (std::size_t c = 0; c < r.class_names.size(); ++c)
    per_class[r.class_names[c]] = r.iou[c] ? Json(*r.iou[c]) : Json(nullptr);
  j["iou"] = per_class;
  j["miou"] = r.miou ? Json(*r.miou) : Json(nullptr);
  return j;
}

// --- analyze ---------------------------------------------------------------

struct AnalyzeArgs {
  CommonArgs common;
  std::string variant, input;
  int depth = 1, mac = 1, latency_trials = 0;
};

int cmd_analyze(const AnalyzeArgs& a, int argc, char** argv) {
  // The budget is quoted for the 19-class Cityscapes model unless a config says otherwise.
  auto common = a.common;
  if (common.config_path.empty()) common.overrides.insert(common.overrides.begin(), "data.dataset=cityscapes");
  auto cfg = resolve(common);
  if (!a.variant.empty()) cfg.model = model::make_variant(a.variant, cfg.model);
  auto [h, w] = a.input.empty() ? std::pair{cfg.model.input_h, cfg.model.input_w} : parse_size(a.input);
  model::check_input_size(h, w);
  RunDir run(a.common.out_dir, "analyze", argc, argv);
  run.snapshot(cfg);
  auto report = analysis::analyze(cfg.model, h, w, a.mac, a.depth);
  if (a.latency_trials > 0) {
    model::ECMNet<float> net(cfg.model, cfg.train.seed);
    report.latency = analysis::benchmark_latency(net, h, w, a.latency_trials);
  }
  const auto text = report.to_text(a.depth);
  std::cout << text;
  run.write("budget.txt", text);
  run.write_json("budget.json", budget_json(report));
  run.finish(kExitOk);
  return kExitOk;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  CommonArgs common;
  std::string resume;
  int stop_after = 0;
  std::optional<double> min_miou;
};

int cmd_train(const TrainArgs& a, int argc, char** argv) {
  auto cfg = resolve(a.common);
  RunDir run(a.common.out_dir, "train", argc, argv);
  run.snapshot(cfg);
  train::DataSource data(cfg.data);
  model::ECMNet<float> net(cfg.model, cfg.train.seed);
  train::TrainOptions opts;
  opts.out_dir = run.root();
  opts.stop_after = a.stop_after;
  opts.log = &std::cout;
  if (!a.resume.empty()) opts.resume = fs::path(a.resume);

  Json extra;
  int code = kExitOk;
  try {
    auto result = train::train_loop(net, data, cfg, opts);
    run.note("history.jsonl");
    for (const auto& entry : fs::recursive_directory_iterator(run.root() / "checkpoints"))
      if (entry.is_regular_file()) run.note(fs::relative(entry.path(), run.root()).string());
    extra["iterations"] = result.iterations;
    extra["train_seconds"] = result.seconds;
    if (result.final_miou) extra["final_miou"] = *result.final_miou;
    if (result.best_miou) extra["best_miou"] = *result.best_miou;
    if (a.min_miou && (!result.final_miou || *result.final_miou < *a.min_miou)) {
      std::cerr << "final mIoU below the required " << *a.min_miou << "\n";
      code = kExitCheckFailed;
    }
  } catch (const train::TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    extra["diverged"] = {{"iteration", e.iteration}, {"lr", e.lr}, {"grad_norm", e.grad_norm}, {"loss", e.loss}};
    code = kExitCheckFailed;
  }
  run.finish(code, extra);
  return code;
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  CommonArgs common;
  std::string checkpoint;
  int batch = 4;
  std::optional<double> min_miou;
};

int cmd_eval(const EvalArgs& a, int argc, char** argv) {
  auto ckpt = train::load_checkpoint(a.checkpoint);
  auto cfg = config::from_json(ckpt.config);
  if (!a.common.config_path.empty() || !a.common.overrides.empty()) {
    // Data settings may change; the architecture must be the one trained.
    auto j = a.common.config_path.empty() ? ckpt.config : config::to_json(config::resolve(a.common.config_path, {}));
    for (const auto& o : a.common.overrides) config::apply_override(j, o);
    cfg = config::from_json(j);
  }
  if (config::hex(config::model_hash(cfg.model)) != ckpt.model_hash)
    throw ConfigError("model config does not match checkpoint " + a.checkpoint + " (model hash " +
                      config::hex(config::model_hash(cfg.model)) + " vs " + ckpt.model_hash + ")");

  RunDir run(a.common.out_dir, "eval", argc, argv);
  run.snapshot(cfg);
  train::DataSource data(cfg.data);
  std::optional<model::ECMNet<float>> net;
  train::Predictor predict;
  if (ckpt.kind == "label_oracle") {
    predict = train::label_oracle_predictor(data.num_classes());
  } else {
    net.emplace(cfg.model, cfg.train.seed);
    train::restore_weights(*net, ckpt);
    predict = train::model_predictor(*net);
  }
  const auto cm = train::evaluate(predict, data, a.batch);
  const auto report = metrics::report(cm, data.class_names());
  const auto text = report.to_text();
  std::cout << text;
  run.write("metrics.txt", text);
  run.write_json("metrics.json", report_json(report));

  int code = kExitOk;
  if (a.min_miou && (!report.miou || *report.miou < *a.min_miou)) {
    std::cerr << "mIoU below the required " << *a.min_miou << "\n";
    code = kExitCheckFailed;
  }
  run.finish(code, {{"checkpoint", fs::absolute(a.checkpoint).string()},
                    {"miou", report.miou ? Json(*report.miou) : Json(nullptr)}});
  return code;
}

// --- ablate ----------------------------------------------------------------

struct AblateArgs {
  CommonArgs common;
  std::vector<std::string> variants;
  std::vector<std::uint64_t> seeds{0, 1, 2};
};

int cmd_ablate(const AblateArgs& a, int argc, char** argv) {
  auto cfg = resolve(a.common);
  auto variants = a.variants.empty() ? model::variant_names() : a.variants;
  for (const auto& v : variants) model::make_variant(v, cfg.model);
  RunDir run(a.common.out_dir, "ablate", argc, argv);
  run.snapshot(cfg);
  train::TrainOptions opts;
  opts.log = &std::cout;
  const auto report = train::run_ablation_suite(variants, a.seeds, cfg, opts);
  const auto text = report.to_text();
  std::cout << text;
  run.write("ablation.txt", text);
  run.write_json("ablation.json", report.to_json());
  run.finish(kExitOk);
  return kExitOk;
}

// --- selfcheck -------------------------------------------------------------

struct SelfcheckArgs {
  std::string out_dir;
  std::vector<std::string> suites;
  std::string fault;
};

int cmd_selfcheck(const SelfcheckArgs& a, int argc, char** argv) {
  if (!a.fault.empty()) {
    if (a.fault != "cross_scan") throw ConfigError("unknown fault '" + a.fault + "'");
    scan::set_cross_scan_fault(true);
  }
  const auto results = selfcheck::run(a.suites, &std::cout);
  bool ok = true;
  double total = 0;
  Json j = Json::array();
  for (const auto& r : results) {
    ok = ok && r.passed;
    total += r.seconds;
    j.push_back({{"suite", r.name}, {"passed", r.passed}, {"seconds", r.seconds}, {"detail", r.detail}});
  }
  std::cout << (ok ? "selfcheck passed" : "selfcheck FAILED") << " in " << std::fixed << std::setprecision(2) << total
            << "s\n";
  for (const auto& r : results)
    if (!r.passed) std::cerr << "failed suite: " << r.name << "\n";
  const int code = ok ? kExitOk : kExitCheckFailed;
  if (!a.out_dir.empty()) {
    RunDir run(a.out_dir, "selfcheck", argc, argv);
    run.write_json("selfcheck.json", j);
    run.finish(code);
  }
  return code;
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
  CommonArgs common;
  int count = 8;
  bool painted = false;
};

cv::Mat to_bgr8(const data::SegSample& s, bool painted) {
  const auto img = painted ? data::paint_labels(s) : s;
  cv::Mat m(static_cast<int>(s.height), static_cast<int>(s.width), CV_8UC3);
  const auto plane = s.height * s.width;
  for (std::int64_t y = 0; y < s.height; ++y)
    for (std::int64_t x = 0; x < s.width; ++x) {
      auto& px = m.at<cv::Vec3b>(static_cast<int>(y), static_cast<int>(x));
      for (int c = 0; c < 3; ++c) {
        const float v = img.image[static_cast<std::size_t>(c * plane + y * s.width + x)];
        px[2 - c] = cv::saturate_cast<std::uint8_t>(v * 255.0f + 0.5f);
      }
    }
  return m;
}

int cmd_synth(const SynthArgs& a, int argc, char** argv) {
  auto cfg = resolve(a.common);
  if (cfg.data.dataset != "synthetic") throw ConfigError("synth needs data.dataset=synthetic");
  RunDir run(a.common.out_dir, "synth", argc, argv);
  run.snapshot(cfg);
  const auto& d = cfg.data;
  for (int i = 0; i < a.count; ++i) {
    const auto s = data::synth_sample(d.val_seed, i, d.height, d.width, d.num_classes,
                                      d.synth);
    cv::Mat label(static_cast<int>(s.height), static_cast<int>(s.width), CV_8UC1);
    for (std::int64_t p = 0; p < s.height * s.width; ++p)
      label.data[p] = static_cast<std::uint8_t>(s.label[static_cast<std::size_t>(p)]);
    std::ostringstream stem;
    stem << "samples/" << std::setw(4) << std::setfill('0') << i;
    for (const auto& [suffix, mat] : {std::pair{"_image.png", to_bgr8(s, a.painted || d.paint_labels)},
                                      std::pair{"_color.png", to_bgr8(s, true)}, std::pair{"_label.png", label}}) {
      const auto rel = stem.str() + suffix;
      fs::create_directories((run.root() / rel).parent_path());
      if (!cv::imwrite((run.root() / rel).string(), mat)) throw std::runtime_error("cannot write " + rel);
      run.note(rel);
    }
  }
  // Validation data painted in class colours, read back by a colour lookup.
  auto oracle_cfg = cfg;
  oracle_cfg.data.paint_labels = true;
  train::save_checkpoint(train::label_oracle_checkpoint(oracle_cfg), run.root() / "oracle.ckpt");
  run.note("oracle.ckpt");
  Json priors = Json::array();
  for (double p : data::synth_class_priors(d.height, d.width, d.num_classes, d.synth)) priors.push_back(p);
  run.write_json("classes.json", {{"names", data::synth_class_names(d.num_classes)}, {"priors", priors}});
  std::cout << "wrote " << a.count << " samples and oracle.ckpt to " << run.root().string() << "\n";
  run.finish(kExitOk);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ECMNet segmentation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ecmnet 0.1.0");

  AnalyzeArgs analyze;
  auto* c_analyze = app.add_subcommand("analyze", "Parameter and FLOP budget at an input size");
  add_common(c_analyze, analyze.common, "runs/analyze");
  c_analyze->add_option("--variant", analyze.variant, "Ablation variant (Baseline, A1..C3)");
  c_analyze->add_option("--input", analyze.input, "Input size HxW (default: model.input_h x model.input_w)");
  c_analyze->add_option("--depth", analyze.depth, "Itemization depth, 0 for totals only")
      ->check(CLI::Range(0, 8))
      ->capture_default_str();
  c_analyze->add_option("--mac", analyze.mac, "FLOPs per multiply-accumulate")
      ->check(CLI::IsMember({1, 2}))
      ->capture_default_str();
  c_analyze->add_option("--latency", analyze.latency_trials, "Also time N forward passes")->check(CLI::NonNegativeNumber);

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a model");
  add_common(c_train, tr.common, "runs/train");
  c_train->add_option("--resume", tr.resume, "Checkpoint to continue from");
  c_train->add_option("--stop-after", tr.stop_after, "Checkpoint and stop at this iteration")
      ->check(CLI::NonNegativeNumber);
  c_train->add_option("--min-miou", tr.min_miou, "Exit 1 when the final mIoU is lower");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Per-class IoU of a checkpoint on the validation data");
  add_common(c_eval, ev.common, "runs/eval");
  c_eval->add_option("checkpoint,--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  c_eval->add_option("--batch", ev.batch, "Evaluation batch size")->check(CLI::PositiveNumber)->capture_default_str();
  c_eval->add_option("--min-miou", ev.min_miou, "Exit 1 when mIoU is lower");

  AblateArgs ab;
  auto* c_ablate = app.add_subcommand("ablate", "Train ablation variants over several seeds");
  add_common(c_ablate, ab.common, "runs/ablate");
  c_ablate->add_option("--variants", ab.variants, "Variants to train (default: all)")->delimiter(',');
  c_ablate->add_option("--seeds", ab.seeds, "Training seeds")->delimiter(',')->capture_default_str();

  SelfcheckArgs sc;
  auto* c_self = app.add_subcommand("selfcheck", "Run the built-in oracle and gradient suites");
  c_self->add_option("-o,--out", sc.out_dir, "Write selfcheck.json and manifest.json here");
  c_self->add_option("--suite", sc.suites, "Run only these suites")->delimiter(',');
  c_self->add_option("--fault", sc.fault, "Test hook: corrupt a component (cross_scan)")->group("");

  SynthArgs sy;
  auto* c_synth = app.add_subcommand("synth", "Write synthetic samples and a label-oracle checkpoint");
  add_common(c_synth, sy.common, "runs/synth");
  c_synth->add_option("-n,--count", sy.count, "Number of samples")->check(CLI::NonNegativeNumber)->capture_default_str();
  c_synth->add_flag("--painted", sy.painted, "Save images painted in class colours");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_analyze->parsed()) return cmd_analyze(analyze, argc, argv);
    if (c_train->parsed()) return cmd_train(tr, argc, argv);
    if (c_eval->parsed()) return cmd_eval(ev, argc, argv);
    if (c_ablate->parsed()) return cmd_ablate(ab, argc, argv);
    if (c_self->parsed()) return cmd_selfcheck(sc, argc, argv);
    if (c_synth->parsed()) return cmd_synth(sy, argc, argv);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const data::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
  return kExitUsage;
}
