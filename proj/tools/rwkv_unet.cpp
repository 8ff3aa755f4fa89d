// Copyright 2026 The RWKV-UNet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <streambuf>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rwkvunet/analysis.hpp"
#include "rwkvunet/autodiff.hpp"
#include "rwkvunet/checkpoint.hpp"
#include "rwkvunet/config.hpp"
#include "rwkvunet/data_io.hpp"
#include "rwkvunet/gradcheck.hpp"
#include "rwkvunet/image_io.hpp"
#include "rwkvunet/model.hpp"
#include "rwkvunet/nn.hpp"
#include "rwkvunet/random.hpp"
#include "rwkvunet/trainer.hpp"

namespace fs = std::filesystem;
using namespace rwkvunet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

/// Thrown for bad arguments detected after parsing.
class UsageError : public Error {
 public:
  using Error::Error;
};

class TeeBuf : public std::streambuf {
 public:
  TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

 protected:
  int overflow(int c) override {
    if (c == EOF) return !EOF;
    const bool ok = a_->sputc(static_cast<char>(c)) != EOF && b_->sputc(static_cast<char>(c)) != EOF;
    return ok ? c : EOF;
  }
  int sync() override { return a_->pubsync() == 0 && b_->pubsync() == 0 ? 0 : -1; }

 private:
  std::streambuf* a_;
  std::streambuf* b_;
};

const std::vector<std::string> kVariantNames{"t", "s", "b", "tiny", "small", "base"};

DType parse_dtype(const std::string& s) { return s == "float64" ? DType::kFloat64 : DType::kFloat32; }

std::int64_t infer_class_count(const Manifest& manifest) {
  std::int32_t top = 0;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const LabelMap m = labels_from_image(read_image(manifest.mask_path(i)));
    top = std::max(top, *std::max_element(m.labels.begin(), m.labels.end()));
  }
  return std::max<std::int64_t>(2, top + 1);
}

// ---- train ----

struct TrainArgs {
  std::string config;
  std::optional<std::string> data, out, variant, resume, dtype;
  std::optional<int> epochs, batch_size, stop_after;
  std::optional<double> lr, lr_min, weight_decay, alpha, beta, grad_clip;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> resolution, classes;
  bool augment = false;
};

int run_train(const TrainArgs& a) {
  TrainConfig cfg;
  std::string data_dir, out_dir = "run";
  std::int64_t resolution = 0, classes = 0;
  if (!a.config.empty()) {
    KeyValues kv = KeyValues::load(a.config);
    if (auto v = kv.take_string("data")) data_dir = *v;
    if (auto v = kv.take_string("out")) out_dir = *v;
    if (auto v = kv.take_int("resolution")) resolution = *v;
    if (auto v = kv.take_int("classes")) classes = *v;
    apply_train_config(kv, cfg);
    kv.check_consumed();
    if (!cfg.checkpoint_dir.empty()) out_dir = cfg.checkpoint_dir;
  }
  if (a.data) data_dir = *a.data;
  if (a.out) out_dir = *a.out;
  if (a.resolution) resolution = *a.resolution;
  if (a.classes) classes = *a.classes;
  if (a.variant) cfg.variant = parse_variant(*a.variant);
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.stop_after) cfg.stop_after = *a.stop_after;
  if (a.lr) cfg.lr_init = *a.lr;
  if (a.lr_min) cfg.lr_min = *a.lr_min;
  if (a.weight_decay) cfg.weight_decay = *a.weight_decay;
  if (a.alpha) cfg.loss.alpha = *a.alpha;
  if (a.beta) cfg.loss.beta = *a.beta;
  if (a.grad_clip) cfg.grad_clip = *a.grad_clip;
  if (a.seed) cfg.seed = *a.seed;
  if (a.dtype) cfg.dtype = parse_dtype(*a.dtype);
  if (a.augment) cfg.augment = true;
  cfg.checkpoint_dir = out_dir;

  if (data_dir.empty()) throw UsageError("no data directory given (use --data or 'data' in the config file)");
  if (!fs::is_directory(data_dir)) throw UsageError("data directory '" + data_dir + "' does not exist");
  try {
    cfg.validate();
  } catch (const ValueError& e) {
    throw UsageError(e.what());
  }

  const Manifest manifest = read_manifest(data_dir);
  if (classes == 0) classes = infer_class_count(manifest);
  if (resolution == 0) resolution = read_image(manifest.image_path(0)).height;
  const Dataset data = load_dataset(manifest, resolution, classes, cfg.dtype);
  std::cout << "training " << variant_name(cfg.variant) << " on " << data.samples.size() << " samples at "
            << resolution << "x" << resolution << ", " << classes << " classes" << std::endl;

  fs::create_directories(out_dir);
  std::ofstream log_file(fs::path(out_dir) / "train.log", a.resume ? std::ios::app : std::ios::trunc);
  TeeBuf tee(std::cout.rdbuf(), log_file.rdbuf());
  std::ostream log(&tee);
  const TrainResult r = a.resume ? resume(cfg, data, *a.resume, &log) : train(cfg, data, &log);
  std::cout << "finished " << r.completed_epochs << " epochs, best dsc " << r.best_dsc << " at epoch "
            << r.best_epoch << ", outputs in " << out_dir << std::endl;
  return kExitOk;
}

// ---- infer ----

struct InferArgs {
  std::string checkpoint, input, output, logits;
  std::int64_t classes = 0;
  std::int64_t resolution = 0;
};

bool is_image_file(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

int run_infer(const InferArgs& a) {
  SegmentationModel model = load_checkpoint(a.checkpoint);
  const std::int64_t implied = model.config.num_classes == 1 ? 2 : model.config.num_classes;
  if (a.classes != 0 && a.classes != implied) {
    throw UsageError("checkpoint predicts " + std::to_string(implied) + " classes but --classes is " +
                     std::to_string(a.classes));
  }
  std::vector<std::pair<fs::path, fs::path>> jobs;
  if (fs::is_directory(a.input)) {
    fs::create_directories(a.output);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(a.input)) {
      if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) jobs.emplace_back(f, fs::path(a.output) / f.filename().replace_extension(".png"));
  } else {
    jobs.emplace_back(a.input, a.output);
  }
  if (jobs.empty()) throw UsageError("no images found in '" + a.input + "'");

  std::vector<NamedTensor> dumped;
  NoGradGuard guard;
  for (const auto& [in, out] : jobs) {
    const Image img = read_image(in.string());
    Tensor x = image_to_tensor(img, model.dtype());
    if (a.resolution > 0) x = nn::bilinear_resize(x, a.resolution, a.resolution);
    const Tensor logits = model.forward(x);
    LabelMap pred = predict_labels(logits);
    if (pred.height != img.height || pred.width != img.width) pred = resize_labels(pred, img.height, img.width);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_png(out.string(), image_from_labels(pred));
    if (!a.logits.empty()) dumped.push_back({"logits." + in.filename().string(), logits});
    std::cout << in.string() << " -> " << out.string() << std::endl;
  }
  if (!a.logits.empty()) write_tensors(a.logits, dumped);
  return kExitOk;
}

// ---- count ----

struct CountArgs {
  std::string variant = "base";
  std::int64_t res = 224, in_channels = 3, classes = 9;
  bool csv = false, key_value = false, flops = false;
};

int run_count(const CountArgs& a) {
  analysis::CostReport r;
  try {
    r = analysis::count(parse_variant(a.variant), a.in_channels, a.classes, a.res);
  } catch (const ValueError& e) {
    throw UsageError(e.what());
  }
  r.multiply_add = a.flops;
  if (a.csv) {
    std::cout << r.to_csv();
  } else if (a.key_value) {
    std::cout << r.to_key_value();
  } else {
    std::cout << r.to_text();
    std::cout << std::fixed << std::setprecision(3) << "total: " << static_cast<double>(r.params()) / 1e6
              << "M params, " << static_cast<double>(r.operations()) / 1e9 << "G " << r.convention() << '\n';
  }
  return kExitOk;
}

// ---- gradcheck ----

int run_gradcheck(std::uint64_t seed, double tolerance) {
  bool ok = true;
  for (const auto& r : gradcheck_suite(seed)) {
    const bool pass = r.passed(tolerance);
    ok = ok && pass;
    std::printf("%-4s %-28s elements=%-6lld rel_err=%.3e abs_err=%.3e worst=%s\n", pass ? "ok" : "FAIL",
                r.name.c_str(), static_cast<long long>(r.elements), r.max_rel_error, r.max_abs_error,
                r.worst_input.c_str());
  }
  std::printf("%s (tolerance %.1e)\n", ok ? "all gradients match" : "gradient mismatch", tolerance);
  return ok ? kExitOk : kExitFailure;
}

// ---- bench ----

struct BenchArgs {
  std::string variant = "tiny";
  std::vector<std::int64_t> res{128, 256, 512};
  std::int64_t in_channels = 3, classes = 9;
  int repeats = 1;
  std::uint64_t seed = 0;
};

int run_bench(const BenchArgs& a) {
  const ModelConfig cfg = ModelConfig::make(parse_variant(a.variant), a.in_channels, a.classes);
  const SegmentationModel model = build_model(cfg, a.seed);
  std::printf("variant %s, batch 1, convention MACs\n", variant_name(cfg.variant).c_str());
  std::printf("%6s %16s %8s %12s\n", "res", "macs", "ratio", "seconds");
  std::int64_t base_macs = 0;
  Rng rng(a.seed);
  for (const auto r : a.res) {
    analysis::CostReport report;
    try {
      report = analysis::count(cfg, r, r);
    } catch (const ValueError& e) {
      throw UsageError(e.what());
    }
    if (base_macs == 0) base_macs = report.macs();
    std::vector<float> values(static_cast<std::size_t>(a.in_channels * r * r));
    for (auto& v : values) v = static_cast<float>(rng.uniform());
    const Tensor x = Tensor::from_vector({1, a.in_channels, r, r}, std::move(values));
    NoGradGuard guard;
    std::vector<double> times;
    for (int i = 0; i < std::max(1, a.repeats); ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      model.forward(x);
      times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::sort(times.begin(), times.end());
    std::printf("%6lld %16lld %8.4f %12.4f\n", static_cast<long long>(r), static_cast<long long>(report.macs()),
                static_cast<double>(report.macs()) / static_cast<double>(base_macs), times[times.size() / 2]);
    std::fflush(stdout);
  }
  return kExitOk;
}

// ---- synth ----

struct SynthArgs {
  std::string config, out;
  std::optional<int> count, resolution, classes, channels;
  std::optional<double> noise;
  std::optional<std::uint64_t> seed;
};

int run_synth(const SynthArgs& a) {
  SyntheticSpec spec;
  std::string out = a.out;
  if (!a.config.empty()) {
    KeyValues kv = KeyValues::load(a.config);
    if (auto v = kv.take_string("out")) {
      if (out.empty()) out = *v;
    }
    apply_synthetic_spec(kv, spec);
    kv.check_consumed();
  }
  if (a.count) spec.count = *a.count;
  if (a.resolution) spec.resolution = *a.resolution;
  if (a.classes) spec.class_count = *a.classes;
  if (a.channels) spec.channels = *a.channels;
  if (a.noise) spec.noise = *a.noise;
  if (a.seed) spec.seed = *a.seed;
  if (out.empty()) throw UsageError("no output directory given (use --out)");
  Manifest m;
  try {
    m = generate_synthetic(spec, out);
  } catch (const ValueError& e) {
    throw UsageError(e.what());
  }
  std::cout << "wrote " << m.records.size() << " samples to " << out << std::endl;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RWKV-UNet segmentation: training, inference and cost analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "rwkv_unet 0.1.0");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a manifest directory");
  train_cmd->add_option("--config", train_args.config, "key = value settings file; flags override it")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--data", train_args.data, "Dataset directory holding manifest.tsv");
  train_cmd->add_option("--variant", train_args.variant, "Model variant")->check(CLI::IsMember(kVariantNames));
  train_cmd->add_option("--epochs", train_args.epochs, "Number of epochs");
  train_cmd->add_option("--batch-size", train_args.batch_size, "Samples per step");
  train_cmd->add_option("--lr", train_args.lr, "Initial learning rate");
  train_cmd->add_option("--lr-min", train_args.lr_min, "Final cosine learning rate");
  train_cmd->add_option("--weight-decay", train_args.weight_decay, "Decoupled weight decay");
  train_cmd->add_option("--alpha", train_args.alpha, "Cross-entropy weight");
  train_cmd->add_option("--beta", train_args.beta, "Dice weight");
  train_cmd->add_option("--grad-clip", train_args.grad_clip, "Global gradient norm cap (0 disables)");
  train_cmd->add_option("--seed", train_args.seed, "Random seed");
  train_cmd->add_option("--out", train_args.out, "Output directory for checkpoints, log and summary");
  train_cmd->add_option("--resolution", train_args.resolution, "Square training resolution (default: image size)");
  train_cmd->add_option("--classes", train_args.classes, "Class count including background (default: from masks)");
  train_cmd->add_option("--dtype", train_args.dtype, "Parameter precision")
      ->check(CLI::IsMember({"float32", "float64"}));
  train_cmd->add_option("--stop-after", train_args.stop_after, "Stop after this epoch, keeping the schedule");
  train_cmd->add_option("--resume", train_args.resume, "Continue from a last.ckpt")->check(CLI::ExistingFile);
  train_cmd->add_flag("--augment", train_args.augment, "Random flips and quarter turns");

  InferArgs infer_args;
  auto* infer_cmd = app.add_subcommand("infer", "Predict label masks");
  infer_cmd->add_option("--checkpoint", infer_args.checkpoint, "Model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  infer_cmd->add_option("--input", infer_args.input, "Image file or directory")->required()->check(CLI::ExistingPath);
  infer_cmd->add_option("--output", infer_args.output, "Mask PNG, or directory for directory input")->required();
  infer_cmd->add_option("--classes", infer_args.classes, "Expected class count (checked against the checkpoint)");
  infer_cmd->add_option("--resolution", infer_args.resolution, "Resize inputs to this square size first");
  infer_cmd->add_option("--logits", infer_args.logits, "Also write raw logits to this tensor file");

  CountArgs count_args;
  auto* count_cmd = app.add_subcommand("count", "Report parameters and MACs per component");
  count_cmd->add_option("--variant", count_args.variant, "Model variant")
      ->check(CLI::IsMember(kVariantNames))
      ->capture_default_str();
  count_cmd->add_option("--res", count_args.res, "Square input resolution")->capture_default_str();
  count_cmd->add_option("--in-channels", count_args.in_channels, "Input channels")->capture_default_str();
  count_cmd->add_option("--classes", count_args.classes, "Output classes")->capture_default_str();
  count_cmd->add_flag("--csv", count_args.csv, "One CSV row per component");
  count_cmd->add_flag("--kv", count_args.key_value, "key=value lines");
  count_cmd->add_flag("--flops", count_args.flops, "Count multiply and add separately (2 x MACs)");

  std::uint64_t gradcheck_seed = 0;
  double gradcheck_tol = 1e-4;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every block");
  gradcheck_cmd->add_option("--seed", gradcheck_seed, "Random seed")->capture_default_str();
  gradcheck_cmd->add_option("--tolerance", gradcheck_tol, "Relative error bound")->capture_default_str();

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "Forward wall-clock and MACs across resolutions");
  bench_cmd->add_option("--res", bench_args.res, "Resolutions")->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--variant", bench_args.variant, "Model variant")
      ->check(CLI::IsMember(kVariantNames))
      ->capture_default_str();
  bench_cmd->add_option("--in-channels", bench_args.in_channels, "Input channels")->capture_default_str();
  bench_cmd->add_option("--classes", bench_args.classes, "Output classes")->capture_default_str();
  bench_cmd->add_option("--repeats", bench_args.repeats, "Timed runs per resolution (median)")->capture_default_str();
  bench_cmd->add_option("--seed", bench_args.seed, "Random seed")->capture_default_str();

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic shapes dataset");
  synth_cmd->add_option("--config", synth_args.config, "key = value settings file; flags override it")
      ->check(CLI::ExistingFile);
  synth_cmd->add_option("--out", synth_args.out, "Output directory");
  synth_cmd->add_option("--count", synth_args.count, "Number of images");
  synth_cmd->add_option("--resolution", synth_args.resolution, "Square image size");
  synth_cmd->add_option("--classes", synth_args.classes, "Class count including background");
  synth_cmd->add_option("--channels", synth_args.channels, "1 (gray) or 3 (RGB)");
  synth_cmd->add_option("--noise", synth_args.noise, "Gaussian noise sigma");
  synth_cmd->add_option("--seed", synth_args.seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return run_train(train_args);
    if (*infer_cmd) return run_infer(infer_args);
    if (*count_cmd) return run_count(count_args);
    if (*gradcheck_cmd) return run_gradcheck(gradcheck_seed, gradcheck_tol);
    if (*bench_cmd) return run_bench(bench_args);
    if (*synth_cmd) return run_synth(synth_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
