#include "ffcnet/app.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <spdlog/spdlog.h>

#include "ffcnet/fft.hpp"
#include "ffcnet/parallel.hpp"

namespace ffcnet {

namespace fs = std::filesystem;

namespace {

template <typename Fn>
auto with_precision(Precision p, Fn&& fn) {
  return p == Precision::kF64 ? fn(double{}) : fn(float{});
}

struct LoadedData {
  DatasetIndex index;
  std::vector<LabeledImage> train, val, test;
  std::size_t channels = 0;
};

LoadedData load_data(const RunConfig& cfg, bool need_test) {
  LoadedData d;
  d.index = load_folder(cfg.dataset_root(), cfg.seed);
  d.train = load_split(d.index, Split::kTrain, cfg.image_size, cfg.workers);
  d.val = load_split(d.index, Split::kVal, cfg.image_size, cfg.workers);
  if (need_test) d.test = load_split(d.index, Split::kTest, cfg.image_size, cfg.workers);
  if (d.train.empty()) throw ConfigError("dataset " + cfg.dataset_root().string() + " has an empty training split");
  d.channels = d.train.front().pixels.shape()[0];
  spdlog::info("dataset {}: {} classes, {} train / {} val{}", cfg.dataset_root().string(), d.index.class_names.size(),
               d.train.size(), d.val.size(), need_test ? " / " + std::to_string(d.test.size()) + " test" : "");
  return d;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  os << text;
  if (!os) throw FormatError("cannot write " + path.string());
}

}  // namespace

void cmd_gen_data(const RunConfig& cfg) {
  validate(cfg, Command::kGenData);
  const fs::path root = cfg.dataset_root();
  fs::create_directories(root);
  const SyntheticSet set = generate_synthetic(cfg.synth, cfg.seed);
  const auto files = write_synthetic(root, set, cfg.synth, cfg.seed);
  spdlog::info("wrote {} images in {} classes to {}", files.size(), set.index.class_names.size(), root.string());
}

void cmd_preprocess(const RunConfig& cfg) {
  validate(cfg, Command::kPreprocess);
  const DatasetIndex index = load_folder(cfg.dataset_root(), cfg.seed);
  const fs::path dir = cfg.out_dir / "cache";
  fs::create_directories(dir);
  // The cache format describes the channel-stacked layout.
  PsmConfig psm = cfg.train.psm;
  psm.layout = PatchLayout::kChannels;
  const auto K = static_cast<std::size_t>(psm.patches_per_side);
  for (Split split : {Split::kTrain, Split::kVal, Split::kTest}) {
    const auto images = load_split(index, split, cfg.image_size, cfg.workers);
    SpectralCache cache;
    cache.samples.resize(images.size());
    parallel_for(images.size(), cfg.deterministic ? 1 : cfg.workers, [&](std::size_t i) {
      const auto s = apply_psm(cast<float>(images[i].pixels), psm, /*training=*/false);
      cache.samples[i] = {static_cast<std::uint16_t>(images[i].label), fnv1a64(images[i].source_id), s.patches};
    });
    if (!images.empty()) {
      const Shape& s = cache.samples.front().patches.shape();
      cache.header = {static_cast<std::uint16_t>(s[0] / (K * K)), static_cast<std::uint16_t>(K),
                      static_cast<std::uint16_t>(s[1]), static_cast<std::uint16_t>(s[2])};
    }
    const fs::path path = dir / (std::string(split_name(split)) + ".ffcs");
    write_spectral_cache(path, cache);
    spdlog::info("{}: {} samples -> {}", split_name(split), images.size(), path.string());
  }
}

double cmd_train(const RunConfig& cfg) {
  validate(cfg, Command::kTrain);
  const LoadedData d = load_data(cfg, false);
  fs::create_directories(cfg.out_dir);
  write_text(cfg.out_dir / "run_config.ini", dump_config(cfg));
  const TrainConfig t = cfg.effective_train();
  return with_precision(cfg.precision, [&](auto tag) {
    using T = decltype(tag);
    TrainOutputs<T> outputs{cfg.out_dir, {}};
    const auto r = train<T>(d.train, d.val, d.index.class_names, cfg.arch.build(), t, outputs);
    spdlog::info("best validation accuracy {:.2f}% at epoch {}", 100 * r.state.best_val_accuracy, r.state.best_epoch);
    return r.state.best_val_accuracy;
  });
}

double cmd_eval(const RunConfig& cfg) {
  validate(cfg, Command::kEval);
  const DatasetIndex index = load_folder(cfg.dataset_root(), cfg.seed);
  const auto samples = load_split(index, cfg.eval_split, cfg.image_size, cfg.workers);
  if (samples.empty()) throw ConfigError(std::string("split '") + split_name(cfg.eval_split) + "' is empty");
  const std::size_t channels = samples.front().pixels.shape()[0];
  const ArchitectureSpec arch =
      adapt_architecture(cfg.arch.build(), cfg.train.psm, channels, index.class_names.size());

  const EvalResult r = with_precision(cfg.precision, [&](auto tag) {
    using T = decltype(tag);
    Model<T> model(arch, 0);
    load_checkpoint(cfg.checkpoint_path(), model);
    return evaluate(model, samples, cfg.train.psm, index.class_names, cfg.train.batch_size,
                    cfg.deterministic ? 1 : cfg.workers);
  });

  const MetricsSummary weighted = summarize(r.confusion, Averaging::kWeighted);
  const MetricsSummary macro = summarize(r.confusion, Averaging::kMacro);
  for (const auto& w : weighted.warnings) spdlog::warn("{}", w);
  const fs::path dir = cfg.out_dir / "eval" / split_name(cfg.eval_split);
  fs::create_directories(dir);
  write_text(dir / "summary.json", summary_to_json(weighted, macro, r.confusion));
  write_confusion_csv(dir / "confusion_counts.csv", dir / "confusion_percent.csv", r.confusion);
  write_confusion_svg(dir / "confusion.svg", r.confusion);

  const MetricsSummary& shown = cfg.averaging == Averaging::kMacro ? macro : weighted;
  spdlog::info("{} ({} samples, {} averaging): accuracy {:.2f}%  precision {:.2f}%  recall {:.2f}%  F1 {:.2f}%",
               split_name(cfg.eval_split), samples.size(), cfg.averaging == Averaging::kMacro ? "macro" : "weighted",
               100 * shown.accuracy, 100 * shown.precision, 100 * shown.recall, 100 * shown.f1);
  return weighted.accuracy;
}

void cmd_sweep(const RunConfig& cfg) {
  validate(cfg, Command::kSweep);
  const LoadedData d = load_data(cfg, true);
  fs::create_directories(cfg.out_dir);
  const TrainConfig t = cfg.effective_train();
  const auto rows = with_precision(cfg.precision, [&](auto tag) {
    using T = decltype(tag);
    return sweep<T>(d.train, d.val, d.test, d.index.class_names, cfg.arch.build(), t, cfg.sweep_patches,
                    cfg.sweep_probs);
  });
  write_sweep_csv(cfg.out_dir / "sweep.csv", rows);
  spdlog::info("wrote {} sweep rows to {}", rows.size(), (cfg.out_dir / "sweep.csv").string());
}

void cmd_inspect(const RunConfig& cfg) {
  validate(cfg, Command::kInspect);
  Tensor<double> image = read_image(cfg.inspect_image);
  image = resize_bilinear(image, cfg.image_size, cfg.image_size);
  PsmConfig psm = cfg.train.psm;
  psm.layout = PatchLayout::kChannels;
  const ComplexTensor<double> spectra = apply_psm(image, psm, /*training=*/false).patches;

  const Shape& s = spectra.shape();
  const std::size_t channels = s[0], h = s[1], w = s[2], plane = h * w;
  const fs::path dir = cfg.out_dir / "inspect";
  fs::create_directories(dir);
  for (std::size_t q = 0; q < channels; ++q) {
    Tensor<double> mag(Shape{1, h, w}), phase(Shape{1, h, w});
    double peak = 0;
    for (std::size_t i = 0; i < plane; ++i) {
      const double re = spectra.re()[q * plane + i], im = spectra.im()[q * plane + i];
      mag[i] = std::log1p(std::hypot(re, im));
      phase[i] = (std::atan2(im, re) + std::numbers::pi) / (2 * std::numbers::pi);
      peak = std::max(peak, mag[i]);
    }
    if (peak > 0) {
      for (double& v : mag.data()) v /= peak;
    }
    if (cfg.inspect_center) {
      mag = fftshift2(mag);
      phase = fftshift2(phase);
    }
    write_image(dir / ("patch_" + std::to_string(q) + "_magnitude.png"), mag);
    write_image(dir / ("patch_" + std::to_string(q) + "_phase.png"), phase);
  }
  spdlog::info("wrote {} magnitude/phase pairs to {}", channels, dir.string());
}

void run_command(Command command, const RunConfig& cfg) {
  switch (command) {
    case Command::kGenData:
      return cmd_gen_data(cfg);
    case Command::kPreprocess:
      return cmd_preprocess(cfg);
    case Command::kTrain:
      cmd_train(cfg);
      return;
    case Command::kEval:
      cmd_eval(cfg);
      return;
    case Command::kSweep:
      return cmd_sweep(cfg);
    case Command::kInspect:
      return cmd_inspect(cfg);
  }
}

}  // namespace ffcnet
