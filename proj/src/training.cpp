#include "ffcnet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ffcnet/log.hpp"
#include "ffcnet/parallel.hpp"
#include <nlohmann/json.hpp>

namespace ffcnet {

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2 (batch norm needs a population)");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (momentum < 0) throw ConfigError("momentum must be >= 0");
  if (weight_decay < 0) throw ConfigError("weight_decay must be >= 0");
  if (!(psm.shuffle_prob >= 0 && psm.shuffle_prob <= 1)) throw ConfigError("shuffle probability must lie in [0, 1]");
  if (psm.patches_per_side < 1) throw ConfigError("patches per side must be >= 1");
  for (double m : schedule.milestones) {
    if (!(m > 0 && m < 1)) throw ConfigError("schedule milestones must be fractions in (0, 1)");
  }
  if (!(schedule.factor > 0)) throw ConfigError("schedule factor must be positive");
}

double TrainConfig::lr_at(std::size_t epoch) const {
  double lr = learning_rate;
  if (schedule.kind == LrSchedule::Kind::kStep) {
    for (double m : schedule.milestones) {
      if (static_cast<double>(epoch) >= std::round(m * static_cast<double>(epochs))) lr *= schedule.factor;
    }
  }
  return lr;
}

template <typename T>
LossResult<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  const Shape& s = logits.shape();
  if (s.rank() != 2 || s[0] != labels.size()) {
    throw ShapeError("cross_entropy: logits " + s.to_string() + " vs " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t B = s[0], C = s[1];
  LossResult<T> r{0.0, Tensor<T>(s)};
  std::vector<double> p(C);
  for (std::size_t b = 0; b < B; ++b) {
    const int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= C) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(y) + " outside [0, " + std::to_string(C) + ")");
    }
    const T* row = logits.data().data() + b * C;
    const double mx = *std::max_element(row, row + C);
    double z = 0;
    for (std::size_t c = 0; c < C; ++c) z += (p[c] = std::exp(row[c] - mx));
    r.loss += std::log(z) - (row[y] - mx);
    for (std::size_t c = 0; c < C; ++c) {
      const double onehot = static_cast<int>(c) == y ? 1.0 : 0.0;
      r.grad[b * C + c] = static_cast<T>((p[c] / z - onehot) / static_cast<double>(B));
    }
  }
  r.loss /= static_cast<double>(B);
  return r;
}

template <typename T>
TrainState<T>::TrainState(Model<T> m) : model(std::move(m)) {
  for (const auto& p : model.parameters()) velocity.emplace_back(p.value->shape());
}

template <typename T>
void sgd_step(TrainState<T>& state, const TrainConfig& cfg, double lr) {
  auto params = state.model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& v = state.velocity[i];
    Tensor<T>& theta = *params[i].value;
    const Tensor<T>& g = *params[i].grad;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const T grad = g[k] + static_cast<T>(cfg.weight_decay) * theta[k];
      v[k] = static_cast<T>(cfg.momentum) * v[k] + grad;
      theta[k] -= static_cast<T>(lr) * v[k];
    }
  }
  state.model.project_constraints();
}

template <typename T>
Tensor<T> flip_horizontal(const Tensor<T>& image) {
  const Shape& s = image.shape();
  const std::size_t W = s[s.rank() - 1], rows = image.size() / W;
  Tensor<T> out(s);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t x = 0; x < W; ++x) out[r * W + x] = image[r * W + (W - 1 - x)];
  }
  return out;
}

template <typename T>
Tensor<T> flip_vertical(const Tensor<T>& image) {
  const Shape& s = image.shape();
  const std::size_t W = s[s.rank() - 1], H = s[s.rank() - 2], planes = image.size() / (H * W);
  Tensor<T> out(s);
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t y = 0; y < H; ++y) {
      std::copy_n(image.data().begin() + (p * H + (H - 1 - y)) * W, W, out.data().begin() + (p * H + y) * W);
    }
  }
  return out;
}

template <typename T>
Tensor<T> augment(const Tensor<T>& image, Rng& rng, bool hflip, bool vflip) {
  // Both coins are always drawn so the stream does not depend on the flags.
  const bool h = uniform01(rng) < 0.5;
  const bool v = uniform01(rng) < 0.5;
  Tensor<T> out = (hflip && h) ? flip_horizontal(image) : image;
  return (vflip && v) ? flip_vertical(out) : out;
}

std::string EpochRecord::to_json(bool with_time) const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["lr"] = learning_rate;
  j["train_loss"] = train_loss;
  j["train_acc"] = train_accuracy;
  j["val_acc"] = val_accuracy;
  j["val_precision"] = val_precision;
  j["val_recall"] = val_recall;
  j["val_f1"] = val_f1;
  if (with_time) j["wall_time_s"] = wall_time_s;
  return j.dump();
}

template <typename T>
ComplexTensor<T> stack_batch(const std::vector<SpectralSample<T>>& samples) {
  if (samples.empty()) throw ShapeError("stack_batch: empty batch");
  const Shape& s = samples.front().patches.shape();
  std::vector<std::size_t> dims{samples.size()};
  dims.insert(dims.end(), s.dims().begin(), s.dims().end());
  ComplexTensor<T> batch{Shape(dims)};
  const std::size_t n = s.numel();
  for (std::size_t b = 0; b < samples.size(); ++b) {
    require_same_shape(samples[b].patches.shape(), s, "stack_batch");
    std::copy_n(samples[b].patches.re().data().begin(), n, batch.re().data().begin() + b * n);
    std::copy_n(samples[b].patches.im().data().begin(), n, batch.im().data().begin() + b * n);
  }
  return batch;
}

ArchitectureSpec adapt_architecture(ArchitectureSpec arch, const PsmConfig& psm, std::size_t image_channels,
                                    std::size_t classes) {
  arch.in_channels = spectral_channels(psm, image_channels);
  arch.head.num_classes = classes;
  return arch;
}

namespace {

template <typename T>
std::size_t argmax_row(const Tensor<T>& logits, std::size_t b) {
  const std::size_t C = logits.shape()[1];
  const T* row = logits.data().data() + b * C;
  return static_cast<std::size_t>(std::max_element(row, row + C) - row);
}

}  // namespace

template <typename T>
EvalResult evaluate(Model<T>& model, const std::vector<LabeledImage>& samples, const PsmConfig& psm,
                    const std::vector<std::string>& class_names, std::size_t batch_size, std::size_t workers) {
  EvalResult result{ConfusionMatrix(class_names), 0.0, true};
  if (samples.empty()) throw ConfigError("evaluation split is empty");
  double loss_sum = 0;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, samples.size() - start);
    std::vector<SpectralSample<T>> spectral(n);
    parallel_for(n, workers, [&](std::size_t k) {
      spectral[k] = apply_psm(cast<T>(samples[start + k].pixels), psm, /*training=*/false);
    });
    std::vector<int> labels(n);
    for (std::size_t k = 0; k < n; ++k) {
      labels[k] = samples[start + k].label;
      result.all_identity = result.all_identity && spectral[k].permutation.is_identity() &&
                            !spectral[k].permutation.triggered;
    }
    const Tensor<T> logits = model.forward(stack_batch(spectral), /*training=*/false);
    loss_sum += cross_entropy(logits, labels).loss * static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
      result.confusion.update(static_cast<std::size_t>(labels[k]), argmax_row(logits, k));
    }
  }
  result.loss = loss_sum / static_cast<double>(samples.size());
  return result;
}

template <typename T>
TrainResult<T> train(const std::vector<LabeledImage>& train_set, const std::vector<LabeledImage>& val_set,
                     const std::vector<std::string>& class_names, const ArchitectureSpec& arch,
                     const TrainConfig& cfg, const TrainOutputs<T>& outputs) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("training split is empty");
  if (val_set.empty()) throw ConfigError("validation split is empty");
  const std::size_t workers = cfg.deterministic ? 1 : cfg.workers;
  const Shape& image_shape = train_set.front().pixels.shape();
  cfg.psm.validate(image_shape[1], image_shape[2]);

  const ArchitectureSpec net = adapt_architecture(arch, cfg.psm, image_shape[0], class_names.size());
  TrainResult<T> result{TrainState<T>(Model<T>(net, derive_seed(cfg.seed, "model"))), Model<T>(net, 0), {}};
  TrainState<T>& state = result.state;
  result.best_model = state.model;

  std::ofstream history;
  std::ofstream timing;
  if (!outputs.out_dir.empty()) {
    std::filesystem::create_directories(outputs.out_dir);
    history.open(outputs.out_dir / "metrics_history.jsonl", std::ios::trunc);
    if (cfg.deterministic) timing.open(outputs.out_dir / "timing.jsonl", std::ios::trunc);
    state.best_checkpoint = outputs.out_dir / "checkpoint_best.ffcw";
  }

  const auto t0 = std::chrono::steady_clock::now();
  std::size_t stagnant = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    Rng order_rng = make_rng(cfg.seed, "order", {epoch});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(order_rng, i)]);

    double loss_sum = 0;
    std::size_t seen = 0, correct = 0, step = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      if (n < 2) break;  // batch norm needs at least two samples
      std::vector<SpectralSample<T>> spectral(n);
      std::vector<int> labels(n);
      parallel_for(n, workers, [&](std::size_t k) {
        const std::size_t id = order[start + k];
        Rng aug_rng = make_rng(cfg.seed, "augment", {id, epoch});
        PsmConfig psm = cfg.psm;
        psm.seed = derive_seed(cfg.seed, "psm", {id, epoch});
        spectral[k] = apply_psm(augment(cast<T>(train_set[id].pixels), aug_rng, cfg.hflip, cfg.vflip), psm,
                                /*training=*/true);
      });
      for (std::size_t k = 0; k < n; ++k) labels[k] = train_set[order[start + k]].label;

      const std::string where = "epoch " + std::to_string(epoch + 1) + ", step " + std::to_string(step + 1);
      Tensor<T> logits;
      LossResult<T> loss;
      try {
        logits = state.model.forward(stack_batch(spectral), /*training=*/true);
        loss = cross_entropy(logits, labels);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at " + where);
      }
      if (!std::isfinite(loss.loss)) throw NumericError("non-finite loss at " + where);
      state.model.backward(loss.grad);
      sgd_step(state, cfg, lr);

      loss_sum += loss.loss * static_cast<double>(n);
      seen += n;
      for (std::size_t k = 0; k < n; ++k) correct += argmax_row(logits, k) == static_cast<std::size_t>(labels[k]);
      ++step;
    }
    state.epoch = epoch + 1;

    const EvalResult val = evaluate(state.model, val_set, cfg.psm, class_names, cfg.batch_size, workers);
    if (!val.all_identity) throw std::logic_error("validation applied patch shuffling");
    const MetricsSummary vs = summarize(val.confusion);
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.learning_rate = lr;
    rec.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    rec.train_accuracy = seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
    rec.val_accuracy = vs.accuracy;
    rec.val_precision = vs.precision;
    rec.val_recall = vs.recall;
    rec.val_f1 = vs.f1;
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(rec);

    if (history.is_open()) history << rec.to_json(!cfg.deterministic) << '\n' << std::flush;
    if (timing.is_open()) {
      timing << nlohmann::json{{"epoch", rec.epoch}, {"wall_time_s", rec.wall_time_s}}.dump() << '\n';
    }
    spdlog::info("epoch {:3d}  lr {:.4g}  loss {:.4f}  train {:.2f}%  val {:.2f}%", rec.epoch, lr, rec.train_loss,
                 100 * rec.train_accuracy, 100 * rec.val_accuracy);

    if (vs.accuracy > state.best_val_accuracy) {
      state.best_val_accuracy = vs.accuracy;
      state.best_epoch = epoch + 1;
      result.best_model = state.model;
      if (!state.best_checkpoint.empty()) save_checkpoint(state.best_checkpoint, state.model);
      stagnant = 0;
    } else {
      ++stagnant;
    }
    if (outputs.on_epoch && outputs.on_epoch(rec, state.model)) break;
    if (cfg.early_stop > 0 && stagnant >= cfg.early_stop) {
      spdlog::info("early stop: no validation improvement for {} epochs", stagnant);
      break;
    }
  }
  if (!outputs.out_dir.empty()) save_checkpoint(outputs.out_dir / "checkpoint_last.ffcw", state.model);
  return result;
}

template <typename T>
std::vector<SweepRow> sweep(const std::vector<LabeledImage>& train_set, const std::vector<LabeledImage>& val_set,
                            const std::vector<LabeledImage>& test_set, const std::vector<std::string>& class_names,
                            const ArchitectureSpec& arch, const TrainConfig& cfg, const std::vector<int>& patch_counts,
                            const std::vector<double>& shuffle_probs) {
  std::vector<SweepRow> rows;
  for (int k : patch_counts) {
    for (double p : shuffle_probs) {
      TrainConfig run = cfg;
      run.psm.patches_per_side = k;
      run.psm.shuffle_prob = p;
      spdlog::info("sweep: K={} p={}", k, p);
      TrainResult<T> r = train<T>(train_set, val_set, class_names, arch, run);
      const EvalResult test = evaluate(r.best_model, test_set, run.psm, class_names, run.batch_size,
                                       run.deterministic ? 1 : run.workers);
      rows.push_back({k, p, cfg.seed, r.state.best_val_accuracy, summarize(test.confusion).accuracy});
    }
  }
  return rows;
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path.string());
  os << "K,p,seed,val_acc,test_acc\n";
  for (const auto& r : rows) {
    os << r.patches_per_side << ',' << r.shuffle_prob << ',' << r.seed << ',' << r.val_accuracy << ','
       << r.test_accuracy << '\n';
  }
}

#define FFCNET_INSTANTIATE(T)                                                                                   \
  template LossResult<T> cross_entropy(const Tensor<T>&, std::span<const int>);                                 \
  template struct TrainState<T>;                                                                                \
  template void sgd_step(TrainState<T>&, const TrainConfig&, double);                                           \
  template Tensor<T> flip_horizontal(const Tensor<T>&);                                                         \
  template Tensor<T> flip_vertical(const Tensor<T>&);                                                           \
  template Tensor<T> augment(const Tensor<T>&, Rng&, bool, bool);                                               \
  template ComplexTensor<T> stack_batch(const std::vector<SpectralSample<T>>&);                                 \
  template TrainResult<T> train(const std::vector<LabeledImage>&, const std::vector<LabeledImage>&,             \
                                const std::vector<std::string>&, const ArchitectureSpec&, const TrainConfig&,   \
                                const TrainOutputs<T>&);                                                        \
  template EvalResult evaluate(Model<T>&, const std::vector<LabeledImage>&, const PsmConfig&,                   \
                               const std::vector<std::string>&, std::size_t, std::size_t);                      \
  template std::vector<SweepRow> sweep<T>(const std::vector<LabeledImage>&, const std::vector<LabeledImage>&,      \
                                       const std::vector<LabeledImage>&, const std::vector<std::string>&,       \
                                       const ArchitectureSpec&, const TrainConfig&, const std::vector<int>&,    \
                                       const std::vector<double>&);

FFCNET_INSTANTIATE(float)
FFCNET_INSTANTIATE(double)

#undef FFCNET_INSTANTIATE

}  // namespace ffcnet
