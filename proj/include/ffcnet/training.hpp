#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ffcnet/dataset.hpp"
#include "ffcnet/metrics.hpp"
#include "ffcnet/network.hpp"
#include "ffcnet/spectral.hpp"

namespace ffcnet {

enum class Precision { kF32, kF64 };

struct LrSchedule {
  enum class Kind { kNone, kStep };
  Kind kind = Kind::kStep;
  std::vector<double> milestones{0.5, 0.75};  // fractions of the epoch budget
  double factor = 0.1;
};

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t batch_size = 32;
  std::size_t epochs = 60;
  double momentum = 0.9;
  double weight_decay = 0.0;
  LrSchedule schedule;
  std::size_t early_stop = 20;  // stagnant validation epochs before stopping; 0 disables
  bool hflip = true;
  bool vflip = true;
  PsmConfig psm;
  std::uint64_t seed = 0;
  Precision precision = Precision::kF32;
  std::size_t workers = 1;
  bool deterministic = false;

  void validate() const;
  /// Learning rate for a 0-based epoch under the schedule.
  double lr_at(std::size_t epoch) const;
};

template <typename T>
struct LossResult {
  double loss = 0;
  Tensor<T> grad;  // d loss / d logits
};

/// Mean softmax cross-entropy with max subtraction; grad = (softmax - onehot) / B.
template <typename T>
LossResult<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

template <typename T>
struct TrainState {
  Model<T> model;
  std::vector<Tensor<T>> velocity;  // one per model parameter
  std::size_t epoch = 0;
  double best_val_accuracy = -1;
  std::size_t best_epoch = 0;
  std::filesystem::path best_checkpoint;

  explicit TrainState(Model<T> m);
};

/// v <- momentum v + g (+ weight_decay theta); theta <- theta - lr v, using
/// the gradients currently held by the model. BN gammas are then projected
/// back onto the PSD cone.
template <typename T>
void sgd_step(TrainState<T>& state, const TrainConfig& cfg, double lr);

template <typename T>
Tensor<T> flip_horizontal(const Tensor<T>& image);
template <typename T>
Tensor<T> flip_vertical(const Tensor<T>& image);

/// Each enabled flip applied independently with probability 1/2.
template <typename T>
Tensor<T> augment(const Tensor<T>& image, Rng& rng, bool hflip, bool vflip);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double learning_rate = 0;
  double train_loss = 0;
  double train_accuracy = 0;  // running accuracy of the training-mode batches
  double val_accuracy = 0;
  double val_precision = 0;
  double val_recall = 0;
  double val_f1 = 0;
  double wall_time_s = 0;

  /// One JSON object per line. Wall time is left out when `with_time` is false.
  std::string to_json(bool with_time) const;
};

template <typename T>
struct TrainOutputs {
  std::filesystem::path out_dir;  // empty: nothing is written
  /// Called after every epoch; return true to stop early.
  std::function<bool(const EpochRecord&, Model<T>&)> on_epoch;
};

template <typename T>
struct TrainResult {
  TrainState<T> state;
  Model<T> best_model;
  std::vector<EpochRecord> history;
};

/// Stacks spectral samples into a (B, C', h, w) batch.
template <typename T>
ComplexTensor<T> stack_batch(const std::vector<SpectralSample<T>>& samples);

/// Full protocol: per epoch augment -> patch shuffling (training) -> forward ->
/// loss -> backward -> SGD; validation without augmentation or shuffling;
/// best-validation checkpoint; metrics history.
template <typename T>
TrainResult<T> train(const std::vector<LabeledImage>& train_set, const std::vector<LabeledImage>& val_set,
                     const std::vector<std::string>& class_names, const ArchitectureSpec& arch,
                     const TrainConfig& cfg, const TrainOutputs<T>& outputs = {});

struct EvalResult {
  ConfusionMatrix confusion;
  double loss = 0;
  bool all_identity = true;  // no evaluated sample had its patches permuted
};

/// Eval-mode pass: no augmentation, no shuffling, running BN statistics.
template <typename T>
EvalResult evaluate(Model<T>& model, const std::vector<LabeledImage>& samples, const PsmConfig& psm,
                    const std::vector<std::string>& class_names, std::size_t batch_size = 32,
                    std::size_t workers = 1);

/// Network input channels for images with `image_channels` channels.
ArchitectureSpec adapt_architecture(ArchitectureSpec arch, const PsmConfig& psm, std::size_t image_channels,
                                    std::size_t classes);

struct SweepRow {
  int patches_per_side = 0;
  double shuffle_prob = 0;
  std::uint64_t seed = 0;
  double val_accuracy = 0;
  double test_accuracy = 0;
};

/// One training run per (K, p) grid point with the same base seed; test
/// accuracy is measured on the best-validation model.
template <typename T>
std::vector<SweepRow> sweep(const std::vector<LabeledImage>& train_set, const std::vector<LabeledImage>& val_set,
                            const std::vector<LabeledImage>& test_set, const std::vector<std::string>& class_names,
                            const ArchitectureSpec& arch, const TrainConfig& cfg, const std::vector<int>& patch_counts,
                            const std::vector<double>& shuffle_probs);

/// Header "K,p,seed,val_acc,test_acc"; accuracies as fractions.
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

}  // namespace ffcnet
