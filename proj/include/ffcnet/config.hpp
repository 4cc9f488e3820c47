#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ffcnet/dataset.hpp"
#include "ffcnet/metrics.hpp"
#include "ffcnet/network.hpp"
#include "ffcnet/training.hpp"

namespace ffcnet {

enum class Command { kGenData, kPreprocess, kTrain, kEval, kSweep, kInspect };

const char* command_name(Command c);

struct ArchConfig {
  std::string variant = "mini";  // mini | resnet18
  BridgeMode bridge = BridgeMode::kMagnitude;
  // Zero keeps the variant's value.
  std::size_t stem_channels = 0;
  std::size_t stem_kernel = 0;
  int stem_stride = 0;
  int stem_pool = -1;  // -1 ("default") keeps the variant's value

  /// Architecture before the input channels are adapted to the PSM layout.
  ArchitectureSpec build() const;
};

/// Every setting of a run. Each field is addressable as "section.key" in the
/// INI file and through --set.
struct RunConfig {
  // [run]
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "runs/default";
  std::size_t workers = 1;
  bool deterministic = false;
  Precision precision = Precision::kF32;
  // [data]
  std::filesystem::path data_root;  // empty: <out>/data
  std::size_t image_size = 64;
  // [psm], [train]
  TrainConfig train;
  // [arch]
  ArchConfig arch;
  // [synth]
  SynthSpec synth;
  // [eval]
  Split eval_split = Split::kTest;
  Averaging averaging = Averaging::kWeighted;
  std::filesystem::path checkpoint;  // empty: <out>/checkpoint_best.ffcw
  // [sweep]
  std::vector<int> sweep_patches{1, 2, 4, 8};
  std::vector<double> sweep_probs{0.0, 0.1, 0.3, 0.5};
  // [inspect]
  std::filesystem::path inspect_image;
  bool inspect_center = true;

  std::filesystem::path dataset_root() const;
  std::filesystem::path checkpoint_path() const;
  /// TrainConfig with the run-level seed, workers, precision and determinism folded in.
  TrainConfig effective_train() const;
};

/// Applies one "section.key" = value setting. Unknown keys and unparsable
/// values throw ConfigError naming the key.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

/// Reads an INI file ("[section]" headers, "key = value" lines, ';' or '#'
/// comments) and applies every entry in file order.
void load_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// Checks everything `command` will touch, including that its input paths
/// exist. Throws ConfigError.
void validate(const RunConfig& cfg, Command command);

/// All keys in INI form with their current values.
std::string dump_config(const RunConfig& cfg);

}  // namespace ffcnet
