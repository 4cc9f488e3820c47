#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ffcnet/tensor.hpp"

namespace ffcnet {

// ---------------------------------------------------------------------------
// Raster images: (C, H, W) doubles in [0, 1], C = 1 (gray) or 3 (RGB).
// ---------------------------------------------------------------------------

/// Decodes an 8-bit PNG. Alpha is dropped. Throws FormatError naming the file.
Tensor<double> read_image(const std::filesystem::path& path);
/// Clamps to [0, 1] and writes an 8-bit gray or RGB PNG.
void write_image(const std::filesystem::path& path, const Tensor<double>& image);

/// Bilinear resampling with half-pixel centres; output is exactly height x width.
Tensor<double> resize_bilinear(const Tensor<double>& image, std::size_t height, std::size_t width);

// ---------------------------------------------------------------------------
// Index and splits
// ---------------------------------------------------------------------------

enum class Split : std::uint8_t { kTrain, kVal, kTest };

const char* split_name(Split s);
Split parse_split(const std::string& name);

struct DatasetEntry {
  std::string source;  // file path or generator tag
  int label = 0;
  Split split = Split::kTrain;
};

struct DatasetIndex {
  std::vector<std::string> class_names;
  std::vector<DatasetEntry> entries;
  std::uint64_t seed = 0;

  std::vector<std::size_t> indices(Split split) const;
};

/// Assigns train/val/test 6:2:2 within each class. Each class is shuffled by
/// its own stream keyed on the class name, so other classes never affect it.
void stratified_split(DatasetIndex& index, std::uint64_t seed);

/// (train, val, test) sizes for a class of n samples.
std::array<std::size_t, 3> split_sizes(std::size_t n);

/// Folder-per-class layout: class indices follow sorted directory names,
/// files (*.png) are taken in lexicographic order. Splits are assigned with
/// `seed`.
DatasetIndex load_folder(const std::filesystem::path& root, std::uint64_t seed);

struct LabeledImage {
  Tensor<double> pixels;
  int label = 0;
  std::string source_id;
};

/// Decodes and resizes every entry of one split. `workers` decode in
/// parallel; the result order is the index order regardless.
std::vector<LabeledImage> load_split(const DatasetIndex& index, Split split, std::size_t image_size,
                                     std::size_t workers = 1);

// ---------------------------------------------------------------------------
// Synthetic four-class data with brightness and position nuisances
// ---------------------------------------------------------------------------

struct SynthSpec {
  std::size_t image_size = 64;
  std::size_t per_class = 400;
  double noise_sigma = 0.05;
  double brightness_jitter = 0.3;  // offset drawn from [-jitter, jitter]
  std::size_t max_shift = 64;      // circular shift drawn from [0, max_shift) per axis
  std::size_t components = 4;      // plane waves per texture
  double amplitude = 0.2;          // peak texture amplitude
  // Radial frequency band per class, in cycles per image at size 64 (scaled
  // linearly for other sizes). Bands must be disjoint.
  std::vector<std::pair<double, double>> bands{{3, 6}, {8, 11}, {13, 16}, {18, 22}};

  std::size_t classes() const { return bands.size(); }
  /// Band of `label` in cycles per image at the configured size.
  std::pair<double, double> band(std::size_t label) const;
  void validate() const;
};

struct PlaneWave {
  int fy = 0, fx = 0;  // integer frequency, cycles per image
  double phase = 0;
  double amplitude = 0;
};

/// Everything that determines one synthetic image.
struct SynthSample {
  int label = 0;
  std::vector<PlaneWave> waves;
  std::size_t shift_y = 0, shift_x = 0;
  double brightness = 0;
  std::uint64_t noise_seed = 0;
};

SynthSample draw_synth_sample(const SynthSpec& spec, std::uint64_t seed, int label, std::size_t index);

/// 0.5 + texture circularly shifted by (shift_y, shift_x) + brightness +
/// Gaussian noise, optionally clamped to [0, 1]. Returns (1, S, S).
Tensor<double> render_synth(const SynthSpec& spec, const SynthSample& sample, bool clamp = true);

struct SyntheticSet {
  DatasetIndex index;
  std::vector<Tensor<double>> images;  // parallel to index.entries
};

SyntheticSet generate_synthetic(const SynthSpec& spec, std::uint64_t seed);

/// Writes <root>/<class>/<nnnn>.png plus manifest.json recording the generator settings and
/// seed. Returns the written paths in index order.
std::vector<std::filesystem::path> write_synthetic(const std::filesystem::path& root, const SyntheticSet& set,
                                                   const SynthSpec& spec, std::uint64_t seed);

/// Closed-form ceiling classifier: class whose radial band holds the most
/// non-DC spectral energy of the whole image.
int band_energy_class(const Tensor<double>& image, const SynthSpec& spec);

}  // namespace ffcnet
