#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ffcnet/rng.hpp"
#include "ffcnet/tensor.hpp"

namespace ffcnet {

/// How the K*K patch spectra are presented to the network.
enum class PatchLayout {
  kChannels,  // (C*K*K, H/K, W/K): patches stacked on the channel axis
  kMosaic,    // (C, H, W): patch spectra tiled back into their grid slots
};

/// How colour inputs are treated before the transform.
enum class ColorMode {
  kPerChannel,  // one complex channel group per input channel
  kGray,        // average input channels first
};

struct PsmConfig {
  int patches_per_side = 4;   // K
  double shuffle_prob = 0.3;  // p
  std::uint64_t seed = 0;     // shuffle stream for this sample
  PatchLayout layout = PatchLayout::kChannels;
  ColorMode color = ColorMode::kPerChannel;

  /// Throws ConfigError if K or p is out of range or K does not divide the
  /// image dims.
  void validate(std::size_t height, std::size_t width) const;
};

/// Patch permutation: output slot q holds input patch `order[q]`.
struct Permutation {
  std::vector<std::uint32_t> order;
  bool triggered = false;  // the shuffle coin came up, even if order is identity

  bool is_identity() const;
  static Permutation identity(std::size_t n);
};

template <typename T>
struct SpectralSample {
  ComplexTensor<T> patches;  // layout-dependent, see PatchLayout
  int label = -1;
  Permutation permutation;
  std::string source_id;
};

/// Splits a (C, H, W) image into a (C, K*K, H/K, W/K) tensor. Patch (i, j)
/// covers rows [i H/K, (i+1) H/K) and cols [j W/K, (j+1) W/K) and sits at
/// index i*K + j.
template <typename T>
Tensor<T> partition(const Tensor<T>& image, int patches_per_side);

/// Inverse of partition.
template <typename T>
Tensor<T> assemble(const Tensor<T>& patches, int patches_per_side);

/// With probability p applies one uniformly random permutation of the K*K
/// patch slots (the same one for every channel); otherwise identity.
/// `patches` has shape (C, K*K, Hp, Wp).
template <typename T>
ComplexTensor<T> shuffle_patches(const ComplexTensor<T>& patches, double p, Rng& rng,
                                 Permutation& applied);

/// Full patch shuffling pipeline on a (C, H, W) image in [0, 1]:
/// partition, per-patch fft2, and (training only) shuffle with cfg.seed.
template <typename T>
SpectralSample<T> apply_psm(const Tensor<T>& image, const PsmConfig& cfg, bool training);

/// Network input channel count for an image with `image_channels` channels.
std::size_t spectral_channels(const PsmConfig& cfg, std::size_t image_channels);

// Spectral cache ("FFCS", version 1, little-endian). Samples are stored in the
// channel layout: K*K*C*Hp*Wp float32 real values then the same count of
// imaginary values, ordered (c, patch, y, x).

struct SpectralCacheHeader {
  std::uint16_t channels = 0;
  std::uint16_t patches_per_side = 0;
  std::uint16_t patch_height = 0;
  std::uint16_t patch_width = 0;
};

struct CachedSample {
  std::uint16_t label = 0;
  std::uint64_t source_hash = 0;
  ComplexTensor<float> patches;  // (C*K*K, Hp, Wp)
};

struct SpectralCache {
  SpectralCacheHeader header;
  std::vector<CachedSample> samples;
};

void write_spectral_cache(const std::filesystem::path& path, const SpectralCache& cache);
SpectralCache read_spectral_cache(const std::filesystem::path& path);

}  // namespace ffcnet
