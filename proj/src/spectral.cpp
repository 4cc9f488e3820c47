#include "ffcnet/spectral.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "binary_io.hpp"
#include "ffcnet/fft.hpp"

namespace ffcnet {

void PsmConfig::validate(std::size_t height, std::size_t width) const {
  if (patches_per_side < 1) {
    throw ConfigError("patches per side must be >= 1, got " + std::to_string(patches_per_side));
  }
  if (!(shuffle_prob >= 0.0 && shuffle_prob <= 1.0)) {
    throw ConfigError("shuffle probability must lie in [0, 1], got " + std::to_string(shuffle_prob));
  }
  const auto k = static_cast<std::size_t>(patches_per_side);
  if (k > std::min(height, width) || height % k != 0 || width % k != 0) {
    throw ConfigError("image " + std::to_string(height) + "x" + std::to_string(width) +
                      " cannot be split into " + std::to_string(k) + "x" + std::to_string(k) +
                      " equal patches");
  }
}

bool Permutation::is_identity() const {
  for (std::size_t q = 0; q < order.size(); ++q) {
    if (order[q] != q) return false;
  }
  return true;
}

Permutation Permutation::identity(std::size_t n) {
  Permutation p;
  p.order.resize(n);
  std::iota(p.order.begin(), p.order.end(), 0u);
  return p;
}

template <typename T>
Tensor<T> partition(const Tensor<T>& image, int patches_per_side) {
  if (image.shape().rank() != 3) {
    throw ShapeError("partition expects a (C, H, W) image, got " + image.shape().to_string());
  }
  const std::size_t C = image.shape()[0], H = image.shape()[1], W = image.shape()[2];
  PsmConfig{.patches_per_side = patches_per_side, .shuffle_prob = 0.0}.validate(H, W);
  const auto K = static_cast<std::size_t>(patches_per_side);
  const std::size_t ph = H / K, pw = W / K;

  Tensor<T> out(Shape{C, K * K, ph, pw});
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < K; ++i) {
      for (std::size_t j = 0; j < K; ++j) {
        for (std::size_t y = 0; y < ph; ++y) {
          const auto src = image.data().begin() + (c * H + i * ph + y) * W + j * pw;
          std::copy(src, src + pw, out.data().begin() + ((c * K * K + i * K + j) * ph + y) * pw);
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> assemble(const Tensor<T>& patches, int patches_per_side) {
  const Shape& s = patches.shape();
  const auto K = static_cast<std::size_t>(patches_per_side);
  if (s.rank() != 4 || s[1] != K * K) {
    throw ShapeError("assemble expects (C, K*K, Hp, Wp) with K=" + std::to_string(K) + ", got " +
                     s.to_string());
  }
  const std::size_t C = s[0], ph = s[2], pw = s[3], H = ph * K, W = pw * K;
  Tensor<T> out(Shape{C, H, W});
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < K; ++i) {
      for (std::size_t j = 0; j < K; ++j) {
        for (std::size_t y = 0; y < ph; ++y) {
          const auto src = patches.data().begin() + ((c * K * K + i * K + j) * ph + y) * pw;
          std::copy(src, src + pw, out.data().begin() + (c * H + i * ph + y) * W + j * pw);
        }
      }
    }
  }
  return out;
}

template <typename T>
ComplexTensor<T> shuffle_patches(const ComplexTensor<T>& patches, double p, Rng& rng,
                                 Permutation& applied) {
  const Shape& s = patches.shape();
  if (s.rank() != 4) throw ShapeError("shuffle_patches expects (C, K*K, Hp, Wp), got " + s.to_string());
  const std::size_t C = s[0], n = s[1], area = s[2] * s[3];

  applied = Permutation::identity(n);
  applied.triggered = uniform01(rng) < p;
  if (!applied.triggered) return patches;

  // Fisher-Yates
  for (std::size_t i = n; i > 1; --i) {
    std::swap(applied.order[i - 1], applied.order[uniform_index(rng, i)]);
  }
  ComplexTensor<T> out(s);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t q = 0; q < n; ++q) {
      const std::size_t src = (c * n + applied.order[q]) * area;
      const std::size_t dst = (c * n + q) * area;
      std::copy_n(patches.re().data().begin() + src, area, out.re().data().begin() + dst);
      std::copy_n(patches.im().data().begin() + src, area, out.im().data().begin() + dst);
    }
  }
  return out;
}

std::size_t spectral_channels(const PsmConfig& cfg, std::size_t image_channels) {
  const std::size_t groups = cfg.color == ColorMode::kGray ? 1 : image_channels;
  const auto K = static_cast<std::size_t>(cfg.patches_per_side);
  return cfg.layout == PatchLayout::kMosaic ? groups : groups * K * K;
}

template <typename T>
SpectralSample<T> apply_psm(const Tensor<T>& image, const PsmConfig& cfg, bool training) {
  if (image.shape().rank() != 3) {
    throw ShapeError("apply_psm expects a (C, H, W) image, got " + image.shape().to_string());
  }
  cfg.validate(image.shape()[1], image.shape()[2]);

  Tensor<T> planes = image;
  if (cfg.color == ColorMode::kGray && image.shape()[0] > 1) {
    const std::size_t C = image.shape()[0], area = image.shape()[1] * image.shape()[2];
    planes = Tensor<T>(Shape{1, image.shape()[1], image.shape()[2]});
    for (std::size_t k = 0; k < area; ++k) {
      double sum = 0.0;
      for (std::size_t c = 0; c < C; ++c) sum += image[c * area + k];
      planes[k] = static_cast<T>(sum / static_cast<double>(C));
    }
  }

  const int K = cfg.patches_per_side;
  Tensor<T> diced = partition(planes, K);
  ComplexTensor<T> spectra = fft2(ComplexTensor<T>(diced, Tensor<T>(diced.shape())));

  SpectralSample<T> sample;
  const double p = training ? cfg.shuffle_prob : 0.0;
  Rng rng(cfg.seed);
  spectra = shuffle_patches(spectra, p, rng, sample.permutation);

  const Shape& s = spectra.shape();
  if (cfg.layout == PatchLayout::kChannels) {
    sample.patches = reshape(spectra, Shape{s[0] * s[1], s[2], s[3]});
  } else {
    sample.patches = ComplexTensor<T>(assemble(spectra.re(), K), assemble(spectra.im(), K));
  }
  return sample;
}

void write_spectral_cache(const std::filesystem::path& path, const SpectralCache& cache) {
  using detail::put_le;
  const auto& h = cache.header;
  const std::size_t count = static_cast<std::size_t>(h.channels) * h.patches_per_side *
                            h.patches_per_side * h.patch_height * h.patch_width;
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os.write("FFCS", 4);
  put_le<std::uint16_t>(os, 1);
  put_le(os, h.channels);
  put_le(os, h.patches_per_side);
  put_le(os, h.patch_height);
  put_le(os, h.patch_width);
  put_le(os, static_cast<std::uint32_t>(cache.samples.size()));
  for (const auto& s : cache.samples) {
    if (s.patches.size() != count) {
      throw ShapeError("cache sample has " + std::to_string(s.patches.size()) +
                       " values per plane, header implies " + std::to_string(count));
    }
    put_le(os, s.label);
    put_le(os, s.source_hash);
    for (float v : s.patches.re().data()) detail::put_f32(os, v);
    for (float v : s.patches.im().data()) detail::put_f32(os, v);
  }
  if (!os) throw FormatError("write failed for " + path.string());
}

SpectralCache read_spectral_cache(const std::filesystem::path& path) {
  using detail::get_le;
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  detail::expect_magic(is, "FFCS", path.string());
  const auto version = get_le<std::uint16_t>(is, "version");
  if (version != 1) {
    throw FormatError(path.string() + ": unsupported spectral cache version " + std::to_string(version));
  }
  SpectralCache cache;
  auto& h = cache.header;
  h.channels = get_le<std::uint16_t>(is, "channels");
  h.patches_per_side = get_le<std::uint16_t>(is, "patches per side");
  h.patch_height = get_le<std::uint16_t>(is, "patch height");
  h.patch_width = get_le<std::uint16_t>(is, "patch width");
  const auto n = get_le<std::uint32_t>(is, "sample count");
  const Shape shape{static_cast<std::size_t>(h.channels) * h.patches_per_side * h.patches_per_side,
                    h.patch_height, h.patch_width};
  cache.samples.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    CachedSample s;
    s.label = get_le<std::uint16_t>(is, "label");
    s.source_hash = get_le<std::uint64_t>(is, "source hash");
    s.patches = ComplexTensor<float>(shape);
    for (float& v : s.patches.re().data()) v = detail::get_f32(is, "sample data");
    for (float& v : s.patches.im().data()) v = detail::get_f32(is, "sample data");
    cache.samples.push_back(std::move(s));
  }
  return cache;
}

#define FFCNET_INSTANTIATE(T)                                                                     \
  template Tensor<T> partition(const Tensor<T>&, int);                                           \
  template Tensor<T> assemble(const Tensor<T>&, int);                                            \
  template ComplexTensor<T> shuffle_patches(const ComplexTensor<T>&, double, Rng&, Permutation&); \
  template SpectralSample<T> apply_psm(const Tensor<T>&, const PsmConfig&, bool);

FFCNET_INSTANTIATE(float)
FFCNET_INSTANTIATE(double)

#undef FFCNET_INSTANTIATE

}  // namespace ffcnet
