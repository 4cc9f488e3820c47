#include "ffcnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include "ffcnet/fft.hpp"
#include "ffcnet/parallel.hpp"
#include "ffcnet/rng.hpp"
#include <nlohmann/json.hpp>

namespace ffcnet {

namespace fs = std::filesystem;

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

std::vector<std::size_t> DatasetIndex::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].split == split) out.push_back(i);
  }
  return out;
}

std::array<std::size_t, 3> split_sizes(std::size_t n) {
  const auto train = static_cast<std::size_t>(std::llround(0.6 * static_cast<double>(n)));
  const auto val = std::min(n - train, static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n))));
  return {train, val, n - train - val};
}

void stratified_split(DatasetIndex& index, std::uint64_t seed) {
  index.seed = seed;
  for (std::size_t c = 0; c < index.class_names.size(); ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < index.entries.size(); ++i) {
      if (index.entries[i].label == static_cast<int>(c)) members.push_back(i);
    }
    Rng rng = make_rng(seed, "split", {fnv1a64(index.class_names[c])});
    for (std::size_t i = members.size(); i > 1; --i) {
      std::swap(members[i - 1], members[uniform_index(rng, i)]);
    }
    const auto sizes = split_sizes(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) {
      index.entries[members[k]].split = k < sizes[0]               ? Split::kTrain
                                        : k < sizes[0] + sizes[1] ? Split::kVal
                                                                  : Split::kTest;
    }
  }
}

namespace {

bool has_png_signature(const fs::path& file) {
  static constexpr unsigned char kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::ifstream is(file, std::ios::binary);
  unsigned char got[8] = {};
  return is.read(reinterpret_cast<char*>(got), 8) && std::equal(got, got + 8, kSig);
}

}  // namespace

DatasetIndex load_folder(const fs::path& root, std::uint64_t seed) {
  if (!fs::is_directory(root)) throw ConfigError("dataset root " + root.string() + " is not a directory");
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) class_dirs.push_back(e.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw FormatError("dataset root " + root.string() + " has no class directories");

  DatasetIndex index;
  for (std::size_t c = 0; c < class_dirs.size(); ++c) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(class_dirs[c])) {
      if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw FormatError("class directory " + class_dirs[c].string() + " contains no images");
    index.class_names.push_back(class_dirs[c].filename().string());
    for (const auto& f : files) {
      if (!has_png_signature(f)) throw FormatError(f.string() + ": not a decodable PNG image");
      index.entries.push_back({f.string(), static_cast<int>(c), Split::kTrain});
    }
  }
  stratified_split(index, seed);
  return index;
}

std::vector<LabeledImage> load_split(const DatasetIndex& index, Split split, std::size_t image_size,
                                     std::size_t workers) {
  const auto ids = index.indices(split);
  std::vector<LabeledImage> out(ids.size());
  parallel_for(ids.size(), workers, [&](std::size_t k) {
    const DatasetEntry& e = index.entries[ids[k]];
    out[k] = {resize_bilinear(read_image(e.source), image_size, image_size), e.label, e.source};
  });
  return out;
}

std::pair<double, double> SynthSpec::band(std::size_t label) const {
  const double scale = static_cast<double>(image_size) / 64.0;
  return {bands.at(label).first * scale, bands.at(label).second * scale};
}

void SynthSpec::validate() const {
  if (!is_power_of_two(image_size) || image_size < 8) {
    throw ConfigError("synthetic image size must be a power of two >= 8, got " + std::to_string(image_size));
  }
  if (per_class == 0 || components == 0) throw ConfigError("synthetic per_class and components must be positive");
  if (bands.size() < 2) throw ConfigError("synthetic data needs at least two class bands");
  if (noise_sigma < 0 || brightness_jitter < 0 || amplitude <= 0) {
    throw ConfigError("synthetic noise, brightness jitter must be >= 0 and amplitude > 0");
  }
  if (max_shift > image_size) throw ConfigError("synthetic max_shift cannot exceed the image size");
  for (std::size_t i = 0; i < bands.size(); ++i) {
    const auto [lo, hi] = band(i);
    if (!(lo > 0 && hi > lo && hi <= static_cast<double>(image_size) / 2)) {
      throw ConfigError("synthetic band " + std::to_string(i) + " must satisfy 0 < lo < hi <= size/2");
    }
    // The sampler rejects until it lands on an integer frequency in the band.
    bool reachable = false;
    const int reach = static_cast<int>(std::ceil(hi));
    for (int fy = 0; fy <= reach && !reachable; ++fy) {
      for (int fx = -reach; fx <= reach && !reachable; ++fx) {
        const double r = std::hypot(fy, fx);
        reachable = r >= lo && r < hi;
      }
    }
    if (!reachable) {
      throw ConfigError("synthetic band " + std::to_string(i) + " holds no integer frequency at image size " +
                        std::to_string(image_size));
    }
    for (std::size_t j = 0; j < i; ++j) {
      const auto [lo2, hi2] = band(j);
      if (lo < hi2 && lo2 < hi) throw ConfigError("synthetic bands must be disjoint");
    }
  }
}

SynthSample draw_synth_sample(const SynthSpec& spec, std::uint64_t seed, int label, std::size_t index) {
  Rng rng = make_rng(seed, "synth", {static_cast<std::uint64_t>(label), index});
  SynthSample s;
  s.label = label;
  const auto [lo, hi] = spec.band(static_cast<std::size_t>(label));
  const double amp = spec.amplitude / static_cast<double>(spec.components);
  while (s.waves.size() < spec.components) {
    const double radius = lo + (hi - lo) * uniform01(rng);
    const double angle = std::numbers::pi * uniform01(rng);
    const int fy = static_cast<int>(std::lround(radius * std::sin(angle)));
    const int fx = static_cast<int>(std::lround(radius * std::cos(angle)));
    const double r = std::hypot(fy, fx);
    if (r < lo || r >= hi) continue;
    s.waves.push_back({fy, fx, 2.0 * std::numbers::pi * uniform01(rng), amp});
  }
  if (spec.max_shift > 0) {
    s.shift_y = uniform_index(rng, spec.max_shift);
    s.shift_x = uniform_index(rng, spec.max_shift);
  }
  s.brightness = spec.brightness_jitter * (2.0 * uniform01(rng) - 1.0);
  s.noise_seed = rng();
  return s;
}

Tensor<double> render_synth(const SynthSpec& spec, const SynthSample& sample, bool clamp) {
  const std::size_t S = spec.image_size;
  Tensor<double> img(Shape{1, S, S});
  std::normal_distribution<double> noise(0.0, 1.0);
  Rng rng(sample.noise_seed);
  for (std::size_t y = 0; y < S; ++y) {
    const std::size_t ty = (y + S - sample.shift_y % S) % S;
    for (std::size_t x = 0; x < S; ++x) {
      const std::size_t tx = (x + S - sample.shift_x % S) % S;
      double v = 0.5 + sample.brightness;
      for (const PlaneWave& w : sample.waves) {
        // (f * t) mod S keeps the argument exact so shifted renders are exact rolls.
        const auto fy = static_cast<std::size_t>((w.fy % static_cast<int>(S) + static_cast<int>(S)) % static_cast<int>(S));
        const auto fx = static_cast<std::size_t>((w.fx % static_cast<int>(S) + static_cast<int>(S)) % static_cast<int>(S));
        const std::size_t cycles = (fy * ty + fx * tx) % S;
        v += w.amplitude * std::cos(2.0 * std::numbers::pi * static_cast<double>(cycles) / static_cast<double>(S) + w.phase);
      }
      if (spec.noise_sigma > 0) v += spec.noise_sigma * noise(rng);
      img[y * S + x] = clamp ? std::clamp(v, 0.0, 1.0) : v;
    }
  }
  return img;
}

SyntheticSet generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  SyntheticSet set;
  for (std::size_t c = 0; c < spec.classes(); ++c) set.index.class_names.push_back("band" + std::to_string(c));
  for (std::size_t c = 0; c < spec.classes(); ++c) {
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      char name[64];
      std::snprintf(name, sizeof name, "%s/%04zu.png", set.index.class_names[c].c_str(), i);
      set.index.entries.push_back({name, static_cast<int>(c), Split::kTrain});
      set.images.push_back(render_synth(spec, draw_synth_sample(spec, seed, static_cast<int>(c), i)));
    }
  }
  stratified_split(set.index, seed);
  return set;
}

std::vector<fs::path> write_synthetic(const fs::path& root, const SyntheticSet& set, const SynthSpec& spec,
                                      std::uint64_t seed) {
  std::vector<fs::path> written;
  for (const auto& name : set.index.class_names) fs::create_directories(root / name);
  for (std::size_t i = 0; i < set.images.size(); ++i) {
    const fs::path p = root / set.index.entries[i].source;
    write_image(p, set.images[i]);
    written.push_back(p);
  }
  nlohmann::json manifest;
  manifest["generator"] = "ffcnet synthetic bands";
  manifest["seed"] = seed;
  manifest["image_size"] = spec.image_size;
  manifest["per_class"] = spec.per_class;
  manifest["noise_sigma"] = spec.noise_sigma;
  manifest["brightness_jitter"] = spec.brightness_jitter;
  manifest["max_shift"] = spec.max_shift;
  manifest["components"] = spec.components;
  manifest["amplitude"] = spec.amplitude;
  manifest["bands"] = spec.bands;
  manifest["classes"] = set.index.class_names;
  std::ofstream os(root / "manifest.json");
  os << manifest.dump(2) << '\n';
  if (!os) throw FormatError("cannot write " + (root / "manifest.json").string());
  return written;
}

int band_energy_class(const Tensor<double>& image, const SynthSpec& spec) {
  const std::size_t S = image.shape()[image.shape().rank() - 1];
  Tensor<double> plane(Shape{S, S});
  std::copy_n(image.data().begin(), S * S, plane.data().begin());
  const ComplexTensor<double> spectrum = fft2(ComplexTensor<double>(plane, Tensor<double>(plane.shape())));
  std::vector<double> energy(spec.classes(), 0.0);
  const double scale = static_cast<double>(S) / static_cast<double>(spec.image_size);
  for (std::size_t u = 0; u < S; ++u) {
    const double fu = u <= S / 2 ? static_cast<double>(u) : static_cast<double>(u) - static_cast<double>(S);
    for (std::size_t v = 0; v < S; ++v) {
      const double fv = v <= S / 2 ? static_cast<double>(v) : static_cast<double>(v) - static_cast<double>(S);
      const double r = std::hypot(fu, fv);
      const double e = spectrum.re()[u * S + v] * spectrum.re()[u * S + v] +
                       spectrum.im()[u * S + v] * spectrum.im()[u * S + v];
      for (std::size_t c = 0; c < spec.classes(); ++c) {
        const auto [lo, hi] = spec.band(c);
        if (r >= lo * scale && r < hi * scale) energy[c] += e;
      }
    }
  }
  return static_cast<int>(std::max_element(energy.begin(), energy.end()) - energy.begin());
}

}  // namespace ffcnet
