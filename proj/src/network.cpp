#include "ffcnet/network.hpp"

#include <fstream>
#include <sstream>

#include "binary_io.hpp"

namespace ffcnet {

ArchitectureSpec ArchitectureSpec::mini(std::size_t in_channels, std::size_t num_classes) {
  ArchitectureSpec a;
  a.in_channels = in_channels;
  a.stem = {16, 3, 1, false};
  a.stages = {{1, 16, 1}, {1, 32, 2}, {1, 64, 2}};
  a.head = {BridgeMode::kMagnitude, num_classes};
  return a;
}

ArchitectureSpec ArchitectureSpec::resnet18(std::size_t in_channels, std::size_t num_classes) {
  ArchitectureSpec a;
  a.in_channels = in_channels;
  a.stem = {64, 7, 2, true};
  a.stages = {{2, 64, 1}, {2, 128, 2}, {2, 256, 2}, {2, 512, 2}};
  a.head = {BridgeMode::kMagnitude, num_classes};
  return a;
}

void ArchitectureSpec::validate() const {
  if (in_channels == 0) throw ConfigError("architecture: input channel count must be positive");
  if (stem.channels == 0 || stem.kernel == 0 || stem.kernel % 2 == 0 || stem.stride < 1) {
    throw ConfigError("architecture: stem needs positive channels, odd kernel and stride >= 1");
  }
  if (stages.empty()) throw ConfigError("architecture: at least one stage is required");
  std::size_t prev = stem.channels;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const StageSpec& s = stages[i];
    if (s.blocks == 0 || s.channels == 0 || s.stride < 1) {
      throw ConfigError("architecture: stage " + std::to_string(i + 1) +
                        " needs positive blocks, channels and stride");
    }
    if (s.channels < prev) {
      throw ConfigError("architecture: stage channels must be non-decreasing (stage " +
                        std::to_string(i + 1) + " has " + std::to_string(s.channels) + " after " +
                        std::to_string(prev) + ")");
    }
    prev = s.channels;
  }
  if (head.num_classes < 2) throw ConfigError("architecture: num_classes must be >= 2");
}

template <typename T>
ResidualBlock<T> make_residual_block(std::size_t in_channels, std::size_t out_channels, int stride) {
  ResidualBlock<T> b;
  b.conv1 = make_complex_conv<T>(in_channels, out_channels, 3, stride, 1);
  b.bn1 = make_complex_bn<T>(out_channels);
  b.conv2 = make_complex_conv<T>(out_channels, out_channels, 3, 1, 1);
  b.bn2 = make_complex_bn<T>(out_channels);
  if (stride != 1 || in_channels != out_channels) {
    b.projection = make_complex_conv<T>(in_channels, out_channels, 1, stride, 0);
    b.projection_bn = make_complex_bn<T>(out_channels);
  }
  return b;
}

namespace {

template <typename T>
void store(ComplexConvParams<T>& dst, ComplexConvGrad<T>&& g) {
  dst.kernel_re = std::move(g.kernel_re);
  dst.kernel_im = std::move(g.kernel_im);
  if (g.bias) dst.bias = std::move(g.bias);
}

template <typename T>
void store(ComplexBNParams<T>& dst, ComplexBNGrad<T>&& g) {
  dst.gamma = std::move(g.gamma);
  dst.beta = std::move(g.beta);
}

template <typename T>
void add_in_place(ComplexTensor<T>& acc, const ComplexTensor<T>& g) {
  for (std::size_t k = 0; k < acc.size(); ++k) {
    acc.re()[k] += g.re()[k];
    acc.im()[k] += g.im()[k];
  }
}

}  // namespace

template <typename T>
ComplexTensor<T> block_forward(const ComplexTensor<T>& x, ResidualBlock<T>& block, bool training,
                               BlockCache<T>* cache) {
  ComplexTensor<T> a1 = complex_conv2d(x, block.conv1);
  ComplexTensor<T> b1 = complex_bn_forward(a1, block.bn1, training);
  ComplexTensor<T> r1 = complex_relu(b1);
  ComplexTensor<T> a2 = complex_conv2d(r1, block.conv2);
  ComplexTensor<T> b2 = complex_bn_forward(a2, block.bn2, training);

  ComplexTensor<T> pc;
  ComplexTensor<T> sum;
  if (block.projection) {
    pc = complex_conv2d(x, *block.projection);
    sum = add(complex_bn_forward(pc, *block.projection_bn, training), b2);
  } else {
    sum = add(x, b2);
  }
  ComplexTensor<T> out = complex_relu(sum);
  if (cache) {
    *cache = BlockCache<T>{x, std::move(a1), std::move(b1), std::move(r1), std::move(a2),
                           std::move(b2), std::move(pc), std::move(sum)};
  }
  return out;
}

template <typename T>
ComplexTensor<T> block_backward(const ResidualBlock<T>& block, const BlockCache<T>& cache,
                                const ComplexTensor<T>& grad_out, ResidualBlock<T>& grads,
                                bool training) {
  const ComplexTensor<T> g_sum = complex_relu_backward(cache.sum, grad_out);

  ComplexBNGrad<T> g_bn2 = complex_bn_backward(cache.conv2, block.bn2, g_sum, training);
  ComplexConvGrad<T> g_conv2 = complex_conv2d_backward(cache.relu1, block.conv2, g_bn2.input);
  const ComplexTensor<T> g_b1 = complex_relu_backward(cache.bn1, g_conv2.input);
  ComplexBNGrad<T> g_bn1 = complex_bn_backward(cache.conv1, block.bn1, g_b1, training);
  ComplexConvGrad<T> g_conv1 = complex_conv2d_backward(cache.input, block.conv1, g_bn1.input);

  ComplexTensor<T> g_x = std::move(g_conv1.input);
  if (block.projection) {
    ComplexBNGrad<T> g_pbn = complex_bn_backward(cache.proj_conv, *block.projection_bn, g_sum, training);
    ComplexConvGrad<T> g_proj = complex_conv2d_backward(cache.input, *block.projection, g_pbn.input);
    add_in_place(g_x, g_proj.input);
    store(*grads.projection_bn, std::move(g_pbn));
    store(*grads.projection, std::move(g_proj));
  } else {
    add_in_place(g_x, g_sum);
  }
  store(grads.bn2, std::move(g_bn2));
  store(grads.conv2, std::move(g_conv2));
  store(grads.bn1, std::move(g_bn1));
  store(grads.conv1, std::move(g_conv1));
  return g_x;
}

template <typename T>
Model<T>::Model(ArchitectureSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  Rng rng = make_rng(seed, "init");

  const int stem_pad = static_cast<int>(spec_.stem.kernel / 2);
  stem_.conv = make_complex_conv<T>(spec_.in_channels, spec_.stem.channels, spec_.stem.kernel,
                                    spec_.stem.stride, stem_pad);
  init_complex_conv(stem_.conv, rng);
  stem_.bn = make_complex_bn<T>(spec_.stem.channels);

  std::size_t channels = spec_.stem.channels;
  for (std::size_t s = 0; s < spec_.stages.size(); ++s) {
    const StageSpec& st = spec_.stages[s];
    for (std::size_t b = 0; b < st.blocks; ++b) {
      const int stride = b == 0 ? st.stride : 1;
      ResidualBlock<T> block = make_residual_block<T>(channels, st.channels, stride);
      init_complex_conv(block.conv1, rng);
      init_complex_conv(block.conv2, rng);
      if (block.projection) init_complex_conv(*block.projection, rng);
      blocks_.push_back(std::move(block));
      block_names_.push_back("stage" + std::to_string(s + 1) + ".block" + std::to_string(b));
      channels = st.channels;
    }
  }
  head_ = make_linear<T>(bridge_features(spec_.head.bridge, channels), spec_.head.num_classes, rng);

  stem_grad_ = stem_;
  block_grads_ = blocks_;
  head_grad_ = head_;
}

template <typename T>
Tensor<T> Model<T>::forward(const ComplexTensor<T>& x, bool training) {
  if (x.shape().rank() != 4 || x.shape()[1] != spec_.in_channels) {
    throw ShapeError("model expects (B, " + std::to_string(spec_.in_channels) +
                     ", H, W) spectral input (from the patch configuration), got " + x.shape().to_string());
  }
  cache_.valid = false;
  ComplexTensor<T> stem_conv = complex_conv2d(x, stem_.conv);
  ComplexTensor<T> stem_bn = complex_bn_forward(stem_conv, stem_.bn, training);
  ComplexTensor<T> h = complex_relu(stem_bn);
  ComplexTensor<T> stem_relu;
  if (spec_.stem.pool) {
    stem_relu = h;
    h = complex_avg_pool2d(h, 2);
  }

  std::vector<BlockCache<T>> block_caches(training ? blocks_.size() : 0);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    h = block_forward(h, blocks_[i], training, training ? &block_caches[i] : nullptr);
  }
  ComplexTensor<T> pooled = global_avg_pool(h);
  Tensor<T> features = bridge_forward(pooled, spec_.head.bridge);
  Tensor<T> logits = linear_forward(features, head_);

  if (training) {
    cache_.input = x;
    cache_.stem_conv = std::move(stem_conv);
    cache_.stem_bn = std::move(stem_bn);
    cache_.stem_relu = std::move(stem_relu);
    cache_.blocks = std::move(block_caches);
    cache_.trunk = std::move(h);
    cache_.pooled = std::move(pooled);
    cache_.features = std::move(features);
    cache_.valid = true;
  }
  return logits;
}

template <typename T>
ComplexTensor<T> Model<T>::backward(const Tensor<T>& grad_logits) {
  if (!cache_.valid) throw std::logic_error("Model::backward called without a training-mode forward");
  LinearGrad<T> g_head = linear_backward(cache_.features, head_, grad_logits);
  head_grad_.weight = std::move(g_head.weight);
  head_grad_.bias = std::move(g_head.bias);

  ComplexTensor<T> g = bridge_backward(cache_.pooled, spec_.head.bridge, g_head.input);
  g = global_avg_pool_backward(cache_.trunk.shape(), g);
  for (std::size_t i = blocks_.size(); i-- > 0;) {
    g = block_backward(blocks_[i], cache_.blocks[i], g, block_grads_[i]);
  }
  if (spec_.stem.pool) {
    g = complex_avg_pool2d_backward(cache_.stem_relu.shape(), 2, g);
  }
  g = complex_relu_backward(cache_.stem_bn, g);
  ComplexBNGrad<T> g_bn = complex_bn_backward(cache_.stem_conv, stem_.bn, g);
  ComplexConvGrad<T> g_conv = complex_conv2d_backward(cache_.input, stem_.conv, g_bn.input);
  ComplexTensor<T> g_in = std::move(g_conv.input);
  store(stem_grad_.bn, std::move(g_bn));
  store(stem_grad_.conv, std::move(g_conv));
  return g_in;
}

template <typename T>
template <typename Fn>
void Model<T>::visit(Fn&& fn) {
  auto conv = [&](const std::string& name, ComplexConvParams<T>& v, ComplexConvParams<T>& g) {
    fn(name + ".kernel_re", &v.kernel_re, &g.kernel_re, false, false);
    fn(name + ".kernel_im", &v.kernel_im, &g.kernel_im, false, false);
    if (v.bias) {
      fn(name + ".bias_re", &v.bias->re(), &g.bias->re(), false, false);
      fn(name + ".bias_im", &v.bias->im(), &g.bias->im(), false, false);
    }
  };
  auto bn = [&](const std::string& name, ComplexBNParams<T>& v, ComplexBNParams<T>& g) {
    fn(name + ".gamma", &v.gamma, &g.gamma, true, false);
    fn(name + ".beta", &v.beta, &g.beta, false, false);
    fn(name + ".running_mean", &v.running_mean, nullptr, false, true);
    fn(name + ".running_cov", &v.running_cov, nullptr, false, true);
  };
  conv("stem.conv", stem_.conv, stem_grad_.conv);
  bn("stem.bn", stem_.bn, stem_grad_.bn);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string& p = block_names_[i];
    ResidualBlock<T>& v = blocks_[i];
    ResidualBlock<T>& g = block_grads_[i];
    conv(p + ".conv1", v.conv1, g.conv1);
    bn(p + ".bn1", v.bn1, g.bn1);
    conv(p + ".conv2", v.conv2, g.conv2);
    bn(p + ".bn2", v.bn2, g.bn2);
    if (v.projection) {
      conv(p + ".projection", *v.projection, *g.projection);
      bn(p + ".projection_bn", *v.projection_bn, *g.projection_bn);
    }
  }
  fn(std::string("head.linear.weight"), &head_.weight, &head_grad_.weight, false, false);
  fn(std::string("head.linear.bias"), &head_.bias, &head_grad_.bias, false, false);
}

template <typename T>
std::vector<ParamView<T>> Model<T>::parameters() {
  std::vector<ParamView<T>> out;
  visit([&](const std::string& name, Tensor<T>* v, Tensor<T>* g, bool psd, bool buffer) {
    if (!buffer) out.push_back({name, v, g, psd});
  });
  return out;
}

template <typename T>
std::vector<BufferView<T>> Model<T>::buffers() {
  std::vector<BufferView<T>> out;
  visit([&](const std::string& name, Tensor<T>* v, Tensor<T>*, bool, bool buffer) {
    if (buffer) out.push_back({name, v});
  });
  return out;
}

template <typename T>
std::size_t Model<T>::parameter_count() {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.value->size();
  return n;
}

template <typename T>
void Model<T>::project_constraints() {
  project_gamma_psd(stem_.bn);
  for (auto& b : blocks_) {
    project_gamma_psd(b.bn1);
    project_gamma_psd(b.bn2);
    if (b.projection_bn) project_gamma_psd(*b.projection_bn);
  }
}

template <typename T>
bool Model<T>::constraints_hold(double tolerance) {
  bool ok = gamma_is_psd(stem_.bn, tolerance);
  for (auto& b : blocks_) {
    ok = ok && gamma_is_psd(b.bn1, tolerance) && gamma_is_psd(b.bn2, tolerance);
    if (b.projection_bn) ok = ok && gamma_is_psd(*b.projection_bn, tolerance);
  }
  return ok;
}

namespace {

struct ManifestEntry {
  std::string name;
  Shape shape;
};

template <typename T>
std::vector<std::pair<ManifestEntry, Tensor<T>*>> checkpoint_entries(Model<T>& model) {
  std::vector<std::pair<ManifestEntry, Tensor<T>*>> out;
  for (auto& p : model.parameters()) out.push_back({{p.name, p.value->shape()}, p.value});
  for (auto& b : model.buffers()) out.push_back({{b.name, b.value->shape()}, b.value});
  return out;
}

}  // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& path, Model<T>& model) {
  using detail::put_le;
  const auto entries = checkpoint_entries(model);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os.write("FFCW", 4);
  put_le<std::uint16_t>(os, 1);
  put_le(os, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [m, t] : entries) {
    put_le(os, static_cast<std::uint16_t>(m.name.size()));
    os.write(m.name.data(), static_cast<std::streamsize>(m.name.size()));
    put_le(os, static_cast<std::uint8_t>(m.shape.rank()));
    for (std::size_t d : m.shape.dims()) put_le(os, static_cast<std::uint32_t>(d));
  }
  for (const auto& [m, t] : entries) {
    for (T v : t->data()) detail::put_f32(os, static_cast<float>(v));
  }
  if (!os) throw FormatError("write failed for " + path.string());
}

template <typename T>
void load_checkpoint(const std::filesystem::path& path, Model<T>& model) {
  using detail::get_le;
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint " + path.string());
  detail::expect_magic(is, "FFCW", path.string());
  const auto version = get_le<std::uint16_t>(is, "version");
  if (version != 1) throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));

  const auto count = get_le<std::uint32_t>(is, "entry count");
  std::vector<ManifestEntry> manifest;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get_le<std::uint16_t>(is, "name length");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw FormatError(path.string() + ": truncated manifest");
    const auto rank = get_le<std::uint8_t>(is, "rank");
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) d = get_le<std::uint32_t>(is, "dimension");
    manifest.push_back({std::move(name), Shape(std::move(dims))});
  }

  auto entries = checkpoint_entries(model);
  std::ostringstream mismatch;
  const std::size_t n = std::max(entries.size(), manifest.size());
  for (std::size_t i = 0; i < n; ++i) {
    const bool have_file = i < manifest.size();
    const bool have_model = i < entries.size();
    if (have_file && have_model && manifest[i].name == entries[i].first.name &&
        manifest[i].shape == entries[i].first.shape) {
      continue;
    }
    mismatch << "\n  [" << i << "] checkpoint "
             << (have_file ? manifest[i].name + " " + manifest[i].shape.to_string() : "<none>")
             << " vs model "
             << (have_model ? entries[i].first.name + " " + entries[i].first.shape.to_string() : "<none>");
  }
  if (!mismatch.str().empty()) {
    throw FormatError(path.string() + ": checkpoint does not match the architecture:" + mismatch.str());
  }
  for (auto& [m, t] : entries) {
    for (T& v : t->data()) v = static_cast<T>(detail::get_f32(is, "tensor data"));
  }
  if (!model.constraints_hold()) {
    throw FormatError(path.string() + ": a batch-norm gamma is not positive semi-definite");
  }
}

#define FFCNET_INSTANTIATE(T)                                                                        \
  template ResidualBlock<T> make_residual_block(std::size_t, std::size_t, int);                      \
  template ComplexTensor<T> block_forward(const ComplexTensor<T>&, ResidualBlock<T>&, bool,          \
                                          BlockCache<T>*);                                           \
  template ComplexTensor<T> block_backward(const ResidualBlock<T>&, const BlockCache<T>&,            \
                                           const ComplexTensor<T>&, ResidualBlock<T>&, bool);        \
  template class Model<T>;                                                                           \
  template void save_checkpoint(const std::filesystem::path&, Model<T>&);                            \
  template void load_checkpoint(const std::filesystem::path&, Model<T>&);

FFCNET_INSTANTIATE(float)
FFCNET_INSTANTIATE(double)

#undef FFCNET_INSTANTIATE

}  // namespace ffcnet
