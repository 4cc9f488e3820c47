#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ffcnet/layers.hpp"

namespace ffcnet {

struct StemSpec {
  std::size_t channels = 16;
  std::size_t kernel = 3;
  int stride = 1;
  bool pool = false;  // 2x2 average pool after the stem (the 400x400 configuration)
};

struct StageSpec {
  std::size_t blocks = 1;
  std::size_t channels = 16;
  int stride = 1;  // stride of the first block's first convolution
};

struct HeadSpec {
  BridgeMode bridge = BridgeMode::kMagnitude;
  std::size_t num_classes = 4;
};

/// Complex residual classifier layout: stem, stages of residual blocks,
/// global average pool, complex -> real bridge, linear classifier.
struct ArchitectureSpec {
  std::size_t in_channels = 16;
  StemSpec stem;
  std::vector<StageSpec> stages;
  HeadSpec head;

  /// Desk-scale default: 16-channel 3x3 stem, stages (1,16,1), (1,32,2), (1,64,2).
  static ArchitectureSpec mini(std::size_t in_channels, std::size_t num_classes = 4);
  /// ResNet-18 layout: 7x7/2 stem with pooling, four stages of two blocks.
  static ArchitectureSpec resnet18(std::size_t in_channels, std::size_t num_classes = 4);

  void validate() const;
};

/// Two 3x3 complex convolutions with complex BN and one shortcut path.
/// The shortcut is a 1x1 complex conv + BN projection iff the block changes
/// stride or channel count.
template <typename T>
struct ResidualBlock {
  ComplexConvParams<T> conv1;
  ComplexBNParams<T> bn1;
  ComplexConvParams<T> conv2;
  ComplexBNParams<T> bn2;
  std::optional<ComplexConvParams<T>> projection;
  std::optional<ComplexBNParams<T>> projection_bn;
};

template <typename T>
ResidualBlock<T> make_residual_block(std::size_t in_channels, std::size_t out_channels, int stride);

/// Intermediate activations kept for the backward pass.
template <typename T>
struct BlockCache {
  ComplexTensor<T> input, conv1, bn1, relu1, conv2, bn2, proj_conv, sum;
};

/// out = relu(shortcut(x) + bn2(conv2(relu(bn1(conv1(x)))))). BN params are
/// mutable because training mode updates their running statistics.
template <typename T>
ComplexTensor<T> block_forward(const ComplexTensor<T>& x, ResidualBlock<T>& block, bool training,
                               BlockCache<T>* cache = nullptr);

/// Returns the input gradient and writes parameter gradients into `grads`,
/// which mirrors `block` (kernels, gamma and beta hold gradients).
template <typename T>
ComplexTensor<T> block_backward(const ResidualBlock<T>& block, const BlockCache<T>& cache,
                                const ComplexTensor<T>& grad_out, ResidualBlock<T>& grads,
                                bool training = true);

/// A trainable tensor paired with its gradient buffer.
template <typename T>
struct ParamView {
  std::string name;
  Tensor<T>* value;
  Tensor<T>* grad;
  bool psd_gamma = false;  // a BN gamma block of (rr, ii, ri) triples
};

template <typename T>
struct BufferView {
  std::string name;
  Tensor<T>* value;
};

template <typename T>
class Model {
 public:
  /// Deterministic initialization from `seed`.
  Model(ArchitectureSpec spec, std::uint64_t seed);

  const ArchitectureSpec& spec() const { return spec_; }

  /// x: (B, in_channels, H, W) spectral input; returns (B, classes) logits.
  /// Training mode uses batch statistics, updates running statistics and
  /// caches activations for backward().
  Tensor<T> forward(const ComplexTensor<T>& x, bool training);

  /// Backpropagates from the last training-mode forward; overwrites all
  /// parameter gradients. Returns the input gradient.
  ComplexTensor<T> backward(const Tensor<T>& grad_logits);

  std::vector<ParamView<T>> parameters();
  std::vector<BufferView<T>> buffers();
  std::size_t parameter_count();

  /// Keeps every BN gamma positive semi-definite.
  void project_constraints();
  bool constraints_hold(double tolerance = -1e-6);

 private:
  struct Stem {
    ComplexConvParams<T> conv;
    ComplexBNParams<T> bn;
  };
  struct Cache {
    bool valid = false;
    ComplexTensor<T> input, stem_conv, stem_bn, stem_relu;
    std::vector<BlockCache<T>> blocks;
    ComplexTensor<T> trunk, pooled;
    Tensor<T> features;
  };

  template <typename Fn>
  void visit(Fn&& fn);

  ArchitectureSpec spec_;
  Stem stem_, stem_grad_;
  std::vector<ResidualBlock<T>> blocks_, block_grads_;
  std::vector<std::string> block_names_;
  LinearParams<T> head_, head_grad_;
  Cache cache_;
};

/// Writes all parameters and running statistics as float32 ("FFCW").
template <typename T>
void save_checkpoint(const std::filesystem::path& path, Model<T>& model);

/// Loads a checkpoint into `model`. Throws FormatError listing every
/// name/shape mismatch against the model's manifest, or if a BN gamma is not
/// positive semi-definite.
template <typename T>
void load_checkpoint(const std::filesystem::path& path, Model<T>& model);

}  // namespace ffcnet
