#pragma once

// Finite-difference checks of every backward pass. Each function builds a
// random float64 problem from `seed`, runs the analytic backward and returns
// the worst relative error against central differences.

#include <string>
#include <vector>

#include "ffcnet/layers.hpp"
#include "ffcnet/network.hpp"
#include "ffcnet/training.hpp"
#include "support/oracles.hpp"

namespace ffcnet::testing {

struct GradReport {
  std::string name;
  double error = 0;
};

inline double worst(std::initializer_list<double> errors) {
  double m = 0;
  for (double e : errors) m = std::max(m, e);
  return m;
}

inline GradReport conv_grad(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  const std::size_t cin = 1 + gen() % 2, cout = 1 + gen() % 2, k = (gen() % 2) ? 3 : 1;
  const int stride = 1 + static_cast<int>(gen() % 2), pad = static_cast<int>(k / 2);
  auto p = make_complex_conv<double>(cin, cout, k, stride, pad, true);
  p.kernel_re = random_tensor(p.kernel_re.shape(), gen);
  p.kernel_im = random_tensor(p.kernel_im.shape(), gen);
  p.bias = random_complex(Shape{cout}, gen);
  auto x = random_complex(Shape{2, cin, 5, 4}, gen);
  const auto w = random_complex(complex_conv2d(x, p).shape(), gen);
  const auto g = complex_conv2d_backward(x, p, w);
  const auto loss = [&] { return project(complex_conv2d(x, p), w); };
  return {"complex_conv2d",
          worst({fd_check(x.re().data(), g.input.re().data(), loss, gen),
                 fd_check(x.im().data(), g.input.im().data(), loss, gen),
                 fd_check(p.kernel_re.data(), g.kernel_re.data(), loss, gen),
                 fd_check(p.kernel_im.data(), g.kernel_im.data(), loss, gen),
                 fd_check(p.bias->re().data(), g.bias->re().data(), loss, gen),
                 fd_check(p.bias->im().data(), g.bias->im().data(), loss, gen)})};
}

inline GradReport relu_grad(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  auto x = random_complex(Shape{2, 3, 4, 4}, gen);
  // Keep every component at least 1e-3 from the kink.
  for (auto* plane : {&x.re(), &x.im()}) {
    for (double& v : plane->data()) {
      if (std::abs(v) < 1e-3) v = v < 0 ? -1e-3 - std::abs(v) : 1e-3 + v;
    }
  }
  const auto w = random_complex(x.shape(), gen);
  const auto g = complex_relu_backward(x, w);
  const auto loss = [&] { return project(complex_relu(x), w); };
  return {"complex_relu", worst({fd_check(x.re().data(), g.re().data(), loss, gen),
                                 fd_check(x.im().data(), g.im().data(), loss, gen)})};
}

inline ComplexBNParams<double> random_bn(std::size_t channels, std::mt19937_64& gen) {
  auto p = make_complex_bn<double>(channels);
  std::uniform_real_distribution<double> u(0.5, 1.5), r(-0.3, 0.3);
  for (std::size_t c = 0; c < channels; ++c) {
    p.gamma[c * 3 + 0] = u(gen);
    p.gamma[c * 3 + 1] = u(gen);
    p.gamma[c * 3 + 2] = r(gen);
    p.beta[c * 2 + 0] = r(gen);
    p.beta[c * 2 + 1] = r(gen);
    p.running_mean[c * 2 + 0] = r(gen);
    p.running_mean[c * 2 + 1] = r(gen);
    p.running_cov[c * 3 + 0] = u(gen);
    p.running_cov[c * 3 + 1] = u(gen);
    p.running_cov[c * 3 + 2] = r(gen);
  }
  return p;
}

inline GradReport bn_grad(std::uint64_t seed, bool training) {
  std::mt19937_64 gen(seed);
  auto p = random_bn(2, gen);
  auto x = random_complex(Shape{4, 2, 3, 3}, gen);
  // Correlated re/im so the off-diagonal covariance term matters.
  for (std::size_t i = 0; i < x.size(); ++i) x.im()[i] += 0.6 * x.re()[i];
  auto scratch = p;
  const auto w = random_complex(x.shape(), gen);
  const auto g = complex_bn_backward(x, p, w, training);
  const auto loss = [&] {
    scratch = p;
    return project(complex_bn_forward(x, scratch, training), w);
  };
  return {training ? "complex_bn (training)" : "complex_bn (eval)",
          worst({fd_check(x.re().data(), g.input.re().data(), loss, gen),
                 fd_check(x.im().data(), g.input.im().data(), loss, gen),
                 fd_check(p.gamma.data(), g.gamma.data(), loss, gen),
                 fd_check(p.beta.data(), g.beta.data(), loss, gen)})};
}

inline GradReport pool_grad(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  auto x = random_complex(Shape{2, 2, 4, 6}, gen);
  const auto w = random_complex(complex_avg_pool2d(x, 2).shape(), gen);
  const auto g = complex_avg_pool2d_backward(x.shape(), 2, w);
  const auto loss = [&] { return project(complex_avg_pool2d(x, 2), w); };
  return {"complex_avg_pool2d", worst({fd_check(x.re().data(), g.re().data(), loss, gen),
                                       fd_check(x.im().data(), g.im().data(), loss, gen)})};
}

inline GradReport global_pool_grad(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  auto x = random_complex(Shape{2, 3, 3, 3}, gen);
  const auto w = random_complex(Shape{2, 3}, gen);
  const auto g = global_avg_pool_backward(x.shape(), w);
  const auto loss = [&] { return project(global_avg_pool(x), w); };
  return {"global_avg_pool", worst({fd_check(x.re().data(), g.re().data(), loss, gen),
                                    fd_check(x.im().data(), g.im().data(), loss, gen)})};
}

inline GradReport bridge_grad(std::uint64_t seed, BridgeMode mode) {
  std::mt19937_64 gen(seed);
  auto x = random_complex(Shape{3, 4}, gen);
  const auto w = random_tensor(bridge_forward(x, mode).shape(), gen);
  const auto g = bridge_backward(x, mode, w);
  const auto loss = [&] { return project(bridge_forward(x, mode), w); };
  const char* names[] = {"bridge (magnitude)", "bridge (real part)", "bridge (concat)"};
  return {names[static_cast<int>(mode)], worst({fd_check(x.re().data(), g.re().data(), loss, gen),
                                                fd_check(x.im().data(), g.im().data(), loss, gen)})};
}

inline GradReport linear_grad(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  Rng rng(seed);
  auto p = make_linear<double>(5, 3, rng);
  p.bias = random_tensor(p.bias.shape(), gen);
  auto x = random_tensor(Shape{4, 5}, gen);
  const auto w = random_tensor(Shape{4, 3}, gen);
  const auto g = linear_backward(x, p, w);
  const auto loss = [&] { return project(linear_forward(x, p), w); };
  return {"linear", worst({fd_check(x.data(), g.input.data(), loss, gen),
                           fd_check(p.weight.data(), g.weight.data(), loss, gen),
                           fd_check(p.bias.data(), g.bias.data(), loss, gen)})};
}

inline GradReport cross_entropy_grad(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  auto logits = random_tensor(Shape{5, 4}, gen, 2.0);
  std::vector<int> labels(5);
  for (int& l : labels) l = static_cast<int>(gen() % 4);
  const auto r = cross_entropy(logits, labels);
  const auto loss = [&] { return cross_entropy(logits, labels).loss; };
  return {"cross_entropy", fd_check(logits.data(), r.grad.data(), loss, gen)};
}

inline GradReport block_grad(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  Rng rng(seed);
  auto block = make_residual_block<double>(2, 3, 2);  // projection shortcut
  for (auto* conv : {&block.conv1, &block.conv2, &*block.projection}) init_complex_conv(*conv, rng);
  auto x = random_complex(Shape{3, 2, 4, 4}, gen);
  BlockCache<double> cache;
  auto scratch = block;
  const auto out = block_forward(x, scratch, true, &cache);
  const auto w = random_complex(out.shape(), gen);
  auto grads = block;
  const auto gx = block_backward(block, cache, w, grads, true);
  const auto loss = [&] {
    scratch = block;
    return project(block_forward(x, scratch, true), w);
  };
  return {"residual block",
          worst({fd_check(x.re().data(), gx.re().data(), loss, gen),
                 fd_check(x.im().data(), gx.im().data(), loss, gen),
                 fd_check(block.conv1.kernel_re.data(), grads.conv1.kernel_re.data(), loss, gen),
                 fd_check(block.conv2.kernel_im.data(), grads.conv2.kernel_im.data(), loss, gen),
                 fd_check(block.bn1.gamma.data(), grads.bn1.gamma.data(), loss, gen),
                 fd_check(block.bn2.beta.data(), grads.bn2.beta.data(), loss, gen),
                 fd_check(block.projection->kernel_re.data(), grads.projection->kernel_re.data(), loss, gen),
                 fd_check(block.projection_bn->gamma.data(), grads.projection_bn->gamma.data(), loss, gen)})};
}

/// Mini network end to end through the cross-entropy loss on a 2-sample batch.
inline GradReport model_grad(std::uint64_t seed, BridgeMode bridge = BridgeMode::kMagnitude) {
  std::mt19937_64 gen(seed);
  auto spec = ArchitectureSpec::mini(16, 4);
  spec.head.bridge = bridge;
  Model<double> model(spec, seed);
  auto x = random_complex(Shape{2, 16, 4, 4}, gen);
  const std::vector<int> labels{static_cast<int>(gen() % 4), static_cast<int>(gen() % 4)};
  const auto r = cross_entropy(model.forward(x, true), labels);
  const auto gx = model.backward(r.grad);
  const auto loss = [&] { return cross_entropy(model.forward(x, true), labels).loss; };
  double err = worst({fd_check(x.re().data(), gx.re().data(), loss, gen, 24),
                      fd_check(x.im().data(), gx.im().data(), loss, gen, 24)});
  for (auto& p : model.parameters()) {
    const Tensor<double> analytic = *p.grad;  // later forwards leave gradients alone, copy anyway
    err = std::max(err, fd_check(p.value->data(), analytic.data(), loss, gen, 6));
  }
  return {"mini network end to end", err};
}

/// Every layer-level check for one seed.
inline std::vector<GradReport> layer_grads(std::uint64_t seed) {
  return {conv_grad(seed),
          relu_grad(seed),
          bn_grad(seed, true),
          bn_grad(seed, false),
          pool_grad(seed),
          global_pool_grad(seed),
          bridge_grad(seed, BridgeMode::kMagnitude),
          bridge_grad(seed, BridgeMode::kRealPart),
          bridge_grad(seed, BridgeMode::kConcat),
          linear_grad(seed),
          cross_entropy_grad(seed)};
}

}  // namespace ffcnet::testing
