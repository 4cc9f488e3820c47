#include <algorithm>
#include <cmath>
#include <random>

#include "ffcnet/layers.hpp"

namespace ffcnet {

template <typename T>
ComplexTensor<T> complex_relu(const ComplexTensor<T>& x) {
  ComplexTensor<T> y(x.shape());
  for (std::size_t k = 0; k < x.size(); ++k) {
    y.re()[k] = std::max(x.re()[k], T{0});
    y.im()[k] = std::max(x.im()[k], T{0});
  }
  return y;
}

template <typename T>
ComplexTensor<T> complex_relu_backward(const ComplexTensor<T>& x, const ComplexTensor<T>& grad_out) {
  require_same_shape(x.shape(), grad_out.shape(), "complex_relu_backward");
  ComplexTensor<T> g(x.shape());
  for (std::size_t k = 0; k < x.size(); ++k) {
    g.re()[k] = x.re()[k] > T{0} ? grad_out.re()[k] : T{0};
    g.im()[k] = x.im()[k] > T{0} ? grad_out.im()[k] : T{0};
  }
  return g;
}

template <typename T>
ComplexTensor<T> complex_avg_pool2d(const ComplexTensor<T>& x, std::size_t factor) {
  const Shape& s = x.shape();
  if (s.rank() != 4 || factor == 0 || s[2] % factor != 0 || s[3] % factor != 0) {
    throw ShapeError("complex_avg_pool2d: factor " + std::to_string(factor) +
                     " does not tile input " + s.to_string());
  }
  const std::size_t oh = s[2] / factor, ow = s[3] / factor;
  const double inv = 1.0 / static_cast<double>(factor * factor);
  ComplexTensor<T> y(Shape{s[0], s[1], oh, ow});
  for (std::size_t n = 0; n < s[0] * s[1]; ++n) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double sr = 0, si = 0;
        for (std::size_t dy = 0; dy < factor; ++dy) {
          for (std::size_t dx = 0; dx < factor; ++dx) {
            const std::size_t k = (n * s[2] + oy * factor + dy) * s[3] + ox * factor + dx;
            sr += x.re()[k];
            si += x.im()[k];
          }
        }
        y.re()[(n * oh + oy) * ow + ox] = static_cast<T>(sr * inv);
        y.im()[(n * oh + oy) * ow + ox] = static_cast<T>(si * inv);
      }
    }
  }
  return y;
}

template <typename T>
ComplexTensor<T> complex_avg_pool2d_backward(const Shape& input_shape, std::size_t factor,
                                             const ComplexTensor<T>& grad_out) {
  const Shape& s = input_shape;
  const std::size_t oh = s[2] / factor, ow = s[3] / factor;
  require_same_shape(grad_out.shape(), Shape{s[0], s[1], oh, ow}, "complex_avg_pool2d_backward");
  const T inv = static_cast<T>(1.0 / static_cast<double>(factor * factor));
  ComplexTensor<T> g(s);
  for (std::size_t n = 0; n < s[0] * s[1]; ++n) {
    for (std::size_t y = 0; y < s[2]; ++y) {
      for (std::size_t x = 0; x < s[3]; ++x) {
        const std::size_t src = (n * oh + y / factor) * ow + x / factor;
        g.re()[(n * s[2] + y) * s[3] + x] = grad_out.re()[src] * inv;
        g.im()[(n * s[2] + y) * s[3] + x] = grad_out.im()[src] * inv;
      }
    }
  }
  return g;
}

template <typename T>
ComplexTensor<T> global_avg_pool(const ComplexTensor<T>& x) {
  const Shape& s = x.shape();
  if (s.rank() != 4) throw ShapeError("global_avg_pool expects (B, C, H, W), got " + s.to_string());
  const std::size_t area = s[2] * s[3];
  ComplexTensor<T> y(Shape{s[0], s[1]});
  for (std::size_t n = 0; n < s[0] * s[1]; ++n) {
    double sr = 0, si = 0;
    for (std::size_t k = 0; k < area; ++k) {
      sr += x.re()[n * area + k];
      si += x.im()[n * area + k];
    }
    y.re()[n] = static_cast<T>(sr / static_cast<double>(area));
    y.im()[n] = static_cast<T>(si / static_cast<double>(area));
  }
  return y;
}

template <typename T>
ComplexTensor<T> global_avg_pool_backward(const Shape& input_shape, const ComplexTensor<T>& grad_out) {
  const Shape& s = input_shape;
  require_same_shape(grad_out.shape(), Shape{s[0], s[1]}, "global_avg_pool_backward");
  const std::size_t area = s[2] * s[3];
  const T inv = static_cast<T>(1.0 / static_cast<double>(area));
  ComplexTensor<T> g(s);
  for (std::size_t n = 0; n < s[0] * s[1]; ++n) {
    std::fill_n(g.re().data().begin() + n * area, area, grad_out.re()[n] * inv);
    std::fill_n(g.im().data().begin() + n * area, area, grad_out.im()[n] * inv);
  }
  return g;
}

std::size_t bridge_features(BridgeMode mode, std::size_t channels) {
  return mode == BridgeMode::kConcat ? 2 * channels : channels;
}

template <typename T>
Tensor<T> bridge_forward(const ComplexTensor<T>& x, BridgeMode mode) {
  const Shape& s = x.shape();
  if (s.rank() != 2) throw ShapeError("bridge expects (B, C) features, got " + s.to_string());
  const std::size_t B = s[0], C = s[1];
  Tensor<T> y(Shape{B, bridge_features(mode, C)});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t k = b * C + c;
      switch (mode) {
        case BridgeMode::kMagnitude:
          y[k] = std::hypot(x.re()[k], x.im()[k]);
          break;
        case BridgeMode::kRealPart:
          y[k] = x.re()[k];
          break;
        case BridgeMode::kConcat:
          y[b * 2 * C + c] = x.re()[k];
          y[b * 2 * C + C + c] = x.im()[k];
          break;
      }
    }
  }
  return y;
}

template <typename T>
ComplexTensor<T> bridge_backward(const ComplexTensor<T>& x, BridgeMode mode, const Tensor<T>& grad_out) {
  const std::size_t B = x.shape()[0], C = x.shape()[1];
  require_same_shape(grad_out.shape(), Shape{B, bridge_features(mode, C)}, "bridge_backward");
  ComplexTensor<T> g(x.shape());
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t k = b * C + c;
      switch (mode) {
        case BridgeMode::kMagnitude: {
          const T m = std::hypot(x.re()[k], x.im()[k]);
          if (m > T{0}) {
            g.re()[k] = grad_out[k] * x.re()[k] / m;
            g.im()[k] = grad_out[k] * x.im()[k] / m;
          }
          break;
        }
        case BridgeMode::kRealPart:
          g.re()[k] = grad_out[k];
          break;
        case BridgeMode::kConcat:
          g.re()[k] = grad_out[b * 2 * C + c];
          g.im()[k] = grad_out[b * 2 * C + C + c];
          break;
      }
    }
  }
  return g;
}

template <typename T>
LinearParams<T> make_linear(std::size_t in, std::size_t out, Rng& rng) {
  LinearParams<T> p{Tensor<T>(Shape{out, in}), Tensor<T>(Shape{out})};
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (T& w : p.weight.data()) w = static_cast<T>(dist(rng));
  return p;
}

template <typename T>
Tensor<T> linear_forward(const Tensor<T>& x, const LinearParams<T>& params) {
  const Shape& ws = params.weight.shape();
  if (x.shape().rank() != 2 || x.shape()[1] != ws[1]) {
    throw ShapeError("linear: input " + x.shape().to_string() + " incompatible with weight " + ws.to_string());
  }
  const std::size_t B = x.shape()[0], in = ws[1], out = ws[0];
  Tensor<T> y(Shape{B, out});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t o = 0; o < out; ++o) {
      double acc = params.bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += static_cast<double>(x[b * in + i]) * params.weight[o * in + i];
      y[b * out + o] = static_cast<T>(acc);
    }
  }
  return y;
}

template <typename T>
LinearGrad<T> linear_backward(const Tensor<T>& x, const LinearParams<T>& params, const Tensor<T>& grad_out) {
  const std::size_t B = x.shape()[0], in = params.weight.shape()[1], out = params.weight.shape()[0];
  require_same_shape(grad_out.shape(), Shape{B, out}, "linear_backward");
  LinearGrad<T> g{Tensor<T>(params.weight.shape()), Tensor<T>(params.bias.shape()), Tensor<T>(x.shape())};
  for (std::size_t o = 0; o < out; ++o) {
    double gb = 0;
    for (std::size_t b = 0; b < B; ++b) gb += grad_out[b * out + o];
    g.bias[o] = static_cast<T>(gb);
    for (std::size_t i = 0; i < in; ++i) {
      double gw = 0;
      for (std::size_t b = 0; b < B; ++b) gw += static_cast<double>(grad_out[b * out + o]) * x[b * in + i];
      g.weight[o * in + i] = static_cast<T>(gw);
    }
  }
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < in; ++i) {
      double gx = 0;
      for (std::size_t o = 0; o < out; ++o) gx += static_cast<double>(grad_out[b * out + o]) * params.weight[o * in + i];
      g.input[b * in + i] = static_cast<T>(gx);
    }
  }
  return g;
}

#define FFCNET_INSTANTIATE(T)                                                                            \
  template ComplexTensor<T> complex_relu(const ComplexTensor<T>&);                                       \
  template ComplexTensor<T> complex_relu_backward(const ComplexTensor<T>&, const ComplexTensor<T>&);     \
  template ComplexTensor<T> complex_avg_pool2d(const ComplexTensor<T>&, std::size_t);                    \
  template ComplexTensor<T> complex_avg_pool2d_backward(const Shape&, std::size_t,                       \
                                                        const ComplexTensor<T>&);                        \
  template ComplexTensor<T> global_avg_pool(const ComplexTensor<T>&);                                    \
  template ComplexTensor<T> global_avg_pool_backward(const Shape&, const ComplexTensor<T>&);             \
  template Tensor<T> bridge_forward(const ComplexTensor<T>&, BridgeMode);                                \
  template ComplexTensor<T> bridge_backward(const ComplexTensor<T>&, BridgeMode, const Tensor<T>&);      \
  template LinearParams<T> make_linear(std::size_t, std::size_t, Rng&);                                  \
  template Tensor<T> linear_forward(const Tensor<T>&, const LinearParams<T>&);                           \
  template LinearGrad<T> linear_backward(const Tensor<T>&, const LinearParams<T>&, const Tensor<T>&);

FFCNET_INSTANTIATE(float)
FFCNET_INSTANTIATE(double)

#undef FFCNET_INSTANTIATE

}  // namespace ffcnet
