#include <Eigen/Core>
#include <cmath>
#include <random>

#include "ffcnet/layers.hpp"

namespace ffcnet {

// The complex product is evaluated as one real GEMM on stacked planes:
//
//   [out_re]   [ c  -d ] [cols(x.re)]
//   [out_im] = [ d   c ] [cols(x.im)]
//
// which is term for term (a*c - b*d) + (a*d + b*c)i.

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvGeometry {
  std::size_t batch, cin, height, width;
  std::size_t cout, k, stride, pad;
  std::size_t out_h, out_w;

  std::size_t positions() const { return out_h * out_w; }
  std::size_t patch_rows() const { return cin * k * k; }
};

template <typename T>
ConvGeometry geometry(const Shape& xs, const ComplexConvParams<T>& p) {
  const Shape& ks = p.kernel_re.shape();
  if (ks.rank() != 4 || ks[2] != ks[3]) {
    throw ShapeError("conv kernel must be (Cout, Cin, k, k), got " + ks.to_string());
  }
  require_same_shape(ks, p.kernel_im.shape(), "complex_conv2d kernels");
  if (xs.rank() != 4) throw ShapeError("complex_conv2d expects (B, C, H, W), got " + xs.to_string());
  if (xs[1] != ks[1]) {
    throw ShapeError("complex_conv2d: input " + xs.to_string() + " has " + std::to_string(xs[1]) +
                     " channels, kernel " + ks.to_string() + " expects " + std::to_string(ks[1]));
  }
  if (p.stride < 1 || p.padding < 0) throw ShapeError("complex_conv2d: invalid stride/padding");
  ConvGeometry g{xs[0], xs[1], xs[2], xs[3], ks[0], ks[2],
                 static_cast<std::size_t>(p.stride), static_cast<std::size_t>(p.padding), 0, 0};
  if (g.height + 2 * g.pad < g.k || g.width + 2 * g.pad < g.k) {
    throw ShapeError("complex_conv2d: kernel " + ks.to_string() + " larger than padded input " +
                     xs.to_string());
  }
  g.out_h = (g.height + 2 * g.pad - g.k) / g.stride + 1;
  g.out_w = (g.width + 2 * g.pad - g.k) / g.stride + 1;
  if (p.bias && p.bias->shape() != Shape{g.cout}) {
    throw ShapeError("complex_conv2d: bias shape " + p.bias->shape().to_string() + " != (" +
                     std::to_string(g.cout) + ")");
  }
  return g;
}

// Fills rows [row_offset, row_offset + Cin*k*k) of `cols` from one real plane.
template <typename T>
void im2col(const Tensor<T>& plane, const ConvGeometry& g, std::size_t row_offset, RowMatrix<T>& cols) {
  const std::size_t P = g.positions();
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t c = 0; c < g.cin; ++c) {
      const T* src = plane.data().data() + (b * g.cin + c) * g.height * g.width;
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        for (std::size_t kx = 0; kx < g.k; ++kx) {
          T* dst = cols.data() + (row_offset + (c * g.k + ky) * g.k + kx) * cols.cols() + b * P;
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - pad;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) {
              std::fill_n(dst + oy * g.out_w, g.out_w, T{0});
              continue;
            }
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - pad;
              dst[oy * g.out_w + ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width))
                                           ? T{0}
                                           : src[iy * static_cast<std::ptrdiff_t>(g.width) + ix];
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-adds rows back into an image plane.
template <typename T>
void col2im(const RowMatrix<T>& cols, const ConvGeometry& g, std::size_t row_offset, Tensor<T>& plane) {
  const std::size_t P = g.positions();
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t c = 0; c < g.cin; ++c) {
      T* dst = plane.data().data() + (b * g.cin + c) * g.height * g.width;
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        for (std::size_t kx = 0; kx < g.k; ++kx) {
          const T* src = cols.data() + (row_offset + (c * g.k + ky) * g.k + kx) * cols.cols() + b * P;
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - pad;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - pad;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
              dst[iy * static_cast<std::ptrdiff_t>(g.width) + ix] += src[oy * g.out_w + ox];
            }
          }
        }
      }
    }
  }
}

template <typename T>
RowMatrix<T> stacked_kernel(const ComplexConvParams<T>& p, const ConvGeometry& g) {
  const auto rows = static_cast<Eigen::Index>(g.cout);
  const auto cols = static_cast<Eigen::Index>(g.patch_rows());
  Eigen::Map<const RowMatrix<T>> c(p.kernel_re.data().data(), rows, cols);
  Eigen::Map<const RowMatrix<T>> d(p.kernel_im.data().data(), rows, cols);
  RowMatrix<T> big(2 * rows, 2 * cols);
  big.topLeftCorner(rows, cols) = c;
  big.topRightCorner(rows, cols) = -d;
  big.bottomLeftCorner(rows, cols) = d;
  big.bottomRightCorner(rows, cols) = c;
  return big;
}

template <typename T>
RowMatrix<T> build_cols(const ComplexTensor<T>& x, const ConvGeometry& g) {
  RowMatrix<T> cols(2 * g.patch_rows(), g.batch * g.positions());
  im2col(x.re(), g, 0, cols);
  im2col(x.im(), g, g.patch_rows(), cols);
  return cols;
}

}  // namespace

template <typename T>
ComplexConvParams<T> make_complex_conv(std::size_t in_channels, std::size_t out_channels,
                                       std::size_t kernel, int stride, int padding, bool with_bias) {
  ComplexConvParams<T> p;
  const Shape ks{out_channels, in_channels, kernel, kernel};
  p.kernel_re = Tensor<T>(ks);
  p.kernel_im = Tensor<T>(ks);
  if (with_bias) p.bias = ComplexTensor<T>(Shape{out_channels});
  p.stride = stride;
  p.padding = padding;
  return p;
}

template <typename T>
void init_complex_conv(ComplexConvParams<T>& params, Rng& rng) {
  const double fan_in = static_cast<double>(params.in_channels() * params.kernel_size() *
                                            params.kernel_size());
  std::normal_distribution<double> dist(0.0, std::sqrt(1.0 / (2.0 * fan_in)));
  for (T& v : params.kernel_re.data()) v = static_cast<T>(dist(rng));
  for (T& v : params.kernel_im.data()) v = static_cast<T>(dist(rng));
  if (params.bias) *params.bias = ComplexTensor<T>(params.bias->shape());
}

template <typename T>
ComplexTensor<T> complex_conv2d(const ComplexTensor<T>& x, const ComplexConvParams<T>& params) {
  const ConvGeometry g = geometry(x.shape(), params);
  const RowMatrix<T> cols = build_cols(x, g);
  const RowMatrix<T> big = stacked_kernel(params, g);
  RowMatrix<T> out(2 * g.cout, g.batch * g.positions());
  out.noalias() = big * cols;

  const std::size_t P = g.positions();
  ComplexTensor<T> y(Shape{g.batch, g.cout, g.out_h, g.out_w});
  for (std::size_t co = 0; co < g.cout; ++co) {
    const T bre = params.bias ? params.bias->re()[co] : T{0};
    const T bim = params.bias ? params.bias->im()[co] : T{0};
    const T* row_re = out.data() + co * out.cols();
    const T* row_im = out.data() + (g.cout + co) * out.cols();
    for (std::size_t b = 0; b < g.batch; ++b) {
      T* dre = y.re().data().data() + (b * g.cout + co) * P;
      T* dim = y.im().data().data() + (b * g.cout + co) * P;
      for (std::size_t k = 0; k < P; ++k) {
        dre[k] = row_re[b * P + k] + bre;
        dim[k] = row_im[b * P + k] + bim;
      }
    }
  }
  return y;
}

template <typename T>
ComplexConvGrad<T> complex_conv2d_backward(const ComplexTensor<T>& x, const ComplexConvParams<T>& params,
                                           const ComplexTensor<T>& grad_out) {
  const ConvGeometry g = geometry(x.shape(), params);
  require_same_shape(grad_out.shape(), Shape{g.batch, g.cout, g.out_h, g.out_w},
                     "complex_conv2d_backward grad_out");
  const std::size_t P = g.positions();

  RowMatrix<T> gout(2 * g.cout, g.batch * P);
  for (std::size_t co = 0; co < g.cout; ++co) {
    T* row_re = gout.data() + co * gout.cols();
    T* row_im = gout.data() + (g.cout + co) * gout.cols();
    for (std::size_t b = 0; b < g.batch; ++b) {
      const T* sre = grad_out.re().data().data() + (b * g.cout + co) * P;
      const T* sim = grad_out.im().data().data() + (b * g.cout + co) * P;
      std::copy_n(sre, P, row_re + b * P);
      std::copy_n(sim, P, row_im + b * P);
    }
  }

  const RowMatrix<T> cols = build_cols(x, g);
  RowMatrix<T> gbig(2 * g.cout, 2 * g.patch_rows());
  gbig.noalias() = gout * cols.transpose();

  const auto rows = static_cast<Eigen::Index>(g.cout);
  const auto pr = static_cast<Eigen::Index>(g.patch_rows());
  ComplexConvGrad<T> grad;
  grad.kernel_re = Tensor<T>(params.kernel_re.shape());
  grad.kernel_im = Tensor<T>(params.kernel_im.shape());
  Eigen::Map<RowMatrix<T>> gc(grad.kernel_re.data().data(), rows, pr);
  Eigen::Map<RowMatrix<T>> gd(grad.kernel_im.data().data(), rows, pr);
  gc = gbig.topLeftCorner(rows, pr) + gbig.bottomRightCorner(rows, pr);
  gd = gbig.bottomLeftCorner(rows, pr) - gbig.topRightCorner(rows, pr);

  if (params.bias) {
    ComplexTensor<T> gb(Shape{g.cout});
    for (std::size_t co = 0; co < g.cout; ++co) {
      gb.re()[co] = gout.row(static_cast<Eigen::Index>(co)).sum();
      gb.im()[co] = gout.row(static_cast<Eigen::Index>(g.cout + co)).sum();
    }
    grad.bias = std::move(gb);
  }

  const RowMatrix<T> big = stacked_kernel(params, g);
  RowMatrix<T> gcols(2 * g.patch_rows(), g.batch * P);
  gcols.noalias() = big.transpose() * gout;
  grad.input = ComplexTensor<T>(x.shape());
  col2im(gcols, g, 0, grad.input.re());
  col2im(gcols, g, g.patch_rows(), grad.input.im());
  return grad;
}

#define FFCNET_INSTANTIATE(T)                                                                         \
  template ComplexConvParams<T> make_complex_conv(std::size_t, std::size_t, std::size_t, int, int,   \
                                                  bool);                                              \
  template void init_complex_conv(ComplexConvParams<T>&, Rng&);                                       \
  template ComplexTensor<T> complex_conv2d(const ComplexTensor<T>&, const ComplexConvParams<T>&);     \
  template ComplexConvGrad<T> complex_conv2d_backward(const ComplexTensor<T>&,                        \
                                                      const ComplexConvParams<T>&,                    \
                                                      const ComplexTensor<T>&);

FFCNET_INSTANTIATE(float)
FFCNET_INSTANTIATE(double)

#undef FFCNET_INSTANTIATE

}  // namespace ffcnet
