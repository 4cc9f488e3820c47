#pragma once

#include <optional>

#include "ffcnet/rng.hpp"
#include "ffcnet/tensor.hpp"

namespace ffcnet {

// Complex-valued layers. Every layer has a pure forward and a backward that
// returns gradients under the split-real graph: real and imaginary planes are
// treated as independent real inputs, which is exact for a real-valued loss.

// ---------------------------------------------------------------------------
// Complex convolution
// ---------------------------------------------------------------------------

/// A complex kernel bank Q = c + di held as two real banks of shape
/// (Cout, Cin, k, k). Convolution is real cross-correlation with zero padding.
template <typename T>
struct ComplexConvParams {
  Tensor<T> kernel_re;                    // c
  Tensor<T> kernel_im;                    // d
  std::optional<ComplexTensor<T>> bias;   // (Cout)
  int stride = 1;
  int padding = 0;

  std::size_t out_channels() const { return kernel_re.shape()[0]; }
  std::size_t in_channels() const { return kernel_re.shape()[1]; }
  std::size_t kernel_size() const { return kernel_re.shape()[2]; }
};

template <typename T>
struct ComplexConvGrad {
  Tensor<T> kernel_re;
  Tensor<T> kernel_im;
  std::optional<ComplexTensor<T>> bias;
  ComplexTensor<T> input;
};

/// Zero-initialised bank; use init_complex_conv for training.
template <typename T>
ComplexConvParams<T> make_complex_conv(std::size_t in_channels, std::size_t out_channels,
                                       std::size_t kernel, int stride, int padding,
                                       bool with_bias = false);

/// Draws c and d independently from N(0, 1 / (2 fan_in)) so that E|Q|^2
/// matches He scaling for the complex kernel. Bias is reset to zero.
template <typename T>
void init_complex_conv(ComplexConvParams<T>& params, Rng& rng);

/// out.re = conv(x.re, c) - conv(x.im, d); out.im = conv(x.re, d) + conv(x.im, c).
/// x has shape (B, Cin, H, W).
template <typename T>
ComplexTensor<T> complex_conv2d(const ComplexTensor<T>& x, const ComplexConvParams<T>& params);

template <typename T>
ComplexConvGrad<T> complex_conv2d_backward(const ComplexTensor<T>& x,
                                           const ComplexConvParams<T>& params,
                                           const ComplexTensor<T>& grad_out);

// ---------------------------------------------------------------------------
// Complex ReLU
// ---------------------------------------------------------------------------

/// ReLU applied to the real and imaginary parts independently.
template <typename T>
ComplexTensor<T> complex_relu(const ComplexTensor<T>& x);

/// Gates each component of grad_out on the matching input component being
/// strictly positive; the subgradient at 0 is 0.
template <typename T>
ComplexTensor<T> complex_relu_backward(const ComplexTensor<T>& x, const ComplexTensor<T>& grad_out);

// ---------------------------------------------------------------------------
// Complex batch normalization
// ---------------------------------------------------------------------------

/// Row-major 2x2 matrix [[m00, m01], [m10, m11]].
struct Mat2 {
  double m00 = 0, m01 = 0, m10 = 0, m11 = 0;

  static Mat2 identity() { return {1, 0, 0, 1}; }
  static Mat2 symmetric(double rr, double ii, double ri) { return {rr, ri, ri, ii}; }
  double det() const { return m00 * m11 - m01 * m10; }
  double trace() const { return m00 + m11; }
  Mat2 transposed() const { return {m00, m10, m01, m11}; }
  Mat2 inverse() const;
};

Mat2 operator*(const Mat2& a, const Mat2& b);
Mat2 operator+(const Mat2& a, const Mat2& b);
Mat2 operator*(double s, const Mat2& a);

/// Principal inverse square root of A = V + eps I, via the closed form
/// sqrt(A) = (A + sI) / t with s = sqrt(det A), t = sqrt(tr A + 2s).
/// The result R is symmetric positive definite with R A R = I.
Mat2 inv_sqrt_2x2(const Mat2& v, double eps);

/// Per-channel parameters. Symmetric 2x2 quantities are stored as
/// (rr, ii, ri) triples.
template <typename T>
struct ComplexBNParams {
  Tensor<T> gamma;         // (C, 3), PSD scale
  Tensor<T> beta;          // (C, 2), complex shift
  Tensor<T> running_mean;  // (C, 2)
  Tensor<T> running_cov;   // (C, 3)
  double momentum = 0.1;
  double epsilon = 1e-5;

  std::size_t channels() const { return gamma.shape()[0]; }
};

template <typename T>
struct ComplexBNGrad {
  Tensor<T> gamma;  // (C, 3)
  Tensor<T> beta;   // (C, 2)
  ComplexTensor<T> input;
};

/// gamma = I / sqrt(2), beta = 0, running mean 0, running covariance I.
template <typename T>
ComplexBNParams<T> make_complex_bn(std::size_t channels);

/// Whitens each channel's (re, im) pairs over the batch x spatial population
/// and applies gamma and beta. Training mode uses batch statistics
/// (population covariance) and updates the running statistics in `params`;
/// eval mode uses the running statistics.
template <typename T>
ComplexTensor<T> complex_bn_forward(const ComplexTensor<T>& x, ComplexBNParams<T>& params,
                                    bool training);

/// Exact reverse mode through mean, covariance, inverse square root and the
/// affine map. In training mode the statistics are functions of x.
template <typename T>
ComplexBNGrad<T> complex_bn_backward(const ComplexTensor<T>& x, const ComplexBNParams<T>& params,
                                     const ComplexTensor<T>& grad_out, bool training = true);

/// True if every channel's gamma is PSD up to `tolerance`.
template <typename T>
bool gamma_is_psd(const ComplexBNParams<T>& params, double tolerance = -1e-6);

/// Projects each gamma onto the PSD cone (negative eigenvalues clipped to 0).
template <typename T>
void project_gamma_psd(ComplexBNParams<T>& params);

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

/// Mean over non-overlapping factor x factor windows, re and im independently.
template <typename T>
ComplexTensor<T> complex_avg_pool2d(const ComplexTensor<T>& x, std::size_t factor);
template <typename T>
ComplexTensor<T> complex_avg_pool2d_backward(const Shape& input_shape, std::size_t factor,
                                             const ComplexTensor<T>& grad_out);

/// (B, C, H, W) -> (B, C) spatial mean.
template <typename T>
ComplexTensor<T> global_avg_pool(const ComplexTensor<T>& x);
template <typename T>
ComplexTensor<T> global_avg_pool_backward(const Shape& input_shape, const ComplexTensor<T>& grad_out);

// ---------------------------------------------------------------------------
// Complex -> real bridge and the real classifier
// ---------------------------------------------------------------------------

enum class BridgeMode {
  kMagnitude,  // |z|
  kRealPart,   // Re z
  kConcat,     // [Re z, Im z]
};

/// (B, C) complex features -> (B, F) real features.
template <typename T>
Tensor<T> bridge_forward(const ComplexTensor<T>& x, BridgeMode mode);
template <typename T>
ComplexTensor<T> bridge_backward(const ComplexTensor<T>& x, BridgeMode mode, const Tensor<T>& grad_out);

std::size_t bridge_features(BridgeMode mode, std::size_t channels);

template <typename T>
struct LinearParams {
  Tensor<T> weight;  // (out, in)
  Tensor<T> bias;    // (out)
};

template <typename T>
struct LinearGrad {
  Tensor<T> weight;
  Tensor<T> bias;
  Tensor<T> input;
};

/// Uniform(-1/sqrt(in), 1/sqrt(in)) weights, zero bias.
template <typename T>
LinearParams<T> make_linear(std::size_t in, std::size_t out, Rng& rng);

/// y = x W^T + b for x of shape (B, in).
template <typename T>
Tensor<T> linear_forward(const Tensor<T>& x, const LinearParams<T>& params);
template <typename T>
LinearGrad<T> linear_backward(const Tensor<T>& x, const LinearParams<T>& params, const Tensor<T>& grad_out);

}  // namespace ffcnet
