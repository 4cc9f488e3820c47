#pragma once

#include "ffcnet/tensor.hpp"

namespace ffcnet {

// Two-dimensional discrete Fourier transforms over the last two axes of a
// complex tensor. Every leading index is an independent H x W plane. Bins are
// kept in natural DFT order (no centering). Accumulation happens in double
// regardless of T.

/// Direct O(H^2 W^2) evaluation of
///   X[u,v] = sum_{x,y} x[x,y] exp(-j 2 pi (u x / H + v y / W)).
/// Defined for any H, W >= 1.
template <typename T>
ComplexTensor<T> dft2_naive(const ComplexTensor<T>& x);

/// Radix-2 Cooley-Tukey transform, same result as dft2_naive. Throws
/// ShapeError unless H and W are powers of two.
template <typename T>
ComplexTensor<T> fft2(const ComplexTensor<T>& x);

/// Inverse of fft2, scaled by 1 / (H W).
template <typename T>
ComplexTensor<T> idft2(const ComplexTensor<T>& spectrum);

/// Moves the DC bin to the plane centre. Visualization only.
template <typename T>
Tensor<T> fftshift2(const Tensor<T>& x);

constexpr bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace ffcnet
