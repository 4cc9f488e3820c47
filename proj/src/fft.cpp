#include "ffcnet/fft.hpp"

#include <bit>
#include <complex>
#include <numbers>
#include <vector>

namespace ffcnet {

namespace {

using cd = std::complex<double>;

struct PlaneGeometry {
  std::size_t planes;
  std::size_t rows;
  std::size_t cols;
};

PlaneGeometry plane_geometry(const Shape& s) {
  if (s.rank() < 2) throw ShapeError("2-d transform needs rank >= 2, got " + s.to_string());
  PlaneGeometry g{1, s[s.rank() - 2], s[s.rank() - 1]};
  for (std::size_t i = 0; i + 2 < s.rank(); ++i) g.planes *= s[i];
  return g;
}

void require_power_of_two(const PlaneGeometry& g) {
  if (!is_power_of_two(g.rows) || !is_power_of_two(g.cols)) {
    throw ShapeError("fft2 needs power-of-two plane dims, got " + std::to_string(g.rows) + "x" +
                     std::to_string(g.cols) + "; resize the input or use dft2_naive");
  }
}

// exp(-2 pi i k / n) for k in [0, n/2)
std::vector<cd> twiddles(std::size_t n) {
  std::vector<cd> w(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    w[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
  }
  return w;
}

// In-place iterative radix-2 transform of `n` strided elements.
void fft1d(cd* data, std::size_t n, std::size_t stride, const std::vector<cd>& w, bool inverse) {
  if (n == 1) return;
  const int bits = std::countr_zero(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = 0;
    for (int b = 0; b < bits; ++b) j |= ((i >> b) & 1u) << (bits - 1 - b);
    if (i < j) std::swap(data[i * stride], data[j * stride]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const cd tw = inverse ? std::conj(w[k * step]) : w[k * step];
        cd& a = data[(start + k) * stride];
        cd& b = data[(start + k + half) * stride];
        const cd t = b * tw;
        b = a - t;
        a = a + t;
      }
    }
  }
}

template <typename T>
ComplexTensor<T> fft2_impl(const ComplexTensor<T>& x, bool inverse) {
  const PlaneGeometry g = plane_geometry(x.shape());
  require_power_of_two(g);
  const auto wr = twiddles(g.rows);
  const auto wc = twiddles(g.cols);
  const std::size_t area = g.rows * g.cols;
  const double scale = inverse ? 1.0 / static_cast<double>(area) : 1.0;

  ComplexTensor<T> out(x.shape());
  std::vector<cd> buf(area);
  for (std::size_t p = 0; p < g.planes; ++p) {
    const std::size_t off = p * area;
    for (std::size_t k = 0; k < area; ++k) buf[k] = cd(x.re()[off + k], x.im()[off + k]);
    for (std::size_t r = 0; r < g.rows; ++r) fft1d(buf.data() + r * g.cols, g.cols, 1, wc, inverse);
    for (std::size_t c = 0; c < g.cols; ++c) fft1d(buf.data() + c, g.rows, g.cols, wr, inverse);
    for (std::size_t k = 0; k < area; ++k) {
      out.re()[off + k] = static_cast<T>(buf[k].real() * scale);
      out.im()[off + k] = static_cast<T>(buf[k].imag() * scale);
    }
  }
  return out;
}

}  // namespace

template <typename T>
ComplexTensor<T> dft2_naive(const ComplexTensor<T>& x) {
  const PlaneGeometry g = plane_geometry(x.shape());
  const std::size_t M = g.rows, N = g.cols, area = M * N;
  // Phase factors indexed by (u*x mod M) keep the argument small and exact.
  std::vector<cd> er(M), ec(N);
  for (std::size_t k = 0; k < M; ++k) {
    er[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(M));
  }
  for (std::size_t k = 0; k < N; ++k) {
    ec[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(N));
  }

  ComplexTensor<T> out(x.shape());
  for (std::size_t p = 0; p < g.planes; ++p) {
    const std::size_t off = p * area;
    for (std::size_t u = 0; u < M; ++u) {
      for (std::size_t v = 0; v < N; ++v) {
        cd acc(0.0, 0.0);
        for (std::size_t r = 0; r < M; ++r) {
          const cd row_phase = er[(u * r) % M];
          for (std::size_t c = 0; c < N; ++c) {
            const cd value(x.re()[off + r * N + c], x.im()[off + r * N + c]);
            acc += value * row_phase * ec[(v * c) % N];
          }
        }
        out.re()[off + u * N + v] = static_cast<T>(acc.real());
        out.im()[off + u * N + v] = static_cast<T>(acc.imag());
      }
    }
  }
  return out;
}

template <typename T>
ComplexTensor<T> fft2(const ComplexTensor<T>& x) {
  return fft2_impl(x, false);
}

template <typename T>
ComplexTensor<T> idft2(const ComplexTensor<T>& spectrum) {
  return fft2_impl(spectrum, true);
}

template <typename T>
Tensor<T> fftshift2(const Tensor<T>& x) {
  const PlaneGeometry g = plane_geometry(x.shape());
  Tensor<T> out(x.shape());
  const std::size_t area = g.rows * g.cols;
  for (std::size_t p = 0; p < g.planes; ++p) {
    for (std::size_t r = 0; r < g.rows; ++r) {
      for (std::size_t c = 0; c < g.cols; ++c) {
        const std::size_t rr = (r + g.rows / 2) % g.rows;
        const std::size_t cc = (c + g.cols / 2) % g.cols;
        out[p * area + rr * g.cols + cc] = x[p * area + r * g.cols + c];
      }
    }
  }
  return out;
}

template ComplexTensor<float> dft2_naive(const ComplexTensor<float>&);
template ComplexTensor<double> dft2_naive(const ComplexTensor<double>&);
template ComplexTensor<float> fft2(const ComplexTensor<float>&);
template ComplexTensor<double> fft2(const ComplexTensor<double>&);
template ComplexTensor<float> idft2(const ComplexTensor<float>&);
template ComplexTensor<double> idft2(const ComplexTensor<double>&);
template Tensor<float> fftshift2(const Tensor<float>&);
template Tensor<double> fftshift2(const Tensor<double>&);

}  // namespace ffcnet
