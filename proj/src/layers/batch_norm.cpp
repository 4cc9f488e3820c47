#include <cmath>
#include <string>

#include "ffcnet/layers.hpp"

namespace ffcnet {

Mat2 operator*(const Mat2& a, const Mat2& b) {
  return {a.m00 * b.m00 + a.m01 * b.m10, a.m00 * b.m01 + a.m01 * b.m11,
          a.m10 * b.m00 + a.m11 * b.m10, a.m10 * b.m01 + a.m11 * b.m11};
}

Mat2 operator+(const Mat2& a, const Mat2& b) {
  return {a.m00 + b.m00, a.m01 + b.m01, a.m10 + b.m10, a.m11 + b.m11};
}

Mat2 operator*(double s, const Mat2& a) { return {s * a.m00, s * a.m01, s * a.m10, s * a.m11}; }

Mat2 Mat2::inverse() const {
  const double d = det();
  if (d == 0.0 || !std::isfinite(d)) throw NumericError("singular 2x2 matrix");
  return {m11 / d, -m01 / d, -m10 / d, m00 / d};
}

namespace {

struct InvSqrtParts {
  Mat2 a;       // V + eps I
  double s;     // sqrt(det A)
  double t;     // sqrt(tr A + 2 s)
  Mat2 result;  // A^{-1/2}
};

InvSqrtParts inv_sqrt_parts(const Mat2& v, double eps) {
  InvSqrtParts p;
  p.a = v + eps * Mat2::identity();
  const double det = p.a.det();
  if (!(det > 0.0) || !(p.a.trace() > 0.0)) {
    throw NumericError("covariance + eps*I is not positive definite (det " + std::to_string(det) +
                       ", trace " + std::to_string(p.a.trace()) + ")");
  }
  p.s = std::sqrt(det);
  p.t = std::sqrt(p.a.trace() + 2.0 * p.s);
  if (!(p.t > 0.0)) throw NumericError("degenerate matrix square root");
  const Mat2 root = (1.0 / p.t) * (p.a + p.s * Mat2::identity());
  p.result = root.inverse();
  return p;
}

// Gradient w.r.t. A (all four entries independent) of <g_r, A^{-1/2}>.
Mat2 inv_sqrt_backward(const InvSqrtParts& p, const Mat2& g_r) {
  const Mat2 rt = p.result.transposed();
  const Mat2 g_root = -1.0 * (rt * g_r * rt);
  const Mat2 shifted = p.a + p.s * Mat2::identity();  // t * sqrt(A)

  Mat2 g_a = (1.0 / p.t) * g_root;
  double g_s = g_root.trace() / p.t;
  const double g_t = -(g_root.m00 * shifted.m00 + g_root.m01 * shifted.m01 +
                       g_root.m10 * shifted.m10 + g_root.m11 * shifted.m11) /
                     (p.t * p.t);
  // t = sqrt(tr A + 2 s)
  const double g_tr = g_t / (2.0 * p.t);
  g_s += g_t / p.t;
  g_a = g_a + g_tr * Mat2::identity();
  // s = sqrt(det A), d det / dA = cofactor(A)
  const double g_det = g_s / (2.0 * p.s);
  const Mat2 cofactor{p.a.m11, -p.a.m10, -p.a.m01, p.a.m00};
  return g_a + g_det * cofactor;
}

struct Moments {
  double mean_re = 0, mean_im = 0;
  Mat2 cov;
};

template <typename T>
void require_bn_shapes(const ComplexTensor<T>& x, const ComplexBNParams<T>& p) {
  if (x.shape().rank() != 4) throw ShapeError("complex_bn expects (B, C, H, W), got " + x.shape().to_string());
  if (x.shape()[1] != p.channels()) {
    throw ShapeError("complex_bn: input " + x.shape().to_string() + " has " +
                     std::to_string(x.shape()[1]) + " channels, parameters have " +
                     std::to_string(p.channels()));
  }
}

// Population moments of channel c.
template <typename T>
Moments channel_moments(const ComplexTensor<T>& x, std::size_t c) {
  const std::size_t B = x.shape()[0], C = x.shape()[1], area = x.shape()[2] * x.shape()[3];
  const double n = static_cast<double>(B * area);
  Moments m;
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t off = (b * C + c) * area;
    for (std::size_t k = 0; k < area; ++k) {
      m.mean_re += x.re()[off + k];
      m.mean_im += x.im()[off + k];
    }
  }
  m.mean_re /= n;
  m.mean_im /= n;
  double rr = 0, ii = 0, ri = 0;
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t off = (b * C + c) * area;
    for (std::size_t k = 0; k < area; ++k) {
      const double dr = x.re()[off + k] - m.mean_re;
      const double di = x.im()[off + k] - m.mean_im;
      rr += dr * dr;
      ii += di * di;
      ri += dr * di;
    }
  }
  m.cov = Mat2::symmetric(rr / n, ii / n, ri / n);
  return m;
}

template <typename T>
Moments running_moments(const ComplexBNParams<T>& p, std::size_t c) {
  Moments m;
  m.mean_re = p.running_mean[c * 2];
  m.mean_im = p.running_mean[c * 2 + 1];
  m.cov = Mat2::symmetric(p.running_cov[c * 3], p.running_cov[c * 3 + 1], p.running_cov[c * 3 + 2]);
  return m;
}

template <typename T>
Mat2 gamma_matrix(const ComplexBNParams<T>& p, std::size_t c) {
  return Mat2::symmetric(p.gamma[c * 3], p.gamma[c * 3 + 1], p.gamma[c * 3 + 2]);
}

}  // namespace

Mat2 inv_sqrt_2x2(const Mat2& v, double eps) { return inv_sqrt_parts(v, eps).result; }

template <typename T>
ComplexBNParams<T> make_complex_bn(std::size_t channels) {
  ComplexBNParams<T> p;
  p.gamma = Tensor<T>(Shape{channels, 3});
  p.beta = Tensor<T>(Shape{channels, 2});
  p.running_mean = Tensor<T>(Shape{channels, 2});
  p.running_cov = Tensor<T>(Shape{channels, 3});
  const T diag = static_cast<T>(1.0 / std::sqrt(2.0));
  for (std::size_t c = 0; c < channels; ++c) {
    p.gamma[c * 3] = diag;
    p.gamma[c * 3 + 1] = diag;
    p.running_cov[c * 3] = T{1};
    p.running_cov[c * 3 + 1] = T{1};
  }
  return p;
}

template <typename T>
ComplexTensor<T> complex_bn_forward(const ComplexTensor<T>& x, ComplexBNParams<T>& params, bool training) {
  require_bn_shapes(x, params);
  const std::size_t B = x.shape()[0], C = x.shape()[1], area = x.shape()[2] * x.shape()[3];
  if (training && B * area < 2) {
    throw ShapeError("complex_bn in training mode needs batch*H*W >= 2, got " + x.shape().to_string());
  }
  ComplexTensor<T> y(x.shape());
  for (std::size_t c = 0; c < C; ++c) {
    const Moments m = training ? channel_moments(x, c) : running_moments(params, c);
    const Mat2 w = gamma_matrix(params, c) * inv_sqrt_2x2(m.cov, params.epsilon);
    const double beta_re = params.beta[c * 2], beta_im = params.beta[c * 2 + 1];
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t off = (b * C + c) * area;
      for (std::size_t k = 0; k < area; ++k) {
        const double dr = x.re()[off + k] - m.mean_re;
        const double di = x.im()[off + k] - m.mean_im;
        y.re()[off + k] = static_cast<T>(w.m00 * dr + w.m01 * di + beta_re);
        y.im()[off + k] = static_cast<T>(w.m10 * dr + w.m11 * di + beta_im);
      }
    }
    if (training) {
      const double mom = params.momentum;
      auto blend = [mom](T& running, double batch) {
        running = static_cast<T>((1.0 - mom) * running + mom * batch);
      };
      blend(params.running_mean[c * 2], m.mean_re);
      blend(params.running_mean[c * 2 + 1], m.mean_im);
      blend(params.running_cov[c * 3], m.cov.m00);
      blend(params.running_cov[c * 3 + 1], m.cov.m11);
      blend(params.running_cov[c * 3 + 2], m.cov.m01);
    }
  }
  return y;
}

template <typename T>
ComplexBNGrad<T> complex_bn_backward(const ComplexTensor<T>& x, const ComplexBNParams<T>& params,
                                     const ComplexTensor<T>& grad_out, bool training) {
  require_bn_shapes(x, params);
  require_same_shape(x.shape(), grad_out.shape(), "complex_bn_backward");
  const std::size_t B = x.shape()[0], C = x.shape()[1], area = x.shape()[2] * x.shape()[3];
  const double n = static_cast<double>(B * area);

  ComplexBNGrad<T> grad;
  grad.gamma = Tensor<T>(params.gamma.shape());
  grad.beta = Tensor<T>(params.beta.shape());
  grad.input = ComplexTensor<T>(x.shape());

  for (std::size_t c = 0; c < C; ++c) {
    const Moments m = training ? channel_moments(x, c) : running_moments(params, c);
    const InvSqrtParts inv = inv_sqrt_parts(m.cov, params.epsilon);
    const Mat2& r = inv.result;
    const Mat2 gamma = gamma_matrix(params, c);

    // Pass 1: parameter gradients and the gradient w.r.t. R.
    double g_beta_re = 0, g_beta_im = 0;
    Mat2 g_gamma, g_r;
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t off = (b * C + c) * area;
      for (std::size_t k = 0; k < area; ++k) {
        const double dr = x.re()[off + k] - m.mean_re;
        const double di = x.im()[off + k] - m.mean_im;
        const double wr = r.m00 * dr + r.m01 * di;
        const double wi = r.m10 * dr + r.m11 * di;
        const double gr = grad_out.re()[off + k];
        const double gi = grad_out.im()[off + k];
        g_beta_re += gr;
        g_beta_im += gi;
        g_gamma = g_gamma + Mat2{gr * wr, gr * wi, gi * wr, gi * wi};
        const double hr = gamma.m00 * gr + gamma.m10 * gi;  // gamma^T g
        const double hi = gamma.m01 * gr + gamma.m11 * gi;
        g_r = g_r + Mat2{hr * dr, hr * di, hi * dr, hi * di};
      }
    }
    grad.beta[c * 2] = static_cast<T>(g_beta_re);
    grad.beta[c * 2 + 1] = static_cast<T>(g_beta_im);
    grad.gamma[c * 3] = static_cast<T>(g_gamma.m00);
    grad.gamma[c * 3 + 1] = static_cast<T>(g_gamma.m11);
    grad.gamma[c * 3 + 2] = static_cast<T>(g_gamma.m01 + g_gamma.m10);

    // Linear part of the input gradient: (gamma R)^T g.
    const Mat2 lin = (gamma * r).transposed();
    if (!training) {
      for (std::size_t b = 0; b < B; ++b) {
        const std::size_t off = (b * C + c) * area;
        for (std::size_t k = 0; k < area; ++k) {
          const double gr = grad_out.re()[off + k], gi = grad_out.im()[off + k];
          grad.input.re()[off + k] = static_cast<T>(lin.m00 * gr + lin.m01 * gi);
          grad.input.im()[off + k] = static_cast<T>(lin.m10 * gr + lin.m11 * gi);
        }
      }
      continue;
    }

    // Through the covariance: V = (1/N) sum d d^T gives dL/dd += (1/N)(G + G^T) d.
    const Mat2 g_a = inv_sqrt_backward(inv, g_r);
    const Mat2 cov_term = (1.0 / n) * (g_a + g_a.transposed());

    // Pass 2: gradient w.r.t. the centred values, then remove its mean.
    double sum_re = 0, sum_im = 0;
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t off = (b * C + c) * area;
      for (std::size_t k = 0; k < area; ++k) {
        const double dr = x.re()[off + k] - m.mean_re;
        const double di = x.im()[off + k] - m.mean_im;
        const double gr = grad_out.re()[off + k], gi = grad_out.im()[off + k];
        const double vr = lin.m00 * gr + lin.m01 * gi + cov_term.m00 * dr + cov_term.m01 * di;
        const double vi = lin.m10 * gr + lin.m11 * gi + cov_term.m10 * dr + cov_term.m11 * di;
        sum_re += vr;
        sum_im += vi;
        grad.input.re()[off + k] = static_cast<T>(vr);
        grad.input.im()[off + k] = static_cast<T>(vi);
      }
    }
    const double mean_re = sum_re / n, mean_im = sum_im / n;
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t off = (b * C + c) * area;
      for (std::size_t k = 0; k < area; ++k) {
        grad.input.re()[off + k] = static_cast<T>(grad.input.re()[off + k] - mean_re);
        grad.input.im()[off + k] = static_cast<T>(grad.input.im()[off + k] - mean_im);
      }
    }
  }
  return grad;
}

template <typename T>
bool gamma_is_psd(const ComplexBNParams<T>& params, double tolerance) {
  for (std::size_t c = 0; c < params.channels(); ++c) {
    const double rr = params.gamma[c * 3], ii = params.gamma[c * 3 + 1], ri = params.gamma[c * 3 + 2];
    if (rr < tolerance || ii < tolerance || rr * ii - ri * ri < tolerance) return false;
  }
  return true;
}

template <typename T>
void project_gamma_psd(ComplexBNParams<T>& params) {
  for (std::size_t c = 0; c < params.channels(); ++c) {
    const double rr = params.gamma[c * 3], ii = params.gamma[c * 3 + 1], ri = params.gamma[c * 3 + 2];
    const double half_tr = 0.5 * (rr + ii);
    const double radius = std::sqrt(0.25 * (rr - ii) * (rr - ii) + ri * ri);
    const double hi = half_tr + radius, lo = half_tr - radius;
    if (lo >= 0.0) continue;
    if (hi <= 0.0) {
      params.gamma[c * 3] = params.gamma[c * 3 + 1] = params.gamma[c * 3 + 2] = T{0};
      continue;
    }
    // M - lo I = (hi - lo) v v^T, so the projection is hi / (hi - lo) (M - lo I).
    const double s = hi / (hi - lo);
    params.gamma[c * 3] = static_cast<T>(s * (rr - lo));
    params.gamma[c * 3 + 1] = static_cast<T>(s * (ii - lo));
    params.gamma[c * 3 + 2] = static_cast<T>(s * ri);
  }
}

#define FFCNET_INSTANTIATE(T)                                                                        \
  template ComplexBNParams<T> make_complex_bn(std::size_t);                                          \
  template ComplexTensor<T> complex_bn_forward(const ComplexTensor<T>&, ComplexBNParams<T>&, bool);  \
  template ComplexBNGrad<T> complex_bn_backward(const ComplexTensor<T>&, const ComplexBNParams<T>&,  \
                                                const ComplexTensor<T>&, bool);                      \
  template bool gamma_is_psd(const ComplexBNParams<T>&, double);                                     \
  template void project_gamma_psd(ComplexBNParams<T>&);

FFCNET_INSTANTIATE(float)
FFCNET_INSTANTIATE(double)

#undef FFCNET_INSTANTIATE

}  // namespace ffcnet
