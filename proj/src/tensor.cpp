#include "ffcnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ffcnet {

Shape::Shape(std::initializer_list<std::size_t> dims) : Shape(std::vector<std::size_t>(dims)) {}

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  for (std::size_t d : dims_) {
    if (d == 0) throw ShapeError("shape " + to_string() + " has a zero dimension");
  }
}

std::size_t Shape::numel() const {
  if (dims_.empty()) return 0;
  return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>());
}

std::string Shape::to_string() const {
  std::string s = "(";
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(dims_[i]);
  }
  return s + ")";
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.to_string() + " vs " +
                     b.to_string());
  }
}

template <typename T>
ComplexTensor<T> add(const ComplexTensor<T>& x, const ComplexTensor<T>& y) {
  require_same_shape(x.shape(), y.shape(), "add");
  ComplexTensor<T> out(x.shape());
  for (std::size_t k = 0; k < x.size(); ++k) {
    out.re()[k] = x.re()[k] + y.re()[k];
    out.im()[k] = x.im()[k] + y.im()[k];
  }
  return out;
}

template <typename T>
ComplexTensor<T> cmul(const ComplexTensor<T>& x, const ComplexTensor<T>& y) {
  require_same_shape(x.shape(), y.shape(), "cmul");
  ComplexTensor<T> out(x.shape());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const T a = x.re()[k], b = x.im()[k], c = y.re()[k], d = y.im()[k];
    out.re()[k] = a * c - b * d;
    out.im()[k] = a * d + b * c;
  }
  return out;
}

template <typename T>
Tensor<T> magnitude(const ComplexTensor<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = std::hypot(x.re()[k], x.im()[k]);
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& shape) {
  if (shape.numel() != x.size()) {
    throw ShapeError("reshape: cannot view " + x.shape().to_string() + " as " + shape.to_string());
  }
  return Tensor<T>(shape, x.storage());
}

template <typename T>
ComplexTensor<T> reshape(const ComplexTensor<T>& x, const Shape& shape) {
  return ComplexTensor<T>(reshape(x.re(), shape), reshape(x.im(), shape));
}

namespace {

struct ChannelView {
  std::size_t outer;  // product of dims before the channel axis
  std::size_t channels;
  std::size_t inner;  // product of dims after the channel axis
};

ChannelView channel_view(const Shape& s) {
  if (s.rank() < 3) throw ShapeError("channel ops need rank >= 3, got " + s.to_string());
  const std::size_t axis = s.rank() - 3;
  ChannelView v{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.rank(); ++i) v.inner *= s[i];
  return v;
}

Shape with_channels(const Shape& s, std::size_t channels) {
  std::vector<std::size_t> dims = s.dims();
  dims[s.rank() - 3] = channels;
  return Shape(std::move(dims));
}

}  // namespace

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  const ChannelView v = channel_view(x.shape());
  if (begin >= end || end > v.channels) {
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") out of bounds for " + x.shape().to_string());
  }
  Tensor<T> out(with_channels(x.shape(), end - begin));
  const std::size_t chunk = (end - begin) * v.inner;
  for (std::size_t o = 0; o < v.outer; ++o) {
    const auto src = x.data().begin() + (o * v.channels + begin) * v.inner;
    std::copy(src, src + chunk, out.data().begin() + o * chunk);
  }
  return out;
}

template <typename T>
ComplexTensor<T> slice_channels(const ComplexTensor<T>& x, std::size_t begin, std::size_t end) {
  return ComplexTensor<T>(slice_channels(x.re(), begin, end), slice_channels(x.im(), begin, end));
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const ChannelView va = channel_view(a.shape());
  const ChannelView vb = channel_view(b.shape());
  if (va.outer != vb.outer || va.inner != vb.inner || a.shape().rank() != b.shape().rank()) {
    throw ShapeError("concat_channels: incompatible shapes " + a.shape().to_string() + " and " +
                     b.shape().to_string());
  }
  Tensor<T> out(with_channels(a.shape(), va.channels + vb.channels));
  auto dst = out.data().begin();
  for (std::size_t o = 0; o < va.outer; ++o) {
    auto sa = a.data().begin() + o * va.channels * va.inner;
    dst = std::copy(sa, sa + va.channels * va.inner, dst);
    auto sb = b.data().begin() + o * vb.channels * vb.inner;
    dst = std::copy(sb, sb + vb.channels * vb.inner, dst);
  }
  return out;
}

template <typename T>
ComplexTensor<T> concat_channels(const ComplexTensor<T>& a, const ComplexTensor<T>& b) {
  return ComplexTensor<T>(concat_channels(a.re(), b.re()), concat_channels(a.im(), b.im()));
}

template <typename T>
bool all_finite(const Tensor<T>& x) {
  return std::all_of(x.data().begin(), x.data().end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
bool all_finite(const ComplexTensor<T>& x) {
  return all_finite(x.re()) && all_finite(x.im());
}

#define FFCNET_INSTANTIATE(T)                                                                  \
  template ComplexTensor<T> add(const ComplexTensor<T>&, const ComplexTensor<T>&);             \
  template ComplexTensor<T> cmul(const ComplexTensor<T>&, const ComplexTensor<T>&);            \
  template Tensor<T> magnitude(const ComplexTensor<T>&);                                       \
  template Tensor<T> reshape(const Tensor<T>&, const Shape&);                                  \
  template ComplexTensor<T> reshape(const ComplexTensor<T>&, const Shape&);                    \
  template Tensor<T> slice_channels(const Tensor<T>&, std::size_t, std::size_t);               \
  template ComplexTensor<T> slice_channels(const ComplexTensor<T>&, std::size_t, std::size_t); \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                      \
  template ComplexTensor<T> concat_channels(const ComplexTensor<T>&, const ComplexTensor<T>&); \
  template bool all_finite(const Tensor<T>&);                                                  \
  template bool all_finite(const ComplexTensor<T>&);

FFCNET_INSTANTIATE(float)
FFCNET_INSTANTIATE(double)

#undef FFCNET_INSTANTIATE

}  // namespace ffcnet
