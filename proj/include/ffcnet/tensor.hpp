#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ffcnet/errors.hpp"

namespace ffcnet {

/// Dimensions of a dense row-major array. Activations use (batch, channel,
/// height, width) order.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims);
  explicit Shape(std::vector<std::size_t> dims);

  std::size_t rank() const { return dims_.size(); }
  std::size_t operator[](std::size_t axis) const { return dims_.at(axis); }
  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t numel() const;

  std::string to_string() const;

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::vector<std::size_t> dims_;
};

/// Real dense tensor with flat row-major storage.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_.numel(), T{0}) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_.numel()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.to_string());
    }
  }
  Tensor(Shape shape, T fill) : shape_(std::move(shape)), data_(shape_.numel(), fill) {}

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // 4-d (n, c, h, w) element access; also used for 3-d with n fixed at 0 by
  // callers that reshape first.
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

/// Complex tensor stored as two real planes of identical shape.
template <typename T>
class ComplexTensor {
 public:
  using value_type = T;

  ComplexTensor() = default;
  explicit ComplexTensor(const Shape& shape) : re_(shape), im_(shape) {}
  ComplexTensor(Tensor<T> re, Tensor<T> im) : re_(std::move(re)), im_(std::move(im)) {
    if (re_.shape() != im_.shape()) {
      throw ShapeError("real plane " + re_.shape().to_string() + " and imaginary plane " +
                       im_.shape().to_string() + " differ in shape");
    }
  }

  const Shape& shape() const { return re_.shape(); }
  std::size_t size() const { return re_.size(); }

  Tensor<T>& re() { return re_; }
  const Tensor<T>& re() const { return re_; }
  Tensor<T>& im() { return im_; }
  const Tensor<T>& im() const { return im_; }

  friend bool operator==(const ComplexTensor&, const ComplexTensor&) = default;

 private:
  Tensor<T> re_;
  Tensor<T> im_;
};

void require_same_shape(const Shape& a, const Shape& b, const char* what);

template <typename T>
ComplexTensor<T> add(const ComplexTensor<T>& x, const ComplexTensor<T>& y);

/// Elementwise complex product: (a+bi)(c+di) = (ac - bd) + (ad + bc)i.
template <typename T>
ComplexTensor<T> cmul(const ComplexTensor<T>& x, const ComplexTensor<T>& y);

template <typename T>
Tensor<T> magnitude(const ComplexTensor<T>& x);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& shape);
template <typename T>
ComplexTensor<T> reshape(const ComplexTensor<T>& x, const Shape& shape);

// Channel-axis helpers. The channel axis is rank-3, so these work on both
// (C, H, W) and (B, C, H, W) tensors.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t end);
template <typename T>
ComplexTensor<T> slice_channels(const ComplexTensor<T>& x, std::size_t begin, std::size_t end);
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
ComplexTensor<T> concat_channels(const ComplexTensor<T>& a, const ComplexTensor<T>& b);

template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& x) {
  std::vector<To> out(x.data().begin(), x.data().end());
  return Tensor<To>(x.shape(), std::move(out));
}

template <typename To, typename From>
ComplexTensor<To> cast(const ComplexTensor<From>& x) {
  return ComplexTensor<To>(cast<To>(x.re()), cast<To>(x.im()));
}

template <typename T>
bool all_finite(const Tensor<T>& x);
template <typename T>
bool all_finite(const ComplexTensor<T>& x);

}  // namespace ffcnet
