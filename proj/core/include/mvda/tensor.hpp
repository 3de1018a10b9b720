#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvda {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor shape dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s.empty() ? "scalar" : s;
}

// Dense n-dimensional array, row-major, N x C x H x W layout for image-like
// values. Copies share storage; mutation detaches (tensors produced by ops
// are treated as immutable, so sharing is safe).
template <typename T>
class Tensor {
 public:
  Tensor() : shape_{}, data_(std::make_shared<std::vector<T>>()) {}

  explicit Tensor(Shape shape)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<T>>(shape_numel(shape_), T(0))) {}

  Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)) {
    if (shape_numel(shape_) != values.size()) {
      throw std::invalid_argument("tensor data length " + std::to_string(values.size()) +
                                  " does not match shape " + shape_str(shape_));
    }
    data_ = std::make_shared<std::vector<T>>(std::move(values));
  }

  static Tensor full(Shape shape, T value) {
    Tensor t(std::move(shape));
    auto* p = t.mutable_data();
    for (std::size_t i = 0; i < t.size(); ++i) p[i] = value;
    return t;
  }

  static Tensor scalar(T value) { return Tensor(Shape{1}, {value}); }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return data_->size(); }
  bool empty() const { return data_->empty(); }

  const T* data() const { return data_->data(); }

  T* mutable_data() {
    if (data_.use_count() > 1) data_ = std::make_shared<std::vector<T>>(*data_);
    return data_->data();
  }

  T operator[](std::size_t i) const { return (*data_)[i]; }

  // 4-d accessor for NCHW tensors.
  T at4(int n, int c, int h, int w) const {
    return (*data_)[index4(n, c, h, w)];
  }
  std::size_t index4(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
  }

  bool all_finite() const {
    for (const T& v : *data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool bitwise_equal(const Tensor& other) const {
    return shape_ == other.shape_ && *data_ == *other.data_;
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = static_cast<U>((*data_)[i]);
    return Tensor<U>(shape_, std::move(out));
  }

  Tensor reshaped(Shape new_shape) const {
    if (shape_numel(new_shape) != size()) {
      throw std::invalid_argument("reshape from " + shape_str(shape_) + " to " +
                                  shape_str(new_shape) + " changes element count");
    }
    Tensor t = *this;
    t.shape_ = std::move(new_shape);
    return t;
  }

 private:
  Shape shape_;
  std::shared_ptr<std::vector<T>> data_;
};

}  // namespace mvda
