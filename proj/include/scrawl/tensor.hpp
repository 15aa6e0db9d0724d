// Dense row-major tensor, rank 1..4. Copies share the underlying buffer;
// ops always allocate fresh outputs, so sharing is safe. Mutating accessors
// exist for the owners of a buffer (optimizer, loaders).
#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "scrawl/rng.hpp"

namespace scrawl {

template <class T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    size_t n = 1;
    for (int d : shape_) {
      if (d <= 0) throw std::invalid_argument("Tensor: nonpositive dim");
      n *= size_t(d);
    }
    data_ = std::make_shared<std::vector<T>>(n, T(0));
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, T v) {
    Tensor t(std::move(shape));
    for (auto& x : *t.data_) x = v;
    return t;
  }

  static Tensor from(std::vector<int> shape, std::vector<T> values) {
    Tensor t(std::move(shape));
    if (values.size() != t.size())
      throw std::invalid_argument("Tensor::from: size mismatch");
    *t.data_ = std::move(values);
    return t;
  }

  static Tensor randn(std::vector<int> shape, Rng& rng, T stddev = T(1)) {
    Tensor t(std::move(shape));
    for (auto& x : *t.data_) x = T(rng.next_gauss()) * stddev;
    return t;
  }

  static Tensor uniform(std::vector<int> shape, Rng& rng, T lo, T hi) {
    Tensor t(std::move(shape));
    for (auto& x : *t.data_) x = T(rng.next_uniform(double(lo), double(hi)));
    return t;
  }

  bool defined() const { return data_ != nullptr; }
  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return int(shape_.size()); }
  int dim(int i) const { return shape_.at(size_t(i)); }
  size_t size() const { return data_ ? data_->size() : 0; }

  int rows() const { return shape_.at(0); }
  int cols() const { return shape_.at(1); }

  T* data() { return data_->data(); }
  const T* data() const { return data_->data(); }

  T& operator[](size_t i) { return (*data_)[i]; }
  const T& operator[](size_t i) const { return (*data_)[i]; }

  // 2-D access
  T& at(int r, int c) { return (*data_)[size_t(r) * size_t(shape_[1]) + size_t(c)]; }
  const T& at(int r, int c) const {
    return (*data_)[size_t(r) * size_t(shape_[1]) + size_t(c)];
  }

  // 3-D access [C,H,W]
  T& at3(int c, int y, int x) {
    return (*data_)[(size_t(c) * size_t(shape_[1]) + size_t(y)) * size_t(shape_[2]) +
                    size_t(x)];
  }
  const T& at3(int c, int y, int x) const {
    return (*data_)[(size_t(c) * size_t(shape_[1]) + size_t(y)) * size_t(shape_[2]) +
                    size_t(x)];
  }

  // deep copy
  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = std::make_shared<std::vector<T>>(*data_);
    return t;
  }

  Tensor reshaped(std::vector<int> shape) const {
    size_t n = 1;
    for (int d : shape) n *= size_t(d);
    if (n != size()) throw std::invalid_argument("Tensor::reshaped: size mismatch");
    Tensor t = *this;  // shares buffer
    t.shape_ = std::move(shape);
    return t;
  }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> t(shape_);
    for (size_t i = 0; i < size(); ++i) t[i] = U((*data_)[i]);
    return t;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (const T& v : *data_)
      if (!std::isfinite(double(v))) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

 private:
  std::vector<int> shape_;
  std::shared_ptr<std::vector<T>> data_;

  template <class U>
  friend class Tensor;
};

template <class T>
T tensor_mean(const Tensor<T>& t) {
  T s = 0;
  for (size_t i = 0; i < t.size(); ++i) s += t[i];
  return s / T(t.size());
}

// population standard deviation over all elements
template <class T>
T tensor_std(const Tensor<T>& t) {
  const T mu = tensor_mean(t);
  T s = 0;
  for (size_t i = 0; i < t.size(); ++i) {
    const T d = t[i] - mu;
    s += d * d;
  }
  return std::sqrt(s / T(t.size()));
}

template <class T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  T m = 0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <class T>
bool bit_equal(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

}  // namespace scrawl
