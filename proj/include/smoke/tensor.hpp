#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "smoke/shape.hpp"

namespace smoke {

/// NCHW tensor with optional gradient buffer. Copies are shallow (shared
/// storage); ops treat produced tensors as immutable, so sharing is safe.
/// Gradient accumulation and parameter updates are the only mutations.
template <class T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, bool requires_grad = false)
      : s_(std::make_shared<Storage>()) {
    s_->shape = shape;
    s_->value.assign(static_cast<std::size_t>(shape.numel()), T(0));
    s_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape) { return Tensor(shape); }

  static Tensor full(Shape shape, T v) {
    Tensor t(shape);
    for (auto& x : t.s_->value) x = v;
    return t;
  }

  static Tensor scalar(T v) { return full({1, 1, 1, 1}, v); }

  static Tensor from_vector(Shape shape, std::vector<T> values) {
    if (static_cast<std::int64_t>(values.size()) != shape.numel())
      throw std::invalid_argument("Tensor::from_vector: " +
                                  std::to_string(values.size()) +
                                  " values for shape " + shape.str());
    Tensor t;
    t.s_ = std::make_shared<Storage>();
    t.s_->shape = shape;
    t.s_->value = std::move(values);
    return t;
  }

  bool defined() const { return s_ != nullptr; }
  const Shape& shape() const { return s_->shape; }
  std::int64_t numel() const { return s_->shape.numel(); }

  T* data() { return s_->value.data(); }
  const T* data() const { return s_->value.data(); }
  std::vector<T>& values() { return s_->value; }
  const std::vector<T>& values() const { return s_->value; }

  bool requires_grad() const { return s_ && s_->requires_grad; }
  void set_requires_grad(bool b) {
    s_->requires_grad = b;
    if (b) ensure_grad();
  }

  /// Allocates (zeroed) the gradient buffer if absent.
  void ensure_grad() {
    if (s_->grad.size() != s_->value.size())
      s_->grad.assign(s_->value.size(), T(0));
  }

  bool has_grad() const { return s_ && !s_->grad.empty(); }
  T* grad() { return s_->grad.data(); }
  const T* grad() const { return s_->grad.data(); }
  std::vector<T>& grad_values() { return s_->grad; }

  void zero_grad() {
    for (auto& g : s_->grad) g = T(0);
  }

  T& at(int n, int c, int h, int w) {
    return s_->value[idx(n, c, h, w)];
  }
  T at(int n, int c, int h, int w) const {
    return s_->value[idx(n, c, h, w)];
  }

  /// Value of a 1-element tensor.
  T item() const {
    if (numel() != 1)
      throw std::invalid_argument("Tensor::item on shape " + shape().str());
    return s_->value[0];
  }

  bool all_finite() const {
    for (const T v : s_->value)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  /// Identity of the underlying storage; used by tests to assert aliasing.
  const void* storage_id() const { return s_.get(); }

 private:
  struct Storage {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
  };

  std::size_t idx(int n, int c, int h, int w) const {
    const Shape& s = s_->shape;
    return ((static_cast<std::size_t>(n) * s.c + c) * s.h + h) * s.w + w;
  }

  std::shared_ptr<Storage> s_;
};

}  // namespace smoke
