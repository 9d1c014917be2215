#pragma once

#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "smoke/tensor.hpp"

namespace smoke {

/// Ordered record of executed operations. Each op pushes one backward
/// closure; the reverse sweep runs them in exact reverse execution order,
/// which makes gradients deterministic for a deterministic forward pass.
template <class T>
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void record(BackwardFn fn) { records_.push_back(std::move(fn)); }

  bool recording() const { return enabled_; }
  void set_recording(bool b) { enabled_ = b; }

  std::size_t size() const { return records_.size(); }

  void clear() { records_.clear(); }

  /// Runs the reverse sweep. The tape is left intact; call clear() to reuse.
  void sweep() {
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
  }

 private:
  std::vector<BackwardFn> records_;
  bool enabled_ = true;
};

/// Seeds d(loss)/d(loss) = 1 and runs the reverse sweep, populating the
/// gradient of every tensor that requires one. Rejects non-scalar losses.
template <class T>
void backward(Tensor<T> loss, Tape<T>& tape) {
  if (loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                loss.shape().str());
  loss.ensure_grad();
  loss.grad()[0] = T(1);
  tape.sweep();
}

}  // namespace smoke
