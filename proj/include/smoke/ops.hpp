#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "smoke/gemm.hpp"
#include "smoke/tape.hpp"
#include "smoke/tensor.hpp"

namespace smoke {

// Differentiable operations covering exactly what the architecture needs;
// no broadcasting, no fused graphs. Every op validates shapes up front and
// throws std::invalid_argument with a shape report on mismatch.

/// When enabled, every op validates its output for NaN/Inf.
inline bool& finite_checks() {
  static bool enabled = false;
  return enabled;
}

namespace detail {

template <class T>
inline void check_output(const Tensor<T>& t, const char* op) {
  if (finite_checks() && !t.all_finite())
    throw std::domain_error(std::string(op) + ": non-finite output");
}

[[noreturn]] inline void shape_error(const std::string& op,
                                     const std::string& detail) {
  throw std::invalid_argument(op + ": " + detail);
}

template <class T>
inline bool track(const Tape<T>& tape, std::initializer_list<bool> reqs) {
  if (!tape.recording()) return false;
  for (bool r : reqs)
    if (r) return true;
  return false;
}

}  // namespace detail

template <class T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  const std::int64_t n = x.numel();
  const T* xv = x.data();
  T* yv = y.data();
  for (std::int64_t i = 0; i < n; ++i) yv[i] = xv[i] > T(0) ? xv[i] : T(0);
  if (detail::track(tape, {x.requires_grad()})) {
    y.set_requires_grad(true);
    Tensor<T> xc = x, yc = y;
    tape.record([xc, yc]() mutable {
      xc.ensure_grad();
      const std::int64_t n = xc.numel();
      const T* g = yc.grad();
      const T* xv = xc.data();
      T* xg = xc.grad();
      for (std::int64_t i = 0; i < n; ++i)
        if (xv[i] > T(0)) xg[i] += g[i];
    });
  }
  return y;
}

template <class T>
Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  const std::int64_t n = x.numel();
  const T* xv = x.data();
  T* yv = y.data();
  for (std::int64_t i = 0; i < n; ++i) {
    const T v = xv[i];
    yv[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                      : std::exp(v) / (T(1) + std::exp(v));
  }
  if (detail::track(tape, {x.requires_grad()})) {
    y.set_requires_grad(true);
    Tensor<T> xc = x, yc = y;
    tape.record([xc, yc]() mutable {
      xc.ensure_grad();
      const std::int64_t n = xc.numel();
      const T* g = yc.grad();
      const T* yv = yc.data();
      T* xg = xc.grad();
      for (std::int64_t i = 0; i < n; ++i)
        xg[i] += g[i] * yv[i] * (T(1) - yv[i]);
    });
  }
  return y;
}

template <class T>
Tensor<T> elementwise_add(Tape<T>& tape, const Tensor<T>& a,
                          const Tensor<T>& b) {
  if (!(a.shape() == b.shape()))
    detail::shape_error("elementwise_add",
                        a.shape().str() + " vs " + b.shape().str());
  Tensor<T> y(a.shape());
  const std::int64_t n = a.numel();
  const T* av = a.data();
  const T* bv = b.data();
  T* yv = y.data();
  for (std::int64_t i = 0; i < n; ++i) yv[i] = av[i] + bv[i];
  if (detail::track(tape, {a.requires_grad(), b.requires_grad()})) {
    y.set_requires_grad(true);
    Tensor<T> ac = a, bc = b, yc = y;
    tape.record([ac, bc, yc]() mutable {
      const std::int64_t n = yc.numel();
      const T* g = yc.grad();
      if (ac.requires_grad()) {
        ac.ensure_grad();
        T* ag = ac.grad();
        for (std::int64_t i = 0; i < n; ++i) ag[i] += g[i];
      }
      if (bc.requires_grad()) {
        bc.ensure_grad();
        T* bg = bc.grad();
        for (std::int64_t i = 0; i < n; ++i) bg[i] += g[i];
      }
    });
  }
  return y;
}

template <class T>
Tensor<T> elementwise_mul(Tape<T>& tape, const Tensor<T>& a,
                          const Tensor<T>& b) {
  if (!(a.shape() == b.shape()))
    detail::shape_error("elementwise_mul",
                        a.shape().str() + " vs " + b.shape().str());
  Tensor<T> y(a.shape());
  const std::int64_t n = a.numel();
  const T* av = a.data();
  const T* bv = b.data();
  T* yv = y.data();
  for (std::int64_t i = 0; i < n; ++i) yv[i] = av[i] * bv[i];
  if (detail::track(tape, {a.requires_grad(), b.requires_grad()})) {
    y.set_requires_grad(true);
    Tensor<T> ac = a, bc = b, yc = y;
    tape.record([ac, bc, yc]() mutable {
      const std::int64_t n = yc.numel();
      const T* g = yc.grad();
      const T* av = ac.data();
      const T* bv = bc.data();
      if (ac.requires_grad()) {
        ac.ensure_grad();
        T* ag = ac.grad();
        for (std::int64_t i = 0; i < n; ++i) ag[i] += g[i] * bv[i];
      }
      if (bc.requires_grad()) {
        bc.ensure_grad();
        T* bg = bc.grad();
        for (std::int64_t i = 0; i < n; ++i) bg[i] += g[i] * av[i];
      }
    });
  }
  return y;
}

/// y = s * x for a compile-time-known constant s (not a tensor).
template <class T>
Tensor<T> scale_by(Tape<T>& tape, const Tensor<T>& x, T s) {
  Tensor<T> y(x.shape());
  const std::int64_t n = x.numel();
  const T* xv = x.data();
  T* yv = y.data();
  for (std::int64_t i = 0; i < n; ++i) yv[i] = s * xv[i];
  if (detail::track(tape, {x.requires_grad()})) {
    y.set_requires_grad(true);
    Tensor<T> xc = x, yc = y;
    tape.record([xc, yc, s]() mutable {
      xc.ensure_grad();
      const std::int64_t n = xc.numel();
      const T* g = yc.grad();
      T* xg = xc.grad();
      for (std::int64_t i = 0; i < n; ++i) xg[i] += s * g[i];
    });
  }
  return y;
}

/// Concatenates along the channel dimension; all inputs share N, H, W.
template <class T>
Tensor<T> concat_channels(Tape<T>& tape, const std::vector<Tensor<T>>& xs) {
  if (xs.empty()) detail::shape_error("concat_channels", "no inputs");
  const Shape s0 = xs[0].shape();
  int c_total = 0;
  bool any_grad = false;
  for (const auto& x : xs) {
    const Shape s = x.shape();
    if (s.n != s0.n || s.h != s0.h || s.w != s0.w)
      detail::shape_error("concat_channels",
                          s.str() + " incompatible with " + s0.str());
    c_total += s.c;
    any_grad = any_grad || x.requires_grad();
  }
  Tensor<T> y({s0.n, c_total, s0.h, s0.w});
  const std::int64_t plane = static_cast<std::int64_t>(s0.h) * s0.w;
  for (int n = 0; n < s0.n; ++n) {
    std::int64_t coff = 0;
    for (const auto& x : xs) {
      const int cx = x.shape().c;
      const T* src = x.data() + static_cast<std::int64_t>(n) * cx * plane;
      T* dst = y.data() +
               (static_cast<std::int64_t>(n) * c_total + coff) * plane;
      std::copy(src, src + static_cast<std::int64_t>(cx) * plane, dst);
      coff += cx;
    }
  }
  if (tape.recording() && any_grad) {
    y.set_requires_grad(true);
    std::vector<Tensor<T>> xc = xs;
    Tensor<T> yc = y;
    tape.record([xc, yc, plane, c_total]() mutable {
      const int N = yc.shape().n;
      for (int n = 0; n < N; ++n) {
        std::int64_t coff = 0;
        for (auto& x : xc) {
          const int cx = x.shape().c;
          if (x.requires_grad()) {
            x.ensure_grad();
            const T* g = yc.grad() +
                         (static_cast<std::int64_t>(n) * c_total + coff) *
                             plane;
            T* xg = x.grad() + static_cast<std::int64_t>(n) * cx * plane;
            for (std::int64_t i = 0; i < cx * plane; ++i) xg[i] += g[i];
          }
          coff += cx;
        }
      }
    });
  }
  return y;
}

/// y[n,o] = sum_i w[o,i] * flat(x)[n,i] + b[o]. Weight shape (out, in, 1, 1),
/// bias shape (1, out, 1, 1); output (N, out, 1, 1).
template <class T>
Tensor<T> fully_connected(Tape<T>& tape, const Tensor<T>& x,
                          const Tensor<T>& w, const Tensor<T>& b) {
  const Shape xs = x.shape(), ws = w.shape();
  const std::int64_t in = static_cast<std::int64_t>(xs.c) * xs.h * xs.w;
  if (ws.h != 1 || ws.w != 1 || ws.c != in)
    detail::shape_error("fully_connected", "weight " + ws.str() +
                                               " does not match input " +
                                               xs.str());
  const int out = ws.n;
  if (!(b.shape() == Shape{1, out, 1, 1}))
    detail::shape_error("fully_connected", "bias " + b.shape().str() +
                                               " for " + std::to_string(out) +
                                               " outputs");
  Tensor<T> y({xs.n, out, 1, 1});
  // y[N,out] = x[N,in] * w[out,in]^T
  gemm_nt(false, xs.n, out, static_cast<int>(in), x.data(), w.data(),
          y.data());
  for (int n = 0; n < xs.n; ++n)
    for (int o = 0; o < out; ++o) y.data()[n * out + o] += b.data()[o];
  if (detail::track(tape,
                    {x.requires_grad(), w.requires_grad(),
                     b.requires_grad()})) {
    y.set_requires_grad(true);
    Tensor<T> xc = x, wc = w, bc = b, yc = y;
    tape.record([xc, wc, bc, yc, in, out]() mutable {
      const int N = xc.shape().n;
      const T* g = yc.grad();
      if (wc.requires_grad()) {
        wc.ensure_grad();
        // dW[out,in] += g[N,out]^T * x[N,in]
        gemm_tn(true, out, static_cast<int>(in), N, g, xc.data(), wc.grad());
      }
      if (bc.requires_grad()) {
        bc.ensure_grad();
        T* bg = bc.grad();
        for (int n = 0; n < N; ++n)
          for (int o = 0; o < out; ++o) bg[o] += g[n * out + o];
      }
      if (xc.requires_grad()) {
        xc.ensure_grad();
        // dX[N,in] += g[N,out] * w[out,in]
        gemm(true, N, static_cast<int>(in), out, g, wc.data(), xc.grad());
      }
    });
  }
  return y;
}

/// Softmax over a length-2 logit vector per sample; input (N, 2, 1, 1).
/// Rejects non-finite logits.
template <class T>
Tensor<T> softmax2(Tape<T>& tape, const Tensor<T>& x) {
  const Shape s = x.shape();
  if (s.c != 2 || s.h != 1 || s.w != 1)
    detail::shape_error("softmax2", "expected (N,2,1,1), got " + s.str());
  if (!x.all_finite())
    throw std::domain_error("softmax2: non-finite logits");
  Tensor<T> y(s);
  const T* xv = x.data();
  T* yv = y.data();
  for (int n = 0; n < s.n; ++n) {
    const T a = xv[2 * n], b = xv[2 * n + 1];
    const T m = std::max(a, b);
    const T ea = std::exp(a - m), eb = std::exp(b - m);
    const T sum = ea + eb;
    yv[2 * n] = ea / sum;
    yv[2 * n + 1] = eb / sum;
  }
  if (detail::track(tape, {x.requires_grad()})) {
    y.set_requires_grad(true);
    Tensor<T> xc = x, yc = y;
    tape.record([xc, yc]() mutable {
      xc.ensure_grad();
      const int N = xc.shape().n;
      const T* g = yc.grad();
      const T* z = yc.data();
      T* xg = xc.grad();
      for (int n = 0; n < N; ++n) {
        const T dot = g[2 * n] * z[2 * n] + g[2 * n + 1] * z[2 * n + 1];
        xg[2 * n] += z[2 * n] * (g[2 * n] - dot);
        xg[2 * n + 1] += z[2 * n + 1] * (g[2 * n + 1] - dot);
      }
    });
  }
  return y;
}

template <class T>
Tensor<T> reduce_sum(Tape<T>& tape, const Tensor<T>& x) {
  Tensor<T> y({1, 1, 1, 1});
  const std::int64_t n = x.numel();
  const T* xv = x.data();
  T acc = 0;
  for (std::int64_t i = 0; i < n; ++i) acc += xv[i];
  y.data()[0] = acc;
  if (detail::track(tape, {x.requires_grad()})) {
    y.set_requires_grad(true);
    Tensor<T> xc = x, yc = y;
    tape.record([xc, yc]() mutable {
      xc.ensure_grad();
      const T g = yc.grad()[0];
      T* xg = xc.grad();
      const std::int64_t n = xc.numel();
      for (std::int64_t i = 0; i < n; ++i) xg[i] += g;
    });
  }
  return y;
}

template <class T>
Tensor<T> reduce_mean(Tape<T>& tape, const Tensor<T>& x) {
  Tensor<T> y({1, 1, 1, 1});
  const std::int64_t n = x.numel();
  const T* xv = x.data();
  T acc = 0;
  for (std::int64_t i = 0; i < n; ++i) acc += xv[i];
  y.data()[0] = acc / static_cast<T>(n);
  if (detail::track(tape, {x.requires_grad()})) {
    y.set_requires_grad(true);
    Tensor<T> xc = x, yc = y;
    tape.record([xc, yc]() mutable {
      xc.ensure_grad();
      const std::int64_t n = xc.numel();
      const T g = yc.grad()[0] / static_cast<T>(n);
      T* xg = xc.grad();
      for (std::int64_t i = 0; i < n; ++i) xg[i] += g;
    });
  }
  return y;
}

/// Class-weighted pixel cross-entropy, summed over pixels, one value per
/// image: out[n] = -sum_i [pw*Y_i*log(p_i) + nw*(1-Y_i)*log(1-p_i)] with
/// alpha_n = (#positive pixels)/(h*w), pw = alpha, nw = 1-alpha as written
/// in the loss; `balanced` swaps the two weights. The mask carries labels
/// (values in {0,1}) and never receives gradient. Log arguments are clamped
/// to [1e-12, 1-1e-12] with pass-through gradient so saturated sigmoids
/// cannot produce infinities.
template <class T>
Tensor<T> saliency_bce(Tape<T>& tape, const Tensor<T>& map,
                       const Tensor<T>& mask, bool balanced = false) {
  const Shape s = map.shape();
  if (!(s == mask.shape()))
    detail::shape_error("saliency_bce",
                        "map " + s.str() + " vs mask " + mask.shape().str());
  if (s.c != 1)
    detail::shape_error("saliency_bce", "map must be 1-channel, got " +
                                            s.str());
  const std::int64_t plane = static_cast<std::int64_t>(s.h) * s.w;
  const T eps = T(1e-12);
  Tensor<T> y({s.n, 1, 1, 1});
  std::vector<T> pos_w(s.n), neg_w(s.n);
  for (int n = 0; n < s.n; ++n) {
    const T* pv = map.data() + n * plane;
    const T* mv = mask.data() + n * plane;
    std::int64_t pos = 0;
    for (std::int64_t i = 0; i < plane; ++i) pos += (mv[i] > T(0.5));
    const T alpha = static_cast<T>(pos) / static_cast<T>(plane);
    pos_w[n] = balanced ? T(1) - alpha : alpha;
    neg_w[n] = balanced ? alpha : T(1) - alpha;
    T acc = 0;
    for (std::int64_t i = 0; i < plane; ++i) {
      const T p = std::clamp(pv[i], eps, T(1) - eps);
      if (mv[i] > T(0.5))
        acc -= pos_w[n] * std::log(p);
      else
        acc -= neg_w[n] * std::log(T(1) - p);
    }
    y.data()[n] = acc;
  }
  if (detail::track(tape, {map.requires_grad()})) {
    y.set_requires_grad(true);
    Tensor<T> pc = map, mc = mask, yc = y;
    tape.record([pc, mc, yc, pos_w, neg_w, plane, eps]() mutable {
      pc.ensure_grad();
      const int N = pc.shape().n;
      for (int n = 0; n < N; ++n) {
        const T g = yc.grad()[n];
        const T* pv = pc.data() + n * plane;
        const T* mv = mc.data() + n * plane;
        T* pg = pc.grad() + n * plane;
        for (std::int64_t i = 0; i < plane; ++i) {
          const T p = std::clamp(pv[i], eps, T(1) - eps);
          if (mv[i] > T(0.5))
            pg[i] -= g * pos_w[n] / p;
          else
            pg[i] += g * neg_w[n] / (T(1) - p);
        }
      }
    });
  }
  return y;
}

/// out[n] = -log(z[n, labels[n]]); z is a softmax output (N, 2, 1, 1).
template <class T>
Tensor<T> pick_neg_log(Tape<T>& tape, const Tensor<T>& z,
                       const std::vector<int>& labels) {
  const Shape s = z.shape();
  if (s.c != 2 || s.h != 1 || s.w != 1)
    detail::shape_error("pick_neg_log", "expected (N,2,1,1), got " + s.str());
  if (static_cast<int>(labels.size()) != s.n)
    detail::shape_error("pick_neg_log",
                        std::to_string(labels.size()) + " labels for batch " +
                            std::to_string(s.n));
  for (int l : labels)
    if (l != 0 && l != 1)
      detail::shape_error("pick_neg_log", "label must be 0 or 1, got " +
                                              std::to_string(l));
  Tensor<T> y({s.n, 1, 1, 1});
  for (int n = 0; n < s.n; ++n)
    y.data()[n] = -std::log(z.data()[2 * n + labels[n]]);
  if (detail::track(tape, {z.requires_grad()})) {
    y.set_requires_grad(true);
    Tensor<T> zc = z, yc = y;
    std::vector<int> lc = labels;
    tape.record([zc, yc, lc]() mutable {
      zc.ensure_grad();
      const int N = zc.shape().n;
      for (int n = 0; n < N; ++n)
        zc.grad()[2 * n + lc[n]] -=
            yc.grad()[n] / zc.data()[2 * n + lc[n]];
    });
  }
  return y;
}

}  // namespace smoke
