#pragma once

#include <limits>
#include <vector>

#include "smoke/gemm.hpp"
#include "smoke/ops.hpp"
#include "smoke/tape.hpp"
#include "smoke/tensor.hpp"

namespace smoke {

// Convolutions run as im2col + GEMM; the unpack buffers are rebuilt in the
// backward closure instead of being captured, trading FLOPs for memory.

/// 2-D convolution. weight (C_out, C_in, k, k), bias (1, C_out, 1, 1) or
/// undefined for none. Output spatial size floor((H + 2p - k)/stride) + 1.
template <class T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& w,
                 const Tensor<T>& b, int stride, int padding) {
  const Shape xs = x.shape(), ws = w.shape();
  if (ws.h != ws.w)
    detail::shape_error("conv2d", "kernel must be square, got " + ws.str());
  const int k = ws.h;
  if (xs.c != ws.c)
    detail::shape_error("conv2d", "input " + xs.str() + " has " +
                                      std::to_string(xs.c) +
                                      " channels, weight " + ws.str() +
                                      " expects " + std::to_string(ws.c));
  if (stride < 1 || padding < 0)
    detail::shape_error("conv2d", "stride " + std::to_string(stride) +
                                      ", padding " + std::to_string(padding));
  const int Ho = (xs.h + 2 * padding - k) / stride + 1;
  const int Wo = (xs.w + 2 * padding - k) / stride + 1;
  if (xs.h + 2 * padding < k || xs.w + 2 * padding < k)
    detail::shape_error("conv2d", "kernel " + std::to_string(k) +
                                      " larger than padded input " +
                                      xs.str());
  const int cout = ws.n;
  const bool has_bias = b.defined();
  if (has_bias && !(b.shape() == Shape{1, cout, 1, 1}))
    detail::shape_error("conv2d", "bias " + b.shape().str() + " for " +
                                      std::to_string(cout) + " filters");

  Tensor<T> y({xs.n, cout, Ho, Wo});
  const std::int64_t ckk = static_cast<std::int64_t>(xs.c) * k * k;
  const std::int64_t ospatial = static_cast<std::int64_t>(Ho) * Wo;
  const std::int64_t ispatial = static_cast<std::int64_t>(xs.h) * xs.w;
  std::vector<T> col(ckk * ospatial);
  for (int n = 0; n < xs.n; ++n) {
    im2col(x.data() + n * xs.c * ispatial, xs.c, xs.h, xs.w, k, stride,
           padding, Ho, Wo, col.data());
    T* yn = y.data() + n * cout * ospatial;
    gemm(false, cout, static_cast<int>(ospatial), static_cast<int>(ckk),
         w.data(), col.data(), yn);
    if (has_bias) {
      for (int co = 0; co < cout; ++co) {
        const T bv = b.data()[co];
        T* row = yn + co * ospatial;
        for (std::int64_t i = 0; i < ospatial; ++i) row[i] += bv;
      }
    }
  }
  detail::check_output(y, "conv2d");

  if (detail::track(tape, {x.requires_grad(), w.requires_grad(),
                           has_bias && b.requires_grad()})) {
    y.set_requires_grad(true);
    Tensor<T> xc = x, wc = w, bc = b, yc = y;
    tape.record([xc, wc, bc, yc, k, stride, padding, Ho, Wo]() mutable {
      const Shape xs = xc.shape();
      const int cout = wc.shape().n;
      const std::int64_t ckk = static_cast<std::int64_t>(xs.c) * k * k;
      const std::int64_t ospatial = static_cast<std::int64_t>(Ho) * Wo;
      const std::int64_t ispatial = static_cast<std::int64_t>(xs.h) * xs.w;
      std::vector<T> col(ckk * ospatial);
      std::vector<T> dcol;
      const bool need_dx = xc.requires_grad();
      const bool need_dw = wc.requires_grad();
      const bool need_db = bc.defined() && bc.requires_grad();
      if (need_dx) {
        xc.ensure_grad();
        dcol.resize(ckk * ospatial);
      }
      if (need_dw) wc.ensure_grad();
      if (need_db) bc.ensure_grad();
      for (int n = 0; n < xs.n; ++n) {
        const T* gy = yc.grad() + n * cout * ospatial;
        if (need_dw || need_dx)
          im2col(xc.data() + n * xs.c * ispatial, xs.c, xs.h, xs.w, k,
                 stride, padding, Ho, Wo, col.data());
        if (need_dw)
          gemm_nt(true, cout, static_cast<int>(ckk),
                  static_cast<int>(ospatial), gy, col.data(), wc.grad());
        if (need_db) {
          T* bg = bc.grad();
          for (int co = 0; co < cout; ++co) {
            const T* row = gy + co * ospatial;
            T acc = 0;
            for (std::int64_t i = 0; i < ospatial; ++i) acc += row[i];
            bg[co] += acc;
          }
        }
        if (need_dx) {
          gemm_tn(false, static_cast<int>(ckk), static_cast<int>(ospatial),
                  cout, wc.data(), gy, dcol.data());
          col2im(dcol.data(), xs.c, xs.h, xs.w, k, stride, padding, Ho, Wo,
                 xc.grad() + n * xs.c * ispatial);
        }
      }
    });
  }
  return y;
}

/// Transposed convolution (fractionally strided). weight (C_in, C_out, k, k),
/// bias (1, C_out, 1, 1) or undefined. Output spatial size
/// (H - 1)*stride + k; with k == stride this exactly multiplies resolution.
template <class T>
Tensor<T> transposed_conv2d(Tape<T>& tape, const Tensor<T>& x,
                            const Tensor<T>& w, const Tensor<T>& b,
                            int stride) {
  const Shape xs = x.shape(), ws = w.shape();
  if (ws.h != ws.w)
    detail::shape_error("transposed_conv2d",
                        "kernel must be square, got " + ws.str());
  const int k = ws.h;
  if (xs.c != ws.n)
    detail::shape_error("transposed_conv2d",
                        "input " + xs.str() + " vs weight " + ws.str() +
                            " (expects C_in = weight dim 0)");
  if (stride < 1)
    detail::shape_error("transposed_conv2d",
                        "stride " + std::to_string(stride));
  const int cout = ws.c;
  const int Ho = (xs.h - 1) * stride + k;
  const int Wo = (xs.w - 1) * stride + k;
  const bool has_bias = b.defined();
  if (has_bias && !(b.shape() == Shape{1, cout, 1, 1}))
    detail::shape_error("transposed_conv2d",
                        "bias " + b.shape().str() + " for " +
                            std::to_string(cout) + " filters");

  // Forward is the adjoint of a stride-s conv with input (C_out, Ho, Wo):
  // col = W^T x, then scatter with col2im.
  Tensor<T> y({xs.n, cout, Ho, Wo});
  const std::int64_t ckk = static_cast<std::int64_t>(cout) * k * k;
  const std::int64_t ispatial = static_cast<std::int64_t>(xs.h) * xs.w;
  const std::int64_t ospatial = static_cast<std::int64_t>(Ho) * Wo;
  std::vector<T> col(ckk * ispatial);
  for (int n = 0; n < xs.n; ++n) {
    gemm_tn(false, static_cast<int>(ckk), static_cast<int>(ispatial), xs.c,
            w.data(), x.data() + n * xs.c * ispatial, col.data());
    T* yn = y.data() + n * cout * ospatial;
    col2im(col.data(), cout, Ho, Wo, k, stride, 0, xs.h, xs.w, yn);
    if (has_bias) {
      for (int co = 0; co < cout; ++co) {
        const T bv = b.data()[co];
        T* row = yn + co * ospatial;
        for (std::int64_t i = 0; i < ospatial; ++i) row[i] += bv;
      }
    }
  }
  detail::check_output(y, "transposed_conv2d");

  if (detail::track(tape, {x.requires_grad(), w.requires_grad(),
                           has_bias && b.requires_grad()})) {
    y.set_requires_grad(true);
    Tensor<T> xc = x, wc = w, bc = b, yc = y;
    tape.record([xc, wc, bc, yc, k, stride, Ho, Wo]() mutable {
      const Shape xs = xc.shape();
      const int cout = wc.shape().c;
      const std::int64_t ckk = static_cast<std::int64_t>(cout) * k * k;
      const std::int64_t ispatial = static_cast<std::int64_t>(xs.h) * xs.w;
      std::vector<T> col(ckk * ispatial);
      const bool need_dx = xc.requires_grad();
      const bool need_dw = wc.requires_grad();
      const bool need_db = bc.defined() && bc.requires_grad();
      if (need_dx) xc.ensure_grad();
      if (need_dw) wc.ensure_grad();
      if (need_db) bc.ensure_grad();
      for (int n = 0; n < xs.n; ++n) {
        const T* gy = yc.grad() +
                      n * cout * static_cast<std::int64_t>(Ho) * Wo;
        if (need_dx || need_dw)
          im2col(gy, cout, Ho, Wo, k, stride, 0, xs.h, xs.w, col.data());
        if (need_dx)
          // dX[C_in, HW] += W[C_in, ckk] * col[ckk, HW]
          gemm(true, xs.c, static_cast<int>(ispatial),
               static_cast<int>(ckk), wc.data(), col.data(),
               xc.grad() + n * xs.c * ispatial);
        if (need_dw)
          // dW[C_in, ckk] += x[C_in, HW] * col[ckk, HW]^T
          gemm_nt(true, xs.c, static_cast<int>(ckk),
                  static_cast<int>(ispatial),
                  xc.data() + n * xs.c * ispatial, col.data(), wc.grad());
        if (need_db) {
          T* bg = bc.grad();
          const std::int64_t ospatial = static_cast<std::int64_t>(Ho) * Wo;
          for (int co = 0; co < cout; ++co) {
            const T* row = gy + co * ospatial;
            T acc = 0;
            for (std::int64_t i = 0; i < ospatial; ++i) acc += row[i];
            bg[co] += acc;
          }
        }
      }
    });
  }
  return y;
}

namespace detail {
// Stride-1 pooling pads by (k-1)/2 to preserve spatial size; other strides
// pool unpadded. Padded cells are zeros for both pool flavors.
inline int pool_pad(int kernel, int stride) {
  return stride == 1 ? (kernel - 1) / 2 : 0;
}
}  // namespace detail

/// Max pooling. Gradient is routed to the (first) argmax position of each
/// window; when a padded zero strictly beats every in-bounds value the
/// window contributes no gradient.
template <class T>
Tensor<T> maxpool(Tape<T>& tape, const Tensor<T>& x, int kernel, int stride) {
  const Shape xs = x.shape();
  if (kernel < 1 || stride < 1)
    detail::shape_error("maxpool", "kernel " + std::to_string(kernel) +
                                       ", stride " + std::to_string(stride));
  const int pad = detail::pool_pad(kernel, stride);
  const int Ho = (xs.h + 2 * pad - kernel) / stride + 1;
  const int Wo = (xs.w + 2 * pad - kernel) / stride + 1;
  if (xs.h + 2 * pad < kernel || xs.w + 2 * pad < kernel)
    detail::shape_error("maxpool", "kernel " + std::to_string(kernel) +
                                       " larger than input " + xs.str());
  Tensor<T> y({xs.n, xs.c, Ho, Wo});
  const std::int64_t planes = static_cast<std::int64_t>(xs.n) * xs.c;
  const std::int64_t ispatial = static_cast<std::int64_t>(xs.h) * xs.w;
  const std::int64_t ospatial = static_cast<std::int64_t>(Ho) * Wo;
  std::vector<std::int64_t> argmax(planes * ospatial, -1);
  for (std::int64_t pl = 0; pl < planes; ++pl) {
    const T* xp = x.data() + pl * ispatial;
    T* yp = y.data() + pl * ospatial;
    std::int64_t* ap = argmax.data() + pl * ospatial;
    for (int oy = 0; oy < Ho; ++oy) {
      for (int ox = 0; ox < Wo; ++ox) {
        const int y0 = oy * stride - pad, x0 = ox * stride - pad;
        T best = -std::numeric_limits<T>::infinity();
        std::int64_t bi = -1;
        bool padded = false;
        for (int ky = 0; ky < kernel; ++ky) {
          const int iy = y0 + ky;
          if (iy < 0 || iy >= xs.h) {
            padded = true;
            continue;
          }
          for (int kx = 0; kx < kernel; ++kx) {
            const int ix = x0 + kx;
            if (ix < 0 || ix >= xs.w) {
              padded = true;
              continue;
            }
            const T v = xp[iy * xs.w + ix];
            if (v > best) {
              best = v;
              bi = iy * xs.w + ix;
            }
          }
        }
        if (padded && best < T(0)) {
          best = T(0);
          bi = -1;
        }
        yp[oy * Wo + ox] = best;
        ap[oy * Wo + ox] = bi;
      }
    }
  }
  if (detail::track(tape, {x.requires_grad()})) {
    y.set_requires_grad(true);
    Tensor<T> xc = x, yc = y;
    tape.record([xc, yc, argmax, planes, ispatial, ospatial]() mutable {
      xc.ensure_grad();
      const T* g = yc.grad();
      T* xg = xc.grad();
      for (std::int64_t pl = 0; pl < planes; ++pl)
        for (std::int64_t i = 0; i < ospatial; ++i) {
          const std::int64_t bi = argmax[pl * ospatial + i];
          if (bi >= 0) xg[pl * ispatial + bi] += g[pl * ospatial + i];
        }
    });
  }
  return y;
}

/// Average pooling with fixed divisor kernel*kernel (padded cells count as
/// zeros). Backward spreads gradient uniformly over in-bounds positions.
template <class T>
Tensor<T> avgpool(Tape<T>& tape, const Tensor<T>& x, int kernel, int stride) {
  const Shape xs = x.shape();
  if (kernel < 1 || stride < 1)
    detail::shape_error("avgpool", "kernel " + std::to_string(kernel) +
                                       ", stride " + std::to_string(stride));
  const int pad = detail::pool_pad(kernel, stride);
  const int Ho = (xs.h + 2 * pad - kernel) / stride + 1;
  const int Wo = (xs.w + 2 * pad - kernel) / stride + 1;
  if (xs.h + 2 * pad < kernel || xs.w + 2 * pad < kernel)
    detail::shape_error("avgpool", "kernel " + std::to_string(kernel) +
                                       " larger than input " + xs.str());
  Tensor<T> y({xs.n, xs.c, Ho, Wo});
  const std::int64_t planes = static_cast<std::int64_t>(xs.n) * xs.c;
  const std::int64_t ispatial = static_cast<std::int64_t>(xs.h) * xs.w;
  const std::int64_t ospatial = static_cast<std::int64_t>(Ho) * Wo;
  const T inv = T(1) / static_cast<T>(kernel * kernel);
  for (std::int64_t pl = 0; pl < planes; ++pl) {
    const T* xp = x.data() + pl * ispatial;
    T* yp = y.data() + pl * ospatial;
    for (int oy = 0; oy < Ho; ++oy)
      for (int ox = 0; ox < Wo; ++ox) {
        const int y0 = oy * stride - pad, x0 = ox * stride - pad;
        T acc = 0;
        for (int ky = 0; ky < kernel; ++ky) {
          const int iy = y0 + ky;
          if (iy < 0 || iy >= xs.h) continue;
          for (int kx = 0; kx < kernel; ++kx) {
            const int ix = x0 + kx;
            if (ix >= 0 && ix < xs.w) acc += xp[iy * xs.w + ix];
          }
        }
        yp[oy * Wo + ox] = acc * inv;
      }
  }
  if (detail::track(tape, {x.requires_grad()})) {
    y.set_requires_grad(true);
    Tensor<T> xc = x, yc = y;
    tape.record([xc, yc, kernel, stride, pad, Ho, Wo, inv]() mutable {
      xc.ensure_grad();
      const Shape xs = xc.shape();
      const std::int64_t planes = static_cast<std::int64_t>(xs.n) * xs.c;
      const std::int64_t ispatial = static_cast<std::int64_t>(xs.h) * xs.w;
      const std::int64_t ospatial = static_cast<std::int64_t>(Ho) * Wo;
      const T* g = yc.grad();
      T* xg = xc.grad();
      for (std::int64_t pl = 0; pl < planes; ++pl)
        for (int oy = 0; oy < Ho; ++oy)
          for (int ox = 0; ox < Wo; ++ox) {
            const T gv = g[pl * ospatial + oy * Wo + ox] * inv;
            const int y0 = oy * stride - pad, x0 = ox * stride - pad;
            for (int ky = 0; ky < kernel; ++ky) {
              const int iy = y0 + ky;
              if (iy < 0 || iy >= xs.h) continue;
              for (int kx = 0; kx < kernel; ++kx) {
                const int ix = x0 + kx;
                if (ix >= 0 && ix < xs.w)
                  xg[pl * ispatial + iy * xs.w + ix] += gv;
              }
            }
          }
    });
  }
  return y;
}

}  // namespace smoke
