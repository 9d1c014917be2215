#pragma once

#include <algorithm>
#include <cstring>

namespace smoke {

// Dense row-major matrix kernels backing conv2d and fully_connected.
// Summation order is a pure function of the operand sizes (fixed block
// constants, no data-dependent reordering, no threading inside a kernel),
// which keeps every gradient bitwise reproducible.

namespace detail {
inline constexpr int kBlockK = 128;
inline constexpr int kBlockN = 512;
}  // namespace detail

/// C[M,N] (+)= A[M,K] * B[K,N].
template <class T>
void gemm(bool accumulate, int M, int N, int K, const T* A, const T* B,
          T* C) {
  if (!accumulate) std::fill(C, C + static_cast<std::size_t>(M) * N, T(0));
  for (int k0 = 0; k0 < K; k0 += detail::kBlockK) {
    const int k1 = std::min(K, k0 + detail::kBlockK);
    for (int j0 = 0; j0 < N; j0 += detail::kBlockN) {
      const int j1 = std::min(N, j0 + detail::kBlockN);
      for (int i = 0; i < M; ++i) {
        const T* a = A + static_cast<std::size_t>(i) * K;
        T* c = C + static_cast<std::size_t>(i) * N;
        int k = k0;
        for (; k + 3 < k1; k += 4) {
          const T a0 = a[k], a1 = a[k + 1], a2 = a[k + 2], a3 = a[k + 3];
          const T* b0 = B + static_cast<std::size_t>(k) * N;
          const T* b1 = b0 + N;
          const T* b2 = b1 + N;
          const T* b3 = b2 + N;
          for (int j = j0; j < j1; ++j)
            c[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
        }
        for (; k < k1; ++k) {
          const T a0 = a[k];
          const T* b0 = B + static_cast<std::size_t>(k) * N;
          for (int j = j0; j < j1; ++j) c[j] += a0 * b0[j];
        }
      }
    }
  }
}

/// C[M,N] (+)= A[M,K] * B[N,K]^T  (rows of A dotted with rows of B).
template <class T>
void gemm_nt(bool accumulate, int M, int N, int K, const T* A, const T* B,
             T* C) {
  for (int i = 0; i < M; ++i) {
    const T* a = A + static_cast<std::size_t>(i) * K;
    T* c = C + static_cast<std::size_t>(i) * N;
    for (int j = 0; j < N; ++j) {
      const T* b = B + static_cast<std::size_t>(j) * K;
      T s0 = 0, s1 = 0;
      int k = 0;
      for (; k + 1 < K; k += 2) {
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
      }
      if (k < K) s0 += a[k] * b[k];
      const T dot = s0 + s1;
      c[j] = accumulate ? c[j] + dot : dot;
    }
  }
}

/// C[M,N] (+)= A[K,M]^T * B[K,N]  (sequence of rank-1 updates).
template <class T>
void gemm_tn(bool accumulate, int M, int N, int K, const T* A, const T* B,
             T* C) {
  if (!accumulate) std::fill(C, C + static_cast<std::size_t>(M) * N, T(0));
  for (int j0 = 0; j0 < N; j0 += detail::kBlockN) {
    const int j1 = std::min(N, j0 + detail::kBlockN);
    for (int k = 0; k < K; ++k) {
      const T* a = A + static_cast<std::size_t>(k) * M;
      const T* b = B + static_cast<std::size_t>(k) * N;
      for (int i = 0; i < M; ++i) {
        const T ai = a[i];
        if (ai == T(0)) continue;
        T* c = C + static_cast<std::size_t>(i) * N;
        for (int j = j0; j < j1; ++j) c[j] += ai * b[j];
      }
    }
  }
}

/// Unpacks conv windows: col[(c*k + ky)*k + kx][oy*Wo + ox] =
/// x[c][oy*stride - pad + ky][ox*stride - pad + kx], zero outside the image.
/// col must hold (C*k*k) * (Ho*Wo) elements.
template <class T>
void im2col(const T* x, int C, int H, int W, int k, int stride, int pad,
            int Ho, int Wo, T* col) {
  for (int c = 0; c < C; ++c) {
    const T* xc = x + static_cast<std::size_t>(c) * H * W;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + (static_cast<std::size_t>(c) * k * k + ky * k + kx) *
                           Ho * Wo;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          T* dst = row + static_cast<std::size_t>(oy) * Wo;
          if (iy < 0 || iy >= H) {
            std::fill(dst, dst + Wo, T(0));
            continue;
          }
          const T* src = xc + static_cast<std::size_t>(iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[ox] = (ix >= 0 && ix < W) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatter-adds col back into the image buffer.
/// x must be zeroed (or hold a partial accumulation) on entry.
template <class T>
void col2im(const T* col, int C, int H, int W, int k, int stride, int pad,
            int Ho, int Wo, T* x) {
  for (int c = 0; c < C; ++c) {
    T* xc = x + static_cast<std::size_t>(c) * H * W;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + (static_cast<std::size_t>(c) * k * k + ky * k +
                              kx) *
                                 Ho * Wo;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          T* dst = xc + static_cast<std::size_t>(iy) * W;
          const T* src = row + static_cast<std::size_t>(oy) * Wo;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < W) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace smoke
