#pragma once

#include "smoke/image.hpp"

namespace smoke {

enum class PoissonSolver { kConjugateGradient, kGaussSeidel };

/// A gradient-domain paste: the source region (mask nonzero, in source
/// coordinates) is placed on the target at (offset_x, offset_y). The
/// translated region and its source counterpart must keep one pixel of
/// margin from their image borders so the 5-point stencil and the Dirichlet
/// boundary stay in bounds.
struct CompositeJob {
  ImageU8 source;       // RGB
  ImageU8 source_mask;  // 1 channel, nonzero = region
  ImageU8 target;       // RGB
  int offset_x = 0;
  int offset_y = 0;
  double tol = 1e-6;
  int max_iters = 10000;
  PoissonSolver solver = PoissonSolver::kConjugateGradient;
};

struct CompositeResult {
  ImageF image;     // RGB in [0,1]; bit-identical to the target outside the region
  int iterations = 0;
  double residual = 0.0;  // final max-norm of (laplacian f - laplacian g)
};

/// Solves the discrete Poisson equation lap f = lap g inside the region
/// with f = target on the boundary, per channel, to
/// max |lap f - lap g| < tol over region pixels. Throws NumericError with
/// the final residual on non-convergence.
CompositeResult composite_poisson(const CompositeJob& job);

/// out = alpha * source + (1 - alpha) * target, with the source placed at
/// the job offset; alpha is in source coordinates with values in [0, 1].
ImageF composite_alpha(const CompositeJob& job, const ImageF& alpha);

}  // namespace smoke
