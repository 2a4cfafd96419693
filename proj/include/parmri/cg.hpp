#pragma once

// Conjugate gradient for self-adjoint positive definite systems M x = b,
// with M applied as a callable. Inner products are the real part of the
// complex dot product, under which M = A^H A + lambda I is symmetric
// positive definite.

#include <cmath>
#include <utility>

#include "parmri/types.hpp"

namespace parmri {

struct NonFiniteIterate : Error {
  using Error::Error;
};

struct CgResult {
  MultiChannelImage x;
  int iterations = 0;
  double residual = 0.0;  // ||Mx - b|| / ||b|| at exit
};

template <class Op>
CgResult cg_solve(Op&& applyM, const MultiChannelImage& b, const MultiChannelImage& x0,
                  int max_iter, double tol) {
  CgResult out{x0, 0, 0.0};
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    out.x = zeros_like(b);
    return out;
  }
  MultiChannelImage r = b;
  {
    MultiChannelImage mx = applyM(out.x);
    axpy(r, -1.0, mx);
  }
  double rho = dot_re(r, r);
  out.residual = std::sqrt(rho) / bnorm;
  if (out.residual <= tol) return out;
  MultiChannelImage p = r;
  for (int it = 0; it < max_iter; ++it) {
    MultiChannelImage mp = applyM(p);
    const double denom = dot_re(p, mp);
    if (!std::isfinite(denom) || denom <= 0.0) {
      throw NonFiniteIterate("cg_solve: curvature not positive; operator is not SPD");
    }
    const double alpha = rho / denom;
    axpy(out.x, alpha, p);
    axpy(r, -alpha, mp);
    const double rho_next = dot_re(r, r);
    if (!std::isfinite(rho_next)) {
      throw NonFiniteIterate("cg_solve: non-finite residual");
    }
    out.iterations = it + 1;
    out.residual = std::sqrt(rho_next) / bnorm;
    if (out.residual <= tol) return out;
    const double beta = rho_next / rho;
    rho = rho_next;
    scale(p, beta);
    axpy(p, 1.0, r);
  }
  return out;
}

}  // namespace parmri
