#pragma once

// Data-consistency layers g(., y): the step between denoiser applications
// that pulls the iterate back toward the measured k-space.
//
//   GD — one gradient step on 1/2 ||Ax - y||^2:  x - eta A^H (Ax - y)
//   PM — proximal mapping, the minimizer of
//        1/2 ||Ax - y||^2 + lambda/2 ||x - x_half||^2, solved by CG on the
//        normal equations (A^H A + lambda I) x = A^H y + lambda x_half
//   VS — variable splitting as closed-form k-space averaging: on sampled
//        lines k <- (lambda k + y) / (1 + lambda), untouched elsewhere
//
// All three maps are affine in x_half; dc_backward applies the adjoint of
// the linear part (each Jacobian here is self-adjoint). The PM backward uses
// implicit differentiation: d x*/d x_half = lambda (A^H A + lambda I)^{-1},
// exact at CG convergence.

#include <cmath>
#include <utility>

#include "parmri/cg.hpp"
#include "parmri/operators.hpp"
#include "parmri/types.hpp"

namespace parmri {

enum class DcKind { GD, PM, VS };

inline const char* to_string(DcKind k) {
  switch (k) {
    case DcKind::GD: return "GD";
    case DcKind::PM: return "PM";
    default: return "VS";
  }
}

struct DcConfig {
  DcKind kind = DcKind::PM;
  double eta = 1.0;       // GD step size; stable because ||A|| <= 1
  double lambda = 0.1;    // PM/VS weighting
  int cg_max_iter = 10;
  double cg_tol = 1e-6;
  bool train_eta = false;  // learn a per-step GD step size

  void check() const {
    if (eta <= 0.0) throw InvalidParams("DcConfig: eta must be > 0");
    if (lambda <= 0.0) throw InvalidParams("DcConfig: lambda must be > 0");
    if (cg_tol <= 0.0) throw InvalidParams("DcConfig: cg_tol must be > 0");
    if (cg_max_iter < 1) throw InvalidParams("DcConfig: cg_max_iter must be >= 1");
  }
};

inline MultiChannelImage dc_gd(const MultiChannelImage& x_half, const MultiChannelImage& y,
                               const ForwardOperator& A, double eta) {
  MultiChannelImage res = A.forward(x_half);
  axpy(res, -1.0, y);
  MultiChannelImage out = x_half;
  MultiChannelImage corr = A.adjoint(res);
  axpy(out, -eta, corr);
  return out;
}

inline MultiChannelImage dc_pm(const MultiChannelImage& x_half, const MultiChannelImage& y,
                               const ForwardOperator& A, const DcConfig& cfg,
                               CgResult* stats = nullptr) {
  MultiChannelImage b = A.adjoint(y);
  axpy(b, cfg.lambda, x_half);
  auto applyM = [&](const MultiChannelImage& v) {
    MultiChannelImage mv = A.normal(v);
    axpy(mv, cfg.lambda, v);
    return mv;
  };
  CgResult res = cg_solve(applyM, b, x_half, cfg.cg_max_iter, cfg.cg_tol);
  if (stats) *stats = {zeros_like(x_half), res.iterations, res.residual};
  return std::move(res.x);
}

/// VS k-space update shared by forward and backward: project to coils,
/// average with y on sampled lines, map back without re-masking.
inline MultiChannelImage dc_vs_linear(const MultiChannelImage& x_half,
                                      const MultiChannelImage* y,
                                      const ForwardOperator& A, double lambda) {
  MultiChannelImage out = zeros_like(x_half);
  const SamplingMask& mask = A.mask();
  for (int q = 0; q < A.coil_count(); ++q) {
    ComplexImage k = fft2c(A.combine_to_coil(x_half, q));
    const double w = lambda / (1.0 + lambda);
    for (int pe = 0; pe < k.height(); ++pe) {
      if (!mask.sampled(pe)) continue;
      for (int fe = 0; fe < k.width(); ++fe) {
        Cx v = w * k.at(pe, fe);
        if (y) v += y->channel(q).at(pe, fe) / (1.0 + lambda);
        k.at(pe, fe) = v;
      }
    }
    A.scatter_from_coil(ifft2c(k), q, out);
  }
  return out;
}

inline MultiChannelImage dc_vs(const MultiChannelImage& x_half, const MultiChannelImage& y,
                               const ForwardOperator& A, const DcConfig& cfg) {
  return dc_vs_linear(x_half, &y, A, cfg.lambda);
}

inline MultiChannelImage dc_apply(const MultiChannelImage& x_half,
                                  const MultiChannelImage& y, const ForwardOperator& A,
                                  const DcConfig& cfg, double eta) {
  switch (cfg.kind) {
    case DcKind::GD: return dc_gd(x_half, y, A, eta);
    case DcKind::PM: return dc_pm(x_half, y, A, cfg);
    default: return dc_vs(x_half, y, A, cfg);
  }
}

/// Adjoint of the DC layer's linear part; every kind is self-adjoint.
inline MultiChannelImage dc_backward(DcKind kind, const MultiChannelImage& grad_out,
                                     const ForwardOperator& A, const DcConfig& cfg,
                                     double eta) {
  switch (kind) {
    case DcKind::GD: {
      MultiChannelImage grad = grad_out;
      MultiChannelImage corr = A.normal(grad_out);
      axpy(grad, -eta, corr);
      return grad;
    }
    case DcKind::PM: {
      auto applyM = [&](const MultiChannelImage& v) {
        MultiChannelImage mv = A.normal(v);
        axpy(mv, cfg.lambda, v);
        return mv;
      };
      CgResult res = cg_solve(applyM, grad_out, zeros_like(grad_out), cfg.cg_max_iter,
                              cfg.cg_tol);
      scale(res.x, cfg.lambda);
      return std::move(res.x);
    }
    default:
      return dc_vs_linear(grad_out, nullptr, A, cfg.lambda);
  }
}

/// d(dc_gd)/d(eta) dotted with grad_out, for the trainable step size.
inline double dc_gd_eta_gradient(const MultiChannelImage& grad_out,
                                 const MultiChannelImage& x_half,
                                 const MultiChannelImage& y, const ForwardOperator& A) {
  MultiChannelImage res = A.forward(x_half);
  axpy(res, -1.0, y);
  MultiChannelImage dir = A.adjoint(res);
  return -dot_re(grad_out, dir);
}

/// The PM objective 1/2 ||Ax - y||^2 + lambda/2 ||x - x_half||^2.
inline double prox_objective(const MultiChannelImage& x, const MultiChannelImage& x_half,
                             const MultiChannelImage& y, const ForwardOperator& A,
                             double lambda) {
  MultiChannelImage res = A.forward(x);
  axpy(res, -1.0, y);
  MultiChannelImage d = x;
  axpy(d, -1.0, x_half);
  return 0.5 * dot_re(res, res) + 0.5 * lambda * dot_re(d, d);
}

}  // namespace parmri
