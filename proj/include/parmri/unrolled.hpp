#pragma once

// The T-step unrolled reconstruction:
//   x^0       = A^H y
//   x^{t+1/2} = x^t - f_{theta_t}(x^t)
//   x^{t+1}   = g(x^{t+1/2}, y)
// with end-to-end reverse-mode gradients through every denoiser and DC layer.

#include <cstdint>
#include <utility>
#include <vector>

#include "parmri/dc.hpp"
#include "parmri/net.hpp"
#include "parmri/operators.hpp"
#include "parmri/types.hpp"

namespace parmri {

struct UnrolledModel {
  Variant variant = Variant::SN;
  DcConfig dc;
  int steps = 9;              // T
  bool shared_weights = false;
  ConvPlan plan;
  std::vector<ConvParams> theta;  // one block per step, or one if shared
  std::vector<double> eta;        // per-step GD step sizes when dc.train_eta

  const ConvParams& step_params(int t) const { return theta[shared_weights ? 0 : t]; }
  ConvParams& step_params(int t) { return theta[shared_weights ? 0 : t]; }
  double step_eta(int t) const { return dc.train_eta ? eta[t] : dc.eta; }

  int complex_channels() const { return plan.in_planes / 2; }

  void check() const {
    if (steps < 1) throw InvalidParams("UnrolledModel: T must be >= 1");
    dc.check();
    const std::size_t blocks = shared_weights ? 1 : static_cast<std::size_t>(steps);
    if (theta.size() != blocks) throw InvalidParams("UnrolledModel: wrong block count");
    for (const ConvParams& p : theta) {
      if (p.plan.in_planes != plan.in_planes || p.plan.out_planes != plan.out_planes) {
        throw InvalidParams("UnrolledModel: step blocks disagree on channel plan");
      }
    }
    if (dc.train_eta && eta.size() != static_cast<std::size_t>(steps)) {
      throw InvalidParams("UnrolledModel: eta size != T");
    }
  }
};

inline UnrolledModel make_model(Variant variant, DcConfig dc, int steps, ConvPlan plan,
                                bool shared_weights, Rng& rng) {
  UnrolledModel m;
  m.variant = variant;
  m.dc = dc;
  m.steps = steps;
  m.shared_weights = shared_weights;
  m.plan = plan;
  const int blocks = shared_weights ? 1 : steps;
  for (int i = 0; i < blocks; ++i) m.theta.push_back(init_params(plan, rng));
  if (dc.train_eta) m.eta.assign(steps, dc.eta);
  m.check();
  return m;
}

/// Binds the model's formulation to one example's sensitivities and mask.
inline ForwardOperator make_operator(const UnrolledModel& model, const SensitivitySet* sens,
                                     const SamplingMask& mask, int coils, int height,
                                     int width) {
  if (model.variant == Variant::SN) {
    if (!sens) throw InvalidParams("make_operator: SN requires sensitivities");
    return ForwardOperator(Variant::SN, *sens, mask);
  }
  return ForwardOperator(Variant::PCN, coils, height, width, mask);
}

struct ReconTape {
  std::vector<MultiChannelImage> x;       // x^0 .. x^T
  std::vector<MultiChannelImage> x_half;  // x^{t+1/2} per step
  std::vector<DenoiseTape> net;           // denoiser tape per step
};

/// Runs the unrolled scheme; returns x^T and the tape of intermediates.
inline std::pair<MultiChannelImage, ReconTape> reconstruct(const UnrolledModel& model,
                                                           const MultiChannelImage& y,
                                                           const ForwardOperator& A) {
  ReconTape tape;
  tape.x.reserve(model.steps + 1);
  tape.x.push_back(A.adjoint(y));
  for (int t = 0; t < model.steps; ++t) {
    auto [fx, net_tape] = denoise_forward(model.step_params(t), tape.x.back());
    MultiChannelImage x_half = tape.x.back();
    axpy(x_half, -1.0, fx);
    tape.net.push_back(std::move(net_tape));
    tape.x_half.push_back(x_half);
    tape.x.push_back(dc_apply(x_half, y, A, model.dc, model.step_eta(t)));
  }
  MultiChannelImage x_T = tape.x.back();
  return {std::move(x_T), std::move(tape)};
}

struct ModelGrads {
  std::vector<ConvParams> theta;  // matches model.theta layout
  std::vector<double> eta;        // per step, when trainable

  void add(const ModelGrads& o) {
    for (std::size_t b = 0; b < theta.size(); ++b) {
      for (std::size_t l = 0; l < theta[b].layers.size(); ++l) {
        auto& dst = theta[b].layers[l];
        const auto& src = o.theta[b].layers[l];
        for (std::size_t i = 0; i < dst.w.size(); ++i) dst.w[i] += src.w[i];
        for (std::size_t i = 0; i < dst.b.size(); ++i) dst.b[i] += src.b[i];
      }
    }
    for (std::size_t t = 0; t < eta.size(); ++t) eta[t] += o.eta[t];
  }

  void scale(double a) {
    for (auto& block : theta) {
      for (auto& l : block.layers) {
        for (double& w : l.w) w *= a;
        for (double& b : l.b) b *= a;
      }
    }
    for (double& e : eta) e *= a;
  }
};

inline ModelGrads zero_grads(const UnrolledModel& model) {
  ModelGrads g;
  for (const ConvParams& p : model.theta) g.theta.push_back(zeros_for_plan(p.plan));
  if (model.dc.train_eta) g.eta.assign(model.steps, 0.0);
  return g;
}

/// Chains dc_backward and denoise_backward across all T steps.
inline ModelGrads recon_backward(const UnrolledModel& model, const ForwardOperator& A,
                                 const MultiChannelImage& y, const ReconTape& tape,
                                 const MultiChannelImage& grad_xT) {
  if (tape.x.size() != static_cast<std::size_t>(model.steps) + 1) {
    throw StaleTape("recon_backward: tape does not match model depth");
  }
  ModelGrads grads = zero_grads(model);
  MultiChannelImage g = grad_xT;
  for (int t = model.steps - 1; t >= 0; --t) {
    if (model.dc.train_eta && model.dc.kind == DcKind::GD) {
      grads.eta[t] += dc_gd_eta_gradient(g, tape.x_half[t], y, A);
    }
    MultiChannelImage g_half = dc_backward(model.dc.kind, g, A, model.dc, model.step_eta(t));
    auto [theta_grad, g_fx] = denoise_backward(model.step_params(t), tape.net[t], g_half);
    // x^{t+1/2} = x^t - f(x^t): gradient w.r.t. f is -g_half, w.r.t. x^t is
    // g_half plus the chain through f.
    const int block = model.shared_weights ? 0 : t;
    for (std::size_t l = 0; l < theta_grad.layers.size(); ++l) {
      auto& dst = grads.theta[block].layers[l];
      const auto& src = theta_grad.layers[l];
      for (std::size_t i = 0; i < dst.w.size(); ++i) dst.w[i] -= src.w[i];
      for (std::size_t i = 0; i < dst.b.size(); ++i) dst.b[i] -= src.b[i];
    }
    axpy(g_half, -1.0, g_fx);
    g = std::move(g_half);
  }
  return grads;
}

/// RSS combination of the channels of x^T.
inline RealImage final_image(const MultiChannelImage& x_T) { return rss(x_T); }

}  // namespace parmri
