#pragma once

// RMSProp and ADAM on a flat view of the model parameters, plus the stepped
// learning-rate schedule (halve every k-th epoch).
//
//   RMSProp: v <- rho v + (1-rho) g^2;          p -= lr g / (sqrt(v) + eps)
//   ADAM:    m,v with bias correction;          p -= lr m^ / (sqrt(v^) + eps)

#include <cmath>
#include <cstddef>
#include <vector>

#include "parmri/net.hpp"
#include "parmri/types.hpp"
#include "parmri/unrolled.hpp"

namespace parmri {

enum class OptKind { RMSProp, Adam };

inline const char* to_string(OptKind k) { return k == OptKind::RMSProp ? "RMSProp" : "ADAM"; }

struct Optimizer {
  OptKind kind = OptKind::RMSProp;
  double lr = 1e-4;
  double rho = 0.9;     // RMSProp decay
  double beta1 = 0.9;   // ADAM
  double beta2 = 0.999;
  double eps = 1e-8;

  std::vector<double> v;
  std::vector<double> m;
  long t = 0;

  void init(std::size_t n) {
    v.assign(n, 0.0);
    if (kind == OptKind::Adam) m.assign(n, 0.0);
    t = 0;
  }

  void step(const std::vector<double*>& params, const std::vector<double>& grads) {
    if (params.size() != v.size() || grads.size() != v.size()) {
      throw InvalidParams("Optimizer: parameter count changed");
    }
    ++t;
    if (kind == OptKind::RMSProp) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        v[i] = rho * v[i] + (1.0 - rho) * g * g;
        *params[i] -= lr * g / (std::sqrt(v[i]) + eps);
      }
    } else {
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        *params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }
};

/// lr for a 1-based epoch under the halve-every-k schedule.
inline double scheduled_lr(double lr0, int epoch, int halve_every) {
  if (halve_every <= 0) return lr0;
  return lr0 * std::pow(0.5, (epoch - 1) / halve_every);
}

// Flat parameter views. Order is fixed (blocks, layers, weights then bias,
// then trainable step sizes) and shared between pointers and gradients.

inline std::vector<double*> collect_parameters(ConvParams& p) {
  std::vector<double*> out;
  for (ConvLayer& l : p.layers) {
    for (double& w : l.w) out.push_back(&w);
    for (double& b : l.b) out.push_back(&b);
  }
  return out;
}

inline std::vector<double*> collect_parameters(UnrolledModel& model) {
  std::vector<double*> out;
  for (ConvParams& block : model.theta) {
    auto part = collect_parameters(block);
    out.insert(out.end(), part.begin(), part.end());
  }
  if (model.dc.train_eta) {
    for (double& e : model.eta) out.push_back(&e);
  }
  return out;
}

inline std::vector<double> flatten(const ConvParams& g) {
  std::vector<double> out;
  for (const ConvLayer& l : g.layers) {
    out.insert(out.end(), l.w.begin(), l.w.end());
    out.insert(out.end(), l.b.begin(), l.b.end());
  }
  return out;
}

inline std::vector<double> flatten(const ModelGrads& g) {
  std::vector<double> out;
  for (const ConvParams& block : g.theta) {
    auto part = flatten(block);
    out.insert(out.end(), part.begin(), part.end());
  }
  out.insert(out.end(), g.eta.begin(), g.eta.end());
  return out;
}

}  // namespace parmri
