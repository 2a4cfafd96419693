#pragma once

// Ensembling of the individual model reconstructions: a fixed affine
// combination on the foreground, the SN/PCN average on the background.

#include "parmri/types.hpp"

namespace parmri {

struct EnsembleInputs {
  RealImage x_sn;     // mean over the SN-family reconstructions (excl. finetuned)
  RealImage x_pcn;    // PCN reconstruction
  RealImage x_sn_ft;  // finetuned SN reconstruction
  ForegroundMask m;
};

/// m * (0.3 x_sn + 0.2 x_pcn + 0.5 x_sn_ft) + (1 - m) * (x_sn + x_pcn) / 2
inline RealImage ensemble(const EnsembleInputs& inp) {
  if (!inp.x_sn.same_shape(inp.x_pcn) || !inp.x_sn.same_shape(inp.x_sn_ft) ||
      inp.m.height() != inp.x_sn.height() || inp.m.width() != inp.x_sn.width()) {
    throw ShapeMismatch("ensemble: input shapes differ");
  }
  RealImage out(inp.x_sn.height(), inp.x_sn.width());
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      if (inp.m.at(y, x)) {
        out.at(y, x) = 0.3 * inp.x_sn.at(y, x) + 0.2 * inp.x_pcn.at(y, x) +
                       0.5 * inp.x_sn_ft.at(y, x);
      } else {
        out.at(y, x) = 0.5 * (inp.x_sn.at(y, x) + inp.x_pcn.at(y, x));
      }
    }
  }
  return out;
}

}  // namespace parmri
