#pragma once

// Supervised training loss on magnitude images:
//   value = -SSIM(m * rss(x), m * ref) + lambda_l1 * l1(m * rss(x), m * ref)
// The SSIM term enters negated so that lower is better throughout; the l1
// term is the mean absolute difference over masked pixels. The gradient
// chains through the RSS combination back to the complex channels.

#include <cmath>
#include <cstddef>

#include "parmri/operators.hpp"
#include "parmri/ssim.hpp"
#include "parmri/types.hpp"

namespace parmri {

struct NonFiniteLoss : Error {
  using Error::Error;
};

struct BaseLossResult {
  double value = 0.0;
  double ssim = 0.0;
  double l1 = 0.0;
  MultiChannelImage grad;  // d(value)/d(x), complex channels
};

inline BaseLossResult base_loss(const MultiChannelImage& x, const RealImage& ref,
                                const ForegroundMask& m, double lambda_l1,
                                double data_range, bool want_grad = true) {
  if (x.height() != ref.height() || x.width() != ref.width()) {
    throw ShapeMismatch("base_loss: reconstruction and reference shapes differ");
  }
  const RealImage r = rss(x);

  RealImage rm(r.height(), r.width());
  RealImage refm(r.height(), r.width());
  int masked = 0;
  double l1_sum = 0.0;
  for (int y = 0; y < r.height(); ++y) {
    for (int xx = 0; xx < r.width(); ++xx) {
      if (!m.at(y, xx)) continue;
      rm.at(y, xx) = r.at(y, xx);
      refm.at(y, xx) = ref.at(y, xx);
      l1_sum += std::abs(r.at(y, xx) - ref.at(y, xx));
      ++masked;
    }
  }
  if (masked == 0) throw EmptyMask("base_loss: empty foreground mask");

  const SsimResult s = ssim(rm, refm, &m, data_range, want_grad);
  BaseLossResult out;
  out.ssim = s.score;
  out.l1 = l1_sum / masked;
  out.value = -s.score + lambda_l1 * out.l1;

  if (want_grad) {
    RealImage grad_r(r.height(), r.width());
    for (int y = 0; y < r.height(); ++y) {
      for (int xx = 0; xx < r.width(); ++xx) {
        if (!m.at(y, xx)) continue;
        const double diff = r.at(y, xx) - ref.at(y, xx);
        const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        grad_r.at(y, xx) = -s.grad_a.at(y, xx) + lambda_l1 * sign / masked;
      }
    }
    out.grad = rss_backward(x, r, grad_r);
  }
  return out;
}

}  // namespace parmri
