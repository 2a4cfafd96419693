#pragma once

// SSIM over a 7x7 uniform window with an exact gradient with respect to the
// first image. The score averages over all fully-interior windows whose
// center pixel is masked. Statistics use the unbiased (n-1) covariance
// normalization; stabilizers are C1 = (0.01 L)^2, C2 = (0.03 L)^2 for data
// range L.

#include <cmath>
#include <cstddef>

#include "parmri/types.hpp"

namespace parmri {

struct EmptyMask : Error {
  using Error::Error;
};

struct SsimResult {
  double score = 0.0;
  RealImage grad_a;  // d(score)/d(a), zero outside contributing windows
  int window_count = 0;
};

inline SsimResult ssim(const RealImage& a, const RealImage& b,
                       const ForegroundMask* mask, double data_range,
                       bool want_grad = true) {
  if (!a.same_shape(b)) throw ShapeMismatch("ssim: image shapes differ");
  if (mask && (mask->height() != a.height() || mask->width() != a.width())) {
    throw ShapeMismatch("ssim: mask shape differs");
  }
  if (data_range <= 0.0) throw InvalidParams("ssim: data_range must be > 0");
  constexpr int kHalf = 3;
  constexpr int kWin = 7;
  constexpr double kN = kWin * kWin;
  const double c1 = (0.01 * data_range) * (0.01 * data_range);
  const double c2 = (0.03 * data_range) * (0.03 * data_range);
  const int h = a.height();
  const int w = a.width();

  SsimResult out;
  if (want_grad) out.grad_a = RealImage(h, w);

  // First pass: count contributing windows (the mean needs the total).
  int count = 0;
  for (int y = kHalf; y < h - kHalf; ++y) {
    for (int x = kHalf; x < w - kHalf; ++x) {
      if (!mask || mask->at(y, x)) ++count;
    }
  }
  if (count == 0) throw EmptyMask("ssim: no masked window centers");
  out.window_count = count;

  double total = 0.0;
  for (int y = kHalf; y < h - kHalf; ++y) {
    for (int x = kHalf; x < w - kHalf; ++x) {
      if (mask && !mask->at(y, x)) continue;
      double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
      for (int dy = -kHalf; dy <= kHalf; ++dy) {
        for (int dx = -kHalf; dx <= kHalf; ++dx) {
          const double av = a.at(y + dy, x + dx);
          const double bv = b.at(y + dy, x + dx);
          sa += av;
          sb += bv;
          saa += av * av;
          sbb += bv * bv;
          sab += av * bv;
        }
      }
      const double mu_a = sa / kN;
      const double mu_b = sb / kN;
      const double var_a = (saa - kN * mu_a * mu_a) / (kN - 1.0);
      const double var_b = (sbb - kN * mu_b * mu_b) / (kN - 1.0);
      const double cov = (sab - kN * mu_a * mu_b) / (kN - 1.0);
      const double a1 = 2.0 * mu_a * mu_b + c1;
      const double a2 = 2.0 * cov + c2;
      const double b1 = mu_a * mu_a + mu_b * mu_b + c1;
      const double b2 = var_a + var_b + c2;
      const double denom = b1 * b2;
      const double s = (a1 * a2) / denom;
      total += s;

      if (want_grad) {
        const double wgt = 1.0 / count;
        for (int dy = -kHalf; dy <= kHalf; ++dy) {
          for (int dx = -kHalf; dx <= kHalf; ++dx) {
            const double av = a.at(y + dy, x + dx);
            const double bv = b.at(y + dy, x + dx);
            const double d_a1 = 2.0 * mu_b / kN;
            const double d_a2 = 2.0 * (bv - mu_b) / (kN - 1.0);
            const double d_b1 = 2.0 * mu_a / kN;
            const double d_b2 = 2.0 * (av - mu_a) / (kN - 1.0);
            const double ds = ((d_a1 * a2 + a1 * d_a2) * denom -
                               a1 * a2 * (d_b1 * b2 + b1 * d_b2)) /
                              (denom * denom);
            out.grad_a.at(y + dy, x + dx) += wgt * ds;
          }
        }
      }
    }
  }
  out.score = total / count;
  return out;
}

}  // namespace parmri
