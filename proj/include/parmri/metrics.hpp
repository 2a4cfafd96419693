#pragma once

// Quantitative metrics. NMSE and PSNR follow the usual definitions; SSIM
// reuses the training-side implementation with a full mask. Volume-level
// numbers share one data range (the reference volume maximum): NMSE and PSNR
// pool all pixels, SSIM averages per-slice scores.

#include <cmath>
#include <limits>
#include <vector>

#include "parmri/ssim.hpp"
#include "parmri/types.hpp"

namespace parmri {

struct ZeroReference : Error {
  using Error::Error;
};

inline double nmse(const RealImage& x, const RealImage& ref) {
  if (!x.same_shape(ref)) throw ShapeMismatch("nmse: shapes differ");
  double err = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - ref[i];
    err += d * d;
    den += ref[i] * ref[i];
  }
  if (den == 0.0) throw ZeroReference("nmse: reference is identically zero");
  return err / den;
}

/// 10 log10(L^2 N / ||x - ref||^2); +inf when the images coincide.
inline double psnr(const RealImage& x, const RealImage& ref, double data_range) {
  if (!x.same_shape(ref)) throw ShapeMismatch("psnr: shapes differ");
  if (data_range <= 0.0) throw InvalidParams("psnr: data_range must be > 0");
  double err = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - ref[i];
    err += d * d;
  }
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(data_range * data_range * static_cast<double>(x.size()) / err);
}

inline double ssim_eval(const RealImage& x, const RealImage& ref, double data_range) {
  const ForegroundMask full = ForegroundMask::full(x.height(), x.width());
  return ssim(x, ref, &full, data_range, /*want_grad=*/false).score;
}

struct SliceMetrics {
  int slice = 0;
  double nmse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct VolumeMetrics {
  std::vector<SliceMetrics> slices;
  double nmse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double data_range = 0.0;
};

/// Per-slice rows plus pooled volume numbers under a shared data range.
inline VolumeMetrics volume_metrics(const std::vector<RealImage>& x,
                                    const std::vector<RealImage>& ref) {
  if (x.size() != ref.size() || x.empty()) {
    throw ShapeMismatch("volume_metrics: slice counts differ");
  }
  VolumeMetrics out;
  for (const RealImage& r : ref) out.data_range = std::max(out.data_range, r.max_value());
  if (out.data_range <= 0.0) throw ZeroReference("volume_metrics: empty reference volume");
  double err = 0.0, den = 0.0;
  std::size_t pixels = 0;
  for (std::size_t s = 0; s < x.size(); ++s) {
    SliceMetrics sm;
    sm.slice = static_cast<int>(s);
    sm.nmse = nmse(x[s], ref[s]);
    sm.psnr = psnr(x[s], ref[s], out.data_range);
    sm.ssim = ssim_eval(x[s], ref[s], out.data_range);
    out.slices.push_back(sm);
    out.ssim += sm.ssim;
    for (std::size_t i = 0; i < x[s].size(); ++i) {
      const double d = x[s][i] - ref[s][i];
      err += d * d;
      den += ref[s][i] * ref[s][i];
    }
    pixels += x[s].size();
  }
  out.ssim /= static_cast<double>(x.size());
  out.nmse = err / den;
  out.psnr = err == 0.0 ? std::numeric_limits<double>::infinity()
                        : 10.0 * std::log10(out.data_range * out.data_range *
                                            static_cast<double>(pixels) / err);
  return out;
}

}  // namespace parmri
