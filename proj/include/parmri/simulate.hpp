#pragma once

// Synthetic multi-coil data plant: ellipse phantoms with Gaussian coil
// profiles, PE-line undersampling masks with a centered ACL block, a
// low-resolution sensitivity estimate from the calibration lines, threshold
// foreground masks and background noise-level replacement.

#include <cmath>
#include <complex>
#include <cstdint>
#include <iostream>
#include <utility>
#include <vector>

#include "parmri/fft.hpp"
#include "parmri/operators.hpp"
#include "parmri/rng.hpp"
#include "parmri/types.hpp"

namespace parmri {

struct TooFewLines : Error {
  using Error::Error;
};

struct Ellipse {
  double cx = 0.5, cy = 0.5;   // center in the unit square (FE, PE)
  double ax = 0.25, ay = 0.25; // semi-axes
  double angle = 0.0;          // radians, counter-clockwise
  Cx amplitude{1.0, 0.0};      // added where the ellipse covers the pixel
};

struct PhantomSpec {
  int height = 64;
  int width = 64;
  std::vector<Ellipse> ellipses;
  int coil_count = 4;
  double coil_width = 0.9;   // Gaussian profile width; <= 0 means flat coils
  double coil_phase = 0.35;  // linear phase strength across the FOV
  double noise_sigma = 0.0;  // k-space complex noise std per component

  void check() const {
    if (height < 4 || width < 4) throw InvalidSpec("PhantomSpec: image too small");
    if (coil_count < 1) throw InvalidSpec("PhantomSpec: coil_count < 1");
    if (noise_sigma < 0.0) throw InvalidSpec("PhantomSpec: negative noise_sigma");
    for (const Ellipse& e : ellipses) {
      if (e.ax <= 0.0 || e.ay <= 0.0) throw InvalidSpec("PhantomSpec: ellipse axis <= 0");
      const double r = std::max(e.ax, e.ay);
      if (e.cx - r < -1e-9 || e.cx + r > 1.0 + 1e-9 || e.cy - r < -1e-9 ||
          e.cy + r > 1.0 + 1e-9) {
        throw InvalidSpec("PhantomSpec: ellipse leaves the unit square");
      }
    }
  }
};

/// A nested-ellipse default object, used when a config gives no ellipses.
inline std::vector<Ellipse> default_ellipses() {
  return {
      {0.50, 0.50, 0.38, 0.46, 0.0, {0.80, 0.00}},
      {0.50, 0.50, 0.31, 0.39, 0.0, {-0.30, 0.05}},
      {0.38, 0.42, 0.09, 0.14, 0.35, {0.45, 0.00}},
      {0.64, 0.57, 0.12, 0.08, -0.30, {0.35, 0.10}},
      {0.50, 0.70, 0.06, 0.06, 0.0, {-0.20, 0.00}},
      {0.43, 0.24, 0.05, 0.08, 0.15, {0.30, 0.00}},
  };
}

struct Phantom {
  ComplexImage object;            // underlying complex object
  MultiChannelImage coil_images;  // s_q * object, per coil
  SensitivitySet sens;            // true maps, normalized so sum |s|^2 = 1
  MultiChannelImage kspace;       // fft2c per coil + complex Gaussian noise
};

inline Phantom make_phantom(const PhantomSpec& spec, Rng& rng) {
  spec.check();
  const int h = spec.height;
  const int w = spec.width;
  const int q_count = spec.coil_count;

  ComplexImage object(h, w);
  for (int y = 0; y < h; ++y) {
    const double v = (y + 0.5) / h;
    for (int x = 0; x < w; ++x) {
      const double u = (x + 0.5) / w;
      Cx val{};
      for (const Ellipse& e : spec.ellipses) {
        const double du = u - e.cx;
        const double dv = v - e.cy;
        const double cu = std::cos(e.angle) * du + std::sin(e.angle) * dv;
        const double cv = -std::sin(e.angle) * du + std::cos(e.angle) * dv;
        if ((cu / e.ax) * (cu / e.ax) + (cv / e.ay) * (cv / e.ay) <= 1.0) {
          val += e.amplitude;
        }
      }
      object.at(y, x) = val;
    }
  }

  // Gaussian coil profiles on a circle around the FOV, smooth linear phase,
  // normalized pixelwise so the maps carry unit total power.
  std::vector<ComplexImage> raw(q_count, ComplexImage(h, w));
  constexpr double kTwoPi = 6.283185307179586476925287;
  for (int q = 0; q < q_count; ++q) {
    const double ang = kTwoPi * q / q_count;
    const double ccx = 0.5 + 0.55 * std::cos(ang);
    const double ccy = 0.5 + 0.55 * std::sin(ang);
    for (int y = 0; y < h; ++y) {
      const double v = (y + 0.5) / h;
      for (int x = 0; x < w; ++x) {
        const double u = (x + 0.5) / w;
        double mag = 1.0;
        double phase = 0.0;
        if (spec.coil_width > 0.0) {
          const double d2 = (u - ccx) * (u - ccx) + (v - ccy) * (v - ccy);
          mag = std::exp(-d2 / (2.0 * spec.coil_width * spec.coil_width));
          phase = kTwoPi * spec.coil_phase * (std::cos(ang) * u + std::sin(ang) * v);
        }
        raw[q].at(y, x) = std::polar(mag, phase);
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double power = 0.0;
      for (int q = 0; q < q_count; ++q) power += std::norm(raw[q].at(y, x));
      const double inv = 1.0 / std::sqrt(power);
      for (int q = 0; q < q_count; ++q) raw[q].at(y, x) *= inv;
    }
  }

  Phantom out;
  out.object = std::move(object);
  out.sens = SensitivitySet({raw});
  out.coil_images = MultiChannelImage(q_count, h, w);
  out.kspace = MultiChannelImage(q_count, h, w);
  for (int q = 0; q < q_count; ++q) {
    ComplexImage coil(h, w);
    for (std::size_t i = 0; i < coil.size(); ++i) {
      coil[i] = out.sens.map(0, q)[i] * out.object[i];
    }
    ComplexImage k = fft2c(coil);
    if (spec.noise_sigma > 0.0) {
      for (Cx& v : k.data()) {
        v += Cx(spec.noise_sigma * rng.normal(), spec.noise_sigma * rng.normal());
      }
    }
    out.coil_images.channel(q) = std::move(coil);
    out.kspace.channel(q) = std::move(k);
  }
  return out;
}

/// Undersampling mask: centered ACL block always sampled, the rest drawn
/// uniformly without replacement until round(pe_lines / R) lines are flagged.
inline SamplingMask make_mask(int pe_lines, double R, int acl_count, Rng& rng) {
  if (pe_lines < 1 || R < 1.0 || acl_count < 0 || acl_count > pe_lines) {
    throw InvalidParams("make_mask: bad parameters");
  }
  const int target = static_cast<int>(std::lround(pe_lines / R));
  if (target < acl_count) {
    throw InvalidParams("make_mask: flagged target smaller than ACL block");
  }
  std::vector<std::uint8_t> flags(pe_lines, 0);
  const int first = SamplingMask::acl_first_line(pe_lines, acl_count);
  for (int i = first; i < first + acl_count; ++i) flags[i] = 1;

  std::vector<int> rest;
  rest.reserve(pe_lines - acl_count);
  for (int i = 0; i < pe_lines; ++i) {
    if (!flags[i]) rest.push_back(i);
  }
  // Partial Fisher-Yates: draw (target - acl_count) distinct extra lines.
  const int extra = target - acl_count;
  for (int i = 0; i < extra; ++i) {
    const std::size_t j = i + rng.next_below(rest.size() - i);
    std::swap(rest[i], rest[j]);
    flags[rest[i]] = 1;
  }
  return SamplingMask(std::move(flags), acl_count, R);
}

/// Low-resolution sensitivity estimate from the ACL block: zero-fill the
/// calibration lines, apodize along PE with a Hann taper, inverse transform
/// and divide by the RSS (plus a small floor). Map set 2, when requested, is
/// the all-zero placeholder of the two-map data model.
inline SensitivitySet estimate_sensitivities(const MultiChannelImage& coil_kspace,
                                             const SamplingMask& mask, int n_maps) {
  if (n_maps < 1 || n_maps > 2) throw InvalidParams("estimate_sensitivities: n_maps");
  if (coil_kspace.height() != mask.pe_lines()) {
    throw ShapeMismatch("estimate_sensitivities: mask does not match k-space");
  }
  const int acl = mask.acl_count();
  if (acl < 8) throw TooFewLines("estimate_sensitivities: fewer than 8 ACS lines");
  const int h = coil_kspace.height();
  const int w = coil_kspace.width();
  const int q_count = coil_kspace.channel_count();
  const int first = SamplingMask::acl_first_line(h, acl);

  // The Hann taper is centered on the k-space DC row (not the block middle):
  // a symmetric window keeps the PE smoothing kernel real and even, so the
  // estimate picks up no spurious phase at object edges.
  const int center = h / 2;
  const double half_support = std::max(1, (acl + 1) / 2);
  std::vector<ComplexImage> low(q_count, ComplexImage(h, w));
  for (int q = 0; q < q_count; ++q) {
    ComplexImage acs(h, w);
    for (int line = 0; line < acl; ++line) {
      const int offset = first + line - center;
      const double taper =
          std::abs(offset) >= half_support
              ? 0.0
              : 0.5 * (1.0 + std::cos(detail::kPi * offset / half_support));
      for (int fe = 0; fe < w; ++fe) {
        acs.at(first + line, fe) = taper * coil_kspace.channel(q).at(first + line, fe);
      }
    }
    low[q] = ifft2c(acs);
  }

  RealImage mag(h, w);
  for (int q = 0; q < q_count; ++q) {
    for (std::size_t i = 0; i < mag.size(); ++i) mag[i] += std::norm(low[q][i]);
  }
  double max_mag = 0.0;
  for (std::size_t i = 0; i < mag.size(); ++i) {
    mag[i] = std::sqrt(mag[i]);
    max_mag = std::max(max_mag, mag[i]);
  }
  const double floor = 1e-8 * max_mag;

  std::vector<std::vector<ComplexImage>> maps(n_maps,
                                              std::vector<ComplexImage>(q_count, ComplexImage(h, w)));
  for (int q = 0; q < q_count; ++q) {
    for (std::size_t i = 0; i < mag.size(); ++i) {
      maps[0][q][i] = low[q][i] / (mag[i] + floor);
    }
  }
  return SensitivitySet(std::move(maps));
}

/// Threshold at a fraction of the maximum, then one 3x3 morphological
/// closing. Out-of-bounds neighbors are ignored on both passes so a full
/// mask stays full.
inline ForegroundMask foreground_mask(const RealImage& rss_image, double threshold_frac) {
  if (threshold_frac <= 0.0 || threshold_frac >= 1.0) {
    throw InvalidParams("foreground_mask: threshold_frac must be in (0, 1)");
  }
  const int h = rss_image.height();
  const int w = rss_image.width();
  const double peak = rss_image.max_value();
  ForegroundMask thresh(h, w);
  if (peak > 0.0) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        thresh.set(y, x, rss_image.at(y, x) >= threshold_frac * peak);
      }
    }
  }
  auto morph = [&](const ForegroundMask& in, bool dilate) {
    ForegroundMask out(h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        bool acc = !dilate;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy;
            const int xx = x + dx;
            if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
            if (dilate) {
              acc = acc || in.at(yy, xx);
            } else {
              acc = acc && in.at(yy, xx);
            }
          }
        }
        out.set(y, x, acc);
      }
    }
    return out;
  };
  return morph(morph(thresh, true), false);
}

/// Replace the background by the corner-patch mean scaled by the true
/// acceleration factor. The patch is 100x100 or the largest top-left square
/// that fits.
inline RealImage background_replace(const RealImage& rss_under, const ForegroundMask& m,
                                    double true_R) {
  if (m.height() != rss_under.height() || m.width() != rss_under.width()) {
    throw ShapeMismatch("background_replace: mask shape differs");
  }
  const int patch = std::min({100, rss_under.height(), rss_under.width()});
  if (patch < 100) {
    std::clog << "background_replace: noise patch reduced to " << patch << "x" << patch
              << "\n";
  }
  double mean = 0.0;
  for (int y = 0; y < patch; ++y) {
    for (int x = 0; x < patch; ++x) mean += rss_under.at(y, x);
  }
  mean /= static_cast<double>(patch) * patch;
  RealImage out(rss_under.height(), rss_under.width());
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      out.at(y, x) = m.at(y, x) ? rss_under.at(y, x) : mean * true_R;
    }
  }
  return out;
}

/// Zero out the unsampled PE lines of every coil.
inline MultiChannelImage apply_sampling(const MultiChannelImage& kspace,
                                        const SamplingMask& mask) {
  if (kspace.height() != mask.pe_lines()) {
    throw ShapeMismatch("apply_sampling: mask does not match k-space");
  }
  MultiChannelImage out = kspace;
  for (int q = 0; q < out.channel_count(); ++q) {
    for (int pe = 0; pe < out.height(); ++pe) {
      if (mask.sampled(pe)) continue;
      for (int fe = 0; fe < out.width(); ++fe) out.channel(q).at(pe, fe) = Cx{};
    }
  }
  return out;
}

}  // namespace parmri
