#pragma once

// Shared generators for the test suites. Everything is driven by the
// library's own deterministic RNG so failures reproduce exactly.

#include <complex>
#include <vector>

#include "parmri/operators.hpp"
#include "parmri/rng.hpp"
#include "parmri/simulate.hpp"
#include "parmri/types.hpp"

namespace test {

using parmri::ComplexImage;
using parmri::Cx;
using parmri::MultiChannelImage;
using parmri::RealImage;
using parmri::Rng;

inline ComplexImage random_image(int h, int w, Rng& rng) {
  ComplexImage img(h, w);
  for (Cx& v : img.data()) v = Cx(rng.normal(), rng.normal());
  return img;
}

inline MultiChannelImage random_multi(int channels, int h, int w, Rng& rng) {
  MultiChannelImage out(channels, h, w);
  for (int c = 0; c < channels; ++c) out.channel(c) = random_image(h, w, rng);
  return out;
}

inline RealImage random_real(int h, int w, Rng& rng, double lo = 0.0, double hi = 1.0) {
  RealImage img(h, w);
  for (double& v : img.data()) v = rng.uniform(lo, hi);
  return img;
}

/// Random smooth sensitivities with sum_{m,q} |s|^2 = 1 pixelwise (map set 2
/// zero when n_maps = 2, matching the soft-SENSE placeholder convention).
inline parmri::SensitivitySet random_sens(int n_maps, int coils, int h, int w, Rng& rng) {
  std::vector<std::vector<ComplexImage>> maps(
      n_maps, std::vector<ComplexImage>(coils, ComplexImage(h, w)));
  std::vector<ComplexImage> raw;
  for (int q = 0; q < coils; ++q) {
    const double cx = rng.uniform(), cy = rng.uniform();
    const double width = rng.uniform(0.5, 1.5);
    const double ph = rng.uniform(-2.0, 2.0);
    ComplexImage s(h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double u = (x + 0.5) / w, v = (y + 0.5) / h;
        const double d2 = (u - cx) * (u - cx) + (v - cy) * (v - cy);
        s.at(y, x) = std::polar(std::exp(-d2 / (2 * width * width)), ph * (u + v));
      }
    }
    raw.push_back(std::move(s));
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double p = 0.0;
      for (int q = 0; q < coils; ++q) p += std::norm(raw[q].at(y, x));
      for (int q = 0; q < coils; ++q) maps[0][q].at(y, x) = raw[q].at(y, x) / std::sqrt(p);
    }
  }
  return parmri::SensitivitySet(std::move(maps));
}

inline parmri::SamplingMask random_mask(int pe, Rng& rng, double keep = 0.5) {
  std::vector<std::uint8_t> flags(pe, 0);
  const int acl = std::max(2, pe / 8);
  const int first = parmri::SamplingMask::acl_first_line(pe, acl);
  for (int i = first; i < first + acl; ++i) flags[i] = 1;
  for (int i = 0; i < pe; ++i) {
    if (!flags[i] && rng.uniform() < keep) flags[i] = 1;
  }
  return parmri::SamplingMask(std::move(flags), acl, 2.0);
}

inline parmri::ForwardOperator random_operator(parmri::Variant kind, int n_maps, int coils,
                                               int h, int w, Rng& rng) {
  auto mask = random_mask(h, rng);
  if (kind == parmri::Variant::SN) {
    return parmri::ForwardOperator(parmri::Variant::SN, random_sens(n_maps, coils, h, w, rng),
                                   std::move(mask));
  }
  return parmri::ForwardOperator(parmri::Variant::PCN, coils, h, w, std::move(mask));
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1e-300, std::abs(want));
}

}  // namespace test
