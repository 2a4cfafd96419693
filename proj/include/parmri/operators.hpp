#pragma once

// The linear acquisition model A and its adjoint, for both formulations:
//   SN  — sensitivity-weighted: coil q sees mask * fft2c(sum_m s_{m,q} * x_m),
//         channels are the N_maps soft-SENSE images.
//   PCN — coil-wise: coil q sees mask * fft2c(x_q), channels are the Q coils.
//
// With the orthonormal FFT scaling and sum_{m,q} |s|^2 <= 1 the operator norm
// is <= 1, which the default gradient-descent DC step size relies on.

#include <complex>
#include <cstddef>

#include "parmri/fft.hpp"
#include "parmri/types.hpp"

namespace parmri {

enum class Variant { PCN, SN };

inline const char* to_string(Variant v) { return v == Variant::PCN ? "PCN" : "SN"; }

class ForwardOperator {
public:
  ForwardOperator(Variant kind, SensitivitySet sens, SamplingMask mask)
      : kind_(kind), sens_(std::move(sens)), mask_(std::move(mask)),
        height_(sens_.height()), width_(sens_.width()), coils_(sens_.coil_count()) {
    if (kind_ != Variant::SN) throw InvalidParams("ForwardOperator: sens given for PCN");
    if (mask_.pe_lines() != height_) {
      throw ShapeMismatch("ForwardOperator: mask PE length does not match maps");
    }
  }

  ForwardOperator(Variant kind, int coils, int height, int width, SamplingMask mask)
      : kind_(kind), mask_(std::move(mask)), height_(height), width_(width), coils_(coils) {
    if (kind_ != Variant::PCN) throw InvalidParams("ForwardOperator: PCN ctor used for SN");
    if (mask_.pe_lines() != height_) {
      throw ShapeMismatch("ForwardOperator: mask PE length does not match shape");
    }
  }

  Variant kind() const { return kind_; }
  int height() const { return height_; }
  int width() const { return width_; }
  int coil_count() const { return coils_; }
  const SamplingMask& mask() const { return mask_; }
  const SensitivitySet& sens() const { return sens_; }

  /// Image channels the operator acts on: N_maps for SN, Q for PCN.
  int channel_count() const { return kind_ == Variant::SN ? sens_.n_maps() : coils_; }

  /// A x: per-coil masked k-space.
  MultiChannelImage forward(const MultiChannelImage& x) const {
    check_image(x);
    MultiChannelImage out(coils_, height_, width_);
    for (int q = 0; q < coils_; ++q) {
      ComplexImage coil = kind_ == Variant::SN ? combine_to_coil(x, q) : x.channel(q);
      ComplexImage k = fft2c(coil);
      apply_mask(k);
      out.channel(q) = std::move(k);
    }
    return out;
  }

  /// A^H k: image channels from masked per-coil k-space.
  MultiChannelImage adjoint(const MultiChannelImage& k) const {
    check_kspace(k);
    MultiChannelImage out(channel_count(), height_, width_);
    for (int q = 0; q < coils_; ++q) {
      ComplexImage kq = k.channel(q);
      apply_mask(kq);
      ComplexImage img = ifft2c(kq);
      if (kind_ == Variant::SN) {
        for (int m = 0; m < sens_.n_maps(); ++m) {
          const ComplexImage& s = sens_.map(m, q);
          auto& dst = out.channel(m).data();
          const auto& src = img.data();
          for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] += std::conj(s[i]) * src[i];
          }
        }
      } else {
        out.channel(q) = std::move(img);
      }
    }
    return out;
  }

  /// A^H A x without the intermediate allocations exposed.
  MultiChannelImage normal(const MultiChannelImage& x) const { return adjoint(forward(x)); }

  /// Coil-space image projection (no FFT): SN combines maps into coil q,
  /// PCN returns channel q. This is the image-domain half of A.
  ComplexImage combine_to_coil(const MultiChannelImage& x, int q) const {
    if (kind_ == Variant::PCN) return x.channel(q);
    ComplexImage out(height_, width_);
    for (int m = 0; m < sens_.n_maps(); ++m) {
      const ComplexImage& s = sens_.map(m, q);
      const auto& xm = x.channel(m).data();
      auto& dst = out.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s[i] * xm[i];
    }
    return out;
  }

  /// Adjoint of combine_to_coil: scatter a coil image back to channels.
  void scatter_from_coil(const ComplexImage& coil, int q, MultiChannelImage& acc) const {
    if (kind_ == Variant::PCN) {
      auto& dst = acc.channel(q).data();
      const auto& src = coil.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      return;
    }
    for (int m = 0; m < sens_.n_maps(); ++m) {
      const ComplexImage& s = sens_.map(m, q);
      auto& dst = acc.channel(m).data();
      const auto& src = coil.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += std::conj(s[i]) * src[i];
    }
  }

  void apply_mask(ComplexImage& k) const {
    for (int pe = 0; pe < height_; ++pe) {
      if (mask_.sampled(pe)) continue;
      for (int fe = 0; fe < width_; ++fe) k.at(pe, fe) = Cx{};
    }
  }

private:
  void check_image(const MultiChannelImage& x) const {
    if (x.channel_count() != channel_count() || x.height() != height_ ||
        x.width() != width_) {
      throw ShapeMismatch("ForwardOperator: image shape does not match operator");
    }
  }
  void check_kspace(const MultiChannelImage& k) const {
    if (k.channel_count() != coils_ || k.height() != height_ || k.width() != width_) {
      throw ShapeMismatch("ForwardOperator: k-space shape does not match operator");
    }
  }

  Variant kind_;
  SensitivitySet sens_;
  SamplingMask mask_;
  int height_ = 0;
  int width_ = 0;
  int coils_ = 0;
};

/// Root-sum-of-squares channel combination.
inline RealImage rss(const MultiChannelImage& x) {
  RealImage out(x.height(), x.width());
  for (int c = 0; c < x.channel_count(); ++c) {
    const auto& d = x.channel(c).data();
    for (std::size_t i = 0; i < d.size(); ++i) out[i] += std::norm(d[i]);
  }
  for (double& v : out.data()) v = std::sqrt(v);
  return out;
}

/// Gradient of a scalar loss through rss: given dL/d(rss) returns the
/// channelwise complex gradient dL/dx (real-pair convention). Pixels where
/// rss is zero get zero gradient.
inline MultiChannelImage rss_backward(const MultiChannelImage& x, const RealImage& r,
                                      const RealImage& grad_r) {
  MultiChannelImage grad = zeros_like(x);
  for (int c = 0; c < x.channel_count(); ++c) {
    const auto& xd = x.channel(c).data();
    auto& gd = grad.channel(c).data();
    for (std::size_t i = 0; i < xd.size(); ++i) {
      if (r[i] > 0.0) gd[i] = (grad_r[i] / r[i]) * xd[i];
    }
  }
  return grad;
}

}  // namespace parmri
