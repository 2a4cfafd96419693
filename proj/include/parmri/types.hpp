#pragma once

// Core domain types shared by every module: complex images, coil stacks,
// sampling masks, sensitivity sets and the cross-type validation entry point.
//
// Conventions (fixed once, used everywhere):
//   - images are row-major, the first axis is phase-encode (PE), the second
//     is frequency-encode (FE); undersampling removes whole PE lines.
//   - complex samples are double precision (real, imag) pairs.

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace parmri {

using Cx = std::complex<double>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeMismatch : Error {
  using Error::Error;
};
struct NonFiniteData : Error {
  using Error::Error;
};
struct MaskViolation : Error {
  using Error::Error;
};
struct InvalidSpec : Error {
  using Error::Error;
};
struct InvalidParams : Error {
  using Error::Error;
};

/// Dense 2-D complex array, PE rows by FE columns.
class ComplexImage {
public:
  ComplexImage() = default;

  ComplexImage(int height, int width)
      : height_(height), width_(width), data_(check_shape(height, width), Cx{}) {}

  ComplexImage(int height, int width, std::vector<Cx> data)
      : height_(height), width_(width), data_(std::move(data)) {
    if (data_.size() != check_shape(height, width)) {
      throw ShapeMismatch("ComplexImage: data length != height*width");
    }
    for (const Cx& v : data_) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
        throw NonFiniteData("ComplexImage: non-finite sample");
      }
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  Cx& at(int pe, int fe) { return data_[static_cast<std::size_t>(pe) * width_ + fe]; }
  const Cx& at(int pe, int fe) const {
    return data_[static_cast<std::size_t>(pe) * width_ + fe];
  }

  Cx& operator[](std::size_t i) { return data_[i]; }
  const Cx& operator[](std::size_t i) const { return data_[i]; }

  std::vector<Cx>& data() { return data_; }
  const std::vector<Cx>& data() const { return data_; }

  bool same_shape(const ComplexImage& o) const {
    return height_ == o.height_ && width_ == o.width_;
  }

  bool finite() const {
    for (const Cx& v : data_) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    }
    return true;
  }

private:
  static std::size_t check_shape(int height, int width) {
    if (height < 4 || width < 4) {
      throw ShapeMismatch("ComplexImage: height and width must be >= 4");
    }
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<Cx> data_;
};

/// Dense 2-D real array, same layout as ComplexImage.
class RealImage {
public:
  RealImage() = default;

  RealImage(int height, int width)
      : height_(height), width_(width),
        data_(static_cast<std::size_t>(height) * width, 0.0) {
    if (height < 1 || width < 1) throw ShapeMismatch("RealImage: empty shape");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  double& at(int pe, int fe) { return data_[static_cast<std::size_t>(pe) * width_ + fe]; }
  const double& at(int pe, int fe) const {
    return data_[static_cast<std::size_t>(pe) * width_ + fe];
  }

  double& operator[](std::size_t i) { return data_[i]; }
  const double& operator[](std::size_t i) const { return data_[i]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const RealImage& o) const {
    return height_ == o.height_ && width_ == o.width_;
  }

  double max_value() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, v);
    return m;
  }

private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

/// Stack of equally shaped complex images. Channels are per-coil arrays
/// (PCN reconstructions, k-space stacks) or per-map arrays (SN, soft-SENSE).
class MultiChannelImage {
public:
  MultiChannelImage() = default;

  explicit MultiChannelImage(std::vector<ComplexImage> channels)
      : channels_(std::move(channels)) {
    if (channels_.empty()) throw ShapeMismatch("MultiChannelImage: no channels");
    for (const ComplexImage& c : channels_) {
      if (!c.same_shape(channels_.front())) {
        throw ShapeMismatch("MultiChannelImage: channel shapes differ");
      }
    }
  }

  MultiChannelImage(int channels, int height, int width)
      : channels_(check_count(channels), ComplexImage(height, width)) {}

  int channel_count() const { return static_cast<int>(channels_.size()); }
  int height() const { return channels_.front().height(); }
  int width() const { return channels_.front().width(); }

  ComplexImage& channel(int c) { return channels_[c]; }
  const ComplexImage& channel(int c) const { return channels_[c]; }

  std::vector<ComplexImage>& channels() { return channels_; }
  const std::vector<ComplexImage>& channels() const { return channels_; }

  bool same_shape(const MultiChannelImage& o) const {
    return channels_.size() == o.channels_.size() &&
           (channels_.empty() || channels_.front().same_shape(o.channels_.front()));
  }

  bool finite() const {
    for (const ComplexImage& c : channels_) {
      if (!c.finite()) return false;
    }
    return true;
  }

private:
  static int check_count(int channels) {
    if (channels < 1) throw ShapeMismatch("MultiChannelImage: channel count < 1");
    return channels;
  }

  std::vector<ComplexImage> channels_;
};

/// Boolean flags over PE lines; a contiguous centered block of acl_count
/// auto-calibration lines is always sampled.
class SamplingMask {
public:
  SamplingMask() = default;

  SamplingMask(std::vector<std::uint8_t> pe_line_flags, int acl_count, double nominal_R)
      : flags_(std::move(pe_line_flags)), acl_count_(acl_count), nominal_R_(nominal_R) {
    const int pe = static_cast<int>(flags_.size());
    if (pe < 1) throw InvalidParams("SamplingMask: empty mask");
    if (acl_count_ < 0 || acl_count_ > pe) {
      throw InvalidParams("SamplingMask: acl_count out of range");
    }
    if (nominal_R_ < 1.0) throw InvalidParams("SamplingMask: nominal_R < 1");
    const int first = acl_first_line(pe, acl_count_);
    for (int i = first; i < first + acl_count_; ++i) {
      if (!flags_[i]) throw MaskViolation("SamplingMask: central ACL line not flagged");
    }
    if (flagged_count() < 1) throw MaskViolation("SamplingMask: no flagged lines");
  }

  static int acl_first_line(int pe_lines, int acl_count) {
    return (pe_lines - acl_count) / 2;
  }

  int pe_lines() const { return static_cast<int>(flags_.size()); }
  int acl_count() const { return acl_count_; }
  double nominal_R() const { return nominal_R_; }
  bool sampled(int pe) const { return flags_[pe] != 0; }
  const std::vector<std::uint8_t>& flags() const { return flags_; }

  int flagged_count() const {
    int n = 0;
    for (std::uint8_t f : flags_) n += (f != 0);
    return n;
  }

  double true_R() const { return static_cast<double>(pe_lines()) / flagged_count(); }

  static SamplingMask full(int pe_lines) {
    return SamplingMask(std::vector<std::uint8_t>(pe_lines, 1), pe_lines, 1.0);
  }

private:
  std::vector<std::uint8_t> flags_;
  int acl_count_ = 0;
  double nominal_R_ = 1.0;
};

/// N_maps sets of Q per-coil maps (soft-SENSE layout). maps()[m][q] is the
/// map-m sensitivity of coil q.
class SensitivitySet {
public:
  SensitivitySet() = default;

  SensitivitySet(std::vector<std::vector<ComplexImage>> maps) : maps_(std::move(maps)) {
    const int n_maps = static_cast<int>(maps_.size());
    if (n_maps < 1 || n_maps > 2) throw InvalidParams("SensitivitySet: n_maps must be 1 or 2");
    if (maps_.front().empty()) throw ShapeMismatch("SensitivitySet: no coils");
    const ComplexImage& ref = maps_.front().front();
    for (const auto& set : maps_) {
      if (set.size() != maps_.front().size()) {
        throw ShapeMismatch("SensitivitySet: map sets have differing coil counts");
      }
      for (const ComplexImage& s : set) {
        if (!s.same_shape(ref)) throw ShapeMismatch("SensitivitySet: map shapes differ");
      }
    }
  }

  int n_maps() const { return static_cast<int>(maps_.size()); }
  int coil_count() const { return static_cast<int>(maps_.front().size()); }
  int height() const { return maps_.front().front().height(); }
  int width() const { return maps_.front().front().width(); }

  const ComplexImage& map(int m, int q) const { return maps_[m][q]; }
  ComplexImage& map(int m, int q) { return maps_[m][q]; }
  const std::vector<std::vector<ComplexImage>>& maps() const { return maps_; }

  /// Sum over maps and coils of |s|^2 at one pixel.
  double power_at(int pe, int fe) const {
    double p = 0.0;
    for (const auto& set : maps_) {
      for (const ComplexImage& s : set) p += std::norm(s.at(pe, fe));
    }
    return p;
  }

private:
  std::vector<std::vector<ComplexImage>> maps_;
};

/// Boolean pixel mask over the image grid.
class ForegroundMask {
public:
  ForegroundMask() = default;

  ForegroundMask(int height, int width)
      : height_(height), width_(width),
        pixels_(static_cast<std::size_t>(height) * width, 0) {}

  int height() const { return height_; }
  int width() const { return width_; }

  bool at(int pe, int fe) const {
    return pixels_[static_cast<std::size_t>(pe) * width_ + fe] != 0;
  }
  void set(int pe, int fe, bool v) {
    pixels_[static_cast<std::size_t>(pe) * width_ + fe] = v ? 1 : 0;
  }

  const std::vector<std::uint8_t>& pixels() const { return pixels_; }
  std::vector<std::uint8_t>& pixels() { return pixels_; }

  int count() const {
    int n = 0;
    for (std::uint8_t p : pixels_) n += (p != 0);
    return n;
  }

  static ForegroundMask full(int height, int width) {
    ForegroundMask m(height, width);
    for (auto& p : m.pixels_) p = 1;
    return m;
  }

private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Per-slice coil stacks in k-space plus the sampling metadata they share.
struct KSpaceVolume {
  std::vector<MultiChannelImage> slices;  // each: Q coil k-space arrays
  SamplingMask mask;
  int coil_count = 0;
};

/// Cross-type consistency check. Throws the first violated invariant by name.
inline void validate(const KSpaceVolume& volume, const SensitivitySet& sens,
                     const ForegroundMask& mask) {
  if (volume.slices.empty()) throw ShapeMismatch("validate: volume has no slices");
  const MultiChannelImage& first = volume.slices.front();
  if (volume.coil_count != first.channel_count()) {
    throw ShapeMismatch("validate: coil_count does not match slice channels");
  }
  for (const MultiChannelImage& slice : volume.slices) {
    if (slice.channel_count() != volume.coil_count) {
      throw ShapeMismatch("validate: slice coil count differs");
    }
    if (!slice.same_shape(first)) throw ShapeMismatch("validate: slice shapes differ");
    if (!slice.finite()) throw NonFiniteData("validate: non-finite k-space sample");
  }
  if (volume.mask.pe_lines() != first.height()) {
    throw ShapeMismatch("validate: mask PE length does not match slices");
  }
  if (sens.coil_count() != volume.coil_count) {
    throw ShapeMismatch("validate: sensitivity coil count does not match volume");
  }
  if (sens.height() != first.height() || sens.width() != first.width()) {
    throw ShapeMismatch("validate: sensitivity shape does not match slices");
  }
  for (int m = 0; m < sens.n_maps(); ++m) {
    for (int q = 0; q < sens.coil_count(); ++q) {
      if (!sens.map(m, q).finite()) throw NonFiniteData("validate: non-finite sensitivity");
    }
  }
  if (mask.height() != first.height() || mask.width() != first.width()) {
    throw ShapeMismatch("validate: foreground mask shape does not match slices");
  }
  for (const MultiChannelImage& slice : volume.slices) {
    for (int pe = 0; pe < first.height(); ++pe) {
      if (volume.mask.sampled(pe)) continue;
      for (int q = 0; q < slice.channel_count(); ++q) {
        for (int fe = 0; fe < first.width(); ++fe) {
          if (slice.channel(q).at(pe, fe) != Cx{}) {
            throw MaskViolation("validate: nonzero sample on unsampled PE line");
          }
        }
      }
    }
  }
}

// Elementwise helpers used throughout the numeric modules.

inline void axpy(MultiChannelImage& y, double a, const MultiChannelImage& x) {
  for (int c = 0; c < y.channel_count(); ++c) {
    auto& yd = y.channel(c).data();
    const auto& xd = x.channel(c).data();
    for (std::size_t i = 0; i < yd.size(); ++i) yd[i] += a * xd[i];
  }
}

inline void scale(MultiChannelImage& y, double a) {
  for (auto& ch : y.channels()) {
    for (Cx& v : ch.data()) v *= a;
  }
}

/// Real inner product: Re(sum conj(a_i) b_i).
inline double dot_re(const MultiChannelImage& a, const MultiChannelImage& b) {
  double s = 0.0;
  for (int c = 0; c < a.channel_count(); ++c) {
    const auto& ad = a.channel(c).data();
    const auto& bd = b.channel(c).data();
    for (std::size_t i = 0; i < ad.size(); ++i) {
      s += ad[i].real() * bd[i].real() + ad[i].imag() * bd[i].imag();
    }
  }
  return s;
}

inline Cx dot_cx(const MultiChannelImage& a, const MultiChannelImage& b) {
  Cx s{};
  for (int c = 0; c < a.channel_count(); ++c) {
    const auto& ad = a.channel(c).data();
    const auto& bd = b.channel(c).data();
    for (std::size_t i = 0; i < ad.size(); ++i) s += std::conj(ad[i]) * bd[i];
  }
  return s;
}

inline double norm2(const MultiChannelImage& a) { return std::sqrt(dot_re(a, a)); }

inline MultiChannelImage zeros_like(const MultiChannelImage& a) {
  return MultiChannelImage(a.channel_count(), a.height(), a.width());
}

}  // namespace parmri
