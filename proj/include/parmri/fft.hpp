#pragma once

// Centered orthonormal Fourier transforms.
//
// fft2c = fftshift o DFT o ifftshift with 1/sqrt(H*W) scaling, so the pair
// (fft2c, ifft2c) is unitary and mutually inverse. The image center sits at
// index floor(N/2) along each axis. Power-of-two lengths use an iterative
// radix-2 kernel; other lengths go through Bluestein's chirp-z algorithm.

#include <complex>
#include <cstddef>
#include <vector>

#include "parmri/types.hpp"

namespace parmri {

namespace detail {

constexpr double kPi = 3.141592653589793238462643383279502884;

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place radix-2 Cooley-Tukey; n must be a power of two.
// sign = -1 forward, +1 inverse; no normalization.
inline void fft_pow2(Cx* a, std::size_t n, int sign) {
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * kPi / static_cast<double>(len);
    const Cx wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      Cx w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const Cx u = a[i + k];
        const Cx v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

struct BluesteinPlan {
  std::size_t n = 0;
  int sign = 0;
  std::size_t m = 0;
  std::vector<Cx> chirp;    // w_j = exp(sign * i * pi * j^2 / n)
  std::vector<Cx> kernel;   // FFT_m of the wrapped conjugate chirp
};

inline const BluesteinPlan& bluestein_plan(std::size_t n, int sign) {
  thread_local std::vector<BluesteinPlan> cache;
  for (const BluesteinPlan& p : cache) {
    if (p.n == n && p.sign == sign) return p;
  }
  BluesteinPlan p;
  p.n = n;
  p.sign = sign;
  p.m = 1;
  while (p.m < 2 * n - 1) p.m <<= 1;
  p.chirp.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    // j^2 mod 2n keeps the phase argument small and exact.
    const std::size_t j2 = (j * j) % (2 * n);
    const double ang = sign * kPi * static_cast<double>(j2) / static_cast<double>(n);
    p.chirp[j] = Cx(std::cos(ang), std::sin(ang));
  }
  p.kernel.assign(p.m, Cx{});
  for (std::size_t j = 0; j < n; ++j) {
    const Cx c = std::conj(p.chirp[j]);
    p.kernel[j] = c;
    if (j != 0) p.kernel[p.m - j] = c;
  }
  fft_pow2(p.kernel.data(), p.m, -1);
  cache.push_back(std::move(p));
  return cache.back();
}

// Arbitrary-length DFT via Bluestein; same sign/normalization contract as
// fft_pow2.
inline void fft_bluestein(Cx* a, std::size_t n, int sign) {
  const BluesteinPlan& plan = bluestein_plan(n, sign);
  std::vector<Cx> b(plan.m, Cx{});
  for (std::size_t j = 0; j < n; ++j) b[j] = a[j] * plan.chirp[j];
  fft_pow2(b.data(), plan.m, -1);
  for (std::size_t j = 0; j < plan.m; ++j) b[j] *= plan.kernel[j];
  fft_pow2(b.data(), plan.m, +1);
  const double inv_m = 1.0 / static_cast<double>(plan.m);
  for (std::size_t k = 0; k < n; ++k) a[k] = b[k] * inv_m * plan.chirp[k];
}

inline void dft(Cx* a, std::size_t n, int sign) {
  if (n == 1) return;
  if (is_pow2(n)) {
    fft_pow2(a, n, sign);
  } else {
    fft_bluestein(a, n, sign);
  }
}

// Rotation so that index 0 lands at floor(n/2).
inline std::size_t fftshift_offset(std::size_t n) { return n / 2; }
inline std::size_t ifftshift_offset(std::size_t n) { return n - n / 2; }

}  // namespace detail

inline ComplexImage fftshift(const ComplexImage& img) {
  ComplexImage out(img.height(), img.width());
  const std::size_t dh = detail::fftshift_offset(img.height());
  const std::size_t dw = detail::fftshift_offset(img.width());
  for (int r = 0; r < img.height(); ++r) {
    const int rr = static_cast<int>((r + dh) % img.height());
    for (int c = 0; c < img.width(); ++c) {
      out.at(rr, static_cast<int>((c + dw) % img.width())) = img.at(r, c);
    }
  }
  return out;
}

inline ComplexImage ifftshift(const ComplexImage& img) {
  ComplexImage out(img.height(), img.width());
  const std::size_t dh = detail::ifftshift_offset(img.height());
  const std::size_t dw = detail::ifftshift_offset(img.width());
  for (int r = 0; r < img.height(); ++r) {
    const int rr = static_cast<int>((r + dh) % img.height());
    for (int c = 0; c < img.width(); ++c) {
      out.at(rr, static_cast<int>((c + dw) % img.width())) = img.at(r, c);
    }
  }
  return out;
}

namespace detail {

// Unnormalized 2-D DFT over rows then columns, in place.
inline void dft2(ComplexImage& img, int sign) {
  const int h = img.height();
  const int w = img.width();
  for (int r = 0; r < h; ++r) dft(&img.at(r, 0), static_cast<std::size_t>(w), sign);
  std::vector<Cx> col(static_cast<std::size_t>(h));
  for (int c = 0; c < w; ++c) {
    for (int r = 0; r < h; ++r) col[r] = img.at(r, c);
    dft(col.data(), col.size(), sign);
    for (int r = 0; r < h; ++r) img.at(r, c) = col[r];
  }
}

}  // namespace detail

inline ComplexImage fft2c(const ComplexImage& img) {
  ComplexImage t = ifftshift(img);
  detail::dft2(t, -1);
  const double s = 1.0 / std::sqrt(static_cast<double>(img.size()));
  for (Cx& v : t.data()) v *= s;
  return fftshift(t);
}

inline ComplexImage ifft2c(const ComplexImage& img) {
  ComplexImage t = ifftshift(img);
  detail::dft2(t, +1);
  const double s = 1.0 / std::sqrt(static_cast<double>(img.size()));
  for (Cx& v : t.data()) v *= s;
  return fftshift(t);
}

/// Centered unitary 1-D transform of every row (along FE). Used by the
/// FE-patch machinery, which crops in hybrid (PE k-space, FE image) space.
inline ComplexImage fft1c_rows(const ComplexImage& img, int sign) {
  const int w = img.width();
  const std::size_t dw_i = detail::ifftshift_offset(w);
  const std::size_t dw_f = detail::fftshift_offset(w);
  const double s = 1.0 / std::sqrt(static_cast<double>(w));
  ComplexImage out(img.height(), w);
  std::vector<Cx> row(static_cast<std::size_t>(w));
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < w; ++c) row[(c + dw_i) % w] = img.at(r, c);
    detail::dft(row.data(), row.size(), sign);
    for (int c = 0; c < w; ++c) out.at(r, static_cast<int>((c + dw_f) % w)) = row[c] * s;
  }
  return out;
}

inline ComplexImage fft1c_fe(const ComplexImage& img) { return fft1c_rows(img, -1); }
inline ComplexImage ifft1c_fe(const ComplexImage& img) { return fft1c_rows(img, +1); }

}  // namespace parmri
