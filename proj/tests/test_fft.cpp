#include <catch2/catch_amalgamated.hpp>

#include <complex>

#include "helpers.hpp"
#include "parmri/fft.hpp"

using namespace parmri;

namespace {

// Quadratic-time reference DFT with the same centering and scaling, used as
// the independent oracle for the fast path.
ComplexImage dft2c_reference(const ComplexImage& img) {
  const int h = img.height();
  const int w = img.width();
  const double scale = 1.0 / std::sqrt(static_cast<double>(h) * w);
  ComplexImage out(h, w);
  for (int ky = 0; ky < h; ++ky) {
    for (int kx = 0; kx < w; ++kx) {
      Cx acc{};
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          // centered: spatial index y - floor(h/2), frequency ky - floor(h/2)
          const double fy = (ky - h / 2) * static_cast<double>(y - h / 2) / h;
          const double fx = (kx - w / 2) * static_cast<double>(x - w / 2) / w;
          const double ang = -2.0 * detail::kPi * (fy + fx);
          acc += img.at(y, x) * Cx(std::cos(ang), std::sin(ang));
        }
      }
      out.at(ky, kx) = acc * scale;
    }
  }
  return out;
}

double max_abs_diff(const ComplexImage& a, const ComplexImage& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("fft2c inverse pair") {
  Rng rng(5);
  for (int size : {16, 8}) {
    ComplexImage x = test::random_image(size, size, rng);
    ComplexImage back = ifft2c(fft2c(x));
    REQUIRE(max_abs_diff(x, back) < 1e-12);
  }
}

TEST_CASE("fft2c of constant is a centered impulse") {
  const int h = 16, w = 12;
  ComplexImage x(h, w);
  const Cx c(0.7, -0.2);
  for (Cx& v : x.data()) v = c;
  ComplexImage k = fft2c(x);
  const Cx expect = c * std::sqrt(static_cast<double>(h) * w);
  REQUIRE(std::abs(k.at(h / 2, w / 2) - expect) < 1e-12);
  double off_center = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      if (y == h / 2 && xx == w / 2) continue;
      off_center = std::max(off_center, std::abs(k.at(y, xx)));
    }
  }
  REQUIRE(off_center < 1e-12);
}

TEST_CASE("fft2c preserves the l2 norm") {
  Rng rng(6);
  ComplexImage x = test::random_image(24, 16, rng);
  double nx = 0.0, nk = 0.0;
  ComplexImage k = fft2c(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    nx += std::norm(x[i]);
    nk += std::norm(k[i]);
  }
  REQUIRE(std::abs(std::sqrt(nx) - std::sqrt(nk)) < 1e-12);
}

TEST_CASE("fft2c matches the reference DFT") {
  Rng rng(77);
  SECTION("power-of-two size") {
    ComplexImage x = test::random_image(8, 16, rng);
    REQUIRE(max_abs_diff(fft2c(x), dft2c_reference(x)) < 1e-11);
  }
  SECTION("non-power-of-two even sizes hit the chirp-z path") {
    for (auto [h, w] : {std::pair{12, 6}, std::pair{96, 4}, std::pair{10, 20}}) {
      ComplexImage x = test::random_image(h, w, rng);
      REQUIRE(max_abs_diff(fft2c(x), dft2c_reference(x)) < 1e-11);
      REQUIRE(max_abs_diff(ifft2c(fft2c(x)), x) < 1e-11);
    }
  }
}

TEST_CASE("fftshift conventions") {
  // center lands on floor(N/2); ifftshift undoes fftshift for odd sizes too
  Rng rng(1);
  ComplexImage x = test::random_image(7, 5, rng);
  ComplexImage s = fftshift(x);
  REQUIRE(s.at(3, 2) == x.at(0, 0));
  REQUIRE(max_abs_diff(ifftshift(fftshift(x)), x) == 0.0);
}

TEST_CASE("row-wise centered transform") {
  Rng rng(13);
  SECTION("unitary inverse pair, chirp-z width") {
    ComplexImage x = test::random_image(10, 96, rng);
    REQUIRE(max_abs_diff(fft1c_fe(ifft1c_fe(x)), x) < 1e-11);
  }
  SECTION("row transform then column transform equals fft2c") {
    ComplexImage full = test::random_image(12, 12, rng);
    ComplexImage rows = fft1c_fe(full);
    ComplexImage transposed(12, 12);
    for (int r = 0; r < 12; ++r) {
      for (int c = 0; c < 12; ++c) transposed.at(c, r) = rows.at(r, c);
    }
    ComplexImage cols = fft1c_fe(transposed);
    ComplexImage recomposed(12, 12);
    for (int r = 0; r < 12; ++r) {
      for (int c = 0; c < 12; ++c) recomposed.at(r, c) = cols.at(c, r);
    }
    REQUIRE(max_abs_diff(recomposed, fft2c(full)) < 1e-11);
  }
}
