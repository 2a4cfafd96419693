#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"
#include "parmri/metrics.hpp"
#include "parmri/simulate.hpp"
#include "parmri/unrolled.hpp"

using namespace parmri;

namespace {

UnrolledModel toy_model(Variant variant, DcKind kind, int steps, int channels, Rng& rng,
                        bool shared = false) {
  DcConfig dc;
  dc.kind = kind;
  dc.lambda = 0.3;
  dc.cg_max_iter = 200;
  dc.cg_tol = 1e-13;
  ConvPlan plan{2 * channels, 2 * channels, 6, 2};
  UnrolledModel m = make_model(variant, dc, steps, plan, shared, rng);
  for (ConvParams& block : m.theta) {
    for (ConvLayer& l : block.layers) {
      for (double& w : l.w) w = rng.normal() * 0.2;
      for (double& b : l.b) b = rng.normal() * 0.05;
    }
  }
  return m;
}

void zero_theta(UnrolledModel& m) {
  for (ConvParams& block : m.theta) {
    for (ConvLayer& l : block.layers) {
      for (double& w : l.w) w = 0.0;
      for (double& b : l.b) b = 0.0;
    }
  }
}

}  // namespace

TEST_CASE("zero denoiser with PM DC keeps the adjoint on consistent data") {
  Rng rng(71);
  auto sens = test::random_sens(1, 4, 8, 8, rng);
  ForwardOperator A(Variant::SN, sens, SamplingMask::full(8));
  MultiChannelImage y = test::random_multi(4, 8, 8, rng);
  UnrolledModel m = toy_model(Variant::SN, DcKind::PM, 4, 1, rng);
  zero_theta(m);
  auto [x_T, tape] = reconstruct(m, y, A);
  MultiChannelImage x0 = A.adjoint(y);
  MultiChannelImage diff = x_T;
  axpy(diff, -1.0, x0);
  REQUIRE(norm2(diff) / norm2(x0) < 1e-10);
}

TEST_CASE("T=1 reconstruction is the manual two-layer composition") {
  Rng rng(72);
  ForwardOperator A = test::random_operator(Variant::PCN, 1, 3, 8, 8, rng);
  MultiChannelImage y = test::random_multi(3, 8, 8, rng);
  UnrolledModel m = toy_model(Variant::PCN, DcKind::VS, 1, 3, rng);
  auto [x_T, tape] = reconstruct(m, y, A);

  MultiChannelImage x0 = A.adjoint(y);
  auto [fx, nt] = denoise_forward(m.theta[0], x0);
  MultiChannelImage x_half = x0;
  axpy(x_half, -1.0, fx);
  MultiChannelImage expect = dc_vs(x_half, y, A, m.dc);
  MultiChannelImage diff = x_T;
  axpy(diff, -1.0, expect);
  REQUIRE(norm2(diff) == 0.0);
}

TEST_CASE("zero-denoiser PM unrolling does not increase phantom NMSE") {
  Rng rng(73);
  PhantomSpec spec;
  spec.height = 32;
  spec.width = 32;
  spec.coil_count = 4;
  spec.ellipses = default_ellipses();
  Phantom ph = make_phantom(spec, rng);
  SamplingMask mask = make_mask(32, 2.0, 8, rng);
  MultiChannelImage y = apply_sampling(ph.kspace, mask);
  ForwardOperator A(Variant::SN, ph.sens, mask);
  UnrolledModel m = toy_model(Variant::SN, DcKind::PM, 9, 1, rng);
  zero_theta(m);
  auto [x_T, tape] = reconstruct(m, y, A);
  RealImage ref(32, 32);
  for (std::size_t i = 0; i < ref.size(); ++i) ref[i] = std::abs(ph.object[i]);
  const double nmse_T = nmse(final_image(x_T), ref);
  const double nmse_0 = nmse(final_image(A.adjoint(y)), ref);
  REQUIRE(nmse_T <= nmse_0 + 1e-12);
}

TEST_CASE("zero-denoiser GD unrolling is Landweber iteration") {
  Rng rng(74);
  ForwardOperator A = test::random_operator(Variant::SN, 2, 3, 8, 8, rng);
  MultiChannelImage y = test::random_multi(3, 8, 8, rng);
  for (int q = 0; q < 3; ++q) A.apply_mask(y.channel(q));
  DcConfig dc;
  dc.kind = DcKind::GD;
  dc.eta = 0.8;
  Rng mrng(740);
  UnrolledModel m = make_model(Variant::SN, dc, 9, ConvPlan{4, 4, 4, 1}, false, mrng);
  zero_theta(m);
  auto [x_T, tape] = reconstruct(m, y, A);

  // independent Landweber loop on 1/2||Ax - y||^2 from the same start
  MultiChannelImage x = A.adjoint(y);
  for (int t = 0; t < 9; ++t) {
    MultiChannelImage res = A.forward(x);
    axpy(res, -1.0, y);
    MultiChannelImage corr = A.adjoint(res);
    axpy(x, -0.8, corr);
  }
  MultiChannelImage diff = x_T;
  axpy(diff, -1.0, x);
  REQUIRE(norm2(diff) / std::max(1e-300, norm2(x)) < 1e-10);
}

TEST_CASE("recon_backward matches finite differences end to end") {
  Rng rng(75);
  for (DcKind kind : {DcKind::GD, DcKind::PM, DcKind::VS}) {
    ForwardOperator A = test::random_operator(Variant::SN, 1, 2, 8, 8, rng);
    MultiChannelImage y = test::random_multi(2, 8, 8, rng);
    UnrolledModel m = toy_model(Variant::SN, kind, 2, 1, rng);
    MultiChannelImage w = test::random_multi(1, 8, 8, rng);

    auto objective = [&](const UnrolledModel& model) {
      auto [x_T, tape] = reconstruct(model, y, A);
      return dot_re(w, x_T);
    };

    auto [x_T, tape] = reconstruct(m, y, A);
    ModelGrads grads = recon_backward(m, A, y, tape, w);

    Rng pick(76);
    const double h = 1e-5;
    for (int probe = 0; probe < 8; ++probe) {
      const int t = static_cast<int>(pick.next_below(2));
      const int l = static_cast<int>(pick.next_below(m.theta[t].layers.size()));
      const std::size_t i = pick.next_below(m.theta[t].layers[l].w.size());
      UnrolledModel mp = m;
      mp.theta[t].layers[l].w[i] += h;
      const double up = objective(mp);
      mp.theta[t].layers[l].w[i] -= 2 * h;
      const double dn = objective(mp);
      const double fd = (up - dn) / (2 * h);
      REQUIRE(std::abs(grads.theta[t].layers[l].w[i] - fd) <=
              1e-3 * std::max(0.1, std::abs(fd)));
    }
  }
}

TEST_CASE("shared weights accumulate gradients across steps") {
  Rng rng(77);
  ForwardOperator A = test::random_operator(Variant::PCN, 1, 2, 8, 8, rng);
  MultiChannelImage y = test::random_multi(2, 8, 8, rng);
  UnrolledModel m = toy_model(Variant::PCN, DcKind::GD, 3, 2, rng, /*shared=*/true);
  REQUIRE(m.theta.size() == 1);
  MultiChannelImage w = test::random_multi(2, 8, 8, rng);
  auto [x_T, tape] = reconstruct(m, y, A);
  ModelGrads grads = recon_backward(m, A, y, tape, w);

  const double h = 1e-5;
  Rng pick(78);
  for (int probe = 0; probe < 6; ++probe) {
    const int l = static_cast<int>(pick.next_below(m.theta[0].layers.size()));
    const std::size_t i = pick.next_below(m.theta[0].layers[l].w.size());
    UnrolledModel mp = m;
    mp.theta[0].layers[l].w[i] += h;
    auto [xu, tu] = reconstruct(mp, y, A);
    mp.theta[0].layers[l].w[i] -= 2 * h;
    auto [xd, td] = reconstruct(mp, y, A);
    const double fd = (dot_re(w, xu) - dot_re(w, xd)) / (2 * h);
    REQUIRE(std::abs(grads.theta[0].layers[l].w[i] - fd) <=
            1e-3 * std::max(0.1, std::abs(fd)));
  }
}

TEST_CASE("trainable eta receives a gradient") {
  Rng rng(79);
  ForwardOperator A = test::random_operator(Variant::PCN, 1, 2, 8, 8, rng);
  MultiChannelImage y = test::random_multi(2, 8, 8, rng);
  DcConfig dc;
  dc.kind = DcKind::GD;
  dc.eta = 0.7;
  dc.train_eta = true;
  UnrolledModel m = make_model(Variant::PCN, dc, 2, ConvPlan{4, 4, 4, 2}, false, rng);
  MultiChannelImage w = test::random_multi(2, 8, 8, rng);
  auto [x_T, tape] = reconstruct(m, y, A);
  ModelGrads grads = recon_backward(m, A, y, tape, w);
  REQUIRE(grads.eta.size() == 2);

  const double h = 1e-6;
  for (int t = 0; t < 2; ++t) {
    UnrolledModel mp = m;
    mp.eta[t] += h;
    auto [xu, tu] = reconstruct(mp, y, A);
    mp.eta[t] -= 2 * h;
    auto [xd, td] = reconstruct(mp, y, A);
    const double fd = (dot_re(w, xu) - dot_re(w, xd)) / (2 * h);
    REQUIRE(std::abs(grads.eta[t] - fd) <= 1e-4 * std::max(0.1, std::abs(fd)));
  }
}

TEST_CASE("zero cotangent gives zero model gradients") {
  Rng rng(80);
  ForwardOperator A = test::random_operator(Variant::SN, 2, 2, 8, 8, rng);
  MultiChannelImage y = test::random_multi(2, 8, 8, rng);
  UnrolledModel m = toy_model(Variant::SN, DcKind::PM, 2, 2, rng);
  auto [x_T, tape] = reconstruct(m, y, A);
  ModelGrads grads = recon_backward(m, A, y, tape, zeros_like(x_T));
  for (const ConvParams& block : grads.theta) {
    for (const ConvLayer& l : block.layers) {
      for (double w : l.w) REQUIRE(w == 0.0);
      for (double b : l.b) REQUIRE(b == 0.0);
    }
  }
}

TEST_CASE("final_image delegates to rss") {
  Rng rng(81);
  MultiChannelImage x = test::random_multi(2, 8, 8, rng);
  RealImage a = final_image(x);
  RealImage b = rss(x);
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);
  SECTION("two-map SN with zero second map reduces to |x1|") {
    MultiChannelImage two(2, 8, 8);
    two.channel(0) = test::random_image(8, 8, rng);
    RealImage r = final_image(two);
    for (std::size_t i = 0; i < r.size(); ++i) {
      REQUIRE(std::abs(r[i] - std::abs(two.channel(0)[i])) < 1e-15);
    }
  }
}

TEST_CASE("reconstruction is deterministic") {
  Rng rng(82);
  ForwardOperator A = test::random_operator(Variant::SN, 1, 3, 16, 16, rng);
  MultiChannelImage y = test::random_multi(3, 16, 16, rng);
  UnrolledModel m = toy_model(Variant::SN, DcKind::PM, 3, 1, rng);
  auto [x1, t1] = reconstruct(m, y, A);
  auto [x2, t2] = reconstruct(m, y, A);
  for (int c = 0; c < x1.channel_count(); ++c) {
    for (std::size_t i = 0; i < x1.channel(c).size(); ++i) {
      REQUIRE(x1.channel(c)[i] == x2.channel(c)[i]);
    }
  }
}

TEST_CASE("tape memory stays small at T=9, 64x64, Q=4") {
  Rng rng(83);
  auto sens = test::random_sens(1, 4, 64, 64, rng);
  ForwardOperator A(Variant::SN, sens, SamplingMask::full(64));
  MultiChannelImage y = test::random_multi(4, 64, 64, rng);
  UnrolledModel m = toy_model(Variant::SN, DcKind::GD, 9, 1, rng);
  auto [x_T, tape] = reconstruct(m, y, A);
  std::size_t bytes = 0;
  for (const MultiChannelImage& img : tape.x) {
    bytes += static_cast<std::size_t>(img.channel_count()) * img.height() * img.width() *
             sizeof(Cx);
  }
  for (const MultiChannelImage& img : tape.x_half) {
    bytes += static_cast<std::size_t>(img.channel_count()) * img.height() * img.width() *
             sizeof(Cx);
  }
  for (const DenoiseTape& dt : tape.net) {
    for (const PlaneStack& p : dt.conv.inputs) bytes += p.data.size() * sizeof(double);
    for (const PlaneStack& p : dt.conv.preact) bytes += p.data.size() * sizeof(double);
  }
  REQUIRE(bytes < (1u << 30));
}
