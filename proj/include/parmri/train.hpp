#pragma once

// Training loops: supervised training of the unrolled model on magnitude
// references, frequency-encode patch extraction, semi-supervised per-volume
// finetuning against the measured k-space, and the style-transfer layer.

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "parmri/fft.hpp"
#include "parmri/loss.hpp"
#include "parmri/net.hpp"
#include "parmri/optim.hpp"
#include "parmri/rng.hpp"
#include "parmri/ssim.hpp"
#include "parmri/types.hpp"
#include "parmri/unrolled.hpp"

namespace parmri {

struct PatchTooLarge : Error {
  using Error::Error;
};

struct TrainExample {
  MultiChannelImage y;  // undersampled per-coil k-space
  SamplingMask mask;
  SensitivitySet sens;
  RealImage ref;  // magnitude reference
  ForegroundMask fg;
};

/// Crop a contiguous FE band of the whole example: inverse transform along
/// FE only, take the band, transform back. PE sampling is untouched, so the
/// result is a valid smaller problem with the same mask.
inline TrainExample fe_patch(const TrainExample& ex, int patch_fe, Rng& rng) {
  const int w = ex.y.width();
  if (patch_fe > w) throw PatchTooLarge("fe_patch: patch wider than FE dimension");
  if (patch_fe < 4) throw InvalidParams("fe_patch: patch_fe must be >= 4");
  const int start =
      patch_fe == w ? 0 : static_cast<int>(rng.next_below(static_cast<std::uint64_t>(w - patch_fe) + 1));

  auto crop_cx = [&](const ComplexImage& img) {
    ComplexImage out(img.height(), patch_fe);
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < patch_fe; ++x) out.at(y, x) = img.at(y, start + x);
    }
    return out;
  };

  TrainExample out;
  out.mask = ex.mask;
  std::vector<ComplexImage> coils;
  coils.reserve(ex.y.channel_count());
  for (int q = 0; q < ex.y.channel_count(); ++q) {
    coils.push_back(fft1c_fe(crop_cx(ifft1c_fe(ex.y.channel(q)))));
  }
  out.y = MultiChannelImage(std::move(coils));

  std::vector<std::vector<ComplexImage>> maps;
  for (int m = 0; m < ex.sens.n_maps(); ++m) {
    std::vector<ComplexImage> set;
    for (int q = 0; q < ex.sens.coil_count(); ++q) set.push_back(crop_cx(ex.sens.map(m, q)));
    maps.push_back(std::move(set));
  }
  out.sens = SensitivitySet(std::move(maps));

  out.ref = RealImage(ex.ref.height(), patch_fe);
  out.fg = ForegroundMask(ex.fg.height(), patch_fe);
  for (int y = 0; y < ex.ref.height(); ++y) {
    for (int x = 0; x < patch_fe; ++x) {
      out.ref.at(y, x) = ex.ref.at(y, start + x);
      out.fg.set(y, x, ex.fg.at(y, start + x));
    }
  }
  return out;
}

struct TrainConfig {
  int epochs = 50;
  double lr = 1e-4;
  int lr_halve_every = 15;
  OptKind opt = OptKind::RMSProp;
  double lambda_l1 = 1e-3;
  int patch_fe = 0;  // 0 disables FE patching
  std::uint64_t seed = 1;
  double data_range = 0.0;  // 0: max over dataset references
};

struct TrainLogRow {
  int epoch = 0;
  int example = 0;
  double loss = 0.0;
  double ssim = 0.0;
  double l1 = 0.0;
  double lr = 0.0;
};

inline std::vector<TrainLogRow> train(UnrolledModel& model,
                                      const std::vector<TrainExample>& data,
                                      const TrainConfig& cfg) {
  model.check();
  if (data.empty()) throw InvalidParams("train: empty dataset");
  double data_range = cfg.data_range;
  if (data_range <= 0.0) {
    for (const TrainExample& ex : data) data_range = std::max(data_range, ex.ref.max_value());
  }
  if (data_range <= 0.0) throw InvalidParams("train: zero data range");

  Rng rng(cfg.seed);
  Optimizer opt;
  opt.kind = cfg.opt;
  std::vector<double*> params = collect_parameters(model);
  opt.init(params.size());

  std::vector<TrainLogRow> log;
  log.reserve(static_cast<std::size_t>(cfg.epochs) * data.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    opt.lr = scheduled_lr(cfg.lr, epoch, cfg.lr_halve_every);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const TrainExample* ex = &data[i];
      TrainExample patched;
      if (cfg.patch_fe > 0 && cfg.patch_fe < ex->y.width()) {
        patched = fe_patch(*ex, cfg.patch_fe, rng);
        ex = &patched;
      }
      ForwardOperator A = make_operator(model, &ex->sens, ex->mask, ex->y.channel_count(),
                                        ex->y.height(), ex->y.width());
      auto [x_T, tape] = reconstruct(model, ex->y, A);
      BaseLossResult loss = base_loss(x_T, ex->ref, ex->fg, cfg.lambda_l1, data_range);
      if (!std::isfinite(loss.value)) {
        throw NonFiniteLoss("train: non-finite loss at epoch " + std::to_string(epoch));
      }
      ModelGrads grads = recon_backward(model, A, ex->y, tape, loss.grad);
      opt.step(params, flatten(grads));
      log.push_back({epoch, static_cast<int>(i), loss.value, loss.ssim, loss.l1, opt.lr});
    }
  }
  return log;
}

enum class FinetuneMode { Literal, DissimilarityHinge };

struct FinetuneExample {
  MultiChannelImage y;
  SamplingMask mask;
  SensitivitySet sens;
};

struct FinetuneConfig {
  double alpha = 1.0;
  double beta = 0.008;
  FinetuneMode mode = FinetuneMode::DissimilarityHinge;
  int epochs = 30;
  double lr = 5e-5;
};

struct FinetuneResult {
  double misfit_before = 0.0;  // sum over slices of ||A x - y||^2
  double misfit_after = 0.0;
  std::vector<double> misfit_per_epoch;
};

/// Adapts a trained model to one volume's k-space: minimizes
/// 1/2 ||A x(theta) - y||^2 plus the SSIM hinge against the pre-finetune
/// reconstruction as prior. All slices contribute to one ADAM step per epoch.
inline FinetuneResult finetune(UnrolledModel& model,
                               const std::vector<FinetuneExample>& slices,
                               const FinetuneConfig& cfg) {
  model.check();
  if (slices.empty()) throw InvalidParams("finetune: no slices");
  if (cfg.alpha <= 0.0 || cfg.beta <= 0.0 || cfg.beta >= 1.0) {
    throw InvalidParams("finetune: alpha must be > 0 and beta in (0, 1)");
  }

  std::vector<ForwardOperator> ops;
  ops.reserve(slices.size());
  for (const FinetuneExample& ex : slices) {
    ops.push_back(make_operator(model, &ex.sens, ex.mask, ex.y.channel_count(),
                                ex.y.height(), ex.y.width()));
  }

  // Priors from the incoming model.
  std::vector<RealImage> priors;
  std::vector<double> prior_range;
  FinetuneResult result;
  for (std::size_t s = 0; s < slices.size(); ++s) {
    auto [x_T, tape] = reconstruct(model, slices[s].y, ops[s]);
    MultiChannelImage r = ops[s].forward(x_T);
    axpy(r, -1.0, slices[s].y);
    result.misfit_before += dot_re(r, r);
    priors.push_back(rss(x_T));
    prior_range.push_back(std::max(priors.back().max_value(), 1e-12));
  }

  Optimizer opt;
  opt.kind = OptKind::Adam;
  opt.lr = cfg.lr;
  std::vector<double*> params = collect_parameters(model);
  opt.init(params.size());

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    ModelGrads total = zero_grads(model);
    double misfit = 0.0;
    for (std::size_t s = 0; s < slices.size(); ++s) {
      auto [x_T, tape] = reconstruct(model, slices[s].y, ops[s]);
      MultiChannelImage resid = ops[s].forward(x_T);
      axpy(resid, -1.0, slices[s].y);
      misfit += dot_re(resid, resid);
      MultiChannelImage grad_xT = ops[s].adjoint(resid);

      const RealImage mag = rss(x_T);
      const SsimResult s_res = ssim(mag, priors[s], nullptr, prior_range[s]);
      double dloss_ds = 0.0;
      if (cfg.mode == FinetuneMode::Literal) {
        const double h = std::max(s_res.score - cfg.beta, 0.0);
        dloss_ds = cfg.alpha * h;
      } else {
        const double h = std::max((1.0 - s_res.score) - cfg.beta, 0.0);
        dloss_ds = -cfg.alpha * h;
      }
      if (dloss_ds != 0.0) {
        RealImage grad_mag(mag.height(), mag.width());
        for (std::size_t i = 0; i < grad_mag.size(); ++i) {
          grad_mag[i] = dloss_ds * s_res.grad_a[i];
        }
        axpy(grad_xT, 1.0, rss_backward(x_T, mag, grad_mag));
      }
      if (!std::isfinite(misfit)) throw NonFiniteLoss("finetune: non-finite data misfit");
      total.add(recon_backward(model, ops[s], slices[s].y, tape, grad_xT));
    }
    total.scale(1.0 / static_cast<double>(slices.size()));
    result.misfit_per_epoch.push_back(misfit);
    opt.step(params, flatten(total));
  }

  for (std::size_t s = 0; s < slices.size(); ++s) {
    auto [x_T, tape] = reconstruct(model, slices[s].y, ops[s]);
    MultiChannelImage r = ops[s].forward(x_T);
    axpy(r, -1.0, slices[s].y);
    result.misfit_after += dot_re(r, r);
  }
  return result;
}

struct StlConfig {
  int features = 32;
  int layers = 3;
  int epochs = 10;
  double lr = 5e-5;
  std::uint64_t seed = 1;
};

inline PlaneStack to_planes(const RealImage& img) {
  PlaneStack p(1, img.height(), img.width());
  p.data = img.data();
  return p;
}

/// Pure inference pass of the style-transfer layer.
inline RealImage stl_apply(const ConvParams& params, const RealImage& image) {
  auto [planes, tape] = conv_forward(params, to_planes(image));
  RealImage out(image.height(), image.width());
  out.data() = std::move(planes.data);
  return out;
}

/// Trains the contrast-mapping layer: maximizes SSIM(stl(input), target)
/// over the given image pairs.
inline ConvParams stl_train(const std::vector<std::pair<RealImage, RealImage>>& pairs,
                            const StlConfig& cfg) {
  if (pairs.empty()) throw InvalidParams("stl_train: no training pairs");
  Rng rng(cfg.seed);
  ConvPlan plan{1, 1, cfg.features, cfg.layers};
  ConvParams params = init_params(plan, rng);

  Optimizer opt;
  opt.kind = OptKind::RMSProp;
  opt.lr = cfg.lr;
  std::vector<double*> views = collect_parameters(params);
  opt.init(views.size());

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (const auto& [input, target] : pairs) {
      if (!input.same_shape(target)) throw ShapeMismatch("stl_train: pair shapes differ");
      auto [planes, tape] = conv_forward(params, to_planes(input));
      RealImage out(input.height(), input.width());
      out.data() = planes.data;
      const double range = std::max(target.max_value(), 1e-12);
      const SsimResult s = ssim(out, target, nullptr, range);
      if (!std::isfinite(s.score)) throw NonFiniteLoss("stl_train: non-finite SSIM");
      PlaneStack grad_out(1, input.height(), input.width());
      for (std::size_t i = 0; i < grad_out.data.size(); ++i) {
        grad_out.data[i] = -s.grad_a[i];  // minimize -SSIM
      }
      auto [grads, grad_in] = conv_backward(params, tape, grad_out);
      opt.step(views, flatten(grads));
    }
  }
  return params;
}

}  // namespace parmri
