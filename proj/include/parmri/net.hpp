#pragma once

// The trainable denoiser f_theta: a small residual-free stack of 3x3
// convolutions with ReLU between layers and a linear final layer, plus exact
// reverse-mode gradients. Complex channels are handled as separate real and
// imaginary feature planes (channel c maps to planes 2c, 2c+1), so the same
// machinery also runs on plain real images (the style-transfer layer).

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "parmri/rng.hpp"
#include "parmri/types.hpp"

namespace parmri {

struct InvalidPlan : Error {
  using Error::Error;
};
struct StaleTape : Error {
  using Error::Error;
};

/// C real feature planes of identical shape, contiguous storage.
struct PlaneStack {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  PlaneStack() = default;
  PlaneStack(int c, int h, int w)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, 0.0) {}

  double& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

struct ConvPlan {
  int in_planes = 0;
  int out_planes = 0;
  int hidden = 16;  // feature planes per hidden layer
  int layers = 3;   // number of convolutions

  void check() const {
    if (layers < 1) throw InvalidPlan("ConvPlan: need at least one layer");
    if (in_planes < 1 || out_planes < 1) throw InvalidPlan("ConvPlan: empty channel plan");
    if (layers > 1 && hidden < 1) throw InvalidPlan("ConvPlan: hidden width < 1");
  }

  int layer_in(int l) const { return l == 0 ? in_planes : hidden; }
  int layer_out(int l) const { return l == layers - 1 ? out_planes : hidden; }
};

struct ConvLayer {
  int c_in = 0;
  int c_out = 0;
  std::vector<double> w;  // c_out * c_in * 3 * 3
  std::vector<double> b;  // c_out

  double& wt(int co, int ci, int ky, int kx) {
    return w[((static_cast<std::size_t>(co) * c_in + ci) * 3 + ky) * 3 + kx];
  }
  double wt(int co, int ci, int ky, int kx) const {
    return w[((static_cast<std::size_t>(co) * c_in + ci) * 3 + ky) * 3 + kx];
  }
};

struct ConvParams {
  ConvPlan plan;
  std::vector<ConvLayer> layers;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const ConvLayer& l : layers) n += l.w.size() + l.b.size();
    return n;
  }
};

/// Zero-initialized gradients (or parameters) matching a plan.
inline ConvParams zeros_for_plan(const ConvPlan& plan) {
  plan.check();
  ConvParams p;
  p.plan = plan;
  p.layers.resize(plan.layers);
  for (int l = 0; l < plan.layers; ++l) {
    ConvLayer& layer = p.layers[l];
    layer.c_in = plan.layer_in(l);
    layer.c_out = plan.layer_out(l);
    layer.w.assign(static_cast<std::size_t>(layer.c_out) * layer.c_in * 9, 0.0);
    layer.b.assign(layer.c_out, 0.0);
  }
  return p;
}

/// Glorot-uniform kernels, zero biases; the final layer is scaled by 0.1 so
/// the initial residual update x - f(x) stays close to the identity.
inline ConvParams init_params(const ConvPlan& plan, Rng& rng) {
  ConvParams p = zeros_for_plan(plan);
  for (int l = 0; l < plan.layers; ++l) {
    ConvLayer& layer = p.layers[l];
    const double fan_in = 9.0 * layer.c_in;
    const double fan_out = 9.0 * layer.c_out;
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    const double scale = (l == plan.layers - 1) ? 0.1 : 1.0;
    for (double& w : layer.w) w = scale * rng.uniform(-bound, bound);
  }
  return p;
}

struct ConvTape {
  std::vector<PlaneStack> inputs;   // input of each layer
  std::vector<PlaneStack> preact;   // pre-ReLU output of each non-final layer
};

namespace detail {

// 3x3 cross-correlation with zero padding.
inline PlaneStack conv3x3(const ConvLayer& layer, const PlaneStack& in) {
  if (in.channels != layer.c_in) throw ShapeMismatch("conv3x3: channel mismatch");
  const int h = in.height;
  const int w = in.width;
  PlaneStack out(layer.c_out, h, w);
  for (int co = 0; co < layer.c_out; ++co) {
    for (int ci = 0; ci < layer.c_in; ++ci) {
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const double wt = layer.wt(co, ci, ky, kx);
          if (wt == 0.0) continue;
          const int y0 = std::max(0, -dy);
          const int y1 = std::min(h, h - dy);
          for (int y = y0; y < y1; ++y) {
            const int x0 = std::max(0, -dx);
            const int x1 = std::min(w, w - dx);
            const double* src = &in.data[(static_cast<std::size_t>(ci) * h + y + dy) * w];
            double* dst = &out.data[(static_cast<std::size_t>(co) * h + y) * w];
            for (int x = x0; x < x1; ++x) dst[x] += wt * src[x + dx];
          }
        }
      }
    }
    double* dst = &out.data[static_cast<std::size_t>(co) * h * w];
    const double bias = layer.b[co];
    for (int i = 0; i < h * w; ++i) dst[i] += bias;
  }
  return out;
}

// Gradients of conv3x3 w.r.t. weights, bias and input.
inline void conv3x3_backward(const ConvLayer& layer, const PlaneStack& in,
                             const PlaneStack& grad_out, ConvLayer& grad_layer,
                             PlaneStack& grad_in) {
  const int h = in.height;
  const int w = in.width;
  for (int co = 0; co < layer.c_out; ++co) {
    const double* go = &grad_out.data[static_cast<std::size_t>(co) * h * w];
    double gb = 0.0;
    for (int i = 0; i < h * w; ++i) gb += go[i];
    grad_layer.b[co] += gb;
    for (int ci = 0; ci < layer.c_in; ++ci) {
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          double gw = 0.0;
          const double wt = layer.wt(co, ci, ky, kx);
          const int y0 = std::max(0, -dy);
          const int y1 = std::min(h, h - dy);
          for (int y = y0; y < y1; ++y) {
            const int x0 = std::max(0, -dx);
            const int x1 = std::min(w, w - dx);
            const double* src = &in.data[(static_cast<std::size_t>(ci) * h + y + dy) * w];
            double* gi = &grad_in.data[(static_cast<std::size_t>(ci) * h + y + dy) * w];
            const double* gor = &grad_out.data[(static_cast<std::size_t>(co) * h + y) * w];
            for (int x = x0; x < x1; ++x) {
              gw += gor[x] * src[x + dx];
              gi[x + dx] += wt * gor[x];
            }
          }
          grad_layer.wt(co, ci, ky, kx) += gw;
        }
      }
    }
  }
}

}  // namespace detail

inline std::pair<PlaneStack, ConvTape> conv_forward(const ConvParams& params,
                                                    const PlaneStack& x) {
  ConvTape tape;
  tape.inputs.reserve(params.layers.size());
  PlaneStack cur = x;
  const int last = static_cast<int>(params.layers.size()) - 1;
  for (int l = 0; l <= last; ++l) {
    tape.inputs.push_back(cur);
    PlaneStack z = detail::conv3x3(params.layers[l], cur);
    if (l != last) {
      tape.preact.push_back(z);
      for (double& v : z.data) v = v > 0.0 ? v : 0.0;
    }
    cur = std::move(z);
  }
  return {std::move(cur), std::move(tape)};
}

inline std::pair<ConvParams, PlaneStack> conv_backward(const ConvParams& params,
                                                       const ConvTape& tape,
                                                       const PlaneStack& grad_out) {
  const int last = static_cast<int>(params.layers.size()) - 1;
  if (tape.inputs.size() != params.layers.size() ||
      tape.inputs.front().channels != params.layers.front().c_in) {
    throw StaleTape("conv_backward: tape does not match parameters");
  }
  ConvParams grads = zeros_for_plan(params.plan);
  PlaneStack g = grad_out;
  for (int l = last; l >= 0; --l) {
    if (l != last) {
      const PlaneStack& z = tape.preact[l];
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        if (z.data[i] <= 0.0) g.data[i] = 0.0;
      }
    }
    PlaneStack gi(params.layers[l].c_in, g.height, g.width);
    detail::conv3x3_backward(params.layers[l], tape.inputs[l], g, grads.layers[l], gi);
    g = std::move(gi);
  }
  return {std::move(grads), std::move(g)};
}

// Complex channel adapters.

inline PlaneStack to_planes(const MultiChannelImage& x) {
  PlaneStack out(2 * x.channel_count(), x.height(), x.width());
  for (int c = 0; c < x.channel_count(); ++c) {
    const auto& d = x.channel(c).data();
    double* re = &out.data[static_cast<std::size_t>(2 * c) * x.height() * x.width()];
    double* im = &out.data[static_cast<std::size_t>(2 * c + 1) * x.height() * x.width()];
    for (std::size_t i = 0; i < d.size(); ++i) {
      re[i] = d[i].real();
      im[i] = d[i].imag();
    }
  }
  return out;
}

inline MultiChannelImage from_planes(const PlaneStack& p) {
  if (p.channels % 2 != 0) throw ShapeMismatch("from_planes: odd plane count");
  MultiChannelImage out(p.channels / 2, p.height, p.width);
  for (int c = 0; c < out.channel_count(); ++c) {
    auto& d = out.channel(c).data();
    const double* re = &p.data[static_cast<std::size_t>(2 * c) * p.height * p.width];
    const double* im = &p.data[static_cast<std::size_t>(2 * c + 1) * p.height * p.width];
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = Cx(re[i], im[i]);
  }
  return out;
}

struct DenoiseTape {
  ConvTape conv;
};

/// f_theta on complex channels. The residual subtraction x - f(x) lives in
/// the unrolled scheme, not here.
inline std::pair<MultiChannelImage, DenoiseTape> denoise_forward(const ConvParams& params,
                                                                 const MultiChannelImage& x) {
  if (params.layers.front().c_in != 2 * x.channel_count()) {
    throw ShapeMismatch("denoise_forward: channel plan does not match input");
  }
  auto [planes, tape] = conv_forward(params, to_planes(x));
  return {from_planes(planes), DenoiseTape{std::move(tape)}};
}

/// Exact reverse-mode gradients of denoise_forward.
inline std::pair<ConvParams, MultiChannelImage> denoise_backward(
    const ConvParams& params, const DenoiseTape& tape, const MultiChannelImage& grad_out) {
  auto [grads, grad_planes] = conv_backward(params, tape.conv, to_planes(grad_out));
  return {std::move(grads), from_planes(grad_planes)};
}

}  // namespace parmri
