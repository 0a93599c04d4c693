#pragma once

#include <array>
#include <string>
#include <vector>

#include "spoofbreak/dsp.hpp"
#include "spoofbreak/error.hpp"
#include "spoofbreak/nets/layers.hpp"
#include "spoofbreak/rng.hpp"

namespace spoofbreak::nets {

struct GeneratorConfig {
  // Widths of the four conv stages; each stage is [k3, k3, k1] except the
  // final stage which is [k3, k3] followed by the k3 projection to 1 channel.
  std::array<int, 4> stage_widths{64, 128, 256, 128};
  long frame_len = 5980;
  double alpha_init = 0.01;
  double highpass_cutoff_hz = 30.0;
  int highpass_taps = 101;
  int sample_rate = 16000;
};

// Residual waveform generator: y = highpass(x + alpha * branch(x)), where
// branch is a 12-conv stack (Swish activations, final Tanh) that keeps the
// input length. The high-pass taps are constant and never trained.
template <typename T>
class GeneratorNet {
public:
  GeneratorConfig cfg;
  std::vector<Conv1d<T>> convs;
  T alpha = T(0);
  T galpha = T(0);

  struct ItemCache {
    std::vector<Mat<T>> xpad;  // padded input per conv
    std::vector<Mat<T>> z;     // pre-activation per conv
    Mat<T> v;                  // branch output (post-tanh)
    Mat<T> u_pad;              // padded residual sum fed to the FIR
  };

  GeneratorNet() = default;

  GeneratorNet(const GeneratorConfig& c, Rng& rng) : cfg(c) {
    const int c0 = c.stage_widths[0], c1 = c.stage_widths[1],
              c2 = c.stage_widths[2], c3 = c.stage_widths[3];
    const int plan[12][3] = {
        {3, 1, c0},  {3, c0, c0}, {1, c0, c0}, {3, c0, c1},
        {3, c1, c1}, {1, c1, c1}, {3, c1, c2}, {3, c2, c2},
        {1, c2, c2}, {3, c2, c3}, {3, c3, c3}, {3, c3, 1}};
    for (const auto& p : plan) convs.emplace_back(p[1], p[2], p[0]);
    for (auto& conv : convs) conv.init(rng);
    alpha = static_cast<T>(c.alpha_init);
    dsp::FilterSpec spec = dsp::design_highpass(c.highpass_cutoff_hz,
                                                c.sample_rate, c.highpass_taps);
    fir_ = Conv1d<T>(1, 1, c.highpass_taps, /*same=*/true, /*bias=*/false);
    for (int i = 0; i < c.highpass_taps; ++i)
      fir_.w(0, i) = static_cast<T>(spec.taps[static_cast<size_t>(i)]);
  }

  const Conv1d<T>& fir() const { return fir_; }

  long param_count() const {
    long n = 1;  // alpha
    for (const auto& c : convs) n += c.param_count();
    return n;
  }

  void register_params(ParamRegistry<T>& reg, const std::string& prefix = "gen") {
    for (size_t i = 0; i < convs.size(); ++i)
      convs[i].register_params(reg, prefix + ".conv" + std::to_string(i));
    reg.add_scalar_param(prefix + ".alpha", alpha, galpha);
  }

  void zero_grad() {
    for (auto& c : convs) {
      c.gw.setZero();
      c.gb.setZero();
    }
    galpha = T(0);
  }

  Mat<T> forward_item(const Mat<T>& x, ItemCache* cache) const {
    if (x.rows() != 1 || x.cols() != cfg.frame_len)
      throw ShapeError("generator: expected frame of shape (1, " +
                       std::to_string(cfg.frame_len) + "), got (" +
                       std::to_string(x.rows()) + ", " +
                       std::to_string(x.cols()) + ")");
    if (cache) {
      cache->xpad.assign(convs.size(), Mat<T>());
      cache->z.assign(convs.size(), Mat<T>());
    }
    Mat<T> h = x;
    for (size_t i = 0; i < convs.size(); ++i) {
      Mat<T> z = convs[i].forward(h, cache ? &cache->xpad[i] : nullptr);
      h = (i + 1 < convs.size()) ? swish_forward(z) : tanh_forward(z);
      if (cache) cache->z[i] = std::move(z);
    }
    Mat<T> u = x + alpha * h;
    if (cache) cache->v = std::move(h);
    Mat<T> y = fir_.forward(u, cache ? &cache->u_pad : nullptr);
    return y;
  }

  std::vector<Mat<T>> forward_batch(const std::vector<Mat<T>>& xs,
                                    std::vector<ItemCache>* caches) const {
    if (caches) caches->resize(xs.size());
    std::vector<Mat<T>> ys;
    ys.reserve(xs.size());
    for (size_t i = 0; i < xs.size(); ++i)
      ys.push_back(forward_item(xs[i], caches ? &(*caches)[i] : nullptr));
    return ys;
  }

  // Accumulates parameter gradients; returns dL/dx.
  Mat<T> backward_item(const Mat<T>& dy, const ItemCache& cache) {
    Mat<T> du = fir_.backward(dy, cache.u_pad);
    fir_.gw.setZero();  // taps are constant
    galpha += (du.array() * cache.v.array()).sum();
    Mat<T> dh = alpha * du;
    for (long i = static_cast<long>(convs.size()) - 1; i >= 0; --i) {
      Mat<T> dz;
      if (i + 1 == static_cast<long>(convs.size())) {
        Mat<T> y = tanh_forward(cache.z[static_cast<size_t>(i)]);
        dz = tanh_backward_from_output(dh, y);
      } else {
        dz = swish_backward(dh, cache.z[static_cast<size_t>(i)]);
      }
      dh = convs[static_cast<size_t>(i)].backward(dz, cache.xpad[static_cast<size_t>(i)]);
    }
    return du + dh;
  }

private:
  Conv1d<T> fir_;  // constant taps, excluded from register_params
};

}  // namespace spoofbreak::nets
