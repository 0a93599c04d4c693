#pragma once

#include <string>
#include <vector>

#include "spoofbreak/error.hpp"
#include "spoofbreak/nets/layers.hpp"
#include "spoofbreak/rng.hpp"

namespace spoofbreak::nets {

// Projects a 5-tap prediction-error kernel: center tap -1, the other four
// scaled to sum to 1. A near-zero off-center sum falls back to uniform 0.25.
template <typename T>
void constrain_kernel(Vec<T>& taps) {
  if (taps.size() != 5) throw ShapeError("constrain_kernel: expected 5 taps");
  T others = taps(0) + taps(1) + taps(3) + taps(4);
  if (std::abs(others) < T(1e-12)) {
    taps(0) = taps(1) = taps(3) = taps(4) = T(0.25);
  } else {
    const T scale = T(1) / others;
    taps(0) *= scale;
    taps(1) *= scale;
    taps(3) *= scale;
    taps(4) *= scale;
  }
  taps(2) = T(-1);
}

struct DiscriminatorConfig {
  int channels = 64;
  long input_len = 5980;
  int fc1 = 256;
  int fc2 = 128;
};

// Forensic discriminator: constrained 5-tap valid conv (length L-4), then
// five conv blocks (k7, k7, k5, k5, k3, all batch-normed Tanh) with a
// length-halving max-pool after blocks 2, 4, and 5, then flatten and three
// dense layers ending in a sigmoid P(unaltered).
template <typename T>
class DiscriminatorNet {
public:
  DiscriminatorConfig cfg;
  Conv1d<T> constrained;
  std::vector<Conv1d<T>> convs;   // 5 blocks
  std::vector<BatchNorm1d<T>> bns;
  MaxPool1d<T> pool{2};
  Dense<T> fc1, fc2, fc3;

  struct BatchCache {
    std::vector<Mat<T>> x_c;      // constrained-conv padded inputs (== inputs)
    std::vector<std::vector<Mat<T>>> xpad;  // [block][item]
    std::vector<typename BatchNorm1d<T>::Cache> bn;
    std::vector<std::vector<Mat<T>>> y;     // post-tanh per block per item
    std::vector<std::vector<Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>>>
        pool_idx;                 // [3][item]
    std::vector<long> pool_in_len;  // input length at each pool
    std::vector<Vec<T>> flat, f1, f2;
    std::vector<T> p;
  };

  DiscriminatorNet() = default;

  DiscriminatorNet(const DiscriminatorConfig& c, Rng& rng) : cfg(c) {
    const int ch = c.channels;
    constrained = Conv1d<T>(1, 1, 5, /*same=*/false, /*bias=*/false);
    constrained.init(rng);
    project_kernel();
    const int ks[5] = {7, 7, 5, 5, 3};
    for (int i = 0; i < 5; ++i) {
      convs.emplace_back(i == 0 ? 1 : ch, ch, ks[i], /*same=*/true, /*bias=*/false);
      convs.back().init(rng);
      bns.emplace_back(ch);
    }
    const long flat_w = flatten_width(c.input_len, ch);
    fc1 = Dense<T>(static_cast<int>(flat_w), c.fc1);
    fc2 = Dense<T>(c.fc1, c.fc2);
    fc3 = Dense<T>(c.fc2, 1);
    fc1.init(rng);
    fc2.init(rng);
    fc3.init(rng);
  }

  static long flatten_width(long input_len, int channels) {
    long l = input_len - 4;
    l = l / 2;  // after block 2
    l = l / 2;  // after block 4
    l = l / 2;  // after block 5
    if (l <= 0) throw ShapeError("discriminator: input too short");
    return static_cast<long>(channels) * l;
  }

  void project_kernel() {
    Vec<T> taps = constrained.w.row(0).transpose();
    constrain_kernel(taps);
    constrained.w.row(0) = taps.transpose();
  }

  void register_params(ParamRegistry<T>& reg, const std::string& prefix = "disc") {
    constrained.register_params(reg, prefix + ".constrained");
    for (size_t i = 0; i < convs.size(); ++i) {
      convs[i].register_params(reg, prefix + ".conv" + std::to_string(i));
      bns[i].register_params(reg, prefix + ".bn" + std::to_string(i));
    }
    fc1.register_params(reg, prefix + ".fc1");
    fc2.register_params(reg, prefix + ".fc2");
    fc3.register_params(reg, prefix + ".fc3");
  }

  void zero_grad() {
    constrained.gw.setZero();
    for (auto& c : convs) {
      c.gw.setZero();
      c.gb.setZero();
    }
    for (auto& b : bns) {
      b.ggamma.setZero();
      b.gbeta.setZero();
    }
    fc1.gw.setZero(); fc1.gb.setZero();
    fc2.gw.setZero(); fc2.gb.setZero();
    fc3.gw.setZero(); fc3.gb.setZero();
  }

  // xs: B items of shape [1 x input_len]; returns P(unaltered) per item,
  // clamped into the open interval (0, 1).
  Vec<T> forward(const std::vector<Mat<T>>& xs, bool training, BatchCache* cache) {
    const size_t b = xs.size();
    for (const auto& x : xs)
      if (x.rows() != 1 || x.cols() != cfg.input_len)
        throw ShapeError("discriminator: expected frames of shape (1, " +
                         std::to_string(cfg.input_len) + "), got (" +
                         std::to_string(x.rows()) + ", " +
                         std::to_string(x.cols()) + ")");
    if (cache) {
      cache->x_c.assign(b, Mat<T>());
      cache->xpad.assign(5, std::vector<Mat<T>>(b));
      cache->bn.assign(5, {});
      cache->y.assign(5, std::vector<Mat<T>>(b));
      cache->pool_idx.assign(3, {});
      cache->pool_in_len.assign(3, 0);
      cache->flat.assign(b, Vec<T>());
      cache->f1.assign(b, Vec<T>());
      cache->f2.assign(b, Vec<T>());
      cache->p.assign(b, T(0));
    }

    std::vector<Mat<T>> h(b);
    for (size_t i = 0; i < b; ++i)
      h[i] = constrained.forward(xs[i], cache ? &cache->x_c[i] : nullptr);

    int pool_slot = 0;
    for (int blk = 0; blk < 5; ++blk) {
      std::vector<Mat<T>> z(b);
      for (size_t i = 0; i < b; ++i)
        z[i] = convs[static_cast<size_t>(blk)].forward(
            h[i], cache ? &cache->xpad[static_cast<size_t>(blk)][i] : nullptr);
      std::vector<Mat<T>> bn_out = bns[static_cast<size_t>(blk)].forward(
          z, training, cache ? &cache->bn[static_cast<size_t>(blk)] : nullptr);
      for (size_t i = 0; i < b; ++i) {
        Mat<T> y = tanh_forward(bn_out[i]);
        if (cache) cache->y[static_cast<size_t>(blk)][i] = y;
        h[i] = std::move(y);
      }
      if (blk == 1 || blk == 3 || blk == 4) {
        if (cache) {
          cache->pool_idx[static_cast<size_t>(pool_slot)].resize(b);
          cache->pool_in_len[static_cast<size_t>(pool_slot)] = h[0].cols();
        }
        for (size_t i = 0; i < b; ++i)
          h[i] = pool.forward(
              h[i],
              cache ? &cache->pool_idx[static_cast<size_t>(pool_slot)][i] : nullptr);
        ++pool_slot;
      }
    }

    Vec<T> p(b);
    for (size_t i = 0; i < b; ++i) {
      Vec<T> flat = nets::flatten(h[i]);
      Vec<T> f1v = fc1.forward(flat).unaryExpr([](T v) { return std::tanh(v); });
      Vec<T> f2v = fc2.forward(f1v).unaryExpr([](T v) { return std::tanh(v); });
      const T logit = fc3.forward(f2v)(0);
      T pv = stable_sigmoid(logit);
      const T tiny = std::numeric_limits<T>::epsilon();
      pv = std::min(std::max(pv, tiny), T(1) - tiny);
      if (cache) {
        cache->flat[i] = std::move(flat);
        cache->f1[i] = std::move(f1v);
        cache->f2[i] = std::move(f2v);
        cache->p[i] = pv;
      }
      p(static_cast<long>(i)) = pv;
    }
    return p;
  }

  // Training-mode backward from dL/dp; accumulates parameter gradients and
  // returns dL/dx per item.
  std::vector<Mat<T>> backward(const Vec<T>& dp, const BatchCache& cache) {
    const size_t b = cache.p.size();
    std::vector<Mat<T>> dh(b);
    for (size_t i = 0; i < b; ++i) {
      const T pv = cache.p[i];
      const T dlogit = dp(static_cast<long>(i)) * pv * (T(1) - pv);
      Vec<T> d1(1);
      d1(0) = dlogit;
      Vec<T> df2 = fc3.backward(d1, cache.f2[i]);
      df2 = (df2.array() * (T(1) - cache.f2[i].array().square())).matrix();
      Vec<T> df1 = fc2.backward(df2, cache.f1[i]);
      df1 = (df1.array() * (T(1) - cache.f1[i].array().square())).matrix();
      Vec<T> dflat = fc1.backward(df1, cache.flat[i]);
      const long l_final = cache.flat[i].size() / cfg.channels;
      dh[i] = unflatten(dflat, cfg.channels, l_final);
    }

    int pool_slot = 2;
    for (int blk = 4; blk >= 0; --blk) {
      if (blk == 1 || blk == 3 || blk == 4) {
        for (size_t i = 0; i < b; ++i)
          dh[i] = pool.backward(
              dh[i], cache.pool_idx[static_cast<size_t>(pool_slot)][i],
              cache.pool_in_len[static_cast<size_t>(pool_slot)]);
        --pool_slot;
      }
      std::vector<Mat<T>> dbn(b);
      for (size_t i = 0; i < b; ++i)
        dbn[i] = tanh_backward_from_output(dh[i], cache.y[static_cast<size_t>(blk)][i]);
      std::vector<Mat<T>> dz =
          bns[static_cast<size_t>(blk)].backward(dbn, cache.bn[static_cast<size_t>(blk)]);
      for (size_t i = 0; i < b; ++i)
        dh[i] = convs[static_cast<size_t>(blk)].backward(
            dz[i], cache.xpad[static_cast<size_t>(blk)][i]);
    }

    std::vector<Mat<T>> dx(b);
    for (size_t i = 0; i < b; ++i)
      dx[i] = constrained.backward(dh[i], cache.x_c[i]);
    return dx;
  }
};

}  // namespace spoofbreak::nets
