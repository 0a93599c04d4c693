#pragma once

#include <memory>
#include <string>
#include <vector>

#include "spoofbreak/audio_io.hpp"
#include "spoofbreak/error.hpp"
#include "spoofbreak/nets/layers.hpp"
#include "spoofbreak/rng.hpp"

namespace spoofbreak::surrogates {

// Two-class toy detector families (logit index 1 = "real" by convention,
// remapped via real_class_index at load time):
//   res_tssdnet_like  - residual temporal conv stack on the raw waveform
//   inc_tssdnet_like  - multi-dilation (inception-style) conv stack
//   toy_cnn_small/large - energy pathway: first difference -> square ->
//                         average pooling -> small conv stack
// All are BN-free so per-item forward passes are independent.
template <typename T>
class ToyNetBase {
public:
  virtual ~ToyNetBase() = default;
  virtual std::string family_name() const = 0;
  virtual int width() const = 0;

  nets::ParamRegistry<T>& registry() { return reg_; }
  const nets::ParamRegistry<T>& registry() const { return reg_; }
  void zero_grad() { reg_.zero_grad(); }
  long param_count() const { return reg_.param_count(); }

  // logits [2 x B]; caches for backward retained when want_cache
  virtual nets::Mat<T> forward_logits(const std::vector<nets::Mat<T>>& xs,
                                      bool want_cache) = 0;
  // dlogits [2 x B] -> per-item input grads; accumulates parameter grads
  virtual std::vector<nets::Mat<T>> backward_logits(const nets::Mat<T>& dlogits) = 0;

protected:
  nets::ParamRegistry<T> reg_;
};

namespace detail {

template <typename T>
void check_input(const nets::Mat<T>& x) {
  if (x.rows() != 1 || x.cols() < 64)
    throw ShapeError("toy net: expected (1, L) frame with L >= 64");
}

// readout = [channel mean; channel max]: the mean tracks broadband response,
// the max keeps rare localized artifacts from washing out in the average
template <typename T>
nets::Vec<T> avg_max_readout(const nets::Mat<T>& p, std::vector<long>* max_idx) {
  const long w = p.rows();
  nets::Vec<T> g(2 * w);
  max_idx->resize(static_cast<size_t>(w));
  for (long r = 0; r < w; ++r) {
    long best = 0;
    g(w + r) = p.row(r).maxCoeff(&best);
    (*max_idx)[static_cast<size_t>(r)] = best;
    g(r) = p.row(r).mean();
  }
  return g;
}

template <typename T>
nets::Mat<T> avg_max_readout_backward(const nets::Vec<T>& dg,
                                      const std::vector<long>& max_idx,
                                      long len) {
  const long w = static_cast<long>(max_idx.size());
  nets::Mat<T> dp(w, len);
  const T inv = T(1) / static_cast<T>(len);
  for (long r = 0; r < w; ++r) {
    dp.row(r).setConstant(dg(r) * inv);
    dp(r, max_idx[static_cast<size_t>(r)]) += dg(w + r);
  }
  return dp;
}

}  // namespace detail

template <typename T>
class ResToyNet final : public ToyNetBase<T> {
public:
  explicit ResToyNet(int width, Rng& rng) : w_(width) {
    stem_ = nets::Conv1d<T>(1, width, 7);
    a1_ = nets::Conv1d<T>(width, width, 3);
    b1_ = nets::Conv1d<T>(width, width, 3);
    a2_ = nets::Conv1d<T>(width, width, 3);
    b2_ = nets::Conv1d<T>(width, width, 3);
    head_ = nets::Dense<T>(2 * width, 2);
    stem_.init(rng);
    a1_.init(rng);
    b1_.init(rng);
    a2_.init(rng);
    b2_.init(rng);
    head_.init(rng);
    stem_.register_params(this->reg_, "net.stem");
    a1_.register_params(this->reg_, "net.a1");
    b1_.register_params(this->reg_, "net.b1");
    a2_.register_params(this->reg_, "net.a2");
    b2_.register_params(this->reg_, "net.b2");
    head_.register_params(this->reg_, "net.head");
  }

  std::string family_name() const override { return "res_tssdnet_like"; }
  int width() const override { return w_; }

  nets::Mat<T> forward_logits(const std::vector<nets::Mat<T>>& xs,
                              bool want_cache) override {
    nets::Mat<T> logits(2, static_cast<long>(xs.size()));
    if (want_cache) cache_.assign(xs.size(), {});
    for (size_t i = 0; i < xs.size(); ++i) {
      detail::check_input(xs[i]);
      Cache local;
      Cache* c = want_cache ? &cache_[i] : &local;
      nets::Mat<T> z0 = stem_.forward(xs[i], &c->xpad_stem);
      c->y0 = nets::tanh_forward(z0);
      nets::Mat<T> p0 = pool_.forward(c->y0, &c->idx0);
      nets::Mat<T> y1 = block_forward(p0, a1_, b1_, c->blk1);
      nets::Mat<T> p1 = pool_.forward(y1, &c->idx1);
      nets::Mat<T> y2 = block_forward(p1, a2_, b2_, c->blk2);
      nets::Mat<T> p2 = pool_.forward(y2, &c->idx2);
      c->gap_len = p2.cols();
      c->g = detail::avg_max_readout(p2, &c->max_idx);
      logits.col(static_cast<long>(i)) = head_.forward(c->g);
    }
    return logits;
  }

  std::vector<nets::Mat<T>> backward_logits(const nets::Mat<T>& dlogits) override {
    std::vector<nets::Mat<T>> dxs(cache_.size());
    for (size_t i = 0; i < cache_.size(); ++i) {
      Cache& c = cache_[i];
      nets::Vec<T> dg = head_.backward(dlogits.col(static_cast<long>(i)), c.g);
      nets::Mat<T> dp2 =
          detail::avg_max_readout_backward(dg, c.max_idx, c.gap_len);
      nets::Mat<T> dy2 = pool_.backward(dp2, c.idx2, c.blk2.y.cols());
      nets::Mat<T> dp1 = block_backward(dy2, a2_, b2_, c.blk2);
      nets::Mat<T> dy1 = pool_.backward(dp1, c.idx1, c.blk1.y.cols());
      nets::Mat<T> dp0 = block_backward(dy1, a1_, b1_, c.blk1);
      nets::Mat<T> dy0 = pool_.backward(dp0, c.idx0, c.y0.cols());
      nets::Mat<T> dz0 = nets::tanh_backward_from_output(dy0, c.y0);
      dxs[i] = stem_.backward(dz0, c.xpad_stem);
    }
    return dxs;
  }

private:
  struct BlockCache {
    nets::Mat<T> xpad_a, ya, xpad_b, y;  // y = tanh(input + conv_b(tanh(conv_a)))
  };
  struct Cache {
    nets::Mat<T> xpad_stem, y0;
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> idx0, idx1, idx2;
    BlockCache blk1, blk2;
    std::vector<long> max_idx;
    long gap_len = 0;
    nets::Vec<T> g;
  };

  nets::Mat<T> block_forward(const nets::Mat<T>& h, nets::Conv1d<T>& a,
                             nets::Conv1d<T>& b, BlockCache& c) {
    nets::Mat<T> za = a.forward(h, &c.xpad_a);
    c.ya = nets::tanh_forward(za);
    nets::Mat<T> zb = b.forward(c.ya, &c.xpad_b);
    c.y = nets::tanh_forward((h + zb).eval());
    return c.y;
  }

  nets::Mat<T> block_backward(const nets::Mat<T>& dy, nets::Conv1d<T>& a,
                              nets::Conv1d<T>& b, const BlockCache& c) {
    nets::Mat<T> ds = nets::tanh_backward_from_output(dy, c.y);
    nets::Mat<T> dya = b.backward(ds, c.xpad_b);
    nets::Mat<T> dza = nets::tanh_backward_from_output(dya, c.ya);
    nets::Mat<T> dh = a.backward(dza, c.xpad_a);
    return dh + ds;  // residual path
  }

  int w_;
  nets::Conv1d<T> stem_, a1_, b1_, a2_, b2_;
  nets::Dense<T> head_;
  nets::MaxPool1d<T> pool_{4};
  std::vector<Cache> cache_;
};

template <typename T>
class IncToyNet final : public ToyNetBase<T> {
public:
  explicit IncToyNet(int width, Rng& rng) : w_(width) {
    stem_ = nets::Conv1d<T>(1, width, 7);
    stem_.init(rng);
    stem_.register_params(this->reg_, "net.stem");
    for (int blk = 0; blk < 2; ++blk) {
      blocks_[blk].b0 = nets::Conv1d<T>(width, width, 1);
      blocks_[blk].b1 = nets::Conv1d<T>(width, width, 3);
      blocks_[blk].b2 = nets::Conv1d<T>(width, width, 3, true, true, 4);
      blocks_[blk].fuse = nets::Conv1d<T>(3 * width, width, 1);
      blocks_[blk].b0.init(rng);
      blocks_[blk].b1.init(rng);
      blocks_[blk].b2.init(rng);
      blocks_[blk].fuse.init(rng);
      const std::string p = "net.inc" + std::to_string(blk);
      blocks_[blk].b0.register_params(this->reg_, p + ".b0");
      blocks_[blk].b1.register_params(this->reg_, p + ".b1");
      blocks_[blk].b2.register_params(this->reg_, p + ".b2");
      blocks_[blk].fuse.register_params(this->reg_, p + ".fuse");
    }
    head_ = nets::Dense<T>(2 * width, 2);
    head_.init(rng);
    head_.register_params(this->reg_, "net.head");
  }

  std::string family_name() const override { return "inc_tssdnet_like"; }
  int width() const override { return w_; }

  nets::Mat<T> forward_logits(const std::vector<nets::Mat<T>>& xs,
                              bool want_cache) override {
    nets::Mat<T> logits(2, static_cast<long>(xs.size()));
    if (want_cache) cache_.assign(xs.size(), {});
    for (size_t i = 0; i < xs.size(); ++i) {
      detail::check_input(xs[i]);
      Cache local;
      Cache* c = want_cache ? &cache_[i] : &local;
      nets::Mat<T> z0 = stem_.forward(xs[i], &c->xpad_stem);
      c->y0 = nets::tanh_forward(z0);
      nets::Mat<T> h = pool_.forward(c->y0, &c->idx0);
      for (int blk = 0; blk < 2; ++blk) {
        BlockCache& bc = c->blk[blk];
        nets::Mat<T> cat(3 * w_, h.cols());
        cat.topRows(w_) = blocks_[blk].b0.forward(h, &bc.xpad0);
        cat.middleRows(w_, w_) = blocks_[blk].b1.forward(h, &bc.xpad1);
        cat.bottomRows(w_) = blocks_[blk].b2.forward(h, &bc.xpad2);
        nets::Mat<T> zf = blocks_[blk].fuse.forward(cat, &bc.xpad_fuse);
        bc.yf = nets::tanh_forward(zf);
        h = pool_.forward(bc.yf, &bc.idxf);
      }
      c->gap_len = h.cols();
      c->g = detail::avg_max_readout(h, &c->max_idx);
      logits.col(static_cast<long>(i)) = head_.forward(c->g);
    }
    return logits;
  }

  std::vector<nets::Mat<T>> backward_logits(const nets::Mat<T>& dlogits) override {
    std::vector<nets::Mat<T>> dxs(cache_.size());
    for (size_t i = 0; i < cache_.size(); ++i) {
      Cache& c = cache_[i];
      nets::Vec<T> dg = head_.backward(dlogits.col(static_cast<long>(i)), c.g);
      nets::Mat<T> dh = detail::avg_max_readout_backward(dg, c.max_idx, c.gap_len);
      for (int blk = 1; blk >= 0; --blk) {
        BlockCache& bc = c.blk[blk];
        nets::Mat<T> dyf = pool_.backward(dh, bc.idxf, bc.yf.cols());
        nets::Mat<T> dzf = nets::tanh_backward_from_output(dyf, bc.yf);
        nets::Mat<T> dcat = blocks_[blk].fuse.backward(dzf, bc.xpad_fuse);
        dh = blocks_[blk].b0.backward(dcat.topRows(w_), bc.xpad0);
        dh += blocks_[blk].b1.backward(dcat.middleRows(w_, w_), bc.xpad1);
        dh += blocks_[blk].b2.backward(dcat.bottomRows(w_), bc.xpad2);
      }
      nets::Mat<T> dy0 = pool_.backward(dh, c.idx0, c.y0.cols());
      nets::Mat<T> dz0 = nets::tanh_backward_from_output(dy0, c.y0);
      dxs[i] = stem_.backward(dz0, c.xpad_stem);
    }
    return dxs;
  }

private:
  struct Block {
    nets::Conv1d<T> b0, b1, b2, fuse;
  };
  struct BlockCache {
    nets::Mat<T> xpad0, xpad1, xpad2, xpad_fuse, yf;
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> idxf;
  };
  struct Cache {
    nets::Mat<T> xpad_stem, y0;
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> idx0;
    BlockCache blk[2];
    std::vector<long> max_idx;
    long gap_len = 0;
    nets::Vec<T> g;
  };

  int w_;
  nets::Conv1d<T> stem_;
  Block blocks_[2];
  nets::Dense<T> head_;
  nets::MaxPool1d<T> pool_{4};
  std::vector<Cache> cache_;
};

// Energy pathway: y = avgpool8((diff x)^2) -> conv k9 -> tanh -> pool4 ->
// conv k5 -> tanh -> pool4 -> GAP -> dense. Sees quantization/jitter noise
// through the squared first difference.
template <typename T>
class EnergyToyNet final : public ToyNetBase<T> {
public:
  EnergyToyNet(const std::string& family, int width, Rng& rng)
      : family_(family), w_(width) {
    conv1_ = nets::Conv1d<T>(1, width, 9);
    conv2_ = nets::Conv1d<T>(width, width, 5);
    head_ = nets::Dense<T>(2 * width, 2);
    conv1_.init(rng);
    conv2_.init(rng);
    head_.init(rng);
    conv1_.register_params(this->reg_, "net.conv1");
    conv2_.register_params(this->reg_, "net.conv2");
    head_.register_params(this->reg_, "net.head");
  }

  std::string family_name() const override { return family_; }
  int width() const override { return w_; }

  nets::Mat<T> forward_logits(const std::vector<nets::Mat<T>>& xs,
                              bool want_cache) override {
    nets::Mat<T> logits(2, static_cast<long>(xs.size()));
    if (want_cache) cache_.assign(xs.size(), {});
    for (size_t i = 0; i < xs.size(); ++i) {
      detail::check_input(xs[i]);
      Cache local;
      Cache* c = want_cache ? &cache_[i] : &local;
      const long len = xs[i].cols();
      nets::Mat<T> d(1, len);
      d(0, 0) = xs[i](0, 0);
      for (long t = 1; t < len; ++t) d(0, t) = xs[i](0, t) - xs[i](0, t - 1);
      c->d = d;
      nets::Mat<T> e = d.array().square().matrix();
      nets::Mat<T> avg = avg_.forward(e);
      c->avg_in_len = len;
      c->avg = avg;
      // log compression flattens the pitch-dependent energy scale so the
      // convs see artifact shape rather than absolute level
      nets::Mat<T> h =
          ((avg.array() + T(kLogEps)).log() - T(kLogCenter)) * T(kLogScale);
      nets::Mat<T> z1 = conv1_.forward(h, &c->xpad1);
      c->y1 = nets::tanh_forward(z1);
      nets::Mat<T> p1 = pool_.forward(c->y1, &c->idx1);
      nets::Mat<T> z2 = conv2_.forward(p1, &c->xpad2);
      c->y2 = nets::tanh_forward(z2);
      nets::Mat<T> p2 = pool_.forward(c->y2, &c->idx2);
      c->gap_len = p2.cols();
      c->g = detail::avg_max_readout(p2, &c->max_idx);
      logits.col(static_cast<long>(i)) = head_.forward(c->g);
    }
    return logits;
  }

  std::vector<nets::Mat<T>> backward_logits(const nets::Mat<T>& dlogits) override {
    std::vector<nets::Mat<T>> dxs(cache_.size());
    for (size_t i = 0; i < cache_.size(); ++i) {
      Cache& c = cache_[i];
      nets::Vec<T> dg = head_.backward(dlogits.col(static_cast<long>(i)), c.g);
      nets::Mat<T> dp2 =
          detail::avg_max_readout_backward(dg, c.max_idx, c.gap_len);
      nets::Mat<T> dy2 = pool_.backward(dp2, c.idx2, c.y2.cols());
      nets::Mat<T> dz2 = nets::tanh_backward_from_output(dy2, c.y2);
      nets::Mat<T> dp1 = conv2_.backward(dz2, c.xpad2);
      nets::Mat<T> dy1 = pool_.backward(dp1, c.idx1, c.y1.cols());
      nets::Mat<T> dz1 = nets::tanh_backward_from_output(dy1, c.y1);
      nets::Mat<T> dh = conv1_.backward(dz1, c.xpad1);
      nets::Mat<T> davg =
          (dh.array() * T(kLogScale) / (c.avg.array() + T(kLogEps))).matrix();
      nets::Mat<T> de = avg_.backward(davg, c.avg_in_len);
      nets::Mat<T> dd = (de.array() * c.d.array() * T(2)).matrix();
      const long len = c.d.cols();
      nets::Mat<T> dx(1, len);
      for (long t = 0; t < len; ++t) {
        dx(0, t) = dd(0, t);
        if (t + 1 < len) dx(0, t) -= dd(0, t + 1);
      }
      dxs[i] = dx;
    }
    return dxs;
  }

private:
  static constexpr double kLogEps = 1e-8;
  static constexpr double kLogCenter = -8.0;
  static constexpr double kLogScale = 0.25;

  struct Cache {
    nets::Mat<T> d, avg, xpad1, y1, xpad2, y2;
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> idx1, idx2;
    std::vector<long> max_idx;
    long avg_in_len = 0, gap_len = 0;
    nets::Vec<T> g;
  };

  std::string family_;
  int w_;
  nets::Conv1d<T> conv1_, conv2_;
  nets::Dense<T> head_;
  nets::AvgPool1d<T> avg_{8};
  nets::MaxPool1d<T> pool_{4};
  std::vector<Cache> cache_;
};

// ---------------------------------------------------------------------------

inline const std::vector<std::string>& known_families() {
  static const std::vector<std::string> kFamilies = {
      "toy_cnn_small", "toy_cnn_large", "res_tssdnet_like", "inc_tssdnet_like",
      "external"};
  return kFamilies;
}

inline int default_width(const std::string& family) {
  if (family == "toy_cnn_small") return 6;
  if (family == "toy_cnn_large") return 24;
  if (family == "res_tssdnet_like") return 16;
  if (family == "inc_tssdnet_like") return 12;
  throw ConfigError("unknown surrogate family: " + family);
}

template <typename T>
std::unique_ptr<ToyNetBase<T>> make_toy_net(const std::string& family, int width,
                                            Rng& rng) {
  const int w = width > 0 ? width : default_width(family);
  if (family == "res_tssdnet_like") return std::make_unique<ResToyNet<T>>(w, rng);
  if (family == "inc_tssdnet_like") return std::make_unique<IncToyNet<T>>(w, rng);
  if (family == "toy_cnn_small" || family == "toy_cnn_large")
    return std::make_unique<EnergyToyNet<T>>(family, w, rng);
  throw ConfigError("unknown surrogate family: " + family);
}

// P(real) = softmax(logits)[real_index], computed stably as a sigmoid of the
// logit difference and clamped into the open interval.
template <typename T>
nets::Vec<T> logits_to_preal(const nets::Mat<T>& logits, int real_index) {
  if (logits.rows() != 2) throw ShapeError("expected 2-class logits");
  if (real_index != 0 && real_index != 1)
    throw ConfigError("real class index must be 0 or 1");
  nets::Vec<T> p(logits.cols());
  const T tiny = std::numeric_limits<T>::epsilon();
  for (long i = 0; i < logits.cols(); ++i) {
    const T diff = logits(real_index, i) - logits(1 - real_index, i);
    p(i) = std::min(std::max(nets::stable_sigmoid(diff), tiny), T(1) - tiny);
  }
  return p;
}

// dL/dp -> dL/dlogits through the two-class softmax
template <typename T>
nets::Mat<T> preal_grad_to_logits(const nets::Vec<T>& p, const nets::Vec<T>& dp,
                                  int real_index) {
  nets::Mat<T> dlogits(2, p.size());
  for (long i = 0; i < p.size(); ++i) {
    const T g = dp(i) * p(i) * (T(1) - p(i));
    dlogits(real_index, i) = g;
    dlogits(1 - real_index, i) = -g;
  }
  return dlogits;
}

// One frozen ensemble member used during attack training.
template <typename T>
struct EnsembleMember {
  std::string model_id;
  std::string family;
  int real_index = 1;
  std::unique_ptr<ToyNetBase<T>> net;

  nets::Vec<T> score(const std::vector<nets::Mat<T>>& xs, bool want_cache) {
    try {
      return logits_to_preal(net->forward_logits(xs, want_cache), real_index);
    } catch (const ShapeError& e) {
      throw ShapeError(std::string(e.what()) + " [model_id=" + model_id + "]");
    }
  }

  std::vector<nets::Mat<T>> backward_score(const nets::Vec<T>& p,
                                           const nets::Vec<T>& dp) {
    return net->backward_logits(preal_grad_to_logits(p, dp, real_index));
  }
};

// rows = members in order, columns = batch items; P(real) everywhere
template <typename T>
nets::Mat<T> ensemble_score(std::vector<EnsembleMember<T>>& members,
                            const std::vector<nets::Mat<T>>& xs) {
  if (members.empty()) throw ConfigError("ensemble must have at least one member");
  nets::Mat<T> probs(static_cast<long>(members.size()), static_cast<long>(xs.size()));
  for (size_t m = 0; m < members.size(); ++m)
    probs.row(static_cast<long>(m)) = members[m].score(xs, false).transpose();
  return probs;
}

// ---------------------------------------------------------------------------
// evaluation-facing model handle (double precision)

struct SurrogateSpec {
  std::string model_id;      // defaults to family when empty
  std::string family;
  int width = 0;             // 0 -> family default
  std::string weights_path;  // required for toy families
  int real_class_index = 1;
  std::string command;       // external family: detector command
  uint64_t init_seed = 1;    // used only when weights_path is empty (tests)
};

class SurrogateModel {
public:
  std::string model_id;
  std::string family;
  bool frozen = true;
  int real_index = 1;
  std::shared_ptr<ToyNetBase<double>> net;  // null for external family
  std::string external_command;
  int sample_rate = 16000;
  double heldout_accuracy = -1.0;  // recorded by train_toy_surrogate

  // P(real) per frame
  Eigen::VectorXd score(const std::vector<Eigen::MatrixXd>& frames) const;
  // FNV hash over serialized parameter bytes (frozen-contract checks)
  uint64_t parameter_digest() const;
};

SurrogateModel load_surrogate(const SurrogateSpec& spec);
void save_surrogate(const SurrogateModel& model, const std::string& path);

struct ToySurrogateTrainConfig {
  std::string family = "res_tssdnet_like";
  int width = 0;
  int epochs = 8;
  double lr = 1e-3;
  uint64_t seed = 7;
  int batch_size = 32;
  long frame_len = 5980;
  int real_class_index = 1;
  int target_sample_rate = 16000;
};

// Trains a toy detector on the manifest's train subset and records held-out
// accuracy on the eval subset. Deterministic per seed.
SurrogateModel train_toy_surrogate(const DatasetManifest& manifest,
                                   const ToySurrogateTrainConfig& config);

// Loads a trained toy checkpoint into a T-precision net for attack training.
template <typename T>
EnsembleMember<T> load_ensemble_member(const SurrogateSpec& spec);

}  // namespace spoofbreak::surrogates
