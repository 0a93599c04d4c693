#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "spoofbreak/error.hpp"
#include "spoofbreak/rng.hpp"

namespace spoofbreak::nets {

// Activations are [channels x time]; a column is one time step, which keeps
// the per-tap convolution views contiguous for GEMM.
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

enum class SliceKind { kParam, kBuffer };

// Named views over parameter/buffer storage owned by the layers. Order of
// registration defines the flattening order used by the optimizer, the
// checkpoint serializer, and finite-difference probes.
template <typename T>
class ParamRegistry {
public:
  struct Slice {
    std::string name;
    T* value;
    T* grad;  // null for buffers
    long size;
    SliceKind kind;
  };

  void add_param(const std::string& name, Mat<T>& w, Mat<T>& g) {
    slices_.push_back({name, w.data(), g.data(), static_cast<long>(w.size()),
                       SliceKind::kParam});
  }
  void add_param(const std::string& name, Vec<T>& w, Vec<T>& g) {
    slices_.push_back({name, w.data(), g.data(), static_cast<long>(w.size()),
                       SliceKind::kParam});
  }
  void add_scalar_param(const std::string& name, T& w, T& g) {
    slices_.push_back({name, &w, &g, 1, SliceKind::kParam});
  }
  void add_buffer(const std::string& name, Vec<T>& w) {
    slices_.push_back(
        {name, w.data(), nullptr, static_cast<long>(w.size()), SliceKind::kBuffer});
  }

  const std::vector<Slice>& slices() const { return slices_; }

  long param_count() const {
    long n = 0;
    for (const auto& s : slices_)
      if (s.kind == SliceKind::kParam) n += s.size;
    return n;
  }

  void zero_grad() {
    for (auto& s : slices_)
      if (s.grad)
        for (long i = 0; i < s.size; ++i) s.grad[i] = T(0);
  }

  std::vector<T> gather_params() const {
    std::vector<T> out;
    out.reserve(param_count());
    for (const auto& s : slices_)
      if (s.kind == SliceKind::kParam) out.insert(out.end(), s.value, s.value + s.size);
    return out;
  }

  void scatter_params(const std::vector<T>& flat) {
    long off = 0;
    for (auto& s : slices_) {
      if (s.kind != SliceKind::kParam) continue;
      for (long i = 0; i < s.size; ++i) s.value[i] = flat[off + i];
      off += s.size;
    }
    if (off != static_cast<long>(flat.size()))
      throw ShapeError("scatter_params: size mismatch");
  }

  std::vector<T> gather_grads() const {
    std::vector<T> out;
    out.reserve(param_count());
    for (const auto& s : slices_)
      if (s.kind == SliceKind::kParam) out.insert(out.end(), s.grad, s.grad + s.size);
    return out;
  }

private:
  std::vector<Slice> slices_;
};

// ---------------------------------------------------------------------------
// elementwise activations

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) {
    return T(1) / (T(1) + std::exp(-x));
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
Mat<T> swish_forward(const Mat<T>& z) {
  return z.unaryExpr([](T v) { return v * stable_sigmoid(v); });
}

// dy/dz = s(z) * (1 + z * (1 - s(z)))
template <typename T>
Mat<T> swish_backward(const Mat<T>& dy, const Mat<T>& z) {
  Mat<T> dz(z.rows(), z.cols());
  for (long j = 0; j < z.cols(); ++j)
    for (long i = 0; i < z.rows(); ++i) {
      const T s = stable_sigmoid(z(i, j));
      dz(i, j) = dy(i, j) * s * (T(1) + z(i, j) * (T(1) - s));
    }
  return dz;
}

template <typename T>
Mat<T> tanh_forward(const Mat<T>& z) {
  return z.unaryExpr([](T v) { return std::tanh(v); });
}

// takes the cached output y = tanh(z)
template <typename T>
Mat<T> tanh_backward_from_output(const Mat<T>& dy, const Mat<T>& y) {
  return (dy.array() * (T(1) - y.array().square())).matrix();
}

// ---------------------------------------------------------------------------
// 1-D convolution, stride 1, optional dilation; "same" keeps the length,
// "valid" shrinks it by dilation*(k-1).

template <typename T>
struct Conv1d {
  int c_in = 0, c_out = 0, k = 1, dilation = 1;
  bool same_pad = true;
  bool has_bias = true;
  Mat<T> w;   // [c_out x c_in*k], tap-major blocks
  Vec<T> b;
  Mat<T> gw;
  Vec<T> gb;

  Conv1d() = default;
  Conv1d(int ci, int co, int kk, bool same = true, bool bias = true, int dil = 1)
      : c_in(ci), c_out(co), k(kk), dilation(dil), same_pad(same), has_bias(bias) {
    w.setZero(c_out, c_in * k);
    gw.setZero(c_out, c_in * k);
    b.setZero(c_out);
    gb.setZero(c_out);
  }

  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(c_in) * k);
    for (long i = 0; i < w.size(); ++i)
      w.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
    b.setZero();
  }

  int pad() const { return same_pad ? dilation * (k - 1) / 2 : 0; }
  long out_len(long l_in) const {
    return same_pad ? l_in : l_in - static_cast<long>(dilation) * (k - 1);
  }
  long param_count() const { return w.size() + (has_bias ? b.size() : 0); }

  void register_params(ParamRegistry<T>& reg, const std::string& prefix) {
    reg.add_param(prefix + ".w", w, gw);
    if (has_bias) reg.add_param(prefix + ".b", b, gb);
  }

  Mat<T> forward(const Mat<T>& x, Mat<T>* xpad_cache) const {
    if (x.rows() != c_in) throw ShapeError("conv1d: channel mismatch");
    const long L = x.cols();
    const long P = pad();
    const long Lout = out_len(L);
    if (Lout <= 0) throw ShapeError("conv1d: input too short for valid conv");
    Mat<T> xpad;
    xpad.setZero(c_in, L + 2 * P);
    xpad.middleCols(P, L) = x;
    Mat<T> y(c_out, Lout);
    if (has_bias)
      y.colwise() = b;
    else
      y.setZero();
    for (int j = 0; j < k; ++j)
      y.noalias() +=
          w.middleCols(static_cast<long>(j) * c_in, c_in) *
          xpad.middleCols(static_cast<long>(j) * dilation, Lout);
    if (xpad_cache) *xpad_cache = std::move(xpad);
    return y;
  }

  // Accumulates gw/gb and returns dL/dx (padding stripped).
  Mat<T> backward(const Mat<T>& dy, const Mat<T>& xpad) {
    const long Lout = dy.cols();
    if (has_bias) gb.noalias() += dy.rowwise().sum();
    Mat<T> dxpad = Mat<T>::Zero(c_in, xpad.cols());
    for (int j = 0; j < k; ++j) {
      gw.middleCols(static_cast<long>(j) * c_in, c_in).noalias() +=
          dy * xpad.middleCols(static_cast<long>(j) * dilation, Lout).transpose();
      dxpad.middleCols(static_cast<long>(j) * dilation, Lout).noalias() +=
          w.middleCols(static_cast<long>(j) * c_in, c_in).transpose() * dy;
    }
    const long P = pad();
    return dxpad.middleCols(P, xpad.cols() - 2 * P);
  }
};

// ---------------------------------------------------------------------------
// max pooling, window == stride, tail remainder dropped

template <typename T>
struct MaxPool1d {
  int stride = 2;

  explicit MaxPool1d(int s = 2) : stride(s) {}

  Mat<T> forward(const Mat<T>& x, Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>* idx) const {
    const long Lout = x.cols() / stride;
    if (Lout <= 0) throw ShapeError("maxpool: input shorter than stride");
    Mat<T> y(x.rows(), Lout);
    if (idx) idx->resize(x.rows(), Lout);
    for (long t = 0; t < Lout; ++t) {
      for (long c = 0; c < x.rows(); ++c) {
        T best = x(c, t * stride);
        int best_j = 0;
        for (int j = 1; j < stride; ++j) {
          const T v = x(c, t * stride + j);
          if (v > best) {
            best = v;
            best_j = j;
          }
        }
        y(c, t) = best;
        if (idx) (*idx)(c, t) = best_j;
      }
    }
    return y;
  }

  Mat<T> backward(const Mat<T>& dy,
                  const Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>& idx,
                  long l_in) const {
    Mat<T> dx = Mat<T>::Zero(dy.rows(), l_in);
    for (long t = 0; t < dy.cols(); ++t)
      for (long c = 0; c < dy.rows(); ++c)
        dx(c, t * stride + idx(c, t)) += dy(c, t);
    return dx;
  }
};

// average pooling, window == stride, tail dropped
template <typename T>
struct AvgPool1d {
  int stride = 2;

  explicit AvgPool1d(int s = 2) : stride(s) {}

  Mat<T> forward(const Mat<T>& x) const {
    const long Lout = x.cols() / stride;
    if (Lout <= 0) throw ShapeError("avgpool: input shorter than stride");
    Mat<T> y = Mat<T>::Zero(x.rows(), Lout);
    for (long t = 0; t < Lout; ++t) {
      for (int j = 0; j < stride; ++j) y.col(t) += x.col(t * stride + j);
      y.col(t) /= static_cast<T>(stride);
    }
    return y;
  }

  Mat<T> backward(const Mat<T>& dy, long l_in) const {
    Mat<T> dx = Mat<T>::Zero(dy.rows(), l_in);
    const T inv = T(1) / static_cast<T>(stride);
    for (long t = 0; t < dy.cols(); ++t)
      for (int j = 0; j < stride; ++j) dx.col(t * stride + j) = dy.col(t) * inv;
    return dx;
  }
};

// ---------------------------------------------------------------------------
// batch normalization over (batch, time) per channel

template <typename T>
struct BatchNorm1d {
  int channels = 0;
  T momentum = T(0.1);
  T eps = T(1e-5);
  Vec<T> gamma, beta, ggamma, gbeta;
  Vec<T> running_mean, running_var;

  struct Cache {
    std::vector<Mat<T>> xhat;
    Vec<T> invstd;
    long n = 0;
  };

  BatchNorm1d() = default;
  explicit BatchNorm1d(int c) : channels(c) {
    gamma.setOnes(c);
    beta.setZero(c);
    ggamma.setZero(c);
    gbeta.setZero(c);
    running_mean.setZero(c);
    running_var.setOnes(c);
  }

  void register_params(ParamRegistry<T>& reg, const std::string& prefix) {
    reg.add_param(prefix + ".gamma", gamma, ggamma);
    reg.add_param(prefix + ".beta", beta, gbeta);
    reg.add_buffer(prefix + ".running_mean", running_mean);
    reg.add_buffer(prefix + ".running_var", running_var);
  }

  std::vector<Mat<T>> forward(const std::vector<Mat<T>>& xs, bool training,
                              Cache* cache) {
    Vec<T> mean(channels), var(channels), invstd(channels);
    long n = 0;
    if (training) {
      Vec<T> sum = Vec<T>::Zero(channels), sumsq = Vec<T>::Zero(channels);
      for (const auto& x : xs) {
        sum += x.rowwise().sum();
        sumsq += x.array().square().matrix().rowwise().sum();
        n += x.cols();
      }
      if (n < 2) throw ShapeError("batchnorm: needs >= 2 positions");
      mean = sum / static_cast<T>(n);
      var = sumsq / static_cast<T>(n) - mean.array().square().matrix();
      var = var.cwiseMax(T(0));
      running_mean = (T(1) - momentum) * running_mean + momentum * mean;
      const T unbias = static_cast<T>(n) / static_cast<T>(n - 1);
      running_var = (T(1) - momentum) * running_var + momentum * (var * unbias);
    } else {
      mean = running_mean;
      var = running_var;
    }
    for (int c = 0; c < channels; ++c) invstd(c) = T(1) / std::sqrt(var(c) + eps);

    std::vector<Mat<T>> ys;
    ys.reserve(xs.size());
    if (cache) {
      cache->xhat.clear();
      cache->invstd = invstd;
      cache->n = n;
    }
    for (const auto& x : xs) {
      Mat<T> xhat =
          ((x.colwise() - mean).array().colwise() * invstd.array()).matrix();
      Mat<T> y =
          ((xhat.array().colwise() * gamma.array()).colwise() + beta.array())
              .matrix();
      if (cache) cache->xhat.push_back(std::move(xhat));
      ys.push_back(std::move(y));
    }
    return ys;
  }

  // training-mode backward; accumulates ggamma/gbeta
  std::vector<Mat<T>> backward(const std::vector<Mat<T>>& dys, const Cache& cache) {
    Vec<T> sum_dy = Vec<T>::Zero(channels), sum_dy_xhat = Vec<T>::Zero(channels);
    for (size_t b = 0; b < dys.size(); ++b) {
      sum_dy += dys[b].rowwise().sum();
      sum_dy_xhat += (dys[b].array() * cache.xhat[b].array()).matrix().rowwise().sum();
    }
    gbeta += sum_dy;
    ggamma += sum_dy_xhat;
    const T inv_n = T(1) / static_cast<T>(cache.n);
    std::vector<Mat<T>> dxs;
    dxs.reserve(dys.size());
    for (size_t b = 0; b < dys.size(); ++b) {
      Mat<T> term = dys[b];
      term.colwise() -= (sum_dy * inv_n);
      term -= (cache.xhat[b].array().colwise() * (sum_dy_xhat * inv_n).array()).matrix();
      Mat<T> dx =
          (term.array().colwise() * (gamma.array() * cache.invstd.array())).matrix();
      dxs.push_back(std::move(dx));
    }
    return dxs;
  }
};

// ---------------------------------------------------------------------------
// fully connected

template <typename T>
struct Dense {
  int in = 0, out = 0;
  Mat<T> w;
  Vec<T> b;
  Mat<T> gw;
  Vec<T> gb;

  Dense() = default;
  Dense(int i, int o) : in(i), out(o) {
    w.setZero(o, i);
    gw.setZero(o, i);
    b.setZero(o);
    gb.setZero(o);
  }

  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (long i = 0; i < w.size(); ++i)
      w.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
    b.setZero();
  }

  long param_count() const { return w.size() + b.size(); }

  void register_params(ParamRegistry<T>& reg, const std::string& prefix) {
    reg.add_param(prefix + ".w", w, gw);
    reg.add_param(prefix + ".b", b, gb);
  }

  Vec<T> forward(const Vec<T>& x) const {
    if (x.size() != in) throw ShapeError("dense: input size mismatch");
    return w * x + b;
  }

  Vec<T> backward(const Vec<T>& dy, const Vec<T>& x) {
    gw.noalias() += dy * x.transpose();
    gb += dy;
    return w.transpose() * dy;
  }
};

// [C x L] -> flat vector, column-major (time-major) order
template <typename T>
Vec<T> flatten(const Mat<T>& x) {
  return Eigen::Map<const Vec<T>>(x.data(), x.size());
}

template <typename T>
Mat<T> unflatten(const Vec<T>& v, long rows, long cols) {
  return Eigen::Map<const Mat<T>>(v.data(), rows, cols);
}

// mean over time: [C x L] -> [C]
template <typename T>
Vec<T> global_avg_pool(const Mat<T>& x) {
  return x.rowwise().mean();
}

template <typename T>
Mat<T> global_avg_pool_backward(const Vec<T>& dy, long l_in) {
  Mat<T> dx(dy.size(), l_in);
  dx.colwise() = dy * (T(1) / static_cast<T>(l_in));
  return dx;
}

// ---------------------------------------------------------------------------
// adaptive-moment optimizer over a registry's parameters

template <typename T>
class Adam {
public:
  Adam() = default;
  explicit Adam(long n_params, double lr = 1e-4, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.assign(n_params, T(0));
    v_.assign(n_params, T(0));
  }

  void step(ParamRegistry<T>& reg) {
    ++t_;
    const T b1 = static_cast<T>(beta1_);
    const T b2 = static_cast<T>(beta2_);
    const T corr1 = T(1) - static_cast<T>(std::pow(beta1_, t_));
    const T corr2 = T(1) - static_cast<T>(std::pow(beta2_, t_));
    const T alpha = static_cast<T>(lr_);
    long off = 0;
    for (const auto& s : reg.slices()) {
      if (s.kind != SliceKind::kParam) continue;
      for (long i = 0; i < s.size; ++i) {
        const T g = s.grad[i];
        m_[off + i] = b1 * m_[off + i] + (T(1) - b1) * g;
        v_[off + i] = b2 * v_[off + i] + (T(1) - b2) * g * g;
        const T mhat = m_[off + i] / corr1;
        const T vhat = v_[off + i] / corr2;
        s.value[i] -= alpha * mhat / (std::sqrt(vhat) + static_cast<T>(eps_));
      }
      off += s.size;
    }
  }

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  long step_count() const { return t_; }
  void set_step_count(long t) { t_ = t; }
  std::vector<T>& moment1() { return m_; }
  std::vector<T>& moment2() { return v_; }
  const std::vector<T>& moment1() const { return m_; }
  const std::vector<T>& moment2() const { return v_; }

private:
  double lr_ = 1e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  std::vector<T> m_, v_;
};

}  // namespace spoofbreak::nets
