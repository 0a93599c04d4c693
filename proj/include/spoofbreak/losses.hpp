#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "spoofbreak/error.hpp"
#include "spoofbreak/nets/layers.hpp"

namespace spoofbreak::losses {

// probability clamp used by every log-loss
constexpr double kProbEps = 1e-7;

enum class AdversarialForm { paper, non_saturating };

inline AdversarialForm adversarial_form_from_string(const std::string& s) {
  if (s == "paper") return AdversarialForm::paper;
  if (s == "non_saturating") return AdversarialForm::non_saturating;
  throw ConfigError("unknown adversarial form: " + s);
}

inline std::string to_string(AdversarialForm f) {
  return f == AdversarialForm::paper ? "paper" : "non_saturating";
}

struct LossWeights {
  double lambda1 = 1.0;     // perceptual
  double lambda2 = 0.0001;  // forensics (surrogate ensemble)
  double lambda3 = 1.0;     // transcription
  double lambda4 = 0.01;    // adversarial

  void validate() const {
    auto check = [](double v, const char* name) {
      if (!(v >= 0.0) || !std::isfinite(v))
        throw ConfigError(std::string("loss weight must be finite and >= 0: ") + name);
    };
    check(lambda1, "lambda1");
    check(lambda2, "lambda2");
    check(lambda3, "lambda3");
    check(lambda4, "lambda4");
  }
};

struct LossBreakdown {
  double perceptual = 0;
  double forensics = 0;
  double transcription = 0;
  double adversarial = 0;
  double total = 0;
  double disc_loss = 0;
};

template <typename T>
T clamp_prob(T p) {
  const T eps = static_cast<T>(kProbEps);
  return std::min(std::max(p, eps), T(1) - eps);
}

// mean |x - y| over batch items and samples; optional gradient wrt y
template <typename T>
T perceptual_loss(const std::vector<nets::Mat<T>>& x,
                  const std::vector<nets::Mat<T>>& y,
                  std::vector<nets::Mat<T>>* dy = nullptr) {
  if (x.size() != y.size()) throw ShapeError("perceptual_loss: batch size mismatch");
  if (x.empty()) throw ShapeError("perceptual_loss: empty batch");
  long total_n = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    if (x[i].rows() != y[i].rows() || x[i].cols() != y[i].cols())
      throw ShapeError("perceptual_loss: frame shape mismatch");
    total_n += x[i].size();
  }
  if (dy) dy->assign(x.size(), nets::Mat<T>());
  const T inv_n = T(1) / static_cast<T>(total_n);
  T acc = T(0);
  for (size_t i = 0; i < x.size(); ++i) {
    acc += (x[i] - y[i]).array().abs().sum();
    if (dy) {
      (*dy)[i] = (y[i] - x[i]).unaryExpr(
          [inv_n](T v) { return v > T(0) ? inv_n : (v < T(0) ? -inv_n : T(0)); });
    }
  }
  return acc * inv_n;
}

// -mean log clamp(p) over all M*B surrogate probabilities; gradient wrt p
template <typename T>
T forensics_loss(const nets::Mat<T>& probs_real, nets::Mat<T>* dprobs = nullptr) {
  if (probs_real.size() == 0) throw ShapeError("forensics_loss: empty matrix");
  const T inv_n = T(1) / static_cast<T>(probs_real.size());
  const T eps = static_cast<T>(kProbEps);
  T acc = T(0);
  if (dprobs) dprobs->setZero(probs_real.rows(), probs_real.cols());
  for (long j = 0; j < probs_real.cols(); ++j)
    for (long i = 0; i < probs_real.rows(); ++i) {
      const T p = probs_real(i, j);
      const T pc = clamp_prob(p);
      acc -= std::log(pc);
      if (dprobs && p > eps && p < T(1) - eps) (*dprobs)(i, j) = -inv_n / pc;
    }
  return acc * inv_n;
}

// generator adversarial term; gradient wrt d
template <typename T>
T adversarial_loss_g(const nets::Vec<T>& d_on_attacked, AdversarialForm form,
                     nets::Vec<T>* dd = nullptr) {
  if (d_on_attacked.size() == 0) throw ShapeError("adversarial_loss_g: empty batch");
  const T inv_n = T(1) / static_cast<T>(d_on_attacked.size());
  const T eps = static_cast<T>(kProbEps);
  T acc = T(0);
  if (dd) dd->setZero(d_on_attacked.size());
  for (long i = 0; i < d_on_attacked.size(); ++i) {
    const T d = d_on_attacked(i);
    const T dc = clamp_prob(d);
    const bool interior = d > eps && d < T(1) - eps;
    if (form == AdversarialForm::paper) {
      acc += std::log(T(1) - dc);
      if (dd && interior) (*dd)(i) = -inv_n / (T(1) - dc);
    } else {
      acc -= std::log(dc);
      if (dd && interior) (*dd)(i) = -inv_n / dc;
    }
  }
  return acc * inv_n;
}

// standard BCE: -mean log d_real - mean log(1 - d_attacked); gradients
template <typename T>
T discriminator_loss(const nets::Vec<T>& d_real, const nets::Vec<T>& d_attacked,
                     nets::Vec<T>* dd_real = nullptr,
                     nets::Vec<T>* dd_attacked = nullptr) {
  if (d_real.size() == 0 || d_attacked.size() == 0)
    throw ShapeError("discriminator_loss: empty batch");
  const T eps = static_cast<T>(kProbEps);
  T acc = T(0);
  const T inv_r = T(1) / static_cast<T>(d_real.size());
  const T inv_a = T(1) / static_cast<T>(d_attacked.size());
  if (dd_real) dd_real->setZero(d_real.size());
  if (dd_attacked) dd_attacked->setZero(d_attacked.size());
  for (long i = 0; i < d_real.size(); ++i) {
    const T d = d_real(i);
    const T dc = clamp_prob(d);
    acc -= std::log(dc) * inv_r;
    if (dd_real && d > eps && d < T(1) - eps) (*dd_real)(i) = -inv_r / dc;
  }
  for (long i = 0; i < d_attacked.size(); ++i) {
    const T d = d_attacked(i);
    const T dc = clamp_prob(d);
    acc -= std::log(T(1) - dc) * inv_a;
    if (dd_attacked && d > eps && d < T(1) - eps)
      (*dd_attacked)(i) = inv_a / (T(1) - dc);
  }
  return acc;
}

struct LossTerms {
  double perceptual = 0;
  double forensics = 0;
  double transcription = 0;
  double adversarial = 0;
};

inline double total_generator_loss(const LossTerms& terms, const LossWeights& w) {
  w.validate();
  return w.lambda1 * terms.perceptual + w.lambda2 * terms.forensics +
         w.lambda3 * terms.transcription + w.lambda4 * terms.adversarial;
}

inline LossBreakdown make_breakdown(const LossTerms& terms, const LossWeights& w,
                                    double disc_loss) {
  LossBreakdown b;
  b.perceptual = terms.perceptual;
  b.forensics = terms.forensics;
  b.transcription = terms.transcription;
  b.adversarial = terms.adversarial;
  b.total = total_generator_loss(terms, w);
  b.disc_loss = disc_loss;
  return b;
}

}  // namespace spoofbreak::losses
