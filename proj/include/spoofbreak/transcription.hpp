#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "spoofbreak/audio_io.hpp"
#include "spoofbreak/error.hpp"
#include "spoofbreak/nets/layers.hpp"

namespace spoofbreak::transcription {

struct Transcript {
  std::string text;  // uppercase words, single-space separated, trimmed
};

struct TextEmbedding {
  Eigen::VectorXd vector;
  bool empty_text = false;  // all-zero sentinel for empty transcripts
};

// Differentiable band-energy encoder: the clip is cut into 0.25 s windows
// (zero-padded tail), each window is projected onto fixed sine/cosine probes
// (3 per band, geometrically spaced 100 Hz..6 kHz), and per-band log energies
// form the frame representation. This is the train-time stand-in for an ASR
// encoder; the mock transcriber quantizes the same energies to words.
template <typename T>
class BandEncoder {
public:
  static constexpr int kBands = 8;
  static constexpr int kProbesPerBand = 3;
  static constexpr int kProbes = kBands * kProbesPerBand;
  static constexpr double kEnergyFloor = 1e-8;

  explicit BandEncoder(int sample_rate = 16000)
      : sample_rate_(sample_rate), window_(sample_rate / 4) {
    const double f_lo = 100.0, f_hi = 6000.0;
    probe_cos_.resize(kProbes, window_);
    probe_sin_.resize(kProbes, window_);
    const double wnorm = std::sqrt(2.0 / static_cast<double>(window_));
    for (int j = 0; j < kProbes; ++j) {
      const double f =
          f_lo * std::pow(f_hi / f_lo, static_cast<double>(j) / (kProbes - 1));
      for (long t = 0; t < window_; ++t) {
        const double ph = 2.0 * M_PI * f * static_cast<double>(t) /
                          static_cast<double>(sample_rate_);
        probe_cos_(j, t) = static_cast<T>(std::cos(ph) * wnorm);
        probe_sin_(j, t) = static_cast<T>(std::sin(ph) * wnorm);
      }
    }
  }

  int sample_rate() const { return sample_rate_; }
  long window() const { return window_; }
  static long window_count(long len, long window) {
    return (len + window - 1) / window;
  }

  struct Cache {
    // per window: probe coefficients, raw band energies
    nets::Mat<T> c, s;          // [kProbes x n_windows]
    nets::Mat<T> band_energy;   // [kBands x n_windows]
    long input_len = 0;
  };

  // x: [1 x L] -> features [n_windows x kBands] of log10 band energies
  nets::Mat<T> encode_item(const nets::Mat<T>& x, Cache* cache) const {
    if (x.rows() != 1 || x.cols() < 1)
      throw ShapeError("band encoder: expected a nonempty (1, L) frame");
    const long len = x.cols();
    const long nw = window_count(len, window_);
    nets::Mat<T> c(kProbes, nw), s(kProbes, nw);
    nets::Vec<T> seg(window_);
    for (long w = 0; w < nw; ++w) {
      const long start = w * window_;
      const long have = std::min(window_, len - start);
      seg.setZero();
      seg.head(have) = x.row(0).segment(start, have).transpose();
      c.col(w).noalias() = probe_cos_ * seg;
      s.col(w).noalias() = probe_sin_ * seg;
    }
    nets::Mat<T> feats(nw, kBands);
    nets::Mat<T> be(kBands, nw);
    for (long w = 0; w < nw; ++w)
      for (int b = 0; b < kBands; ++b) {
        T e = T(0);
        for (int j = b * kProbesPerBand; j < (b + 1) * kProbesPerBand; ++j)
          e += c(j, w) * c(j, w) + s(j, w) * s(j, w);
        be(b, w) = e;
        feats(w, b) = static_cast<T>(
            std::log10(kEnergyFloor + static_cast<double>(e)));
      }
    if (cache) {
      cache->c = std::move(c);
      cache->s = std::move(s);
      cache->band_energy = std::move(be);
      cache->input_len = len;
    }
    return feats;
  }

  // dfeats: [n_windows x kBands] -> dx [1 x L]
  nets::Mat<T> backward_item(const nets::Mat<T>& dfeats, const Cache& cache) const {
    const long nw = dfeats.rows();
    const T ln10 = static_cast<T>(std::log(10.0));
    nets::Mat<T> dx = nets::Mat<T>::Zero(1, cache.input_len);
    nets::Vec<T> dseg(window_);
    for (long w = 0; w < nw; ++w) {
      nets::Vec<T> dc = nets::Vec<T>::Zero(kProbes), ds = nets::Vec<T>::Zero(kProbes);
      for (int b = 0; b < kBands; ++b) {
        const T de = dfeats(w, b) /
                     ((static_cast<T>(kEnergyFloor) + cache.band_energy(b, w)) * ln10);
        for (int j = b * kProbesPerBand; j < (b + 1) * kProbesPerBand; ++j) {
          dc(j) = de * T(2) * cache.c(j, w);
          ds(j) = de * T(2) * cache.s(j, w);
        }
      }
      dseg.noalias() = probe_cos_.transpose() * dc;
      dseg.noalias() += probe_sin_.transpose() * ds;
      const long start = w * window_;
      const long have = std::min(window_, cache.input_len - start);
      dx.row(0).segment(start, have) += dseg.head(have).transpose();
    }
    return dx;
  }

  // Raw (pre-log) band energies per window, for the mock transcriber.
  nets::Mat<T> band_energies(const nets::Mat<T>& x) const {
    Cache c;
    encode_item(x, &c);
    return c.band_energy;
  }

private:
  int sample_rate_;
  long window_;
  nets::Mat<T> probe_cos_, probe_sin_;  // [kProbes x window]
};

// 1 - cosine between time-mean-pooled frame states; differentiable wrt b.
template <typename T>
T transcription_loss_train(const nets::Mat<T>& states_a, const nets::Mat<T>& states_b,
                           nets::Mat<T>* dstates_b = nullptr) {
  if (states_a.cols() != states_b.cols())
    throw ShapeError("transcription_loss_train: feature dim mismatch");
  if (states_a.rows() < 1 || states_b.rows() < 1)
    throw ShapeError("transcription_loss_train: empty state array");
  nets::Vec<T> a = states_a.colwise().mean().transpose();
  nets::Vec<T> b = states_b.colwise().mean().transpose();
  const T na = a.norm(), nb = b.norm();
  const T tiny = T(1e-30);
  if (na < tiny || nb < tiny) {
    if (dstates_b) dstates_b->setZero(states_b.rows(), states_b.cols());
    return (na < tiny && nb < tiny) ? T(0) : T(1);
  }
  const T cosv = a.dot(b) / (na * nb);
  if (dstates_b) {
    // d(1-cos)/db = -(a/(na*nb) - cos*b/nb^2), spread uniformly over frames
    nets::Vec<T> db = -(a / (na * nb) - (cosv / (nb * nb)) * b);
    dstates_b->resize(states_b.rows(), states_b.cols());
    const T inv_rows = T(1) / static_cast<T>(states_b.rows());
    for (long r = 0; r < states_b.rows(); ++r)
      dstates_b->row(r) = (db * inv_rows).transpose();
  }
  return T(1) - cosv;
}

// ---------------------------------------------------------------------------
// evaluation-facing backends (double precision)

struct BackendSpec {
  std::string backend_id = "mock";  // mock | asr_plugin
  std::string asr_command;          // for asr_plugin
  int sample_rate = 16000;
};

struct EmbedderSpec {
  std::string embedder_id = "mock";  // mock | plugin
  std::string command;               // for plugin
  int dim = 64;
};

class TranscriptionBackend {
public:
  static TranscriptionBackend make(const BackendSpec& spec);

  const std::string& backend_id() const { return spec_.backend_id; }
  Transcript transcribe(const AudioClip& clip) const;
  Eigen::MatrixXd encode_frames(const AudioClip& clip) const;
  const BandEncoder<double>& encoder() const { return encoder_; }

  // the fixed mock vocabulary (64 words)
  static const std::vector<std::string>& word_list();
  // quantize one window's band energies to a word index, or -1 for silence
  static int window_word_index(const Eigen::VectorXd& band_energy);

private:
  explicit TranscriptionBackend(const BackendSpec& spec)
      : spec_(spec), encoder_(spec.sample_rate) {}
  BackendSpec spec_;
  BandEncoder<double> encoder_;
};

class TextEmbedder {
public:
  static TextEmbedder make(const EmbedderSpec& spec);
  TextEmbedding embed(const std::string& text) const;
  int dim() const { return spec_.dim; }

private:
  explicit TextEmbedder(const EmbedderSpec& spec) : spec_(spec) {}
  EmbedderSpec spec_;
};

// 1 - cos on transcript embeddings; 0 when both transcripts empty, 1 when
// exactly one is empty (sentinel cosine is 0).
double transcription_loss_metric(const AudioClip& clip_a, const AudioClip& clip_b,
                                 const TranscriptionBackend& backend,
                                 const TextEmbedder& embedder);

// cos on transcript embeddings (1 when both empty, 0 when exactly one empty)
double text_similarity(const AudioClip& clip_a, const AudioClip& clip_b,
                       const TranscriptionBackend& backend,
                       const TextEmbedder& embedder);

double embedding_cosine(const TextEmbedding& a, const TextEmbedding& b);

}  // namespace spoofbreak::transcription
