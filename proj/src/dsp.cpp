#include "spoofbreak/dsp.hpp"

#include <cmath>

#include "spoofbreak/error.hpp"

namespace spoofbreak::dsp {

FilterSpec design_highpass(double cutoff_hz, int sample_rate, int num_taps) {
  if (num_taps < 3 || num_taps % 2 == 0)
    throw InvalidArgument("design_highpass: num_taps must be odd and >= 3");
  if (!(cutoff_hz > 0.0) || cutoff_hz >= sample_rate / 2.0)
    throw InvalidArgument("design_highpass: cutoff must lie in (0, Nyquist)");

  const int n = num_taps;
  const int mid = (n - 1) / 2;
  const double fc = cutoff_hz / sample_rate;  // normalized [0, 0.5)
  std::vector<double> lp(n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const int m = i - mid;
    double v = m == 0 ? 2.0 * fc : std::sin(2.0 * M_PI * fc * m) / (M_PI * m);
    v *= 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (n - 1));  // Hamming
    lp[i] = v;
    sum += v;
  }
  for (auto& v : lp) v /= sum;  // unity DC gain for the low-pass

  FilterSpec f;
  f.taps.assign(n, 0.0);
  for (int i = 0; i < n; ++i) f.taps[i] = -lp[i];
  f.taps[mid] += 1.0;  // spectral inversion
  f.cutoff_hz = cutoff_hz;
  f.sample_rate = sample_rate;
  return f;
}

std::vector<double> apply_fir(const std::vector<double>& x,
                              const FilterSpec& filter) {
  if (x.empty()) throw InvalidArgument("apply_fir: empty input");
  const long n = static_cast<long>(x.size());
  const long k = static_cast<long>(filter.taps.size());
  const long mid = (k - 1) / 2;
  std::vector<double> y(n, 0.0);
  for (long t = 0; t < n; ++t) {
    double acc = 0.0;
    const long j0 = std::max(0L, mid - t);
    const long j1 = std::min(k - 1, n - 1 - t + mid);
    for (long j = j0; j <= j1; ++j) acc += filter.taps[j] * x[t + j - mid];
    y[t] = acc;
  }
  return y;
}

std::complex<double> fir_response(const std::vector<double>& taps, double hz,
                                  int sample_rate) {
  std::complex<double> h(0.0, 0.0);
  const double w = 2.0 * M_PI * hz / sample_rate;
  for (size_t i = 0; i < taps.size(); ++i)
    h += taps[i] * std::exp(std::complex<double>(0.0, -w * static_cast<double>(i)));
  return h;
}

void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
  const size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw InvalidArgument("fft: length must be a power of two");
  // bit-reversal permutation
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * M_PI / static_cast<double>(len) * (inverse ? 1 : -1);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t j = 0; j < len / 2; ++j) {
        const auto u = a[i + j];
        const auto v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse)
    for (auto& v : a) v /= static_cast<double>(n);
}

Spectrogram stft_logmag(const AudioClip& clip, int n_fft, int hop) {
  if (n_fft <= 0 || (n_fft & (n_fft - 1)) != 0)
    throw InvalidArgument("stft: n_fft must be a power of two");
  if (hop <= 0 || hop > n_fft)
    throw InvalidArgument("stft: hop must lie in (0, n_fft]");
  const long len = static_cast<long>(clip.samples.size());
  if (len < n_fft) throw InvalidArgument("stft: clip shorter than n_fft");

  const int n_frames = 1 + static_cast<int>((len - n_fft) / hop);
  const int n_bins = n_fft / 2 + 1;
  std::vector<double> window(n_fft);
  for (int i = 0; i < n_fft; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n_fft);

  Spectrogram s;
  s.values.resize(n_bins, n_frames);
  s.n_fft = n_fft;
  s.hop = hop;
  s.sample_rate = clip.sample_rate;

  std::vector<std::complex<double>> buf(n_fft);
  for (int f = 0; f < n_frames; ++f) {
    const long off = static_cast<long>(f) * hop;
    for (int i = 0; i < n_fft; ++i)
      buf[i] = {clip.samples[off + i] * window[i], 0.0};
    fft_radix2(buf, false);
    for (int b = 0; b < n_bins; ++b)
      s.values(b, f) = std::log10(std::max(std::abs(buf[b]), 1e-10));
  }
  return s;
}

double psnr(const std::vector<double>& a, const std::vector<double>& b,
            double peak) {
  if (a.size() != b.size()) throw ShapeError("psnr: length mismatch");
  if (a.empty()) throw InvalidArgument("psnr: empty inputs");
  if (!(peak > 0.0)) throw InvalidArgument("psnr: peak must be > 0");
  double mse = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse < 1e-12) return 99.0;
  return 10.0 * std::log10(peak * peak / mse);
}

namespace {

Eigen::MatrixXd gaussian_kernel(int size, double sigma) {
  Eigen::VectorXd g(size);
  const double mid = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i)
    g(i) = std::exp(-0.5 * std::pow((i - mid) / sigma, 2));
  Eigen::MatrixXd k = g * g.transpose();
  return k / k.sum();
}

}  // namespace

double ssim_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("ssim: shape mismatch");

  const double hi = std::max(a.maxCoeff(), b.maxCoeff());
  const double lo = std::min(a.minCoeff(), b.minCoeff());
  double range = hi - lo;
  if (range <= 0.0) range = 1.0;  // constant pair
  const double c1 = std::pow(0.01 * range, 2);
  const double c2 = std::pow(0.03 * range, 2);

  // window shrinks on inputs smaller than 7 in either dimension
  const int wr = static_cast<int>(std::min<long>(7, a.rows()));
  const int wc = static_cast<int>(std::min<long>(7, a.cols()));
  Eigen::MatrixXd kern = gaussian_kernel(std::min(wr, wc), 1.5);
  if (wr != wc) {
    // non-square window for degenerate shapes: outer product of 1-D kernels
    Eigen::VectorXd gr(wr), gc(wc);
    for (int i = 0; i < wr; ++i)
      gr(i) = std::exp(-0.5 * std::pow((i - (wr - 1) / 2.0) / 1.5, 2));
    for (int i = 0; i < wc; ++i)
      gc(i) = std::exp(-0.5 * std::pow((i - (wc - 1) / 2.0) / 1.5, 2));
    kern = gr * gc.transpose();
    kern /= kern.sum();
  }

  const long out_r = a.rows() - wr + 1;
  const long out_c = a.cols() - wc + 1;
  double total = 0.0;
  long count = 0;
  for (long i = 0; i < out_r; ++i) {
    for (long j = 0; j < out_c; ++j) {
      double mu_a = 0, mu_b = 0, saa = 0, sbb = 0, sab = 0;
      for (int u = 0; u < wr; ++u) {
        for (int v = 0; v < wc; ++v) {
          const double w = kern(u, v);
          const double va = a(i + u, j + v);
          const double vb = b(i + u, j + v);
          mu_a += w * va;
          mu_b += w * vb;
          saa += w * va * va;
          sbb += w * vb * vb;
          sab += w * va * vb;
        }
      }
      const double var_a = saa - mu_a * mu_a;
      const double var_b = sbb - mu_b * mu_b;
      const double cov = sab - mu_a * mu_b;
      const double num = (2 * mu_a * mu_b + c1) * (2 * cov + c2);
      const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
      total += num / den;
      ++count;
    }
  }
  return count > 0 ? total / count : 1.0;
}

double ssim(const Spectrogram& sa, const Spectrogram& sb) {
  if (sa.n_fft != sb.n_fft || sa.hop != sb.hop)
    throw ShapeError("ssim: STFT settings differ");
  return ssim_matrix(sa.values, sb.values);
}

}  // namespace spoofbreak::dsp
