#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "spoofbreak/dsp.hpp"
#include "spoofbreak/error.hpp"
#include "spoofbreak/rng.hpp"

using namespace spoofbreak;

namespace {

double db(double mag) { return 20.0 * std::log10(std::max(mag, 1e-300)); }

AudioClip clip_of(std::vector<double> samples, int rate) {
  AudioClip c;
  c.samples = std::move(samples);
  c.sample_rate = rate;
  c.clip_id = "test";
  return c;
}

}  // namespace

TEST_CASE("high-pass design: symmetric taps, near-zero dc, flat passband") {
  dsp::FilterSpec f = dsp::design_highpass(30.0, 16000, 101);
  REQUIRE(f.taps.size() == 101);
  for (int i = 0; i < 50; ++i)
    CHECK(f.taps[static_cast<size_t>(i)] ==
          doctest::Approx(f.taps[static_cast<size_t>(100 - i)]).epsilon(1e-12));

  double tap_sum = 0;
  for (double t : f.taps) tap_sum += t;
  CHECK(std::abs(tap_sum) < 1e-12);  // dc response designed out exactly

  CHECK(db(std::abs(dsp::fir_response(f.taps, 0.0, 16000))) < -40.0);
  // deep in the passband the filter is transparent
  for (double hz : {1000.0, 3000.0, 7000.0})
    CHECK(std::abs(db(std::abs(dsp::fir_response(f.taps, hz, 16000)))) < 0.1);

  CHECK_THROWS_AS(dsp::design_highpass(30.0, 16000, 100), InvalidArgument);
  CHECK_THROWS_AS(dsp::design_highpass(30.0, 16000, 2), InvalidArgument);
  CHECK_THROWS_AS(dsp::design_highpass(0.0, 16000, 101), InvalidArgument);
  CHECK_THROWS_AS(dsp::design_highpass(8000.0, 16000, 101), InvalidArgument);
}

TEST_CASE("high-pass transition: short filters recover within an octave") {
  // at a cutoff the 101-tap window can actually resolve, the response is
  // within 1 dB of unity one octave above the corner
  dsp::FilterSpec f = dsp::design_highpass(500.0, 16000, 101);
  const double gain_2fc = std::abs(dsp::fir_response(f.taps, 1000.0, 16000));
  CHECK(db(gain_2fc) > -1.0);
  CHECK(db(gain_2fc) < 1.0);
  CHECK(db(std::abs(dsp::fir_response(f.taps, 0.0, 16000))) < -60.0);
}

TEST_CASE("apply_fir matches direct convolution and is linear") {
  Rng rng(81);
  dsp::FilterSpec f = dsp::design_highpass(400.0, 16000, 21);
  std::vector<double> x(64), y(64);
  for (auto& v : x) v = rng.uniform(-1, 1);
  for (auto& v : y) v = rng.uniform(-1, 1);

  auto fx = dsp::apply_fir(x, f);
  REQUIRE(fx.size() == x.size());
  // direct centered convolution oracle
  const long mid = 10;
  for (long t = 0; t < 64; ++t) {
    double want = 0;
    for (long j = 0; j < 21; ++j) {
      const long src = t + j - mid;
      if (src >= 0 && src < 64) want += f.taps[static_cast<size_t>(j)] * x[static_cast<size_t>(src)];
    }
    CHECK(fx[static_cast<size_t>(t)] == doctest::Approx(want).epsilon(1e-12));
  }

  // linearity: F(ax + by) == a F(x) + b F(y)
  std::vector<double> mix(64);
  for (int i = 0; i < 64; ++i) mix[static_cast<size_t>(i)] = 2.0 * x[static_cast<size_t>(i)] - 0.5 * y[static_cast<size_t>(i)];
  auto fmix = dsp::apply_fir(mix, f);
  auto fy = dsp::apply_fir(y, f);
  for (int i = 0; i < 64; ++i)
    CHECK(fmix[static_cast<size_t>(i)] ==
          doctest::Approx(2.0 * fx[static_cast<size_t>(i)] - 0.5 * fy[static_cast<size_t>(i)]).epsilon(1e-10));

  CHECK_THROWS_AS(dsp::apply_fir({}, f), InvalidArgument);
}

TEST_CASE("fft matches a naive dft and inverts exactly") {
  Rng rng(82);
  const size_t n = 64;
  std::vector<std::complex<double>> a(n);
  for (auto& v : a) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  auto original = a;

  auto fa = a;
  dsp::fft_radix2(fa, false);
  for (size_t k = 0; k < n; ++k) {
    std::complex<double> want(0, 0);
    for (size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * M_PI * static_cast<double>(k * t) / static_cast<double>(n);
      want += original[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    CHECK(std::abs(fa[k] - want) < 1e-10);
  }

  dsp::fft_radix2(fa, true);
  for (size_t t = 0; t < n; ++t) CHECK(std::abs(fa[t] - original[t]) < 1e-12);

  std::vector<std::complex<double>> bad(48);
  CHECK_THROWS_AS(dsp::fft_radix2(bad, false), InvalidArgument);
}

TEST_CASE("stft places a pure tone in the right bin") {
  const int rate = 16000, n_fft = 512, hop = 128;
  const int bin = 40;  // 40 * 16000/512 = 1250 Hz
  const double f = bin * static_cast<double>(rate) / n_fft;
  std::vector<double> x(4000);
  for (size_t i = 0; i < x.size(); ++i)
    x[i] = std::sin(2 * M_PI * f * static_cast<double>(i) / rate);
  dsp::Spectrogram s = dsp::stft_logmag(clip_of(x, rate), n_fft, hop);
  CHECK(s.values.rows() == 257);
  CHECK(s.values.cols() == 1 + (4000 - 512) / 128);
  for (long fr = 0; fr < s.values.cols(); ++fr) {
    long peak_bin = 0;
    s.values.col(fr).maxCoeff(&peak_bin);
    CHECK(peak_bin == bin);
  }
  CHECK_THROWS_AS(dsp::stft_logmag(clip_of(x, rate), 500, 128), InvalidArgument);
  CHECK_THROWS_AS(dsp::stft_logmag(clip_of(x, rate), 512, 0), InvalidArgument);
  std::vector<double> tiny(100, 0.0);
  CHECK_THROWS_AS(dsp::stft_logmag(clip_of(tiny, rate), 512, 128), InvalidArgument);
}

TEST_CASE("psnr oracle values") {
  std::vector<double> a(100, 0.3);
  std::vector<double> b(100, 0.4);  // mse = 0.01
  CHECK(dsp::psnr(a, b, 1.0) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(dsp::psnr(a, a, 1.0) == 99.0);
  CHECK(dsp::psnr(a, b, 2.0) == doctest::Approx(20.0 + 20.0 * std::log10(2.0)));
  std::vector<double> c(99, 0.0);
  CHECK_THROWS_AS(dsp::psnr(a, c, 1.0), ShapeError);
  CHECK_THROWS_AS(dsp::psnr(a, b, 0.0), InvalidArgument);
  CHECK_THROWS_AS(dsp::psnr({}, {}, 1.0), InvalidArgument);
}

TEST_CASE("ssim is 1 on identical inputs and degrades with noise") {
  Rng rng(83);
  Eigen::MatrixXd img(32, 40);
  for (long i = 0; i < img.size(); ++i) img.data()[i] = rng.uniform(0, 1);
  CHECK(dsp::ssim_matrix(img, img) == doctest::Approx(1.0).epsilon(1e-12));

  Eigen::MatrixXd light = img, heavy = img;
  for (long i = 0; i < img.size(); ++i) {
    light.data()[i] += 0.02 * rng.normal();
    heavy.data()[i] += 0.5 * rng.normal();
  }
  const double s_light = dsp::ssim_matrix(img, light);
  const double s_heavy = dsp::ssim_matrix(img, heavy);
  CHECK(s_light > s_heavy);
  CHECK(s_light > 0.8);
  CHECK(s_heavy < 0.6);

  // constant pair: dynamic range substitutes 1, score stays 1
  Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(16, 16, 3.0);
  CHECK(dsp::ssim_matrix(flat, flat) == doctest::Approx(1.0));

  Eigen::MatrixXd other(32, 41);
  CHECK_THROWS_AS(dsp::ssim_matrix(img, other), ShapeError);
}

TEST_CASE("spectrogram ssim requires matching stft settings") {
  std::vector<double> x(2048, 0.0);
  for (size_t i = 0; i < x.size(); ++i)
    x[i] = std::sin(2 * M_PI * 440.0 * static_cast<double>(i) / 16000);
  auto sa = dsp::stft_logmag(clip_of(x, 16000), 512, 128);
  auto sb = dsp::stft_logmag(clip_of(x, 16000), 256, 128);
  CHECK_THROWS_AS(dsp::ssim(sa, sb), ShapeError);
  CHECK(dsp::ssim(sa, sa) == doctest::Approx(1.0));
}
