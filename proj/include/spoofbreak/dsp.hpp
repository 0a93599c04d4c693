#pragma once

#include <complex>
#include <vector>

#include <Eigen/Core>

#include "spoofbreak/audio_io.hpp"

namespace spoofbreak::dsp {

// Linear-phase FIR high-pass. Taps are symmetric with |sum| <= 1e-3.
struct FilterSpec {
  std::vector<double> taps;
  double cutoff_hz = 0.0;
  int sample_rate = 0;
};

// Log-magnitude STFT, values = log10(max(|X|, 1e-10)).
struct Spectrogram {
  Eigen::MatrixXd values;  // freq_bins x frames
  int n_fft = 0;
  int hop = 0;
  int sample_rate = 0;
};

// Windowed-sinc (Hamming) low-pass turned high-pass by spectral inversion.
FilterSpec design_highpass(double cutoff_hz, int sample_rate, int num_taps);

// Same-length zero-padded convolution, center-aligned. Linear in the input.
std::vector<double> apply_fir(const std::vector<double>& x,
                              const FilterSpec& filter);

// Complex frequency response of a tap vector at frequency hz.
std::complex<double> fir_response(const std::vector<double>& taps, double hz,
                                  int sample_rate);

// Hann-windowed STFT; frame count = 1 + floor((len - n_fft)/hop).
Spectrogram stft_logmag(const AudioClip& clip, int n_fft, int hop);

// In-place iterative radix-2 FFT (n must be a power of two).
void fft_radix2(std::vector<std::complex<double>>& a, bool inverse);

// 10*log10(peak^2 / MSE); capped at 99.0 when MSE < 1e-12.
double psnr(const std::vector<double>& a, const std::vector<double>& b,
            double peak);

// Mean local SSIM with a Gaussian window (7x7, sigma 1.5), K1=0.01, K2=0.03.
// Dynamic range is (max - min) over the pair; 1 substituted when constant.
double ssim(const Spectrogram& sa, const Spectrogram& sb);
double ssim_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace spoofbreak::dsp
