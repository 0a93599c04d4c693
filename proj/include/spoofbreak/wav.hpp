#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace spoofbreak::wav {

struct DecodedAudio {
  std::vector<std::vector<double>> channels;  // one vector per channel
  int sample_rate = 0;
};

// Reads PCM WAV: 8-bit unsigned, 16/24-bit signed, 32-bit float
// (plus the WAVE_FORMAT_EXTENSIBLE wrappers of those). Integer formats are
// scaled to [-1, 1); float data is passed through untouched.
DecodedAudio read_wav(const std::string& path);

// Writes mono 16-bit PCM. Samples are clamped to [-1, 1] and quantized with
// round-half-away-from-zero at scale 32767.
void write_wav16(const std::string& path, const std::vector<double>& samples,
                 int sample_rate);

std::vector<int16_t> quantize16(const std::vector<double>& samples);

}  // namespace spoofbreak::wav
