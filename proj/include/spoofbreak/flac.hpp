#pragma once

#include <string>

#include "spoofbreak/wav.hpp"

namespace spoofbreak::flac {

// Native-FLAC decoder covering the subframe types real encoders emit
// (constant, verbatim, fixed 0-4, LPC) with Rice/Rice2 residual coding and
// CRC-8/CRC-16 verification. Output is scaled to [-1, 1).
wav::DecodedAudio read_flac(const std::string& path);

bool looks_like_flac(const std::string& path);

}  // namespace spoofbreak::flac
