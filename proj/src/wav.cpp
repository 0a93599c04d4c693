#include "spoofbreak/wav.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "spoofbreak/error.hpp"

namespace spoofbreak::wav {

namespace {

uint32_t rd_u32(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 |
         uint32_t(p[3]) << 24;
}

uint16_t rd_u16(const uint8_t* p) { return uint16_t(p[0]) | uint16_t(p[1]) << 8; }

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

DecodedAudio read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("wav: cannot open " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
  if (buf.size() < 44 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw DecodeError("wav: not a RIFF/WAVE file: " + path);

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const uint8_t* data = nullptr;
  size_t data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const char* tag = reinterpret_cast<const char*>(buf.data() + pos);
    uint32_t len = rd_u32(buf.data() + pos + 4);
    size_t body = pos + 8;
    if (body + len > buf.size()) len = static_cast<uint32_t>(buf.size() - body);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (len < 16) throw DecodeError("wav: truncated fmt chunk");
      format = rd_u16(buf.data() + body);
      channels = rd_u16(buf.data() + body + 2);
      rate = rd_u32(buf.data() + body + 4);
      bits = rd_u16(buf.data() + body + 14);
      if (format == kFormatExtensible && len >= 40) {
        // SubFormat GUID starts with the base format code.
        format = rd_u16(buf.data() + body + 24);
      }
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data = buf.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1);  // chunks are word-aligned
  }

  if (format == 0 || data == nullptr)
    throw DecodeError("wav: missing fmt/data chunk: " + path);
  if (channels == 0 || rate == 0)
    throw DecodeError("wav: bad fmt fields: " + path);
  const bool is_float = format == kFormatFloat;
  if (!is_float && format != kFormatPcm)
    throw DecodeError("wav: unsupported format code " + std::to_string(format));
  if (is_float) {
    if (bits != 32) throw DecodeError("wav: only 32-bit float supported");
  } else if (bits != 8 && bits != 16 && bits != 24) {
    throw DecodeError("wav: unsupported bit depth " + std::to_string(bits));
  }

  const size_t bytes_per = bits / 8;
  const size_t n_frames = data_len / (bytes_per * channels);

  DecodedAudio out;
  out.sample_rate = static_cast<int>(rate);
  out.channels.assign(channels, std::vector<double>(n_frames));
  const uint8_t* p = data;
  for (size_t i = 0; i < n_frames; ++i) {
    for (size_t c = 0; c < channels; ++c, p += bytes_per) {
      double v;
      switch (bits) {
        case 8:
          v = (static_cast<int>(p[0]) - 128) / 128.0;
          break;
        case 16: {
          int16_t s = static_cast<int16_t>(rd_u16(p));
          v = s / 32768.0;
          break;
        }
        case 24: {
          int32_t s = int32_t(p[0]) | int32_t(p[1]) << 8 | int32_t(p[2]) << 16;
          if (s & 0x800000) s |= ~0xFFFFFF;  // sign extend
          v = s / 8388608.0;
          break;
        }
        default: {  // 32-bit float
          float f;
          std::memcpy(&f, p, 4);
          v = f;
          break;
        }
      }
      out.channels[c][i] = v;
    }
  }
  return out;
}

std::vector<int16_t> quantize16(const std::vector<double>& samples) {
  std::vector<int16_t> q(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    double x = samples[i];
    if (x > 1.0) x = 1.0;
    if (x < -1.0) x = -1.0;
    long v = std::lround(x * 32767.0);  // lround = half away from zero
    if (v > 32767) v = 32767;
    if (v < -32768) v = -32768;
    q[i] = static_cast<int16_t>(v);
  }
  return q;
}

void write_wav16(const std::string& path, const std::vector<double>& samples,
                 int sample_rate) {
  if (samples.empty()) throw EmptyAudio("wav: refusing to write empty audio");
  std::vector<int16_t> q = quantize16(samples);

  const uint32_t data_len = static_cast<uint32_t>(q.size() * 2);
  std::vector<uint8_t> hdr(44);
  auto wr_u32 = [&](size_t at, uint32_t v) {
    hdr[at] = v & 0xFF;
    hdr[at + 1] = (v >> 8) & 0xFF;
    hdr[at + 2] = (v >> 16) & 0xFF;
    hdr[at + 3] = (v >> 24) & 0xFF;
  };
  auto wr_u16 = [&](size_t at, uint16_t v) {
    hdr[at] = v & 0xFF;
    hdr[at + 1] = (v >> 8) & 0xFF;
  };
  std::memcpy(hdr.data(), "RIFF", 4);
  wr_u32(4, 36 + data_len);
  std::memcpy(hdr.data() + 8, "WAVEfmt ", 8);
  wr_u32(16, 16);
  wr_u16(20, kFormatPcm);
  wr_u16(22, 1);  // mono
  wr_u32(24, static_cast<uint32_t>(sample_rate));
  wr_u32(28, static_cast<uint32_t>(sample_rate) * 2);
  wr_u16(32, 2);
  wr_u16(34, 16);
  std::memcpy(hdr.data() + 36, "data", 4);
  wr_u32(40, data_len);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("wav: cannot write " + path);
  out.write(reinterpret_cast<const char*>(hdr.data()), hdr.size());
  out.write(reinterpret_cast<const char*>(q.data()), data_len);
  if (!out) throw Error("wav: short write to " + path);
}

}  // namespace spoofbreak::wav
