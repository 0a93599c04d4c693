#include "spoofbreak/flac.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "spoofbreak/error.hpp"

namespace spoofbreak::flac {

namespace {

class BitReader {
public:
  BitReader(const uint8_t* data, size_t size) : data_(data), size_(size) {}

  uint64_t bits(int n) {
    uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      if (pos_ >= size_ * 8) throw DecodeError("flac: bitstream truncated");
      v = (v << 1) | ((data_[pos_ >> 3] >> (7 - (pos_ & 7))) & 1);
      ++pos_;
    }
    return v;
  }

  int64_t signed_bits(int n) {
    uint64_t v = bits(n);
    if (n > 0 && (v & (1ULL << (n - 1)))) v |= ~((1ULL << n) - 1);
    return static_cast<int64_t>(v);
  }

  uint32_t unary() {
    uint32_t q = 0;
    while (bits(1) == 0) {
      ++q;
      if (q > 1u << 24) throw DecodeError("flac: runaway unary code");
    }
    return q;
  }

  void align() { pos_ = (pos_ + 7) & ~size_t(7); }
  size_t byte_pos() const { return pos_ >> 3; }
  bool exhausted() const { return pos_ >= size_ * 8; }

private:
  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
};

uint8_t crc8(const uint8_t* data, size_t len) {
  uint8_t crc = 0;
  for (size_t i = 0; i < len; ++i) {
    crc ^= data[i];
    for (int b = 0; b < 8; ++b)
      crc = (crc & 0x80) ? static_cast<uint8_t>((crc << 1) ^ 0x07)
                         : static_cast<uint8_t>(crc << 1);
  }
  return crc;
}

uint16_t crc16(const uint8_t* data, size_t len) {
  uint16_t crc = 0;
  for (size_t i = 0; i < len; ++i) {
    crc ^= static_cast<uint16_t>(data[i]) << 8;
    for (int b = 0; b < 8; ++b)
      crc = (crc & 0x8000) ? static_cast<uint16_t>((crc << 1) ^ 0x8005)
                           : static_cast<uint16_t>(crc << 1);
  }
  return crc;
}

// FLAC's extended UTF-8 coded number (up to 36 bits / 7 bytes).
uint64_t read_coded_number(BitReader& br) {
  uint64_t b0 = br.bits(8);
  if ((b0 & 0x80) == 0) return b0;
  int n = 0;
  for (uint8_t mask = 0x40; b0 & mask; mask >>= 1) ++n;
  if (n < 1 || n > 6) throw DecodeError("flac: bad coded number");
  uint64_t v = b0 & (0x3F >> n);
  for (int i = 0; i < n; ++i) {
    uint64_t b = br.bits(8);
    if ((b & 0xC0) != 0x80) throw DecodeError("flac: bad coded number byte");
    v = (v << 6) | (b & 0x3F);
  }
  return v;
}

void read_residual(BitReader& br, int predictor_order, int block_size,
                   std::vector<int64_t>& out) {
  const int method = static_cast<int>(br.bits(2));
  if (method > 1) throw DecodeError("flac: reserved residual method");
  const int param_bits = method == 0 ? 4 : 5;
  const uint32_t escape = method == 0 ? 0xF : 0x1F;
  const int part_order = static_cast<int>(br.bits(4));
  const int n_parts = 1 << part_order;
  if (block_size % n_parts != 0)
    throw DecodeError("flac: partition order does not divide block size");
  int idx = predictor_order;
  for (int p = 0; p < n_parts; ++p) {
    int count = block_size >> part_order;
    if (p == 0) count -= predictor_order;
    if (count < 0) throw DecodeError("flac: negative partition sample count");
    const uint32_t param = static_cast<uint32_t>(br.bits(param_bits));
    if (param == escape) {
      const int raw_bits = static_cast<int>(br.bits(5));
      for (int i = 0; i < count; ++i)
        out[idx++] = raw_bits == 0 ? 0 : br.signed_bits(raw_bits);
    } else {
      for (int i = 0; i < count; ++i) {
        const uint32_t q = br.unary();
        const uint64_t r = param == 0 ? 0 : br.bits(static_cast<int>(param));
        const uint64_t zz = (static_cast<uint64_t>(q) << param) | r;
        out[idx++] = static_cast<int64_t>(zz >> 1) ^ -static_cast<int64_t>(zz & 1);
      }
    }
  }
}

void apply_fixed_predictor(int order, std::vector<int64_t>& s) {
  for (size_t i = order; i < s.size(); ++i) {
    switch (order) {
      case 0:
        break;
      case 1:
        s[i] += s[i - 1];
        break;
      case 2:
        s[i] += 2 * s[i - 1] - s[i - 2];
        break;
      case 3:
        s[i] += 3 * s[i - 1] - 3 * s[i - 2] + s[i - 3];
        break;
      case 4:
        s[i] += 4 * s[i - 1] - 6 * s[i - 2] + 4 * s[i - 3] - s[i - 4];
        break;
      default:
        throw DecodeError("flac: fixed order > 4");
    }
  }
}

std::vector<int64_t> read_subframe(BitReader& br, int block_size, int bps) {
  if (br.bits(1) != 0) throw DecodeError("flac: bad subframe padding bit");
  const int type = static_cast<int>(br.bits(6));
  int wasted = 0;
  if (br.bits(1) == 1) wasted = static_cast<int>(br.unary()) + 1;
  const int eff_bps = bps - wasted;
  if (eff_bps <= 0) throw DecodeError("flac: wasted bits exceed bps");

  std::vector<int64_t> s(block_size, 0);
  if (type == 0) {  // constant
    const int64_t v = br.signed_bits(eff_bps);
    std::fill(s.begin(), s.end(), v);
  } else if (type == 1) {  // verbatim
    for (int i = 0; i < block_size; ++i) s[i] = br.signed_bits(eff_bps);
  } else if ((type & 0x38) == 0x08 && (type & 0x07) <= 4) {  // fixed
    const int order = type & 0x07;
    for (int i = 0; i < order; ++i) s[i] = br.signed_bits(eff_bps);
    read_residual(br, order, block_size, s);
    apply_fixed_predictor(order, s);
  } else if (type & 0x20) {  // LPC
    const int order = (type & 0x1F) + 1;
    for (int i = 0; i < order; ++i) s[i] = br.signed_bits(eff_bps);
    const int precision = static_cast<int>(br.bits(4)) + 1;
    if (precision == 16) throw DecodeError("flac: invalid LPC precision");
    const int shift = static_cast<int>(br.signed_bits(5));
    if (shift < 0) throw DecodeError("flac: negative LPC shift");
    std::vector<int64_t> coef(order);
    for (int i = 0; i < order; ++i) coef[i] = br.signed_bits(precision);
    read_residual(br, order, block_size, s);
    for (int i = order; i < block_size; ++i) {
      int64_t acc = 0;
      for (int j = 0; j < order; ++j) acc += coef[j] * s[i - 1 - j];
      s[i] += acc >> shift;
    }
  } else {
    throw DecodeError("flac: reserved subframe type");
  }
  if (wasted > 0)
    for (auto& v : s) v <<= wasted;
  return s;
}

const int kBlockSizeTable[16] = {0,    192,  576,  1152, 2304, 4608, -1,   -2,
                                 256,  512,  1024, 2048, 4096, 8192, 16384, 32768};
const int kSampleSizeTable[8] = {0, 8, 12, -1, 16, 20, 24, 32};

}  // namespace

bool looks_like_flac(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  return in && std::memcmp(magic, "fLaC", 4) == 0;
}

wav::DecodedAudio read_flac(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("flac: cannot open " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
  if (buf.size() < 42 || std::memcmp(buf.data(), "fLaC", 4) != 0)
    throw DecodeError("flac: bad magic: " + path);

  // metadata blocks
  size_t pos = 4;
  int channels = 0, bps = 0;
  uint32_t rate = 0;
  uint64_t total_samples = 0;
  bool have_streaminfo = false;
  for (;;) {
    if (pos + 4 > buf.size()) throw DecodeError("flac: truncated metadata");
    const bool last = (buf[pos] & 0x80) != 0;
    const int type = buf[pos] & 0x7F;
    const uint32_t len =
        uint32_t(buf[pos + 1]) << 16 | uint32_t(buf[pos + 2]) << 8 | buf[pos + 3];
    pos += 4;
    if (pos + len > buf.size()) throw DecodeError("flac: truncated metadata body");
    if (type == 0) {
      if (len < 34) throw DecodeError("flac: short STREAMINFO");
      const uint8_t* p = buf.data() + pos;
      rate = uint32_t(p[10]) << 12 | uint32_t(p[11]) << 4 | (p[12] >> 4);
      channels = ((p[12] >> 1) & 0x7) + 1;
      bps = ((p[12] & 1) << 4 | (p[13] >> 4)) + 1;
      total_samples = (uint64_t(p[13] & 0x0F) << 32) | uint32_t(p[14]) << 24 |
                      uint32_t(p[15]) << 16 | uint32_t(p[16]) << 8 | p[17];
      have_streaminfo = true;
    }
    pos += len;
    if (last) break;
  }
  if (!have_streaminfo || rate == 0 || channels == 0)
    throw DecodeError("flac: missing/invalid STREAMINFO");

  wav::DecodedAudio out;
  out.sample_rate = static_cast<int>(rate);
  out.channels.assign(channels, {});

  const double scale = static_cast<double>(1LL << (bps - 1));

  // frame loop
  while (pos < buf.size()) {
    BitReader br(buf.data() + pos, buf.size() - pos);
    const uint64_t sync = br.bits(14);
    if (sync != 0x3FFE) throw DecodeError("flac: lost frame sync");
    br.bits(1);  // reserved
    br.bits(1);  // blocking strategy
    const int bs_code = static_cast<int>(br.bits(4));
    const int sr_code = static_cast<int>(br.bits(4));
    const int chan_code = static_cast<int>(br.bits(4));
    const int ss_code = static_cast<int>(br.bits(3));
    br.bits(1);  // reserved
    read_coded_number(br);

    int block_size = kBlockSizeTable[bs_code];
    if (block_size == 0) throw DecodeError("flac: reserved block size code");
    if (block_size == -1) block_size = static_cast<int>(br.bits(8)) + 1;
    if (block_size == -2) block_size = static_cast<int>(br.bits(16)) + 1;
    if (sr_code == 12) br.bits(8);
    if (sr_code == 13 || sr_code == 14) br.bits(16);

    int frame_bps = kSampleSizeTable[ss_code];
    if (frame_bps == 0) frame_bps = bps;
    if (frame_bps < 0) throw DecodeError("flac: reserved sample size code");

    const size_t header_len = br.byte_pos();
    const uint8_t expect_crc8 = static_cast<uint8_t>(br.bits(8));
    if (crc8(buf.data() + pos, header_len) != expect_crc8)
      throw DecodeError("flac: frame header CRC mismatch");

    int n_sub = channels;
    if (chan_code >= 8 && chan_code <= 10) n_sub = 2;
    else if (chan_code > 10) throw DecodeError("flac: reserved channel assignment");
    if (chan_code < 8 && chan_code + 1 != channels)
      throw DecodeError("flac: frame/streaminfo channel mismatch");

    std::vector<std::vector<int64_t>> sub(n_sub);
    for (int c = 0; c < n_sub; ++c) {
      int sub_bps = frame_bps;
      // side channel carries one extra bit
      if ((chan_code == 8 && c == 1) || (chan_code == 9 && c == 0) ||
          (chan_code == 10 && c == 1))
        ++sub_bps;
      sub[c] = read_subframe(br, block_size, sub_bps);
    }
    br.align();
    const size_t frame_len_nocrc = br.byte_pos();
    const uint16_t expect_crc16 =
        static_cast<uint16_t>(br.bits(8)) << 8 | static_cast<uint16_t>(br.bits(8));
    if (crc16(buf.data() + pos, frame_len_nocrc) != expect_crc16)
      throw DecodeError("flac: frame CRC mismatch");

    // undo inter-channel decorrelation
    if (chan_code == 8) {  // left/side
      for (int i = 0; i < block_size; ++i) sub[1][i] = sub[0][i] - sub[1][i];
    } else if (chan_code == 9) {  // right/side
      for (int i = 0; i < block_size; ++i) sub[0][i] = sub[1][i] + sub[0][i];
    } else if (chan_code == 10) {  // mid/side
      for (int i = 0; i < block_size; ++i) {
        const int64_t side = sub[1][i];
        int64_t mid = (sub[0][i] << 1) | (side & 1);
        sub[0][i] = (mid + side) >> 1;
        sub[1][i] = (mid - side) >> 1;
      }
    }

    for (int c = 0; c < channels; ++c) {
      auto& dst = out.channels[c];
      dst.reserve(dst.size() + block_size);
      for (int i = 0; i < block_size; ++i) dst.push_back(sub[c][i] / scale);
    }
    pos += br.byte_pos();
  }

  if (total_samples > 0)
    for (auto& ch : out.channels)
      if (ch.size() > total_samples) ch.resize(total_samples);
  return out;
}

}  // namespace spoofbreak::flac
