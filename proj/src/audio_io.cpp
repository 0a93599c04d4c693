#include "spoofbreak/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "spoofbreak/error.hpp"
#include "spoofbreak/flac.hpp"
#include "spoofbreak/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace spoofbreak {

std::string to_string(Label l) { return l == Label::kReal ? "real" : "fake"; }
std::string to_string(Subset s) {
  switch (s) {
    case Subset::kTrain: return "train";
    case Subset::kDev: return "dev";
    default: return "eval";
  }
}

Label label_from_string(const std::string& s) {
  if (s == "real") return Label::kReal;
  if (s == "fake") return Label::kFake;
  throw ParseError("unknown label: " + s);
}

Subset subset_from_string(const std::string& s) {
  if (s == "train") return Subset::kTrain;
  if (s == "dev") return Subset::kDev;
  if (s == "eval") return Subset::kEval;
  throw ParseError("unknown subset: " + s);
}

std::vector<const ManifestRecord*> DatasetManifest::subset_records(
    Subset s) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& r : records)
    if (r.subset == s) out.push_back(&r);
  return out;
}

std::string DatasetManifest::resolve_path(const ManifestRecord& r) const {
  if (root_dir.empty() || fs::path(r.path).is_absolute()) return r.path;
  return (fs::path(root_dir) / r.path).string();
}

void DatasetManifest::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& r : records)
    if (!seen.insert(r.clip_id).second)
      throw DataError("manifest: duplicate clip_id " + r.clip_id);
}

std::vector<double> resample(const std::vector<double>& x, int in_rate,
                             int out_rate) {
  if (in_rate == out_rate) return x;
  const size_t out_len = static_cast<size_t>(
      std::llround(static_cast<double>(x.size()) * out_rate / in_rate));
  std::vector<double> y(out_len, 0.0);
  const double ratio = static_cast<double>(in_rate) / out_rate;
  const double cutoff = std::min(1.0, 1.0 / ratio);  // of input Nyquist
  const int half_width = 32;
  for (size_t n = 0; n < out_len; ++n) {
    const double center = n * ratio;
    const long k0 = static_cast<long>(std::ceil(center - half_width / cutoff));
    const long k1 = static_cast<long>(std::floor(center + half_width / cutoff));
    double acc = 0.0;
    for (long k = std::max(0L, k0);
         k <= std::min(static_cast<long>(x.size()) - 1, k1); ++k) {
      const double t = (k - center) * cutoff;
      double w;
      if (std::abs(t) < 1e-12) {
        w = 1.0;
      } else {
        w = std::sin(M_PI * t) / (M_PI * t);
      }
      // Hann window over the sinc support
      const double u = (k - center) * cutoff / half_width;
      if (u <= -1.0 || u >= 1.0) continue;
      w *= 0.5 * (1.0 + std::cos(M_PI * u));
      acc += x[k] * w * cutoff;
    }
    y[n] = acc;
  }
  return y;
}

AudioClip load_clip(const std::string& path, int target_rate) {
  if (target_rate <= 0) throw InvalidArgument("load_clip: target_rate must be > 0");
  if (!fs::exists(path)) throw NotFound("load_clip: no such file: " + path);

  wav::DecodedAudio raw;
  if (flac::looks_like_flac(path)) {
    raw = flac::read_flac(path);
  } else {
    raw = wav::read_wav(path);
  }
  if (raw.channels.empty() || raw.channels[0].empty())
    throw EmptyAudio("load_clip: zero-length audio: " + path);

  // average channels to mono
  const size_t n = raw.channels[0].size();
  std::vector<double> mono(n, 0.0);
  for (const auto& ch : raw.channels) {
    const size_t m = std::min(n, ch.size());
    for (size_t i = 0; i < m; ++i) mono[i] += ch[i];
  }
  const double inv = 1.0 / raw.channels.size();
  for (auto& v : mono) v *= inv;

  if (raw.sample_rate != target_rate)
    mono = resample(mono, raw.sample_rate, target_rate);
  if (mono.empty()) throw EmptyAudio("load_clip: empty after resample: " + path);

  double peak = 0.0;
  for (double v : mono) peak = std::max(peak, std::abs(v));
  if (peak > 1.0)
    for (auto& v : mono) v /= peak;

  AudioClip clip;
  clip.clip_id = fs::path(path).stem().string();
  clip.samples = std::move(mono);
  clip.sample_rate = target_rate;
  clip.source_path = path;
  return clip;
}

DatasetManifest parse_asvspoof_protocol(const std::string& text,
                                        const std::string& root_dir) {
  DatasetManifest m;
  m.root_dir = root_dir;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::string> fields;
    std::string f;
    while (ls >> f) fields.push_back(f);
    if (fields.empty()) continue;
    if (fields.size() < 5)
      throw ParseError("protocol line " + std::to_string(line_no) + ": expected >= 5 fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    const std::string& key = fields[4];
    ManifestRecord r;
    r.clip_id = fields[1];
    r.path = fields[1] + ".flac";
    r.dataset_tag = "asvspoof2019-la";
    r.subset = Subset::kEval;
    if (key == "bonafide") {
      r.label = Label::kReal;
    } else if (key == "spoof") {
      r.label = Label::kFake;
    } else {
      throw ParseError("protocol line " + std::to_string(line_no) + ": unknown key '" + key + "'",
                       line_no);
    }
    if (!seen.insert(r.clip_id).second)
      throw ParseError("protocol line " + std::to_string(line_no) + ": duplicate clip_id " + r.clip_id,
                       line_no);
    m.records.push_back(std::move(r));
  }
  return m;
}

std::vector<std::vector<double>> chunk(const AudioClip& clip, long frame_len) {
  if (frame_len <= 0) throw InvalidArgument("chunk: frame_len must be > 0");
  if (clip.samples.empty()) throw EmptyAudio("chunk: empty clip");
  const size_t L = static_cast<size_t>(frame_len);
  const size_t n = clip.samples.size();
  const size_t n_frames = (n + L - 1) / L;
  std::vector<std::vector<double>> frames(n_frames);
  for (size_t fi = 0; fi < n_frames; ++fi) {
    frames[fi].resize(L);
    for (size_t j = 0; j < L; ++j) {
      const size_t src = fi * L + j;
      // tile-repeat: wrap around to the clip start inside the padded tail
      frames[fi][j] = clip.samples[src < n ? src : src % n];
    }
  }
  return frames;
}

std::vector<double> reassemble(const std::vector<std::vector<double>>& frames,
                               size_t original_len) {
  std::vector<double> out;
  for (const auto& f : frames) out.insert(out.end(), f.begin(), f.end());
  if (out.size() < original_len)
    throw ShapeError("reassemble: frames shorter than original length");
  out.resize(original_len);
  return out;
}

void write_manifest(const DatasetManifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("manifest: cannot write " + path);
  for (const auto& r : m.records) {
    json j = {{"clip_id", r.clip_id},
              {"path", r.path},
              {"label", to_string(r.label)},
              {"subset", to_string(r.subset)},
              {"dataset_tag", r.dataset_tag}};
    out << j.dump() << "\n";
  }
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("manifest: cannot open " + path);
  DatasetManifest m;
  m.root_dir = fs::path(path).parent_path().string();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError("manifest line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
    ManifestRecord r;
    try {
      r.clip_id = j.at("clip_id").get<std::string>();
      r.path = j.at("path").get<std::string>();
      r.label = label_from_string(j.at("label").get<std::string>());
      r.subset = subset_from_string(j.at("subset").get<std::string>());
      r.dataset_tag = j.value("dataset_tag", "");
    } catch (const json::exception& e) {
      throw ParseError("manifest line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
    m.records.push_back(std::move(r));
  }
  m.validate();
  return m;
}

}  // namespace spoofbreak
