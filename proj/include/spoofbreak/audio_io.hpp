#pragma once

#include <string>
#include <vector>

namespace spoofbreak {

// Normalized mono waveform. `samples` are finite and inside [-1, 1].
struct AudioClip {
  std::string clip_id;
  std::vector<double> samples;
  int sample_rate = 0;
  std::string source_path;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

enum class Label { kReal, kFake };
enum class Subset { kTrain, kDev, kEval };

std::string to_string(Label l);
std::string to_string(Subset s);
Label label_from_string(const std::string& s);
Subset subset_from_string(const std::string& s);

struct ManifestRecord {
  std::string clip_id;
  std::string path;  // relative to the manifest root_dir
  Label label = Label::kFake;
  Subset subset = Subset::kTrain;
  std::string dataset_tag;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::string root_dir;

  std::vector<const ManifestRecord*> subset_records(Subset s) const;
  std::string resolve_path(const ManifestRecord& r) const;
  // throws DataError on duplicate clip_ids
  void validate() const;
};

// Decodes WAV or FLAC, averages channels to mono, resamples to target_rate,
// and peak-normalizes only when some |sample| exceeds 1.
AudioClip load_clip(const std::string& path, int target_rate);

// Windowed-sinc resampler; output length is round(len * out_rate / in_rate).
std::vector<double> resample(const std::vector<double>& x, int in_rate,
                             int out_rate);

// ASVspoof LA protocol lines: SPEAKER CLIP_ID - ATTACK {bonafide|spoof}.
// Paths are formed as <clip_id>.flac under root_dir; bonafide -> real.
DatasetManifest parse_asvspoof_protocol(const std::string& text,
                                        const std::string& root_dir);

// Tile-repeat padding: short clips repeat to frame_len; long clips split into
// ceil(len/frame_len) frames, last frame tile-padded from the clip start.
std::vector<std::vector<double>> chunk(const AudioClip& clip, long frame_len);

// Concatenates frames and trims to original_len (inverse of chunk up to the
// padded tail).
std::vector<double> reassemble(const std::vector<std::vector<double>>& frames,
                               size_t original_len);

// Newline-delimited JSON, one record per line.
void write_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

}  // namespace spoofbreak
