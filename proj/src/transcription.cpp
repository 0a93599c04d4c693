#include "spoofbreak/transcription.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "spoofbreak/rng.hpp"
#include "spoofbreak/subprocess.hpp"
#include "spoofbreak/wav.hpp"

namespace spoofbreak::transcription {

namespace {

constexpr double kSilenceEnergy = 1e-6;

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream iss(text);
  std::string w;
  while (iss >> w) words.push_back(w);
  return words;
}

Eigen::MatrixXd clip_as_frame(const AudioClip& clip) {
  if (clip.samples.empty()) throw EmptyAudio("clip has no samples: " + clip.clip_id);
  Eigen::MatrixXd x(1, static_cast<long>(clip.samples.size()));
  for (size_t i = 0; i < clip.samples.size(); ++i)
    x(0, static_cast<long>(i)) = clip.samples[i];
  return x;
}

}  // namespace

const std::vector<std::string>& TranscriptionBackend::word_list() {
  static const std::vector<std::string> kWords = {
      "OAK",    "REED",   "FERN",   "MOSS",   "PINE",   "ELM",    "ASH",
      "BIRCH",  "STONE",  "RIVER",  "CLOUD",  "STORM",  "EMBER",  "FROST",
      "GLADE",  "RIDGE",  "HARBOR", "MEADOW", "CANYON", "DELTA",  "DUNE",
      "FJORD",  "GROVE",  "HEATH",  "ISLET",  "KNOLL",  "LAGOON", "MARSH",
      "OASIS",  "PRAIRIE", "QUARRY", "REEF",  "SUMMIT", "TUNDRA", "VALE",
      "WHARF",  "BROOK",  "CLIFF",  "CREST",  "DRIFT",  "FLINT",  "GORGE",
      "HOLLOW", "INLET",  "JETTY",  "KELP",   "LEDGE",  "MESA",   "NOTCH",
      "ORCHARD", "PEAK",  "QUAY",   "RAPIDS", "SHOAL",  "TARN",   "UPLAND",
      "VERGE",  "WILLOW", "YONDER", "ZEPHYR", "BASIN",  "COVE",   "DALE",
      "EDDY"};
  return kWords;
}

int TranscriptionBackend::window_word_index(const Eigen::VectorXd& band_energy) {
  const int n = static_cast<int>(band_energy.size());
  double total = 0.0;
  for (int b = 0; b < n; ++b) total += band_energy(b);
  if (total < kSilenceEnergy) return -1;
  int top1 = 0;
  for (int b = 1; b < n; ++b)
    if (band_energy(b) > band_energy(top1)) top1 = b;
  int top2 = (top1 == 0) ? 1 : 0;
  for (int b = 0; b < n; ++b) {
    if (b == top1) continue;
    if (band_energy(b) > band_energy(top2)) top2 = b;
  }
  return top1 * n + top2;
}

TranscriptionBackend TranscriptionBackend::make(const BackendSpec& spec) {
  if (spec.backend_id != "mock" && spec.backend_id != "asr_plugin")
    throw ConfigError("unknown transcription backend: " + spec.backend_id);
  if (spec.backend_id == "asr_plugin" && spec.asr_command.empty())
    throw ConfigError("asr_plugin backend requires a command");
  return TranscriptionBackend(spec);
}

Transcript TranscriptionBackend::transcribe(const AudioClip& clip) const {
  if (spec_.backend_id == "asr_plugin") {
    const std::string wav_path = temp_path("asr", ".wav");
    wav::write_wav16(wav_path, clip.samples, clip.sample_rate);
    CommandResult res = run_command(spec_.asr_command + " " + shell_quote(wav_path));
    std::remove(wav_path.c_str());
    if (res.exit_code != 0)
      throw BackendError("asr plugin exited with code " +
                         std::to_string(res.exit_code));
    std::string line = res.out;
    if (auto nl = line.find('\n'); nl != std::string::npos) line = line.substr(0, nl);
    std::string upper;
    for (char c : line) upper += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return {trim(upper)};
  }

  Eigen::MatrixXd x = clip_as_frame(clip);
  BandEncoder<double>::Cache cache;
  encoder_.encode_item(x, &cache);
  const auto& words = word_list();
  std::string text;
  for (long w = 0; w < cache.band_energy.cols(); ++w) {
    const int idx = window_word_index(cache.band_energy.col(w));
    if (idx < 0) continue;
    if (!text.empty()) text += ' ';
    text += words[static_cast<size_t>(idx) % words.size()];
  }
  return {text};
}

Eigen::MatrixXd TranscriptionBackend::encode_frames(const AudioClip& clip) const {
  Eigen::MatrixXd x = clip_as_frame(clip);
  return encoder_.encode_item(x, nullptr);
}

TextEmbedder TextEmbedder::make(const EmbedderSpec& spec) {
  if (spec.embedder_id != "mock" && spec.embedder_id != "plugin")
    throw ConfigError("unknown text embedder: " + spec.embedder_id);
  if (spec.embedder_id == "plugin" && spec.command.empty())
    throw ConfigError("plugin embedder requires a command");
  if (spec.dim < 1) throw ConfigError("embedder dim must be positive");
  return TextEmbedder(spec);
}

TextEmbedding TextEmbedder::embed(const std::string& text) const {
  const std::string trimmed = trim(text);
  if (spec_.embedder_id == "plugin") {
    const std::string txt_path = temp_path("embed", ".txt");
    {
      std::ofstream out(txt_path, std::ios::binary);
      out << trimmed;
    }
    CommandResult res = run_command(spec_.command + " < " + shell_quote(txt_path));
    std::remove(txt_path.c_str());
    if (res.exit_code != 0)
      throw BackendError("embedder plugin exited with code " +
                         std::to_string(res.exit_code));
    std::istringstream iss(res.out);
    int dim = 0;
    if (!(iss >> dim) || dim < 1)
      throw BackendError("embedder plugin produced no dimension header");
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i)
      if (!(iss >> v(i))) throw BackendError("embedder plugin output truncated");
    TextEmbedding e{v, false};
    const double n = v.norm();
    if (n > 0) e.vector /= n;
    e.empty_text = trimmed.empty();
    if (e.empty_text) e.vector.setZero();
    return e;
  }

  TextEmbedding e;
  e.vector = Eigen::VectorXd::Zero(spec_.dim);
  if (trimmed.empty()) {
    e.empty_text = true;
    return e;
  }
  for (const std::string& w : split_words(trimmed)) {
    Rng rng(fnv1a64("sbword:" + w));
    Eigen::VectorXd wv(spec_.dim);
    for (int i = 0; i < spec_.dim; ++i) wv(i) = rng.normal();
    wv /= wv.norm();
    e.vector += wv;
  }
  const double n = e.vector.norm();
  if (n > 1e-12)
    e.vector /= n;
  else
    e.vector.setZero();  // degenerate cancellation; keep a usable vector
  return e;
}

double embedding_cosine(const TextEmbedding& a, const TextEmbedding& b) {
  if (a.empty_text && b.empty_text) return 1.0;
  if (a.empty_text || b.empty_text) return 0.0;
  const double na = a.vector.norm(), nb = b.vector.norm();
  if (na < 1e-30 || nb < 1e-30) return 0.0;
  return a.vector.dot(b.vector) / (na * nb);
}

double transcription_loss_metric(const AudioClip& clip_a, const AudioClip& clip_b,
                                 const TranscriptionBackend& backend,
                                 const TextEmbedder& embedder) {
  const Transcript ta = backend.transcribe(clip_a);
  const Transcript tb = backend.transcribe(clip_b);
  const TextEmbedding ea = embedder.embed(ta.text);
  const TextEmbedding eb = embedder.embed(tb.text);
  if (ea.empty_text && eb.empty_text) return 0.0;
  if (ea.empty_text || eb.empty_text) return 1.0;
  return 1.0 - embedding_cosine(ea, eb);
}

double text_similarity(const AudioClip& clip_a, const AudioClip& clip_b,
                       const TranscriptionBackend& backend,
                       const TextEmbedder& embedder) {
  const Transcript ta = backend.transcribe(clip_a);
  const Transcript tb = backend.transcribe(clip_b);
  return embedding_cosine(embedder.embed(ta.text), embedder.embed(tb.text));
}

}  // namespace spoofbreak::transcription
