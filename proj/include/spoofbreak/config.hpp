#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spoofbreak/error.hpp"

namespace spoofbreak::config {

struct DataSection {
  int target_sample_rate = 16000;
  long frame_len = 5980;
  std::string dataset_tag = "toy";
};

struct GeneratorSection {
  std::vector<int> stage_widths = {64, 128, 256, 128};
  double alpha_init = 0.01;
  double highpass_cutoff_hz = 30.0;
  int highpass_taps = 101;
};

struct DiscriminatorSection {
  int channels = 64;
  int fc1 = 256;
  int fc2 = 128;
};

struct EnsembleEntry {
  std::string model_id;
  std::string family = "res_tssdnet_like";
  int width = 0;  // 0 -> family default
  std::string weights_path;
  int real_class_index = 1;
  std::string command;  // external family only
  std::uint64_t init_seed = 1;

  bool operator==(const EnsembleEntry&) const = default;
};

struct EnsembleSection {
  std::vector<EnsembleEntry> members;

  EnsembleSection() {
    EnsembleEntry res;
    res.family = "res_tssdnet_like";
    EnsembleEntry inc;
    inc.family = "inc_tssdnet_like";
    members = {res, inc};
  }
};

struct TranscriptionSection {
  std::string backend = "mock";  // mock | asr_plugin
  std::string asr_command;
  std::string embedder = "mock";  // mock | plugin
  std::string embedder_command;
  int embed_dim = 64;
};

struct LossesSection {
  double lambda1 = 1.0;
  double lambda2 = 0.0001;
  double lambda3 = 1.0;
  double lambda4 = 0.01;
  std::string adversarial_form = "non_saturating";  // or "paper"
};

struct TrainingSection {
  int batch_size = 16;
  long total_steps = 200;
  double lr_g = 1e-4;
  double lr_d = 1e-4;
  std::uint64_t seed = 7;
  long checkpoint_every = 100;
};

struct EvaluationSection {
  double threshold = 0.5;
  int stft_n_fft = 512;
  int stft_hop = 128;
  std::vector<double> lambda2_grid = {0.1, 0.01, 0.001, 0.0001};
  std::vector<int> ensemble_grid = {2, 3};
};

struct RunConfig {
  DataSection data;
  GeneratorSection generator;
  DiscriminatorSection discriminator;
  EnsembleSection ensemble;
  TranscriptionSection transcription;
  LossesSection losses;
  TrainingSection training;
  EvaluationSection evaluation;
};

// Full materialization of every field (the resolved-config echo).
nlohmann::json to_json(const RunConfig& cfg);

// Applies a (possibly partial) JSON document over defaults. Unknown keys are
// rejected with their dotted path; cross-field invariants are validated.
RunConfig from_json(const nlohmann::json& j);

RunConfig load_config_file(const std::string& path);  // empty/-absent fields -> defaults
void write_config_file(const RunConfig& cfg, const std::string& path);

// "losses.lambda2=0.001" style override applied onto a JSON document; the
// value text is parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

void validate(const RunConfig& cfg);  // ConfigError with dotted path

bool operator==(const RunConfig& a, const RunConfig& b);

}  // namespace spoofbreak::config
