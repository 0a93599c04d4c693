#include "spoofbreak/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>

namespace spoofbreak::config {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(path + " must be an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
          return key == a;
        }) == allowed.end())
      throw ConfigError("unknown config key: " + path + "." + key);
  }
}

template <typename T>
void get_to(const json& j, const char* key, const std::string& path, T& out) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception& e) {
    throw ConfigError("bad value at " + path + "." + key + ": " + e.what());
  }
}

}  // namespace

nlohmann::json to_json(const RunConfig& cfg) {
  json j;
  j["data"] = {{"target_sample_rate", cfg.data.target_sample_rate},
               {"frame_len", cfg.data.frame_len},
               {"dataset_tag", cfg.data.dataset_tag}};
  j["generator"] = {{"stage_widths", cfg.generator.stage_widths},
                    {"alpha_init", cfg.generator.alpha_init},
                    {"highpass_cutoff_hz", cfg.generator.highpass_cutoff_hz},
                    {"highpass_taps", cfg.generator.highpass_taps}};
  j["discriminator"] = {{"channels", cfg.discriminator.channels},
                        {"fc1", cfg.discriminator.fc1},
                        {"fc2", cfg.discriminator.fc2}};
  json members = json::array();
  for (const auto& m : cfg.ensemble.members)
    members.push_back({{"model_id", m.model_id},
                       {"family", m.family},
                       {"width", m.width},
                       {"weights_path", m.weights_path},
                       {"real_class_index", m.real_class_index},
                       {"command", m.command},
                       {"init_seed", m.init_seed}});
  j["ensemble"] = {{"members", members}};
  j["transcription"] = {{"backend", cfg.transcription.backend},
                        {"asr_command", cfg.transcription.asr_command},
                        {"embedder", cfg.transcription.embedder},
                        {"embedder_command", cfg.transcription.embedder_command},
                        {"embed_dim", cfg.transcription.embed_dim}};
  j["losses"] = {{"lambda1", cfg.losses.lambda1},
                 {"lambda2", cfg.losses.lambda2},
                 {"lambda3", cfg.losses.lambda3},
                 {"lambda4", cfg.losses.lambda4},
                 {"adversarial_form", cfg.losses.adversarial_form}};
  j["training"] = {{"batch_size", cfg.training.batch_size},
                   {"total_steps", cfg.training.total_steps},
                   {"lr_g", cfg.training.lr_g},
                   {"lr_d", cfg.training.lr_d},
                   {"seed", cfg.training.seed},
                   {"checkpoint_every", cfg.training.checkpoint_every}};
  j["evaluation"] = {{"threshold", cfg.evaluation.threshold},
                     {"stft_n_fft", cfg.evaluation.stft_n_fft},
                     {"stft_hop", cfg.evaluation.stft_hop},
                     {"lambda2_grid", cfg.evaluation.lambda2_grid},
                     {"ensemble_grid", cfg.evaluation.ensemble_grid}};
  return j;
}

RunConfig from_json(const nlohmann::json& j) {
  RunConfig cfg;
  if (j.is_null()) {
    validate(cfg);
    return cfg;
  }
  reject_unknown(j, "(root)",
                 {"data", "generator", "discriminator", "ensemble", "transcription",
                  "losses", "training", "evaluation"});

  if (j.contains("data")) {
    const json& s = j.at("data");
    reject_unknown(s, "data", {"target_sample_rate", "frame_len", "dataset_tag"});
    get_to(s, "target_sample_rate", "data", cfg.data.target_sample_rate);
    get_to(s, "frame_len", "data", cfg.data.frame_len);
    get_to(s, "dataset_tag", "data", cfg.data.dataset_tag);
  }
  if (j.contains("generator")) {
    const json& s = j.at("generator");
    reject_unknown(s, "generator",
                   {"stage_widths", "alpha_init", "highpass_cutoff_hz", "highpass_taps"});
    get_to(s, "stage_widths", "generator", cfg.generator.stage_widths);
    get_to(s, "alpha_init", "generator", cfg.generator.alpha_init);
    get_to(s, "highpass_cutoff_hz", "generator", cfg.generator.highpass_cutoff_hz);
    get_to(s, "highpass_taps", "generator", cfg.generator.highpass_taps);
  }
  if (j.contains("discriminator")) {
    const json& s = j.at("discriminator");
    reject_unknown(s, "discriminator", {"channels", "fc1", "fc2"});
    get_to(s, "channels", "discriminator", cfg.discriminator.channels);
    get_to(s, "fc1", "discriminator", cfg.discriminator.fc1);
    get_to(s, "fc2", "discriminator", cfg.discriminator.fc2);
  }
  if (j.contains("ensemble")) {
    const json& s = j.at("ensemble");
    reject_unknown(s, "ensemble", {"members"});
    if (s.contains("members")) {
      if (!s.at("members").is_array())
        throw ConfigError("ensemble.members must be an array");
      cfg.ensemble.members.clear();
      size_t idx = 0;
      for (const json& mj : s.at("members")) {
        const std::string path = "ensemble.members[" + std::to_string(idx++) + "]";
        reject_unknown(mj, path,
                       {"model_id", "family", "width", "weights_path",
                        "real_class_index", "command", "init_seed"});
        EnsembleEntry m;
        get_to(mj, "model_id", path, m.model_id);
        get_to(mj, "family", path, m.family);
        get_to(mj, "width", path, m.width);
        get_to(mj, "weights_path", path, m.weights_path);
        get_to(mj, "real_class_index", path, m.real_class_index);
        get_to(mj, "command", path, m.command);
        get_to(mj, "init_seed", path, m.init_seed);
        cfg.ensemble.members.push_back(std::move(m));
      }
    }
  }
  if (j.contains("transcription")) {
    const json& s = j.at("transcription");
    reject_unknown(s, "transcription",
                   {"backend", "asr_command", "embedder", "embedder_command",
                    "embed_dim"});
    get_to(s, "backend", "transcription", cfg.transcription.backend);
    get_to(s, "asr_command", "transcription", cfg.transcription.asr_command);
    get_to(s, "embedder", "transcription", cfg.transcription.embedder);
    get_to(s, "embedder_command", "transcription", cfg.transcription.embedder_command);
    get_to(s, "embed_dim", "transcription", cfg.transcription.embed_dim);
  }
  if (j.contains("losses")) {
    const json& s = j.at("losses");
    reject_unknown(s, "losses",
                   {"lambda1", "lambda2", "lambda3", "lambda4", "adversarial_form"});
    get_to(s, "lambda1", "losses", cfg.losses.lambda1);
    get_to(s, "lambda2", "losses", cfg.losses.lambda2);
    get_to(s, "lambda3", "losses", cfg.losses.lambda3);
    get_to(s, "lambda4", "losses", cfg.losses.lambda4);
    get_to(s, "adversarial_form", "losses", cfg.losses.adversarial_form);
  }
  if (j.contains("training")) {
    const json& s = j.at("training");
    reject_unknown(s, "training",
                   {"batch_size", "total_steps", "lr_g", "lr_d", "seed",
                    "checkpoint_every"});
    get_to(s, "batch_size", "training", cfg.training.batch_size);
    get_to(s, "total_steps", "training", cfg.training.total_steps);
    get_to(s, "lr_g", "training", cfg.training.lr_g);
    get_to(s, "lr_d", "training", cfg.training.lr_d);
    get_to(s, "seed", "training", cfg.training.seed);
    get_to(s, "checkpoint_every", "training", cfg.training.checkpoint_every);
  }
  if (j.contains("evaluation")) {
    const json& s = j.at("evaluation");
    reject_unknown(s, "evaluation",
                   {"threshold", "stft_n_fft", "stft_hop", "lambda2_grid",
                    "ensemble_grid"});
    get_to(s, "threshold", "evaluation", cfg.evaluation.threshold);
    get_to(s, "stft_n_fft", "evaluation", cfg.evaluation.stft_n_fft);
    get_to(s, "stft_hop", "evaluation", cfg.evaluation.stft_hop);
    get_to(s, "lambda2_grid", "evaluation", cfg.evaluation.lambda2_grid);
    get_to(s, "ensemble_grid", "evaluation", cfg.evaluation.ensemble_grid);
  }

  validate(cfg);
  return cfg;
}

void validate(const RunConfig& cfg) {
  auto positive = [](double v, const char* path) {
    if (!(v > 0) || !std::isfinite(v))
      throw ConfigError(std::string("must be positive and finite: ") + path);
  };
  auto non_negative = [](double v, const char* path) {
    if (!(v >= 0) || !std::isfinite(v))
      throw ConfigError(std::string("must be finite and >= 0: ") + path);
  };

  positive(cfg.data.target_sample_rate, "data.target_sample_rate");
  positive(static_cast<double>(cfg.data.frame_len), "data.frame_len");

  if (cfg.generator.stage_widths.size() != 4)
    throw ConfigError("generator.stage_widths must list exactly 4 widths");
  for (int w : cfg.generator.stage_widths)
    positive(w, "generator.stage_widths");
  non_negative(std::abs(cfg.generator.alpha_init), "generator.alpha_init");
  positive(cfg.generator.highpass_cutoff_hz, "generator.highpass_cutoff_hz");
  if (cfg.generator.highpass_taps < 3 || cfg.generator.highpass_taps % 2 == 0)
    throw ConfigError("generator.highpass_taps must be odd and >= 3");
  if (cfg.generator.highpass_cutoff_hz >= cfg.data.target_sample_rate / 2.0)
    throw ConfigError("generator.highpass_cutoff_hz must be below Nyquist");

  positive(cfg.discriminator.channels, "discriminator.channels");
  positive(cfg.discriminator.fc1, "discriminator.fc1");
  positive(cfg.discriminator.fc2, "discriminator.fc2");
  if (cfg.data.frame_len < 12)
    throw ConfigError("data.frame_len too short for the discriminator stack");

  if (cfg.ensemble.members.empty())
    throw ConfigError("ensemble.members must not be empty");
  for (size_t i = 0; i < cfg.ensemble.members.size(); ++i) {
    const auto& m = cfg.ensemble.members[i];
    const std::string path = "ensemble.members[" + std::to_string(i) + "]";
    static const std::vector<std::string> kFamilies = {
        "toy_cnn_small", "toy_cnn_large", "res_tssdnet_like", "inc_tssdnet_like",
        "external"};
    if (std::find(kFamilies.begin(), kFamilies.end(), m.family) == kFamilies.end())
      throw ConfigError("unknown family at " + path + ".family: " + m.family);
    if (m.real_class_index != 0 && m.real_class_index != 1)
      throw ConfigError(path + ".real_class_index must be 0 or 1");
    if (m.width < 0) throw ConfigError(path + ".width must be >= 0");
  }

  if (cfg.transcription.backend != "mock" && cfg.transcription.backend != "asr_plugin")
    throw ConfigError("transcription.backend must be mock or asr_plugin");
  if (cfg.transcription.embedder != "mock" && cfg.transcription.embedder != "plugin")
    throw ConfigError("transcription.embedder must be mock or plugin");
  positive(cfg.transcription.embed_dim, "transcription.embed_dim");

  non_negative(cfg.losses.lambda1, "losses.lambda1");
  non_negative(cfg.losses.lambda2, "losses.lambda2");
  non_negative(cfg.losses.lambda3, "losses.lambda3");
  non_negative(cfg.losses.lambda4, "losses.lambda4");
  if (cfg.losses.adversarial_form != "paper" &&
      cfg.losses.adversarial_form != "non_saturating")
    throw ConfigError("losses.adversarial_form must be paper or non_saturating");

  if (cfg.training.batch_size < 2)
    throw ConfigError("training.batch_size must be >= 2 (batch norm)");
  positive(static_cast<double>(cfg.training.total_steps), "training.total_steps");
  positive(cfg.training.lr_g, "training.lr_g");
  positive(cfg.training.lr_d, "training.lr_d");
  positive(static_cast<double>(cfg.training.checkpoint_every),
           "training.checkpoint_every");

  if (!(cfg.evaluation.threshold >= 0.0 && cfg.evaluation.threshold <= 1.0))
    throw ConfigError("evaluation.threshold must be in [0, 1]");
  positive(cfg.evaluation.stft_n_fft, "evaluation.stft_n_fft");
  if ((cfg.evaluation.stft_n_fft & (cfg.evaluation.stft_n_fft - 1)) != 0)
    throw ConfigError("evaluation.stft_n_fft must be a power of two");
  if (cfg.evaluation.stft_hop < 1 ||
      cfg.evaluation.stft_hop > cfg.evaluation.stft_n_fft)
    throw ConfigError("evaluation.stft_hop must be in [1, stft_n_fft]");
  if (cfg.evaluation.lambda2_grid.empty() || cfg.evaluation.ensemble_grid.empty())
    throw ConfigError("evaluation grids must not be empty");
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (text.find_first_not_of(" \t\r\n") == std::string::npos)
    return from_json(nlohmann::json(nullptr));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse failure in " + path + ": " + e.what());
  }
  return from_json(j);
}

void write_config_file(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write config file: " + path);
  out << to_json(cfg).dump(2) << "\n";
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must look like section.key=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string value_text = assignment.substr(eq + 1);

  nlohmann::json value;
  try {
    value = nlohmann::json::parse(value_text);
  } catch (const nlohmann::json::exception&) {
    value = value_text;  // plain string
  }

  nlohmann::json* node = &doc;
  size_t start = 0;
  while (true) {
    const size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) throw ConfigError("empty key segment in override: " + assignment);
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

bool operator==(const RunConfig& a, const RunConfig& b) {
  return to_json(a) == to_json(b);
}

}  // namespace spoofbreak::config
