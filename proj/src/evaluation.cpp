#include "spoofbreak/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "spoofbreak/dsp.hpp"
#include "spoofbreak/png.hpp"
#include "spoofbreak/rng.hpp"
#include "spoofbreak/training.hpp"
#include "spoofbreak/transcription.hpp"
#include "spoofbreak/wav.hpp"

namespace fs = std::filesystem;

namespace spoofbreak::evaluation {

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::kWhite: return "white";
    case Scenario::kGray: return "gray";
    case Scenario::kBlack: return "black";
  }
  return "white";
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "white") return Scenario::kWhite;
  if (s == "gray") return Scenario::kGray;
  if (s == "black") return Scenario::kBlack;
  throw ConfigError("unknown scenario: " + s + " (expected white|gray|black)");
}

void validate_scenarios(const std::vector<ScenarioSpec>& scenarios,
                        const std::vector<std::string>& ensemble_families) {
  const std::set<std::string> fams(ensemble_families.begin(), ensemble_families.end());
  for (const auto& spec : scenarios) {
    for (const auto& v : spec.victims) {
      const bool known = fams.count(v.family) > 0;
      if (spec.scenario == Scenario::kBlack && known)
        throw ConfigError("black-box victim " + v.model_id +
                          " shares family " + v.family + " with the ensemble");
      if (spec.scenario != Scenario::kBlack && !known)
        throw ConfigError(to_string(spec.scenario) + "-box victim " + v.model_id +
                          " has family " + v.family + " outside the ensemble");
    }
  }
}

std::vector<ScenarioSpec> scenarios_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("scenarios: expected a JSON array");
  std::vector<ScenarioSpec> out;
  for (size_t si = 0; si < j.size(); ++si) {
    const auto& js = j[si];
    const std::string where = "scenarios[" + std::to_string(si) + "]";
    if (!js.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, _] : js.items())
      if (key != "scenario" && key != "victims")
        throw ConfigError("unknown config key: " + where + "." + key);
    ScenarioSpec spec;
    spec.scenario = scenario_from_string(js.value("scenario", "white"));
    if (!js.contains("victims") || !js.at("victims").is_array())
      throw ConfigError(where + ".victims: expected an array");
    const auto& jv = js.at("victims");
    for (size_t vi = 0; vi < jv.size(); ++vi) {
      const auto& item = jv[vi];
      const std::string vwhere = where + ".victims[" + std::to_string(vi) + "]";
      if (!item.is_object()) throw ConfigError(vwhere + ": expected an object");
      static const std::set<std::string> allowed = {
          "model_id", "family", "width", "weights_path",
          "real_class_index", "command", "init_seed"};
      for (const auto& [key, _] : item.items())
        if (!allowed.count(key))
          throw ConfigError("unknown config key: " + vwhere + "." + key);
      surrogates::SurrogateSpec v;
      try {
        v.model_id = item.value("model_id", std::string());
        v.family = item.value("family", std::string("res_tssdnet_like"));
        v.width = item.value("width", 0);
        v.weights_path = item.value("weights_path", std::string());
        v.real_class_index = item.value("real_class_index", 1);
        v.command = item.value("command", std::string());
        v.init_seed = item.value("init_seed", uint64_t{1});
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(vwhere + ": " + e.what());
      }
      spec.victims.push_back(std::move(v));
    }
    out.push_back(std::move(spec));
  }
  return out;
}

std::vector<ScenarioSpec> load_scenarios_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open scenarios file: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scenarios file " + path + " does not parse: " + e.what());
  }
  return scenarios_from_json(j);
}

std::vector<PairRecord> read_pairing_index(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw NotFound("pairing index not found: " + path);
  std::vector<PairRecord> out;
  std::string line;
  long lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      PairRecord r;
      r.clip_id = j.at("clip_id").get<std::string>();
      r.original_path = j.at("original_path").get<std::string>();
      r.attacked_path = j.at("attacked_path").get<std::string>();
      r.label = label_from_string(j.at("label").get<std::string>());
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("pairing index " + path + " line " + std::to_string(lineno) +
                      ": " + e.what());
    }
  }
  return out;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json jrows = nlohmann::json::array();
  for (const auto& r : rows)
    jrows.push_back({{"victim_id", r.victim_id},
                     {"dataset_tag", r.dataset_tag},
                     {"scenario", r.scenario},
                     {"acc_ba", r.acc_ba},
                     {"acc_aa", r.acc_aa},
                     {"drop", r.drop},
                     {"success_rate", r.success_rate}});
  nlohmann::json javg = nlohmann::json::object();
  for (const auto& [name, avg] : scenario_averages)
    javg[name] = {{"acc_ba", avg.acc_ba}, {"acc_aa", avg.acc_aa}, {"drop", avg.drop}};
  return {{"rows", jrows},
          {"scenario_averages", javg},
          {"quality",
           {{"mean_psnr", quality.mean_psnr},
            {"mean_ssim", quality.mean_ssim},
            {"mean_text_similarity", quality.mean_text_similarity}}}};
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string EvalReport::to_csv() const {
  std::string out = "victim_id,dataset_tag,scenario,acc_ba,acc_aa,drop,success_rate\n";
  for (const auto& r : rows)
    out += r.victim_id + "," + r.dataset_tag + "," + r.scenario + "," +
           fmt(r.acc_ba) + "," + fmt(r.acc_aa) + "," + fmt(r.drop) + "," +
           fmt(r.success_rate) + "\n";
  return out;
}

namespace {

double score_clip(const surrogates::SurrogateModel& victim, const AudioClip& clip) {
  Eigen::MatrixXd x(1, static_cast<long>(clip.samples.size()));
  for (size_t i = 0; i < clip.samples.size(); ++i)
    x(0, static_cast<long>(i)) = clip.samples[i];
  std::vector<Eigen::MatrixXd> frames;
  frames.push_back(std::move(x));
  return victim.score(frames)(0);
}

// acc with fake clips swapped for their attacked files; success over fakes
double accuracy_with_pairs(const surrogates::SurrogateModel& victim,
                           const DatasetManifest& manifest,
                           const std::map<std::string, PairRecord>& pair_map,
                           double threshold, double* success_rate) {
  long correct = 0, total = 0, fake_total = 0, fake_as_real = 0;
  for (const auto* rec : manifest.subset_records(Subset::kEval)) {
    std::string path;
    if (rec->label == Label::kFake) {
      auto it = pair_map.find(rec->clip_id);
      if (it == pair_map.end() || !fs::exists(it->second.attacked_path))
        throw DataError("missing attacked file for clip_id " + rec->clip_id);
      path = it->second.attacked_path;
    } else {
      path = manifest.resolve_path(*rec);
    }
    AudioClip clip = load_clip(path, victim.sample_rate);
    const bool said_real = score_clip(victim, clip) >= threshold;
    const bool is_real = rec->label == Label::kReal;
    correct += (said_real == is_real) ? 1 : 0;
    ++total;
    if (!is_real) {
      ++fake_total;
      fake_as_real += said_real ? 1 : 0;
    }
  }
  if (total == 0) throw DataError("manifest eval subset is empty");
  if (success_rate)
    *success_rate = fake_total == 0
                        ? 0.0
                        : static_cast<double>(fake_as_real) / fake_total;
  return static_cast<double>(correct) / total;
}

}  // namespace

double detector_accuracy(const surrogates::SurrogateModel& victim,
                         const DatasetManifest& manifest, double threshold) {
  long correct = 0, total = 0;
  for (const auto* rec : manifest.subset_records(Subset::kEval)) {
    AudioClip clip = load_clip(manifest.resolve_path(*rec), victim.sample_rate);
    const bool said_real = score_clip(victim, clip) >= threshold;
    correct += (said_real == (rec->label == Label::kReal)) ? 1 : 0;
    ++total;
  }
  if (total == 0) throw DataError("manifest eval subset is empty");
  return static_cast<double>(correct) / total;
}

EvalReport evaluate_attack(const std::vector<ScenarioSpec>& scenarios,
                           const DatasetManifest& manifest,
                           const std::string& pairs_path,
                           const config::RunConfig& cfg) {
  const auto pairs = read_pairing_index(pairs_path);
  std::map<std::string, PairRecord> pair_map;
  for (const auto& p : pairs) pair_map[p.clip_id] = p;

  std::string dataset_tag = "default";
  for (const auto* rec : manifest.subset_records(Subset::kEval))
    if (!rec->dataset_tag.empty()) {
      dataset_tag = rec->dataset_tag;
      break;
    }

  EvalReport report;
  const double threshold = cfg.evaluation.threshold;
  for (const auto& spec : scenarios) {
    const std::string scen = to_string(spec.scenario);
    ScenarioAverage avg;
    long n = 0;
    for (const auto& vspec : spec.victims) {
      surrogates::SurrogateModel victim = surrogates::load_surrogate(vspec);
      EvalRow row;
      row.victim_id = victim.model_id;
      row.dataset_tag = dataset_tag;
      row.scenario = scen;
      row.acc_ba = detector_accuracy(victim, manifest, threshold);
      row.acc_aa =
          accuracy_with_pairs(victim, manifest, pair_map, threshold, &row.success_rate);
      row.drop = row.acc_ba - row.acc_aa;
      avg.acc_ba += row.acc_ba;
      avg.acc_aa += row.acc_aa;
      avg.drop += row.drop;
      ++n;
      report.rows.push_back(std::move(row));
    }
    if (n > 0) {
      avg.acc_ba /= n;
      avg.acc_aa /= n;
      avg.drop /= n;
      report.scenario_averages[scen] = avg;
    }
  }
  report.quality = quality_report(pairs, cfg);
  return report;
}

QualitySummary quality_report(const std::vector<PairRecord>& pairs,
                              const config::RunConfig& cfg) {
  transcription::BackendSpec bspec;
  bspec.backend_id = cfg.transcription.backend;
  bspec.asr_command = cfg.transcription.asr_command;
  bspec.sample_rate = cfg.data.target_sample_rate;
  auto backend = transcription::TranscriptionBackend::make(bspec);
  transcription::EmbedderSpec espec;
  espec.embedder_id = cfg.transcription.embedder;
  espec.command = cfg.transcription.embedder_command;
  espec.dim = cfg.transcription.embed_dim;
  auto embedder = transcription::TextEmbedder::make(espec);

  double sum_psnr = 0, sum_ssim = 0, sum_text = 0;
  long n = 0;
  for (const auto& p : pairs) {
    if (p.label != Label::kFake) continue;
    AudioClip a = load_clip(p.original_path, cfg.data.target_sample_rate);
    AudioClip b = load_clip(p.attacked_path, cfg.data.target_sample_rate);
    if (a.samples.size() != b.samples.size())
      throw DataError("length mismatch for clip_id " + p.clip_id + " (" +
                      std::to_string(a.samples.size()) + " vs " +
                      std::to_string(b.samples.size()) + ")");
    sum_psnr += dsp::psnr(a.samples, b.samples, 1.0);
    sum_ssim += dsp::ssim(
        dsp::stft_logmag(a, cfg.evaluation.stft_n_fft, cfg.evaluation.stft_hop),
        dsp::stft_logmag(b, cfg.evaluation.stft_n_fft, cfg.evaluation.stft_hop));
    sum_text += transcription::text_similarity(a, b, backend, embedder);
    ++n;
  }
  if (n == 0) throw DataError("quality report needs at least one fake pair");
  return {sum_psnr / n, sum_ssim / n, sum_text / n};
}

std::vector<AblationRow> ablate(const config::RunConfig& base,
                                const std::vector<double>& lambda2_grid,
                                const std::vector<int>& ensemble_sizes,
                                const DatasetManifest& manifest,
                                const std::string& out_dir) {
  if (lambda2_grid.empty() || ensemble_sizes.empty())
    throw ConfigError("ablation grids must be nonempty");

  DatasetManifest eval_only;
  eval_only.root_dir = manifest.root_dir;
  for (const auto* rec : manifest.subset_records(Subset::kEval))
    eval_only.records.push_back(*rec);

  std::vector<AblationRow> rows;
  for (int m : ensemble_sizes) {
    if (m < 1 || static_cast<size_t>(m) > base.ensemble.members.size())
      throw ConfigError("ablation ensemble size " + std::to_string(m) +
                        " exceeds the configured ensemble (" +
                        std::to_string(base.ensemble.members.size()) + " members)");
    for (double l2 : lambda2_grid) {
      config::RunConfig cfg = base;
      cfg.losses.lambda2 = l2;
      cfg.ensemble.members.resize(static_cast<size_t>(m));

      std::ostringstream cell;
      cell << out_dir << "/cell-m" << m << "-l2-" << l2;
      const std::string cell_dir = cell.str();
      const std::string ckpt = training::train(cfg, manifest, cell_dir);
      const auto attack =
          training::attack_corpus(ckpt, eval_only, cell_dir + "/attacked");

      surrogates::SurrogateSpec vspec;
      const auto& entry = base.ensemble.members.front();
      vspec.model_id = entry.model_id;
      vspec.family = entry.family;
      vspec.width = entry.width;
      vspec.weights_path = entry.weights_path;
      vspec.real_class_index = entry.real_class_index;
      vspec.command = entry.command;
      vspec.init_seed = entry.init_seed;
      surrogates::SurrogateModel victim = surrogates::load_surrogate(vspec);

      const auto pairs = read_pairing_index(attack.pairs_path);
      std::map<std::string, PairRecord> pair_map;
      for (const auto& p : pairs) pair_map[p.clip_id] = p;

      AblationRow row;
      row.lambda2 = l2;
      row.ensemble_size = m;
      row.acc_ba = detector_accuracy(victim, manifest, base.evaluation.threshold);
      row.acc_aa = accuracy_with_pairs(victim, manifest, pair_map,
                                       base.evaluation.threshold, nullptr);
      const QualitySummary q = quality_report(pairs, cfg);
      row.psnr = q.mean_psnr;
      row.ssim = q.mean_ssim;
      rows.push_back(row);
    }
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "lambda2,ensemble_size,psnr,ssim,acc_ba,acc_aa\n";
  for (const auto& r : rows)
    out += fmt(r.lambda2) + "," + std::to_string(r.ensemble_size) + "," +
           fmt(r.psnr) + "," + fmt(r.ssim) + "," + fmt(r.acc_ba) + "," +
           fmt(r.acc_aa) + "\n";
  return out;
}

namespace {

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream is(text);
  std::string w;
  while (is >> w) words.push_back(w);
  return words;
}

// Position-aligned transcripts with differing words bracketed.
std::string marked_transcript(const std::vector<std::string>& own,
                              const std::vector<std::string>& other) {
  std::string out;
  for (size_t i = 0; i < own.size(); ++i) {
    const bool differs = i >= other.size() || other[i] != own[i];
    if (!out.empty()) out += " ";
    out += differs ? "[" + own[i] + "]" : own[i];
  }
  out += "\n";
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path);
  f << text;
}

io::Image render_waveforms(const AudioClip& a, const AudioClip& b) {
  const int width = 800, panel = 140, gap = 8;
  io::Image img(width, 2 * panel + gap);
  for (int y = panel; y < panel + gap; ++y)
    for (int x = 0; x < width; ++x) img.set(x, y, 220, 220, 220);
  struct PanelSpec {
    const AudioClip* clip;
    int top;
    uint8_t r, g, b;
  };
  const PanelSpec panels[2] = {{&a, 0, 30, 60, 160}, {&b, panel + gap, 160, 40, 40}};
  for (const auto& ps : panels) {
    const int mid = ps.top + panel / 2;
    for (int x = 0; x < width; ++x) img.set(x, mid, 200, 200, 200);
    const size_t n = ps.clip->samples.size();
    if (n == 0) continue;
    for (int x = 0; x < width; ++x) {
      const size_t lo = n * static_cast<size_t>(x) / width;
      size_t hi = n * static_cast<size_t>(x + 1) / width;
      if (hi <= lo) hi = lo + 1;
      double vmin = 1, vmax = -1;
      for (size_t i = lo; i < hi && i < n; ++i) {
        vmin = std::min(vmin, ps.clip->samples[i]);
        vmax = std::max(vmax, ps.clip->samples[i]);
      }
      const int y0 = mid - static_cast<int>(std::lround(vmax * (panel / 2 - 2)));
      const int y1 = mid - static_cast<int>(std::lround(vmin * (panel / 2 - 2)));
      img.vline(x, std::clamp(y0, ps.top, ps.top + panel - 1),
                std::clamp(y1, ps.top, ps.top + panel - 1), ps.r, ps.g, ps.b);
    }
  }
  return img;
}

io::Image render_spectrograms(const dsp::Spectrogram& a, const dsp::Spectrogram& b) {
  const int scale = 3, gap = 6;
  const int bins = static_cast<int>(a.values.rows());
  const int frames_a = static_cast<int>(a.values.cols());
  const int frames_b = static_cast<int>(b.values.cols());
  double lo = 1e300, hi = -1e300;
  for (const auto* s : {&a, &b}) {
    lo = std::min(lo, s->values.minCoeff());
    hi = std::max(hi, s->values.maxCoeff());
  }
  if (hi <= lo) hi = lo + 1;
  io::Image img((frames_a + frames_b) * scale + gap, bins * scale);
  auto draw = [&](const dsp::Spectrogram& s, int x_off) {
    for (int t = 0; t < static_cast<int>(s.values.cols()); ++t)
      for (int f = 0; f < bins; ++f) {
        const double v = (s.values(f, t) - lo) / (hi - lo);
        const auto g = static_cast<uint8_t>(std::lround(255 * v));
        for (int dy = 0; dy < scale; ++dy)
          for (int dx = 0; dx < scale; ++dx)
            img.set(x_off + t * scale + dx, (bins - 1 - f) * scale + dy, g, g, g);
      }
  };
  draw(a, 0);
  draw(b, frames_a * scale + gap);
  return img;
}

}  // namespace

void dump_samples(const std::string& pairs_path,
                  const std::vector<std::string>& clip_ids,
                  const std::string& out_dir, const config::RunConfig& cfg) {
  const auto pairs = read_pairing_index(pairs_path);
  std::map<std::string, PairRecord> pair_map;
  for (const auto& p : pairs) pair_map[p.clip_id] = p;

  transcription::BackendSpec bspec;
  bspec.backend_id = cfg.transcription.backend;
  bspec.asr_command = cfg.transcription.asr_command;
  bspec.sample_rate = cfg.data.target_sample_rate;
  auto backend = transcription::TranscriptionBackend::make(bspec);

  for (const auto& id : clip_ids) {
    auto it = pair_map.find(id);
    if (it == pair_map.end())
      throw NotFound("clip_id " + id + " not present in the pairing index");
    const auto& pair = it->second;
    AudioClip a = load_clip(pair.original_path, cfg.data.target_sample_rate);
    AudioClip b = load_clip(pair.attacked_path, cfg.data.target_sample_rate);

    const std::string dir = out_dir + "/" + id;
    fs::create_directories(dir);
    const auto words_a = split_words(backend.transcribe(a).text);
    const auto words_b = split_words(backend.transcribe(b).text);
    write_text(dir + "/transcript_before.txt", marked_transcript(words_a, words_b));
    write_text(dir + "/transcript_after.txt", marked_transcript(words_b, words_a));
    io::write_png(dir + "/waveform.png", render_waveforms(a, b));
    io::write_png(
        dir + "/spectrogram.png",
        render_spectrograms(
            dsp::stft_logmag(a, cfg.evaluation.stft_n_fft, cfg.evaluation.stft_hop),
            dsp::stft_logmag(b, cfg.evaluation.stft_n_fft, cfg.evaluation.stft_hop)));
  }
}

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::vector<double> synth_clip(Rng& rng, long len, int rate, bool fake) {
  const int n_harm = 3 + static_cast<int>(rng.next_below(3));
  const double f0 = rng.uniform(80.0, 300.0);
  const double env_hz = rng.uniform(1.0, 4.0);
  const double env_phase = rng.uniform(0.0, kTwoPi);
  std::vector<double> amp(static_cast<size_t>(n_harm)), pha(static_cast<size_t>(n_harm));
  for (int k = 0; k < n_harm; ++k) {
    amp[static_cast<size_t>(k)] = rng.uniform(0.5, 1.0) / (k + 1);
    pha[static_cast<size_t>(k)] = rng.uniform(0.0, kTwoPi);
  }

  // per-block random-walk phase offset, held constant within a block so each
  // boundary leaves a small waveform discontinuity (the vocoder-artifact cue)
  std::vector<double> jitter;
  const long block = 512;
  if (fake) {
    const long n_blocks = (len + block - 1) / block;
    jitter.resize(static_cast<size_t>(n_blocks));
    double walk = 0;
    for (long bi = 0; bi < n_blocks; ++bi) {
      walk += 0.35 * rng.normal();
      jitter[static_cast<size_t>(bi)] = walk;
    }
  }

  std::vector<double> x(static_cast<size_t>(len));
  double peak = 0;
  for (long t = 0; t < len; ++t) {
    const double ts = static_cast<double>(t) / rate;
    const double env = 0.55 + 0.35 * std::sin(kTwoPi * env_hz * ts + env_phase);
    const double jit = fake ? jitter[static_cast<size_t>(t / block)] : 0.0;
    double s = 0;
    for (int k = 0; k < n_harm; ++k)
      s += amp[static_cast<size_t>(k)] *
           std::sin((k + 1) * (kTwoPi * f0 * ts + jit) + pha[static_cast<size_t>(k)]);
    x[static_cast<size_t>(t)] = env * s;
    peak = std::max(peak, std::abs(x[static_cast<size_t>(t)]));
  }

  const double gain = peak > 0 ? 0.75 / peak : 0;
  const long fade = std::min<long>(200, len / 4);
  for (long t = 0; t < len; ++t) {
    double v = x[static_cast<size_t>(t)] * gain;
    if (t < fade)
      v *= 0.5 * (1 - std::cos(kTwoPi / 2 * t / fade));
    if (t >= len - fade)
      v *= 0.5 * (1 - std::cos(kTwoPi / 2 * (len - 1 - t) / fade));
    if (fake) v = std::round(v * 127.0) / 127.0;  // 8-bit amplitude grid
    x[static_cast<size_t>(t)] = v;
  }
  return x;
}

}  // namespace

DatasetManifest build_toy_dataset(long n_clips, long frame_len, uint64_t seed,
                                  const std::string& out_dir) {
  if (n_clips < 4 || n_clips % 2 != 0)
    throw InvalidArgument("build_toy_dataset: n_clips must be even and >= 4, got " +
                          std::to_string(n_clips));
  if (frame_len < 256)
    throw InvalidArgument("build_toy_dataset: frame_len must be >= 256");

  const int rate = 16000;
  fs::create_directories(out_dir + "/wav");
  Rng rng(seed);

  DatasetManifest manifest;
  manifest.root_dir = out_dir;
  const long per_class = n_clips / 2;
  const long n_train = per_class * 70 / 100;
  const long n_dev = per_class * 15 / 100;

  for (const Label label : {Label::kReal, Label::kFake}) {
    const std::string prefix = label == Label::kReal ? "real_" : "fake_";
    for (long i = 0; i < per_class; ++i) {
      char num[16];
      std::snprintf(num, sizeof(num), "%05ld", i);
      ManifestRecord rec;
      rec.clip_id = prefix + num;
      rec.path = "wav/" + rec.clip_id + ".wav";
      rec.label = label;
      rec.subset = i < n_train          ? Subset::kTrain
                   : i < n_train + n_dev ? Subset::kDev
                                         : Subset::kEval;
      rec.dataset_tag = "toy";
      const auto samples = synth_clip(rng, frame_len, rate, label == Label::kFake);
      wav::write_wav16(out_dir + "/" + rec.path, samples, rate);
      manifest.records.push_back(std::move(rec));
    }
  }
  manifest.validate();
  write_manifest(manifest, out_dir + "/manifest.jsonl");
  return manifest;
}

uint64_t corpus_digest(const DatasetManifest& manifest) {
  std::string acc;
  for (const auto& rec : manifest.records) {
    acc += rec.clip_id + "|" + to_string(rec.label) + "|" + to_string(rec.subset) + "|";
    std::ifstream f(manifest.resolve_path(rec), std::ios::binary);
    if (!f) throw NotFound("clip file not found: " + manifest.resolve_path(rec));
    std::ostringstream bytes;
    bytes << f.rdbuf();
    acc += bytes.str();
  }
  return fnv1a64(acc);
}

}  // namespace spoofbreak::evaluation
