#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spoofbreak/audio_io.hpp"
#include "spoofbreak/config.hpp"
#include "spoofbreak/surrogates.hpp"

namespace spoofbreak::evaluation {

enum class Scenario { kWhite, kGray, kBlack };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

// A victim set evaluated under one knowledge assumption about the attacker.
struct ScenarioSpec {
  Scenario scenario = Scenario::kWhite;
  std::vector<surrogates::SurrogateSpec> victims;
};

// white/gray victims must share a family with the training ensemble (gray as
// size-variants); black victims must be architecturally disjoint from it.
void validate_scenarios(const std::vector<ScenarioSpec>& scenarios,
                        const std::vector<std::string>& ensemble_families);

// [{"scenario": "white", "victims": [{...SurrogateSpec fields...}]}, ...];
// unknown keys rejected with their dotted path.
std::vector<ScenarioSpec> scenarios_from_json(const nlohmann::json& j);
std::vector<ScenarioSpec> load_scenarios_file(const std::string& path);

// One line of the attack pairing index.
struct PairRecord {
  std::string clip_id;
  std::string original_path;
  std::string attacked_path;
  Label label = Label::kFake;
};

std::vector<PairRecord> read_pairing_index(const std::string& path);

struct EvalRow {
  std::string victim_id;
  std::string dataset_tag;
  std::string scenario;
  double acc_ba = 0;
  double acc_aa = 0;
  double drop = 0;
  double success_rate = 0;
};

struct ScenarioAverage {
  double acc_ba = 0;
  double acc_aa = 0;
  double drop = 0;
};

struct QualitySummary {
  double mean_psnr = 0;
  double mean_ssim = 0;
  double mean_text_similarity = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::map<std::string, ScenarioAverage> scenario_averages;
  QualitySummary quality;

  nlohmann::json to_json() const;
  // victim_id,dataset_tag,scenario,acc_ba,acc_aa,drop,success_rate
  std::string to_csv() const;
};

// Fraction of eval-subset clips where (P(real) >= threshold) matches the
// label, over both classes.
double detector_accuracy(const surrogates::SurrogateModel& victim,
                         const DatasetManifest& manifest,
                         double threshold = 0.5);

// Before/after accuracies per victim: originals for acc_ba; fake eval clips
// replaced by their attacked versions for acc_aa, reals untouched.
// success_rate counts attacked fakes scored real. Quality metrics are
// computed over the fake pairs of the index.
EvalReport evaluate_attack(const std::vector<ScenarioSpec>& scenarios,
                           const DatasetManifest& manifest,
                           const std::string& pairs_path,
                           const config::RunConfig& cfg);

QualitySummary quality_report(const std::vector<PairRecord>& pairs,
                              const config::RunConfig& cfg);

struct AblationRow {
  double lambda2 = 0;
  int ensemble_size = 0;
  double psnr = 0;
  double ssim = 0;
  double acc_ba = 0;
  double acc_aa = 0;
};

// One full train + attack + evaluate run per grid cell; the victim is the
// first ensemble member of the base config. Cells run sequentially.
std::vector<AblationRow> ablate(const config::RunConfig& base,
                                const std::vector<double>& lambda2_grid,
                                const std::vector<int>& ensemble_sizes,
                                const DatasetManifest& manifest,
                                const std::string& out_dir);

// lambda2,ensemble_size,psnr,ssim,acc_ba,acc_aa
std::string ablation_csv(const std::vector<AblationRow>& rows);

// Per-clip bundle: transcript_before.txt, transcript_after.txt (differing
// words bracketed), waveform.png, spectrogram.png.
void dump_samples(const std::string& pairs_path,
                  const std::vector<std::string>& clip_ids,
                  const std::string& out_dir, const config::RunConfig& cfg);

// Synthetic two-class corpus: "real" clips are harmonic stacks under smooth
// envelopes; "fake" clips add per-block phase jitter plus 8-bit amplitude
// quantization. 70/15/15 split per class, deterministic per seed.
DatasetManifest build_toy_dataset(long n_clips, long frame_len, uint64_t seed,
                                  const std::string& out_dir);

// Hash over manifest records and raw file bytes (determinism checks).
uint64_t corpus_digest(const DatasetManifest& manifest);

}  // namespace spoofbreak::evaluation
