#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spoofbreak/evaluation.hpp"
#include "spoofbreak/wav.hpp"
#include "test_util.hpp"

using namespace spoofbreak;
using namespace spoofbreak::evaluation;

namespace {

surrogates::SurrogateSpec toy_victim(const std::string& id, uint64_t seed) {
  surrogates::SurrogateSpec spec;
  spec.model_id = id;
  spec.family = "toy_cnn_small";
  spec.width = 4;
  spec.init_seed = seed;
  return spec;
}

// a pairing index where every attacked file is the original (no-op attack)
std::string write_noop_pairs(const DatasetManifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  for (const auto* rec : manifest.subset_records(Subset::kEval)) {
    nlohmann::json line = {{"clip_id", rec->clip_id},
                           {"original_path", manifest.resolve_path(*rec)},
                           {"attacked_path", manifest.resolve_path(*rec)},
                           {"label", to_string(rec->label)}};
    out << line.dump() << "\n";
  }
  return path;
}

std::vector<double> tone(double hz, double amp, size_t len, int rate = 16000) {
  std::vector<double> s(len);
  for (size_t t = 0; t < len; ++t)
    s[t] = amp * std::sin(2.0 * M_PI * hz * static_cast<double>(t) / rate);
  return s;
}

}  // namespace

TEST_CASE("scenario names round trip and validate against the ensemble") {
  for (Scenario s : {Scenario::kWhite, Scenario::kGray, Scenario::kBlack})
    CHECK(scenario_from_string(to_string(s)) == s);
  CHECK_THROWS_AS(scenario_from_string("pink"), ConfigError);

  const std::vector<std::string> families = {"toy_cnn_small", "res_tssdnet_like"};
  ScenarioSpec white;
  white.scenario = Scenario::kWhite;
  white.victims = {toy_victim("w", 1)};
  ScenarioSpec gray;
  gray.scenario = Scenario::kGray;
  gray.victims = {toy_victim("g", 2)};
  gray.victims[0].width = 8;  // size variant of a known family
  ScenarioSpec black;
  black.scenario = Scenario::kBlack;
  black.victims = {toy_victim("b", 3)};
  black.victims[0].family = "inc_tssdnet_like";  // outside the ensemble
  validate_scenarios({white, gray, black}, families);

  ScenarioSpec bad_black = black;
  bad_black.victims[0].family = "toy_cnn_small";
  CHECK_THROWS_WITH_AS(validate_scenarios({bad_black}, families),
                       doctest::Contains("shares family"), ConfigError);
  ScenarioSpec bad_white = white;
  bad_white.victims[0].family = "inc_tssdnet_like";
  CHECK_THROWS_WITH_AS(validate_scenarios({bad_white}, families),
                       doctest::Contains("outside the ensemble"), ConfigError);
}

TEST_CASE("scenario json parsing rejects unknown keys with dotted paths") {
  nlohmann::json j = nlohmann::json::parse(R"([
    {"scenario": "gray",
     "victims": [{"model_id": "v1", "family": "toy_cnn_large", "width": 12,
                  "init_seed": 5}]},
    {"scenario": "black", "victims": []}
  ])");
  auto specs = scenarios_from_json(j);
  REQUIRE(specs.size() == 2);
  CHECK(specs[0].scenario == Scenario::kGray);
  REQUIRE(specs[0].victims.size() == 1);
  CHECK(specs[0].victims[0].model_id == "v1");
  CHECK(specs[0].victims[0].width == 12);
  CHECK(specs[0].victims[0].init_seed == 5);
  CHECK(specs[1].victims.empty());

  nlohmann::json bad1 = nlohmann::json::parse(
      R"([{"scenario": "white", "victims": [], "extra": 1}])");
  CHECK_THROWS_WITH_AS(scenarios_from_json(bad1),
                       doctest::Contains("scenarios[0].extra"), ConfigError);
  nlohmann::json bad2 = nlohmann::json::parse(
      R"([{"scenario": "white", "victims": [{"famly": "x"}]}])");
  CHECK_THROWS_WITH_AS(scenarios_from_json(bad2),
                       doctest::Contains("scenarios[0].victims[0].famly"),
                       ConfigError);
  CHECK_THROWS_AS(scenarios_from_json(nlohmann::json::object()), ConfigError);
  CHECK_THROWS_AS(load_scenarios_file("scratch/definitely_missing.json"), ConfigError);
}

TEST_CASE("pairing index reader surfaces malformed lines with their number") {
  const std::string dir = testutil::scratch_dir("pairing_index");
  const std::string path = dir + "/pairs.jsonl";
  {
    std::ofstream out(path);
    out << R"({"clip_id":"a","original_path":"/o/a.wav","attacked_path":"/k/a.wav","label":"fake"})"
        << "\n\n"
        << R"({"clip_id":"b","original_path":"/o/b.wav","attacked_path":"/k/b.wav","label":"real"})"
        << "\n";
  }
  auto pairs = read_pairing_index(path);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].clip_id == "a");
  CHECK(pairs[0].label == Label::kFake);
  CHECK(pairs[1].attacked_path == "/k/b.wav");
  CHECK(pairs[1].label == Label::kReal);

  {
    std::ofstream out(path, std::ios::app);
    out << R"({"clip_id":"c"})" << "\n";
  }
  CHECK_THROWS_WITH_AS(read_pairing_index(path), doctest::Contains("line 4"),
                       DataError);
  CHECK_THROWS_AS(read_pairing_index(dir + "/nope.jsonl"), NotFound);
}

TEST_CASE("toy dataset: counts, splits, determinism, guard rails") {
  const std::string dir_a = testutil::scratch_dir("toy_data_a");
  DatasetManifest ma = build_toy_dataset(20, 2048, 5, dir_a);
  REQUIRE(ma.records.size() == 20);
  long real_n = 0, train_n = 0, dev_n = 0, eval_n = 0;
  for (const auto& rec : ma.records) {
    real_n += rec.label == Label::kReal ? 1 : 0;
    train_n += rec.subset == Subset::kTrain ? 1 : 0;
    dev_n += rec.subset == Subset::kDev ? 1 : 0;
    eval_n += rec.subset == Subset::kEval ? 1 : 0;
    CHECK(rec.dataset_tag == "toy");
    AudioClip clip = load_clip(ma.resolve_path(rec), 16000);
    CHECK(clip.samples.size() == 2048);
  }
  CHECK(real_n == 10);
  CHECK(train_n == 14);  // 70% per class
  CHECK(dev_n == 2);
  CHECK(eval_n == 4);

  DatasetManifest from_file = read_manifest(dir_a + "/manifest.jsonl");
  CHECK(from_file.records.size() == 20);

  // digest is reproducible per seed and sensitive to it
  const std::string dir_b = testutil::scratch_dir("toy_data_b");
  DatasetManifest mb = build_toy_dataset(20, 2048, 5, dir_b);
  CHECK(corpus_digest(ma) == corpus_digest(mb));
  const std::string dir_c = testutil::scratch_dir("toy_data_c");
  DatasetManifest mc = build_toy_dataset(20, 2048, 6, dir_c);
  CHECK(corpus_digest(ma) != corpus_digest(mc));

  CHECK_THROWS_AS(build_toy_dataset(5, 2048, 1, dir_a), InvalidArgument);
  CHECK_THROWS_AS(build_toy_dataset(2, 2048, 1, dir_a), InvalidArgument);
  CHECK_THROWS_AS(build_toy_dataset(8, 128, 1, dir_a), InvalidArgument);
}

TEST_CASE("detector accuracy agrees with a direct scoring loop") {
  const std::string dir = testutil::scratch_dir("detector_acc");
  DatasetManifest manifest = build_toy_dataset(8, 2048, 9, dir);
  surrogates::SurrogateModel victim = surrogates::load_surrogate(toy_victim("v", 4));

  long correct = 0, total = 0;
  for (const auto* rec : manifest.subset_records(Subset::kEval)) {
    AudioClip clip = load_clip(manifest.resolve_path(*rec), victim.sample_rate);
    Eigen::MatrixXd x(1, static_cast<long>(clip.samples.size()));
    for (size_t i = 0; i < clip.samples.size(); ++i)
      x(0, static_cast<long>(i)) = clip.samples[i];
    std::vector<Eigen::MatrixXd> frames{x};
    const bool said_real = victim.score(frames)(0) >= 0.5;
    correct += (said_real == (rec->label == Label::kReal)) ? 1 : 0;
    ++total;
  }
  REQUIRE(total == 4);
  CHECK(detector_accuracy(victim, manifest, 0.5) ==
        doctest::Approx(static_cast<double>(correct) / total));

  // degenerate thresholds give closed-form accuracies on a balanced subset
  CHECK(detector_accuracy(victim, manifest, 0.0) == doctest::Approx(0.5));
  CHECK(detector_accuracy(victim, manifest, 1.0) == doctest::Approx(0.5));

  DatasetManifest empty_eval = manifest;
  for (auto& rec : empty_eval.records) rec.subset = Subset::kTrain;
  CHECK_THROWS_AS(detector_accuracy(victim, empty_eval, 0.5), DataError);
}

TEST_CASE("no-op attack evaluates to zero drop and perfect quality") {
  const std::string dir = testutil::scratch_dir("noop_eval");
  DatasetManifest manifest = build_toy_dataset(8, 2048, 11, dir);
  const std::string pairs_path = write_noop_pairs(manifest, dir + "/pairs.jsonl");

  std::vector<ScenarioSpec> scenarios(2);
  scenarios[0].scenario = Scenario::kWhite;
  scenarios[0].victims = {toy_victim("victim_w", 21)};
  scenarios[1].scenario = Scenario::kBlack;
  scenarios[1].victims = {toy_victim("victim_b", 22)};
  scenarios[1].victims[0].family = "res_tssdnet_like";
  scenarios[1].victims[0].width = 4;

  config::RunConfig cfg;
  EvalReport report = evaluate_attack(scenarios, manifest, pairs_path, cfg);
  REQUIRE(report.rows.size() == 2);
  for (const auto& row : report.rows) {
    CHECK(row.dataset_tag == "toy");
    CHECK(row.acc_ba == row.acc_aa);
    CHECK(row.drop == 0.0);
    CHECK(row.acc_ba >= 0.0);
    CHECK(row.acc_ba <= 1.0);
    CHECK(row.success_rate >= 0.0);
    CHECK(row.success_rate <= 1.0);
  }
  CHECK(report.rows[0].victim_id == "victim_w");
  CHECK(report.rows[0].scenario == "white");
  CHECK(report.rows[1].scenario == "black");
  CHECK(report.scenario_averages.at("white").drop == 0.0);
  CHECK(report.scenario_averages.at("white").acc_ba == report.rows[0].acc_ba);

  // identical pairs: capped psnr, unit ssim, identical transcripts
  CHECK(report.quality.mean_psnr == doctest::Approx(99.0));
  CHECK(report.quality.mean_ssim == doctest::Approx(1.0));
  CHECK(report.quality.mean_text_similarity == doctest::Approx(1.0));

  const std::string csv = report.to_csv();
  CHECK(csv.rfind("victim_id,dataset_tag,scenario,acc_ba,acc_aa,drop,success_rate\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.find("victim_w,toy,white,") != std::string::npos);

  nlohmann::json j = report.to_json();
  CHECK(j.at("rows").size() == 2);
  CHECK(j.at("quality").at("mean_psnr").get<double>() == doctest::Approx(99.0));
  CHECK(j.at("scenario_averages").contains("black"));

  // a threshold of zero makes every attacked fake count as a success
  config::RunConfig cfg0 = cfg;
  cfg0.evaluation.threshold = 0.0;
  EvalReport r0 = evaluate_attack(scenarios, manifest, pairs_path, cfg0);
  CHECK(r0.rows[0].success_rate == doctest::Approx(1.0));
  CHECK(r0.rows[0].acc_aa == doctest::Approx(0.5));
}

TEST_CASE("quality report rejects unusable pairs") {
  const std::string dir = testutil::scratch_dir("quality_guards");
  config::RunConfig cfg;

  PairRecord real_only;
  real_only.clip_id = "r";
  real_only.label = Label::kReal;
  CHECK_THROWS_AS(quality_report({real_only}, cfg), DataError);

  wav::write_wav16(dir + "/long.wav", tone(500, 0.4, 2048), 16000);
  wav::write_wav16(dir + "/short.wav", tone(500, 0.4, 1024), 16000);
  PairRecord mismatched;
  mismatched.clip_id = "m";
  mismatched.original_path = dir + "/long.wav";
  mismatched.attacked_path = dir + "/short.wav";
  mismatched.label = Label::kFake;
  CHECK_THROWS_WITH_AS(quality_report({mismatched}, cfg),
                       doctest::Contains("length mismatch"), DataError);
}

TEST_CASE("sample dumps mark transcript differences and emit PNGs") {
  const std::string dir = testutil::scratch_dir("dump_samples");
  // two windows' worth so transcripts have two words
  wav::write_wav16(dir + "/orig.wav", tone(300, 0.5, 8000), 16000);
  wav::write_wav16(dir + "/att.wav", tone(2000, 0.5, 8000), 16000);
  const std::string pairs_path = dir + "/pairs.jsonl";
  {
    std::ofstream out(pairs_path);
    nlohmann::json changed = {{"clip_id", "changed"},
                              {"original_path", dir + "/orig.wav"},
                              {"attacked_path", dir + "/att.wav"},
                              {"label", "fake"}};
    nlohmann::json same = {{"clip_id", "same"},
                           {"original_path", dir + "/orig.wav"},
                           {"attacked_path", dir + "/orig.wav"},
                           {"label", "fake"}};
    out << changed.dump() << "\n" << same.dump() << "\n";
  }

  config::RunConfig cfg;
  dump_samples(pairs_path, {"changed", "same"}, dir + "/out", cfg);

  const std::string before = testutil::slurp(dir + "/out/changed/transcript_before.txt");
  const std::string after = testutil::slurp(dir + "/out/changed/transcript_after.txt");
  CHECK_FALSE(before.empty());
  CHECK(before.find('[') != std::string::npos);  // every word differs
  CHECK(after.find('[') != std::string::npos);
  const std::string same_before = testutil::slurp(dir + "/out/same/transcript_before.txt");
  CHECK_FALSE(same_before.empty());
  CHECK(same_before.find('[') == std::string::npos);

  const char png_magic[8] = {static_cast<char>(0x89), 'P', 'N', 'G',
                             '\r', '\n', 0x1A, '\n'};
  for (const std::string name : {"waveform.png", "spectrogram.png"}) {
    const std::string bytes = testutil::slurp(dir + "/out/changed/" + name);
    REQUIRE(bytes.size() > 8);
    CHECK(bytes.compare(0, 8, png_magic, 8) == 0);
  }

  CHECK_THROWS_AS(dump_samples(pairs_path, {"missing_id"}, dir + "/out", cfg),
                  NotFound);
}

TEST_CASE("ablation sweeps the lambda2 x ensemble-size grid") {
  const std::string data_dir = testutil::scratch_dir("ablate_data");
  DatasetManifest manifest = build_toy_dataset(8, 256, 13, data_dir);

  config::RunConfig base;
  base.data.frame_len = 128;
  base.generator.stage_widths = {3, 4, 5, 4};
  base.generator.highpass_cutoff_hz = 300.0;
  base.generator.highpass_taps = 31;
  base.discriminator.channels = 4;
  base.discriminator.fc1 = 8;
  base.discriminator.fc2 = 6;
  base.ensemble.members.clear();
  for (int i = 0; i < 2; ++i) {
    config::EnsembleEntry member;
    member.model_id = "probe" + std::to_string(i);
    member.family = "toy_cnn_small";
    member.width = 4;
    member.init_seed = 30 + static_cast<uint64_t>(i);
    base.ensemble.members.push_back(member);
  }
  base.training.batch_size = 2;
  base.training.total_steps = 1;
  base.training.checkpoint_every = 1;
  base.evaluation.stft_n_fft = 128;
  base.evaluation.stft_hop = 32;

  const std::string out_dir = testutil::scratch_dir("ablate_out");
  auto rows = ablate(base, {0.01}, {1, 2}, manifest, out_dir);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].ensemble_size == 1);
  CHECK(rows[1].ensemble_size == 2);
  for (const auto& row : rows) {
    CHECK(row.lambda2 == 0.01);
    CHECK(std::isfinite(row.psnr));
    CHECK(row.psnr > 0.0);
    CHECK(row.ssim > -1.0);
    CHECK(row.ssim <= 1.0);
    CHECK(row.acc_ba >= 0.0);
    CHECK(row.acc_ba <= 1.0);
    CHECK(row.acc_aa >= 0.0);
    CHECK(row.acc_aa <= 1.0);
  }

  const std::string csv = ablation_csv(rows);
  CHECK(csv.rfind("lambda2,ensemble_size,psnr,ssim,acc_ba,acc_aa\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  CHECK_THROWS_AS(ablate(base, {}, {1}, manifest, out_dir), ConfigError);
  CHECK_THROWS_AS(ablate(base, {0.01}, {3}, manifest, out_dir), ConfigError);
}
