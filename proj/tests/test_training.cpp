#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spoofbreak/training.hpp"
#include "spoofbreak/wav.hpp"
#include "test_util.hpp"

using namespace spoofbreak;
using namespace spoofbreak::training;
using nets::Mat;

namespace {

config::RunConfig tiny_config() {
  config::RunConfig cfg;
  cfg.data.target_sample_rate = 16000;
  cfg.data.frame_len = 128;
  cfg.generator.stage_widths = {3, 4, 5, 4};
  cfg.generator.alpha_init = 0.05;
  cfg.generator.highpass_cutoff_hz = 300.0;
  cfg.generator.highpass_taps = 31;
  cfg.discriminator.channels = 4;
  cfg.discriminator.fc1 = 8;
  cfg.discriminator.fc2 = 6;
  cfg.ensemble.members.clear();
  config::EnsembleEntry member;
  member.model_id = "tiny_probe";
  member.family = "toy_cnn_small";
  member.width = 4;
  member.init_seed = 11;
  cfg.ensemble.members.push_back(member);
  cfg.training.batch_size = 2;
  cfg.training.total_steps = 4;
  cfg.training.checkpoint_every = 2;
  cfg.training.lr_g = 1e-3;
  cfg.training.lr_d = 1e-3;
  cfg.training.seed = 7;
  return cfg;
}

template <typename T>
std::vector<Mat<T>> random_frames(Rng& rng, size_t n, long len, double amp) {
  std::vector<Mat<T>> out;
  for (size_t i = 0; i < n; ++i) {
    Mat<T> m(1, len);
    for (long t = 0; t < len; ++t) m(0, t) = static_cast<T>(rng.uniform(-amp, amp));
    out.push_back(std::move(m));
  }
  return out;
}

template <typename T>
void check_params_equal(const nets::ParamRegistry<T>& a,
                        const nets::ParamRegistry<T>& b) {
  const auto& sa = a.slices();
  const auto& sb = b.slices();
  REQUIRE(sa.size() == sb.size());
  for (size_t i = 0; i < sa.size(); ++i) {
    REQUIRE(sa[i].name == sb[i].name);
    REQUIRE(sa[i].size == sb[i].size);
    CHECK(std::memcmp(sa[i].value, sb[i].value,
                      static_cast<size_t>(sa[i].size) * sizeof(T)) == 0);
  }
}

std::vector<double> tone(double hz, double amp, size_t len, int rate = 16000) {
  std::vector<double> s(len);
  for (size_t t = 0; t < len; ++t)
    s[t] = amp * std::sin(2.0 * M_PI * hz * static_cast<double>(t) / rate);
  return s;
}

// two fake + two real train clips, 2.5 frames long each
DatasetManifest tone_manifest(const std::string& dir, long frame_len) {
  DatasetManifest manifest;
  manifest.root_dir = dir;
  const size_t len = static_cast<size_t>(frame_len) * 5 / 2;
  struct Item { const char* id; double hz; Label label; };
  const Item items[] = {{"fake_a", 500.0, Label::kFake},
                        {"fake_b", 650.0, Label::kFake},
                        {"real_a", 1200.0, Label::kReal},
                        {"real_b", 900.0, Label::kReal}};
  for (const auto& it : items) {
    const std::string rel = std::string(it.id) + ".wav";
    wav::write_wav16(dir + "/" + rel, tone(it.hz, 0.4, len), 16000);
    ManifestRecord rec;
    rec.clip_id = it.id;
    rec.path = rel;
    rec.label = it.label;
    rec.subset = Subset::kTrain;
    manifest.records.push_back(rec);
  }
  return manifest;
}

}  // namespace

TEST_CASE("attack system construction and one alternating step") {
  auto sys = AttackSystem<float>::make(tiny_config());
  CHECK(sys->step == 0);
  CHECK(sys->ensemble.size() == 1);
  CHECK(sys->ensemble[0].model_id == "tiny_probe");
  CHECK(sys->reg_g.param_count() > 0);
  CHECK(sys->reg_d.param_count() > 0);
  CHECK(sys->opt_g.step_count() == 0);

  Rng data_rng(3);
  auto fake = random_frames<float>(data_rng, 2, 128, 0.3);
  auto real = random_frames<float>(data_rng, 2, 128, 0.3);
  losses::LossBreakdown b = train_step(*sys, fake, real);
  CHECK(sys->step == 1);
  CHECK(sys->opt_g.step_count() == 1);
  CHECK(sys->opt_d.step_count() == 1);
  CHECK(std::isfinite(b.total));
  CHECK(b.perceptual >= 0.0);
  CHECK(b.forensics >= 0.0);
  CHECK(b.transcription >= 0.0);
  CHECK(b.disc_loss > 0.0);
  const auto& w = sys->weights;
  CHECK(b.total == doctest::Approx(w.lambda1 * b.perceptual + w.lambda2 * b.forensics +
                                   w.lambda3 * b.transcription +
                                   w.lambda4 * b.adversarial));

  // the constrained front kernel survives the D update re-projected
  for (const auto& s : sys->reg_d.slices()) {
    if (s.name.find("constrained") == std::string::npos) continue;
    REQUIRE(s.size == 5);
    CHECK(s.value[2] == doctest::Approx(-1.0));
    double others = s.value[0] + s.value[1] + s.value[3] + s.value[4];
    CHECK(others == doctest::Approx(1.0).epsilon(1e-5));
  }

  auto real3 = random_frames<float>(data_rng, 3, 128, 0.3);
  CHECK_THROWS_AS(train_step(*sys, fake, real3), ShapeError);
  auto fake1 = random_frames<float>(data_rng, 1, 128, 0.3);
  auto real1 = random_frames<float>(data_rng, 1, 128, 0.3);
  CHECK_THROWS_AS(train_step(*sys, fake1, real1), ShapeError);
}

TEST_CASE("generator updates reduce the forensics term on a fixed batch") {
  config::RunConfig cfg = tiny_config();
  cfg.losses.lambda1 = 0.0;
  cfg.losses.lambda2 = 1.0;
  cfg.losses.lambda3 = 0.0;
  cfg.losses.lambda4 = 0.0;
  cfg.training.lr_g = 3e-3;
  auto sys = AttackSystem<float>::make(cfg);

  Rng data_rng(21);
  auto fake = random_frames<float>(data_rng, 4, 128, 0.4);
  auto real = random_frames<float>(data_rng, 4, 128, 0.4);
  TrainStepOptions opts;
  opts.update_d = false;

  const double first = train_step(*sys, fake, real, opts).forensics;
  double last = first;
  for (int i = 0; i < 59; ++i) last = train_step(*sys, fake, real, opts).forensics;
  CHECK(last < first);
  CHECK(sys->opt_d.step_count() == 0);  // D untouched
}

TEST_CASE("whole-pipeline generator gradient matches finite differences") {
  auto sys = AttackSystem<double>::make(tiny_config());
  Rng rng(5);
  auto batch = random_frames<double>(rng, 2, 128, 0.3);

  const double loss = generator_total_loss_and_grads(*sys, batch);
  CHECK(std::isfinite(loss));
  CHECK(loss > 0.0);
  std::vector<double> analytic = sys->reg_g.gather_grads();

  auto loss_value = [&]() { return generator_total_loss(*sys, batch); };
  testutil::FdReport rep = testutil::fd_check_registry(
      sys->reg_g, loss_value, analytic, 1e-6, 120, rng, 1e-3);
  CHECK(rep.checked >= 100);
  CHECK(rep.max_rel < 1e-4);
}

TEST_CASE("checkpoints restore the exact training state") {
  const std::string dir = testutil::scratch_dir("training_ckpt");
  auto sys = AttackSystem<float>::make(tiny_config());

  Rng data_rng(9);
  auto fake = random_frames<float>(data_rng, 2, 128, 0.3);
  auto real = random_frames<float>(data_rng, 2, 128, 0.3);
  for (int i = 0; i < 3; ++i) train_step(*sys, fake, real);

  const std::string path = dir + "/attack.sbck";
  save_attack_checkpoint(*sys, path);
  CHECK(checkpoint_frame_len(path) == 128);

  auto loaded = load_attack_checkpoint<float>(path);
  CHECK(loaded->step == 3);
  CHECK(loaded->opt_g.step_count() == sys->opt_g.step_count());
  CHECK(loaded->opt_d.step_count() == sys->opt_d.step_count());
  CHECK(loaded->rng.save_state() == sys->rng.save_state());
  check_params_equal(sys->reg_g, loaded->reg_g);
  check_params_equal(sys->reg_d, loaded->reg_d);
  CHECK(loaded->opt_g.moment1() == sys->opt_g.moment1());
  CHECK(loaded->opt_d.moment2() == sys->opt_d.moment2());

  // both copies continue identically
  auto fake2 = random_frames<float>(data_rng, 2, 128, 0.3);
  auto real2 = random_frames<float>(data_rng, 2, 128, 0.3);
  losses::LossBreakdown b1 = train_step(*sys, fake2, real2);
  losses::LossBreakdown b2 = train_step(*loaded, fake2, real2);
  CHECK(b1.total == b2.total);
  CHECK(b1.disc_loss == b2.disc_loss);
  check_params_equal(sys->reg_g, loaded->reg_g);

  // dtype and kind guards
  CHECK_THROWS_AS(load_attack_checkpoint<double>(path), LoadError);
  io::Archive ar;
  ar.meta["kind"] = "surrogate";
  ar.meta["dtype"] = "f32";
  ar.write(dir + "/wrong.sbck");
  CHECK_THROWS_AS(load_attack_checkpoint<float>(dir + "/wrong.sbck"), LoadError);
}

TEST_CASE("training driver writes checkpoints and resumes bit-exactly") {
  const std::string data_dir = testutil::scratch_dir("training_driver_data");
  config::RunConfig cfg = tiny_config();
  DatasetManifest manifest = tone_manifest(data_dir, cfg.data.frame_len);

  const std::string dir_a = testutil::scratch_dir("training_driver_a");
  const std::string final_a = train(cfg, manifest, dir_a);
  CHECK(final_a == dir_a + "/checkpoint-final.sbck");
  CHECK(std::filesystem::exists(final_a));
  CHECK(std::filesystem::exists(dir_a + "/checkpoint-step2.sbck"));
  CHECK(std::filesystem::exists(dir_a + "/checkpoint-step4.sbck"));

  std::ifstream metrics(dir_a + "/metrics.jsonl");
  REQUIRE(metrics.good());
  std::vector<nlohmann::json> lines;
  for (std::string line; std::getline(metrics, line);)
    lines.push_back(nlohmann::json::parse(line));
  REQUIRE(lines.size() == 4);
  CHECK(lines[0].at("step").get<long>() == 1);
  CHECK(lines[3].at("step").get<long>() == 4);
  for (const auto& l : lines) {
    CHECK(l.contains("total"));
    CHECK(l.contains("disc_loss"));
    CHECK(l.contains("wall_ms"));
    CHECK(std::isfinite(l.at("total").get<double>()));
  }

  // resuming the halfway checkpoint reproduces the final bytes exactly
  const std::string dir_b = testutil::scratch_dir("training_driver_b");
  const std::string final_b =
      train(cfg, manifest, dir_b, dir_a + "/checkpoint-step2.sbck");
  CHECK(testutil::slurp(final_b) == testutil::slurp(final_a));
  std::ifstream metrics_b(dir_b + "/metrics.jsonl");
  long count_b = 0;
  for (std::string line; std::getline(metrics_b, line);) ++count_b;
  CHECK(count_b == 2);

  config::RunConfig other = cfg;
  other.training.lr_g = 5e-4;
  CHECK_THROWS_AS(
      train(other, manifest, dir_b, dir_a + "/checkpoint-step2.sbck"),
      ConfigError);

  DatasetManifest fakes_only = manifest;
  fakes_only.records.resize(2);  // drop the real clips
  const std::string dir_c = testutil::scratch_dir("training_driver_c");
  CHECK_THROWS_AS(train(cfg, fakes_only, dir_c), DataError);
}

TEST_CASE("attack corpus rewrites fakes and copies reals verbatim") {
  const std::string data_dir = testutil::scratch_dir("attack_corpus_data");
  config::RunConfig cfg = tiny_config();

  DatasetManifest manifest;
  manifest.root_dir = data_dir;
  wav::write_wav16(data_dir + "/spoof.wav", tone(500.0, 0.4, 240), 16000);
  wav::write_wav16(data_dir + "/human.wav", tone(1100.0, 0.4, 150), 16000);
  ManifestRecord fake_rec;
  fake_rec.clip_id = "spoof";
  fake_rec.path = "spoof.wav";
  fake_rec.label = Label::kFake;
  fake_rec.subset = Subset::kEval;
  ManifestRecord real_rec;
  real_rec.clip_id = "human";
  real_rec.path = "human.wav";
  real_rec.label = Label::kReal;
  real_rec.subset = Subset::kEval;
  manifest.records = {fake_rec, real_rec};

  auto sys = AttackSystem<float>::make(cfg);
  const std::string ckpt = data_dir + "/attack.sbck";
  save_attack_checkpoint(*sys, ckpt);

  const std::string out_dir = testutil::scratch_dir("attack_corpus_out");
  AttackCorpusResult result = attack_corpus(ckpt, manifest, out_dir);
  CHECK(result.n_fake == 1);
  CHECK(result.n_real == 1);
  CHECK(result.pairs_path == out_dir + "/pairs.jsonl");

  // real clip: byte-for-byte copy
  CHECK(testutil::slurp(out_dir + "/human.wav") ==
        testutil::slurp(data_dir + "/human.wav"));

  // fake clip: same length, actually modified
  AudioClip original = load_clip(data_dir + "/spoof.wav", 16000);
  AudioClip attacked = load_clip(out_dir + "/spoof.wav", 16000);
  REQUIRE(attacked.samples.size() == original.samples.size());
  CHECK(attacked.samples.size() == 240);
  double max_diff = 0;
  for (size_t i = 0; i < attacked.samples.size(); ++i)
    max_diff = std::max(max_diff,
                        std::abs(attacked.samples[i] - original.samples[i]));
  CHECK(max_diff > 1e-4);

  std::ifstream pairs(result.pairs_path);
  std::vector<nlohmann::json> rows;
  for (std::string line; std::getline(pairs, line);)
    rows.push_back(nlohmann::json::parse(line));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].at("clip_id") == "spoof");
  CHECK(rows[0].at("label") == to_string(Label::kFake));
  CHECK(rows[0].at("attacked_path") == out_dir + "/spoof.wav");
  CHECK(rows[1].at("clip_id") == "human");
  CHECK(rows[1].at("label") == to_string(Label::kReal));
  CHECK(std::filesystem::exists(rows[1].at("original_path").get<std::string>()));
}
