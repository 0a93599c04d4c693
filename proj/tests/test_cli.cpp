#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "spoofbreak/config.hpp"
#include "spoofbreak/subprocess.hpp"
#include "test_util.hpp"

using namespace spoofbreak;

namespace {

std::string bin() { return shell_quote(SPOOFBREAK_BIN); }

CommandResult run_cli(const std::string& args) {
  return run_command(bin() + " " + args + " 2>&1");
}

// one value per `key=` line of the tool's stdout
std::string stdout_field(const std::string& out, const std::string& key) {
  const std::string needle = key + "=";
  size_t pos = out.find(needle);
  if (pos != 0 && (pos == std::string::npos || out[pos - 1] != '\n')) return "";
  pos += needle.size();
  const size_t end = out.find('\n', pos);
  return out.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
}

std::string write_tiny_config(const std::string& path) {
  config::RunConfig cfg;
  cfg.data.frame_len = 128;
  cfg.generator.stage_widths = {3, 4, 5, 4};
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
  cfg.training.total_steps = 2;
  cfg.training.checkpoint_every = 1;
  cfg.training.lr_g = 1e-3;
  cfg.training.lr_d = 1e-3;
  cfg.evaluation.stft_n_fft = 128;  // toy clips are only 256 samples long
  cfg.evaluation.stft_hop = 32;
  config::write_config_file(cfg, path);
  return path;
}

}  // namespace

TEST_CASE("argument errors exit with status 2") {
  CHECK(run_cli("").exit_code == 2);                        // subcommand required
  CHECK(run_cli("frobnicate").exit_code == 2);              // unknown subcommand
  CHECK(run_cli("evaluate --manifest m --victims v").exit_code == 2);  // no --pairs
  CHECK(run_cli("prepare-toy").exit_code == 2);             // --out required
  CHECK(run_cli("--set no_equals_sign prepare-toy --n 8").exit_code == 2);
  const std::string missing =
      "--config scratch/does_not_exist.json prepare-toy --n 8";
  CHECK(run_cli(missing).exit_code == 2);
}

TEST_CASE("prepare-toy is deterministic per seed and echoes its config") {
  const std::string dir_a = testutil::scratch_dir("cli_prep_a");
  const std::string dir_b = testutil::scratch_dir("cli_prep_b");
  const std::string dir_c = testutil::scratch_dir("cli_prep_c");

  const std::string args = " --seed 7 prepare-toy --n 8 --frame-len 256";
  CommandResult a = run_cli("--out " + shell_quote(dir_a) +
                            " --set losses.lambda2=0.5" + args);
  REQUIRE(a.exit_code == 0);
  CHECK(stdout_field(a.out, "clips") == "8");
  CHECK(stdout_field(a.out, "manifest") == dir_a + "/manifest.jsonl");
  CHECK(std::filesystem::exists(dir_a + "/manifest.jsonl"));
  const std::string digest_a = stdout_field(a.out, "corpus_digest");
  CHECK(digest_a.size() == 16);

  // the resolved config reflects --set overrides
  std::ifstream f(dir_a + "/resolved-config.json");
  REQUIRE(f.good());
  nlohmann::json cfg_json;
  f >> cfg_json;
  CHECK(cfg_json.at("losses").at("lambda2").get<double>() == 0.5);

  CommandResult b = run_cli("--out " + shell_quote(dir_b) + args);
  REQUIRE(b.exit_code == 0);
  CHECK(stdout_field(b.out, "corpus_digest") == digest_a);

  CommandResult c = run_cli("--out " + shell_quote(dir_c) +
                            " --seed 8 prepare-toy --n 8 --frame-len 256");
  REQUIRE(c.exit_code == 0);
  CHECK(stdout_field(c.out, "corpus_digest") != digest_a);
}

TEST_CASE("micro pipeline: prepare, train, attack, evaluate, report, dump") {
  const std::string root = testutil::scratch_dir("cli_pipeline");
  const std::string cfg_path = write_tiny_config(root + "/config.json");
  const std::string cfg_arg = "--config " + shell_quote(cfg_path) + " ";

  const std::string data_dir = root + "/data";
  CommandResult prep = run_cli(cfg_arg + "--out " + shell_quote(data_dir) +
                               " --seed 7 prepare-toy --n 8 --frame-len 256");
  REQUIRE(prep.exit_code == 0);
  const std::string manifest = stdout_field(prep.out, "manifest");

  const std::string train_dir = root + "/train";
  CommandResult trained = run_cli(cfg_arg + "--out " + shell_quote(train_dir) +
                                  " train-attack --manifest " + shell_quote(manifest));
  REQUIRE(trained.exit_code == 0);
  const std::string ckpt = stdout_field(trained.out, "checkpoint");
  CHECK(ckpt == train_dir + "/checkpoint-final.sbck");
  REQUIRE(std::filesystem::exists(ckpt));
  CHECK(std::filesystem::exists(train_dir + "/metrics.jsonl"));

  const std::string atk_dir = root + "/attacked";
  CommandResult atk = run_cli(cfg_arg + "--out " + shell_quote(atk_dir) +
                              " attack --checkpoint " + shell_quote(ckpt) +
                              " --manifest " + shell_quote(manifest) +
                              " --subset eval");
  REQUIRE(atk.exit_code == 0);
  const std::string pairs = stdout_field(atk.out, "pairs");
  REQUIRE(std::filesystem::exists(pairs));
  CHECK(stdout_field(atk.out, "attacked_fakes") == "2");
  CHECK(stdout_field(atk.out, "copied_reals") == "2");

  // a config with a different frame length must be refused at attack time
  config::RunConfig other;
  const std::string other_path = root + "/other-config.json";
  config::write_config_file(other, other_path);
  CommandResult mismatch = run_cli("--config " + shell_quote(other_path) +
                                   " --out " + shell_quote(root + "/bad") +
                                   " attack --checkpoint " + shell_quote(ckpt) +
                                   " --manifest " + shell_quote(manifest));
  CHECK(mismatch.exit_code == 2);
  CHECK(mismatch.out.find("frame_len") != std::string::npos);

  const std::string victims_path = root + "/victims.json";
  {
    std::ofstream v(victims_path);
    v << R"([{"scenario": "white",
              "victims": [{"model_id": "vic", "family": "toy_cnn_small",
                           "width": 4, "init_seed": 21}]}])";
  }
  const std::string eval_dir = root + "/eval";
  CommandResult ev = run_cli(cfg_arg + "--out " + shell_quote(eval_dir) +
                             " evaluate --pairs " + shell_quote(pairs) +
                             " --manifest " + shell_quote(manifest) +
                             " --victims " + shell_quote(victims_path));
  REQUIRE(ev.exit_code == 0);
  const std::string report_path = stdout_field(ev.out, "report_json");
  REQUIRE(std::filesystem::exists(report_path));
  CHECK(std::filesystem::exists(stdout_field(ev.out, "report_csv")));

  std::ifstream rf(report_path);
  nlohmann::json report;
  rf >> report;
  REQUIRE(report.at("rows").size() == 1);
  const auto& row = report.at("rows").at(0);
  CHECK(row.at("victim_id") == "vic");
  CHECK(row.at("scenario") == "white");
  const double drop = row.at("drop").get<double>();
  CHECK(drop == doctest::Approx(row.at("acc_ba").get<double>() -
                                row.at("acc_aa").get<double>())
                    .epsilon(1e-9));
  CHECK(report.at("quality").contains("mean_psnr"));

  // family check: a black-box victim from the ensemble family is rejected
  const std::string bad_victims = root + "/bad-victims.json";
  {
    std::ofstream v(bad_victims);
    v << R"([{"scenario": "black",
              "victims": [{"model_id": "b", "family": "toy_cnn_small"}]}])";
  }
  // separate out dir so the skip run cannot clobber the white-box report
  const std::string skip_dir = root + "/eval-skip";
  CommandResult bad_ev = run_cli(cfg_arg + "--out " + shell_quote(skip_dir) +
                                 " evaluate --pairs " + shell_quote(pairs) +
                                 " --manifest " + shell_quote(manifest) +
                                 " --victims " + shell_quote(bad_victims));
  CHECK(bad_ev.exit_code == 2);
  CommandResult skip_ev = run_cli(cfg_arg + "--out " + shell_quote(skip_dir) +
                                  " evaluate --pairs " + shell_quote(pairs) +
                                  " --manifest " + shell_quote(manifest) +
                                  " --victims " + shell_quote(bad_victims) +
                                  " --skip-family-check");
  CHECK(skip_ev.exit_code == 0);

  CommandResult rep = run_cli("report --report " + shell_quote(report_path));
  REQUIRE(rep.exit_code == 0);
  CHECK(rep.out.find("vic") != std::string::npos);
  CHECK(rep.out.find("average[white]") != std::string::npos);
  CHECK(rep.out.find("quality:") != std::string::npos);
  CHECK(run_cli("report --report scratch/nope.json").exit_code == 1);

  const std::string dump_dir = root + "/dump";
  CommandResult dump = run_cli(cfg_arg + "--out " + shell_quote(dump_dir) +
                               " dump-samples --pairs " + shell_quote(pairs) +
                               " --clips fake_00002,fake_00003");
  REQUIRE(dump.exit_code == 0);
  CHECK(stdout_field(dump.out, "bundles") == "2");
  for (const std::string id : {"fake_00002", "fake_00003"}) {
    CHECK(std::filesystem::exists(dump_dir + "/" + id + "/transcript_before.txt"));
    CHECK(std::filesystem::exists(dump_dir + "/" + id + "/transcript_after.txt"));
    CHECK(std::filesystem::exists(dump_dir + "/" + id + "/waveform.png"));
    CHECK(std::filesystem::exists(dump_dir + "/" + id + "/spectrogram.png"));
  }
}
