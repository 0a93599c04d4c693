#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spoofbreak/audio_io.hpp"
#include "spoofbreak/config.hpp"
#include "spoofbreak/error.hpp"
#include "spoofbreak/evaluation.hpp"
#include "spoofbreak/surrogates.hpp"
#include "spoofbreak/training.hpp"

namespace fs = std::filesystem;
using namespace spoofbreak;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string out_dir;
  long seed = -1;  // -1: keep the config's seed
  std::vector<std::string> overrides;
};

config::RunConfig resolve_config(const GlobalOpts& g) {
  nlohmann::json doc = nlohmann::json::object();
  if (!g.config_path.empty()) {
    std::ifstream f(g.config_path);
    if (!f) throw ConfigError("cannot open config file: " + g.config_path);
    std::stringstream buf;
    buf << f.rdbuf();
    const std::string text = buf.str();
    if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
      try {
        doc = nlohmann::json::parse(text);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + g.config_path + " does not parse: " +
                          e.what());
      }
    }
  }
  for (const auto& assignment : g.overrides) config::apply_override(doc, assignment);
  config::RunConfig cfg = config::from_json(doc);
  if (g.seed >= 0) {
    cfg.training.seed = static_cast<uint64_t>(g.seed);
    config::validate(cfg);
  }
  return cfg;
}

void echo_config(const config::RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  config::write_config_file(cfg, out_dir + "/resolved-config.json");
}

DatasetManifest subset_filter(const DatasetManifest& m, const std::string& subset) {
  if (subset == "all") return m;
  const Subset want = subset_from_string(subset);
  DatasetManifest out;
  out.root_dir = m.root_dir;
  for (const auto& rec : m.records)
    if (rec.subset == want) out.records.push_back(rec);
  return out;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path);
  f << text;
}

std::string hex64(uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial attack toolkit for audio deepfake detectors"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "JSON run config (defaults when omitted)");
  app.add_option("--seed", g.seed, "Override training.seed");
  app.add_option("--out", g.out_dir, "Output directory");
  app.add_option("--set", g.overrides,
                 "Dotted-path override, e.g. losses.lambda2=0.001 (repeatable)");

  // prepare-toy
  auto* prep = app.add_subcommand("prepare-toy", "Build the synthetic two-class corpus");
  long prep_n = 2000;
  long prep_frame_len = 0;  // 0: take data.frame_len
  prep->add_option("--n", prep_n, "Total clip count (even, >= 4)");
  prep->add_option("--frame-len", prep_frame_len, "Clip length in samples");

  // train-surrogate
  auto* tsur = app.add_subcommand("train-surrogate", "Train one toy detector");
  std::string tsur_manifest, tsur_family = "res_tssdnet_like";
  int tsur_width = 0, tsur_epochs = 8, tsur_batch = 32;
  double tsur_lr = 1e-3;
  tsur->add_option("--manifest", tsur_manifest, "Dataset manifest")->required();
  tsur->add_option("--family", tsur_family, "Detector family");
  tsur->add_option("--width", tsur_width, "Channel width (0: family default)");
  tsur->add_option("--epochs", tsur_epochs, "Training epochs");
  tsur->add_option("--batch-size", tsur_batch, "Batch size");
  tsur->add_option("--lr", tsur_lr, "Learning rate");

  // train-attack
  auto* tatk = app.add_subcommand("train-attack", "Train the attack generator");
  std::string tatk_manifest, tatk_resume;
  tatk->add_option("--manifest", tatk_manifest, "Dataset manifest")->required();
  tatk->add_option("--resume", tatk_resume, "Checkpoint to resume from");

  // attack
  auto* atk = app.add_subcommand("attack", "Apply a trained generator to a corpus");
  std::string atk_checkpoint, atk_manifest, atk_subset = "all";
  atk->add_option("--checkpoint", atk_checkpoint, "Attack checkpoint")->required();
  atk->add_option("--manifest", atk_manifest, "Dataset manifest")->required();
  atk->add_option("--subset", atk_subset, "all|train|dev|eval");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score victims before/after the attack");
  std::string ev_pairs, ev_manifest, ev_victims;
  bool ev_skip_family_check = false;
  ev->add_option("--pairs", ev_pairs, "Pairing index from `attack`")->required();
  ev->add_option("--manifest", ev_manifest, "Dataset manifest")->required();
  ev->add_option("--victims", ev_victims, "Scenario/victims JSON file")->required();
  ev->add_flag("--skip-family-check", ev_skip_family_check,
               "Do not check victim families against the configured ensemble");

  // ablate
  auto* ab = app.add_subcommand("ablate", "Sweep lambda2 and ensemble size");
  std::string ab_manifest, ab_grid_l2, ab_grid_m;
  ab->add_option("--manifest", ab_manifest, "Dataset manifest")->required();
  ab->add_option("--grid-lambda2", ab_grid_l2, "Comma-separated lambda2 values");
  ab->add_option("--grid-ensemble", ab_grid_m, "Comma-separated ensemble sizes");

  // dump-samples
  auto* ds = app.add_subcommand("dump-samples", "Transcripts + waveform/spectrogram PNGs");
  std::string ds_pairs, ds_clips;
  ds->add_option("--pairs", ds_pairs, "Pairing index")->required();
  ds->add_option("--clips", ds_clips, "Comma-separated clip_ids")->required();

  // report
  auto* rp = app.add_subcommand("report", "Pretty-print an evaluation report");
  std::string rp_report;
  rp->add_option("--report", rp_report, "report.json from `evaluate`")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const config::RunConfig cfg = resolve_config(g);

    if (prep->parsed()) {
      if (g.out_dir.empty()) throw ConfigError("prepare-toy requires --out");
      const long frame_len = prep_frame_len > 0 ? prep_frame_len : cfg.data.frame_len;
      const uint64_t seed = g.seed >= 0 ? static_cast<uint64_t>(g.seed) : 7;
      DatasetManifest m =
          evaluation::build_toy_dataset(prep_n, frame_len, seed, g.out_dir);
      echo_config(cfg, g.out_dir);
      std::cout << "manifest=" << g.out_dir + "/manifest.jsonl" << "\n"
                << "clips=" << m.records.size() << "\n"
                << "corpus_digest=" << hex64(evaluation::corpus_digest(m)) << "\n";
    } else if (tsur->parsed()) {
      if (g.out_dir.empty()) throw ConfigError("train-surrogate requires --out");
      DatasetManifest m = read_manifest(tsur_manifest);
      surrogates::ToySurrogateTrainConfig tc;
      tc.family = tsur_family;
      tc.width = tsur_width;
      tc.epochs = tsur_epochs;
      tc.batch_size = tsur_batch;
      tc.lr = tsur_lr;
      tc.seed = g.seed >= 0 ? static_cast<uint64_t>(g.seed) : cfg.training.seed;
      tc.frame_len = cfg.data.frame_len;
      tc.target_sample_rate = cfg.data.target_sample_rate;
      surrogates::SurrogateModel model = surrogates::train_toy_surrogate(m, tc);
      echo_config(cfg, g.out_dir);
      const std::string path = g.out_dir + "/surrogate-" + model.model_id + ".sbck";
      surrogates::save_surrogate(model, path);
      std::cout << "surrogate=" << path << "\n"
                << "model_id=" << model.model_id << "\n"
                << "heldout_accuracy=" << model.heldout_accuracy << "\n";
    } else if (tatk->parsed()) {
      if (g.out_dir.empty()) throw ConfigError("train-attack requires --out");
      DatasetManifest m = read_manifest(tatk_manifest);
      echo_config(cfg, g.out_dir);
      const std::string ckpt = training::train(cfg, m, g.out_dir, tatk_resume);
      std::cout << "checkpoint=" << ckpt << "\n";
    } else if (atk->parsed()) {
      if (g.out_dir.empty()) throw ConfigError("attack requires --out");
      if (!g.config_path.empty() &&
          training::checkpoint_frame_len(atk_checkpoint) != cfg.data.frame_len)
        throw ConfigError("checkpoint frame_len does not match data.frame_len");
      DatasetManifest m = subset_filter(read_manifest(atk_manifest), atk_subset);
      echo_config(cfg, g.out_dir);
      const auto result = training::attack_corpus(atk_checkpoint, m, g.out_dir);
      std::cout << "pairs=" << result.pairs_path << "\n"
                << "attacked_fakes=" << result.n_fake << "\n"
                << "copied_reals=" << result.n_real << "\n";
    } else if (ev->parsed()) {
      if (g.out_dir.empty()) throw ConfigError("evaluate requires --out");
      DatasetManifest m = read_manifest(ev_manifest);
      const auto scenarios = evaluation::load_scenarios_file(ev_victims);
      if (!ev_skip_family_check) {
        std::vector<std::string> families;
        for (const auto& e : cfg.ensemble.members) families.push_back(e.family);
        evaluation::validate_scenarios(scenarios, families);
      }
      echo_config(cfg, g.out_dir);
      const auto report = evaluation::evaluate_attack(scenarios, m, ev_pairs, cfg);
      write_file(g.out_dir + "/report.json", report.to_json().dump(2) + "\n");
      write_file(g.out_dir + "/report.csv", report.to_csv());
      std::cout << "report_json=" << g.out_dir + "/report.json" << "\n"
                << "report_csv=" << g.out_dir + "/report.csv" << "\n";
    } else if (ab->parsed()) {
      if (g.out_dir.empty()) throw ConfigError("ablate requires --out");
      DatasetManifest m = read_manifest(ab_manifest);
      std::vector<double> grid_l2 = cfg.evaluation.lambda2_grid;
      std::vector<int> grid_m = cfg.evaluation.ensemble_grid;
      auto parse_list = [](const std::string& text, auto& out, const char* what) {
        if (text.empty()) return;
        out.clear();
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
          try {
            if constexpr (std::is_same_v<std::decay_t<decltype(out[0])>, double>)
              out.push_back(std::stod(item));
            else
              out.push_back(std::stoi(item));
          } catch (const std::exception&) {
            throw ConfigError(std::string("bad ") + what + " entry: " + item);
          }
        }
      };
      parse_list(ab_grid_l2, grid_l2, "--grid-lambda2");
      parse_list(ab_grid_m, grid_m, "--grid-ensemble");
      echo_config(cfg, g.out_dir);
      const auto rows = evaluation::ablate(cfg, grid_l2, grid_m, m, g.out_dir);
      write_file(g.out_dir + "/ablation.csv", evaluation::ablation_csv(rows));
      std::cout << "ablation_csv=" << g.out_dir + "/ablation.csv" << "\n";
    } else if (ds->parsed()) {
      if (g.out_dir.empty()) throw ConfigError("dump-samples requires --out");
      std::vector<std::string> ids;
      std::stringstream ss(ds_clips);
      std::string id;
      while (std::getline(ss, id, ','))
        if (!id.empty()) ids.push_back(id);
      echo_config(cfg, g.out_dir);
      evaluation::dump_samples(ds_pairs, ids, g.out_dir, cfg);
      std::cout << "bundles=" << ids.size() << "\n";
    } else if (rp->parsed()) {
      std::ifstream f(rp_report);
      if (!f) throw NotFound("report file not found: " + rp_report);
      nlohmann::json j;
      try {
        f >> j;
      } catch (const nlohmann::json::exception& e) {
        throw DataError("report file does not parse: " + std::string(e.what()));
      }
      std::cout << "victim_id  dataset  scenario  acc_ba  acc_aa  drop  success\n";
      for (const auto& row : j.at("rows")) {
        std::printf("%-10s %-8s %-9s %.4f  %.4f  %+.4f  %.4f\n",
                    row.at("victim_id").get<std::string>().c_str(),
                    row.at("dataset_tag").get<std::string>().c_str(),
                    row.at("scenario").get<std::string>().c_str(),
                    row.at("acc_ba").get<double>(), row.at("acc_aa").get<double>(),
                    row.at("drop").get<double>(),
                    row.at("success_rate").get<double>());
      }
      for (const auto& [name, avg] : j.at("scenario_averages").items())
        std::printf("average[%s]: acc_ba=%.4f acc_aa=%.4f drop=%+.4f\n", name.c_str(),
                    avg.at("acc_ba").get<double>(), avg.at("acc_aa").get<double>(),
                    avg.at("drop").get<double>());
      const auto& q = j.at("quality");
      std::printf("quality: psnr=%.2f dB ssim=%.4f text_similarity=%.4f\n",
                  q.at("mean_psnr").get<double>(), q.at("mean_ssim").get<double>(),
                  q.at("mean_text_similarity").get<double>());
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
