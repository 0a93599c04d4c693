#include "spoofbreak/training.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "spoofbreak/audio_io.hpp"
#include "spoofbreak/wav.hpp"

namespace fs = std::filesystem;

namespace spoofbreak::training {

long checkpoint_frame_len(const std::string& path) {
  io::Archive ar = io::Archive::read(path);
  try {
    return ar.meta.at("config").at("data").at("frame_len").get<long>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("attack checkpoint metadata malformed: " + std::string(e.what()));
  }
}

namespace {

// All train-subset clips of one label, chunked to frame_len float rows.
std::vector<nets::Mat<float>> collect_frames(const DatasetManifest& manifest,
                                             Label label, long frame_len,
                                             int target_rate) {
  std::vector<nets::Mat<float>> out;
  for (const auto& rec : manifest.records) {
    if (rec.subset != Subset::kTrain || rec.label != label) continue;
    AudioClip clip = load_clip(manifest.resolve_path(rec), target_rate);
    for (auto& frame : chunk(clip, frame_len)) {
      nets::Mat<float> m(1, frame_len);
      for (long i = 0; i < frame_len; ++i)
        m(0, i) = static_cast<float>(frame[static_cast<size_t>(i)]);
      out.push_back(std::move(m));
    }
  }
  return out;
}

std::vector<nets::Mat<float>> sample_batch(Rng& rng,
                                           const std::vector<nets::Mat<float>>& pool,
                                           long batch_size) {
  std::vector<nets::Mat<float>> batch;
  batch.reserve(static_cast<size_t>(batch_size));
  for (long i = 0; i < batch_size; ++i)
    batch.push_back(pool[static_cast<size_t>(rng.next_below(pool.size()))]);
  return batch;
}

std::string checkpoint_path(const std::string& out_dir, long step) {
  return out_dir + "/checkpoint-step" + std::to_string(step) + ".sbck";
}

}  // namespace

std::string train(const config::RunConfig& cfg, const DatasetManifest& manifest,
                  const std::string& out_dir, const std::string& resume_checkpoint) {
  fs::create_directories(out_dir);

  std::unique_ptr<AttackSystem<float>> sys;
  if (resume_checkpoint.empty()) {
    sys = AttackSystem<float>::make(cfg);
  } else {
    sys = load_attack_checkpoint<float>(resume_checkpoint);
    if (config::to_json(sys->cfg) != config::to_json(cfg))
      throw ConfigError("resume config differs from the checkpointed config");
  }

  auto fake_pool = collect_frames(manifest, Label::kFake, cfg.data.frame_len,
                                  cfg.data.target_sample_rate);
  auto real_pool = collect_frames(manifest, Label::kReal, cfg.data.frame_len,
                                  cfg.data.target_sample_rate);
  if (fake_pool.empty() || real_pool.empty())
    throw DataError("attack training needs both real and fake clips in the train subset");

  const std::string metrics_path = out_dir + "/metrics.jsonl";
  std::ofstream metrics(metrics_path,
                        sys->step > 0 ? std::ios::app : std::ios::trunc);
  if (!metrics) throw DataError("cannot open metrics log: " + metrics_path);

  std::string last_path;
  while (sys->step < cfg.training.total_steps) {
    const auto t0 = std::chrono::steady_clock::now();
    auto fake_batch = sample_batch(sys->rng, fake_pool, cfg.training.batch_size);
    auto real_batch = sample_batch(sys->rng, real_pool, cfg.training.batch_size);
    losses::LossBreakdown b = train_step(*sys, fake_batch, real_batch);
    const auto t1 = std::chrono::steady_clock::now();

    nlohmann::json line = {
        {"step", sys->step},
        {"perceptual", b.perceptual},
        {"forensics", b.forensics},
        {"transcription", b.transcription},
        {"adversarial", b.adversarial},
        {"total", b.total},
        {"disc_loss", b.disc_loss},
        {"wall_ms",
         std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count()},
    };
    metrics << line.dump() << "\n";
    metrics.flush();

    if (cfg.training.checkpoint_every > 0 &&
        sys->step % cfg.training.checkpoint_every == 0) {
      last_path = checkpoint_path(out_dir, sys->step);
      save_attack_checkpoint(*sys, last_path);
    }
  }

  const std::string final_path = out_dir + "/checkpoint-final.sbck";
  save_attack_checkpoint(*sys, final_path);
  return final_path;
}

AttackCorpusResult attack_corpus(const std::string& checkpoint_path,
                                 const DatasetManifest& manifest,
                                 const std::string& out_dir) {
  auto sys = load_attack_checkpoint<float>(checkpoint_path);
  const long frame_len = sys->cfg.data.frame_len;
  const int rate = sys->cfg.data.target_sample_rate;
  fs::create_directories(out_dir);

  const std::string pairs_path = out_dir + "/pairs.jsonl";
  std::ofstream pairs(pairs_path, std::ios::trunc);
  if (!pairs) throw DataError("cannot open pairing index: " + pairs_path);

  AttackCorpusResult result;
  result.pairs_path = pairs_path;
  for (const auto& rec : manifest.records) {
    const std::string original = manifest.resolve_path(rec);
    const std::string attacked_path = out_dir + "/" + rec.clip_id + ".wav";
    if (rec.label == Label::kFake) {
      AudioClip clip = load_clip(original, rate);
      const long orig_len = static_cast<long>(clip.samples.size());
      auto frames = chunk(clip, frame_len);
      std::vector<std::vector<double>> out_frames;
      out_frames.reserve(frames.size());
      for (const auto& frame : frames) {
        nets::Mat<float> x(1, frame_len);
        for (long i = 0; i < frame_len; ++i)
          x(0, i) = static_cast<float>(frame[static_cast<size_t>(i)]);
        nets::Mat<float> y = sys->gen.forward_item(x, nullptr);
        std::vector<double> out(static_cast<size_t>(frame_len));
        for (long i = 0; i < frame_len; ++i) {
          double v = static_cast<double>(y(0, i));
          out[static_cast<size_t>(i)] = std::clamp(v, -1.0, 1.0);
        }
        out_frames.push_back(std::move(out));
      }
      AudioClip attacked;
      attacked.sample_rate = clip.sample_rate;
      attacked.samples = reassemble(out_frames, orig_len);
      wav::write_wav16(attacked_path, attacked.samples, attacked.sample_rate);
      ++result.n_fake;
    } else {
      std::ifstream in(original, std::ios::binary);
      if (!in) throw NotFound("clip file not found: " + original);
      std::ofstream out(attacked_path, std::ios::binary);
      if (!out) throw DataError("cannot write " + attacked_path);
      out << in.rdbuf();
      ++result.n_real;
    }
    nlohmann::json line = {
        {"clip_id", rec.clip_id},
        {"original_path", original},
        {"attacked_path", attacked_path},
        {"label", to_string(rec.label)},
    };
    pairs << line.dump() << "\n";
  }
  return result;
}

}  // namespace spoofbreak::training
