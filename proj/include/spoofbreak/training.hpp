#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "spoofbreak/config.hpp"
#include "spoofbreak/error.hpp"
#include "spoofbreak/losses.hpp"
#include "spoofbreak/nets/discriminator.hpp"
#include "spoofbreak/nets/generator.hpp"
#include "spoofbreak/nets/layers.hpp"
#include "spoofbreak/rng.hpp"
#include "spoofbreak/serialize.hpp"
#include "spoofbreak/surrogates.hpp"
#include "spoofbreak/transcription.hpp"

namespace spoofbreak::training {

// Generator + discriminator + frozen surrogate ensemble + band encoder, with
// both optimizers and the training RNG. Heap-allocate and never move: the
// parameter registries hold raw pointers into the member networks.
template <typename T>
class AttackSystem {
public:
  config::RunConfig cfg;
  nets::GeneratorNet<T> gen;
  nets::DiscriminatorNet<T> disc;
  std::vector<surrogates::EnsembleMember<T>> ensemble;
  std::unique_ptr<transcription::BandEncoder<T>> encoder;
  losses::LossWeights weights;
  losses::AdversarialForm adv_form = losses::AdversarialForm::non_saturating;
  nets::ParamRegistry<T> reg_g, reg_d;
  nets::Adam<T> opt_g, opt_d;
  Rng rng{0};
  long step = 0;

  AttackSystem() = default;
  AttackSystem(const AttackSystem&) = delete;
  AttackSystem& operator=(const AttackSystem&) = delete;

  static std::unique_ptr<AttackSystem<T>> make(const config::RunConfig& cfg) {
    config::validate(cfg);
    auto sys = std::make_unique<AttackSystem<T>>();
    sys->cfg = cfg;
    sys->rng = Rng(cfg.training.seed);

    nets::GeneratorConfig gc;
    for (int i = 0; i < 4; ++i)
      gc.stage_widths[static_cast<size_t>(i)] =
          cfg.generator.stage_widths[static_cast<size_t>(i)];
    gc.frame_len = cfg.data.frame_len;
    gc.alpha_init = cfg.generator.alpha_init;
    gc.highpass_cutoff_hz = cfg.generator.highpass_cutoff_hz;
    gc.highpass_taps = cfg.generator.highpass_taps;
    gc.sample_rate = cfg.data.target_sample_rate;
    sys->gen = nets::GeneratorNet<T>(gc, sys->rng);

    nets::DiscriminatorConfig dc;
    dc.channels = cfg.discriminator.channels;
    dc.input_len = cfg.data.frame_len;
    dc.fc1 = cfg.discriminator.fc1;
    dc.fc2 = cfg.discriminator.fc2;
    sys->disc = nets::DiscriminatorNet<T>(dc, sys->rng);

    for (const auto& entry : cfg.ensemble.members) {
      surrogates::SurrogateSpec spec;
      spec.model_id = entry.model_id;
      spec.family = entry.family;
      spec.width = entry.width;
      spec.weights_path = entry.weights_path;
      spec.real_class_index = entry.real_class_index;
      spec.command = entry.command;
      spec.init_seed = entry.init_seed;
      sys->ensemble.push_back(surrogates::load_ensemble_member<T>(spec));
    }

    sys->encoder = std::make_unique<transcription::BandEncoder<T>>(
        cfg.data.target_sample_rate);
    sys->weights.lambda1 = cfg.losses.lambda1;
    sys->weights.lambda2 = cfg.losses.lambda2;
    sys->weights.lambda3 = cfg.losses.lambda3;
    sys->weights.lambda4 = cfg.losses.lambda4;
    sys->weights.validate();
    sys->adv_form = losses::adversarial_form_from_string(cfg.losses.adversarial_form);

    sys->gen.register_params(sys->reg_g);
    sys->disc.register_params(sys->reg_d);
    sys->opt_g = nets::Adam<T>(sys->reg_g.param_count(), cfg.training.lr_g);
    sys->opt_d = nets::Adam<T>(sys->reg_d.param_count(), cfg.training.lr_d);
    return sys;
  }
};

template <typename T>
uint64_t member_digest(const surrogates::EnsembleMember<T>& m) {
  std::string bytes;
  for (const auto& s : m.net->registry().slices())
    bytes.append(reinterpret_cast<const char*>(s.value),
                 static_cast<size_t>(s.size) * sizeof(T));
  return fnv1a64(bytes);
}

namespace detail {

// Shared by the training step and the gradient-check path: computes the four
// generator loss terms on a forwarded batch and (optionally) the total input
// gradient dL/d(attacked) per item. Discriminator parameter gradients picked
// up along the way are zeroed; surrogates likewise.
template <typename T>
losses::LossTerms generator_terms(AttackSystem<T>& sys,
                                  const std::vector<nets::Mat<T>>& fake_batch,
                                  const std::vector<nets::Mat<T>>& attacked,
                                  std::vector<nets::Mat<T>>* dy_total) {
  const size_t b = fake_batch.size();
  losses::LossTerms terms;
  if (dy_total) {
    dy_total->assign(b, nets::Mat<T>());
    for (size_t i = 0; i < b; ++i)
      (*dy_total)[i] = nets::Mat<T>::Zero(1, attacked[i].cols());
  }

  // perceptual
  {
    std::vector<nets::Mat<T>> dy;
    terms.perceptual = static_cast<double>(
        losses::perceptual_loss(fake_batch, attacked, dy_total ? &dy : nullptr));
    if (dy_total) {
      const T l1 = static_cast<T>(sys.weights.lambda1);
      for (size_t i = 0; i < b; ++i) (*dy_total)[i] += l1 * dy[i];
    }
  }

  // forensics: assemble the [M x B] P(real) matrix, then backprop per member
  {
    const long m = static_cast<long>(sys.ensemble.size());
    nets::Mat<T> probs(m, static_cast<long>(b));
    for (long mi = 0; mi < m; ++mi)
      probs.row(mi) = sys.ensemble[static_cast<size_t>(mi)]
                          .score(attacked, dy_total != nullptr)
                          .transpose();
    nets::Mat<T> dprobs;
    terms.forensics = static_cast<double>(
        losses::forensics_loss(probs, dy_total ? &dprobs : nullptr));
    if (dy_total) {
      const T l2 = static_cast<T>(sys.weights.lambda2);
      for (long mi = 0; mi < m; ++mi) {
        auto& member = sys.ensemble[static_cast<size_t>(mi)];
        std::vector<nets::Mat<T>> dxs = member.backward_score(
            probs.row(mi).transpose(), dprobs.row(mi).transpose());
        for (size_t i = 0; i < b; ++i) (*dy_total)[i] += l2 * dxs[i];
        member.net->zero_grad();  // frozen: discard parameter grads
      }
    }
  }

  // transcription: mean over items of 1 - cos(pooled band states)
  {
    double acc = 0;
    const T l3_over_b =
        static_cast<T>(sys.weights.lambda3 / static_cast<double>(b));
    for (size_t i = 0; i < b; ++i) {
      nets::Mat<T> feats_ref = sys.encoder->encode_item(fake_batch[i], nullptr);
      typename transcription::BandEncoder<T>::Cache enc_cache;
      nets::Mat<T> feats_att =
          sys.encoder->encode_item(attacked[i], dy_total ? &enc_cache : nullptr);
      nets::Mat<T> dfeats;
      const T li = transcription::transcription_loss_train(
          feats_ref, feats_att, dy_total ? &dfeats : nullptr);
      acc += static_cast<double>(li);
      if (dy_total)
        (*dy_total)[i] += l3_over_b * sys.encoder->backward_item(dfeats, enc_cache);
    }
    terms.transcription = acc / static_cast<double>(b);
  }

  // adversarial: discriminator on attacked, train-mode batch statistics
  {
    typename nets::DiscriminatorNet<T>::BatchCache dcache;
    nets::Vec<T> d_att =
        sys.disc.forward(attacked, true, dy_total ? &dcache : nullptr);
    nets::Vec<T> dd;
    terms.adversarial = static_cast<double>(
        losses::adversarial_loss_g(d_att, sys.adv_form, dy_total ? &dd : nullptr));
    if (dy_total) {
      std::vector<nets::Mat<T>> dxs = sys.disc.backward(dd, dcache);
      const T l4 = static_cast<T>(sys.weights.lambda4);
      for (size_t i = 0; i < b; ++i) (*dy_total)[i] += l4 * dxs[i];
      sys.disc.zero_grad();  // this pass must not feed the D update
    }
  }

  return terms;
}

}  // namespace detail

// Total generator objective on a batch; pure evaluation, no updates.
template <typename T>
T generator_total_loss(AttackSystem<T>& sys,
                       const std::vector<nets::Mat<T>>& fake_batch) {
  std::vector<nets::Mat<T>> attacked = sys.gen.forward_batch(fake_batch, nullptr);
  losses::LossTerms terms =
      detail::generator_terms<T>(sys, fake_batch, attacked, nullptr);
  return static_cast<T>(losses::total_generator_loss(terms, sys.weights));
}

// Same objective with analytic gradients accumulated into the generator's
// parameter gradient buffers (zeroed first).
template <typename T>
T generator_total_loss_and_grads(AttackSystem<T>& sys,
                                 const std::vector<nets::Mat<T>>& fake_batch) {
  std::vector<typename nets::GeneratorNet<T>::ItemCache> caches;
  std::vector<nets::Mat<T>> attacked = sys.gen.forward_batch(fake_batch, &caches);
  std::vector<nets::Mat<T>> dy;
  losses::LossTerms terms = detail::generator_terms(sys, fake_batch, attacked, &dy);
  sys.gen.zero_grad();
  for (size_t i = 0; i < fake_batch.size(); ++i)
    sys.gen.backward_item(dy[i], caches[i]);
  return static_cast<T>(losses::total_generator_loss(terms, sys.weights));
}

struct TrainStepOptions {
  bool update_g = true;
  bool update_d = true;
};

template <typename T>
losses::LossBreakdown train_step(AttackSystem<T>& sys,
                                 const std::vector<nets::Mat<T>>& fake_batch,
                                 const std::vector<nets::Mat<T>>& real_batch,
                                 const TrainStepOptions& options = {}) {
  if (fake_batch.size() != real_batch.size() || fake_batch.size() < 2)
    throw ShapeError("train_step: fake and real batches must have equal size >= 2");

  // Pass 1: forward without caches, compute the loss terms and dL/d(attacked).
  // Pass 2 below re-runs the generator item by item with caches, so peak cache
  // memory stays one item deep.
  std::vector<nets::Mat<T>> attacked = sys.gen.forward_batch(fake_batch, nullptr);
  std::vector<nets::Mat<T>> dy;
  losses::LossTerms terms = detail::generator_terms(sys, fake_batch, attacked, &dy);

  double disc_loss_value = 0;

  auto check_finite = [&](double v, const char* name) {
    if (!std::isfinite(v)) {
      losses::LossBreakdown b = losses::make_breakdown(terms, sys.weights, disc_loss_value);
      throw NumericalError(
          std::string("non-finite ") + name + " loss (perceptual=" +
          std::to_string(b.perceptual) + ", forensics=" + std::to_string(b.forensics) +
          ", transcription=" + std::to_string(b.transcription) + ", adversarial=" +
          std::to_string(b.adversarial) + ", total=" + std::to_string(b.total) +
          ", disc=" + std::to_string(b.disc_loss) + ")");
    }
  };
  check_finite(terms.perceptual, "perceptual");
  check_finite(terms.forensics, "forensics");
  check_finite(terms.transcription, "transcription");
  check_finite(terms.adversarial, "adversarial");
  check_finite(losses::total_generator_loss(terms, sys.weights), "total generator");

  if (options.update_g) {
    sys.gen.zero_grad();
    for (size_t i = 0; i < fake_batch.size(); ++i) {
      typename nets::GeneratorNet<T>::ItemCache cache;
      sys.gen.forward_item(fake_batch[i], &cache);
      sys.gen.backward_item(dy[i], cache);
    }
    sys.opt_g.step(sys.reg_g);
  }

  if (options.update_d) {
    sys.disc.zero_grad();
    typename nets::DiscriminatorNet<T>::BatchCache cache_real, cache_att;
    nets::Vec<T> d_real = sys.disc.forward(real_batch, true, &cache_real);
    nets::Vec<T> d_att = sys.disc.forward(attacked, true, &cache_att);
    nets::Vec<T> dd_real, dd_att;
    disc_loss_value = static_cast<double>(
        losses::discriminator_loss(d_real, d_att, &dd_real, &dd_att));
    check_finite(disc_loss_value, "discriminator");
    sys.disc.backward(dd_real, cache_real);
    sys.disc.backward(dd_att, cache_att);
    sys.opt_d.step(sys.reg_d);
    sys.disc.project_kernel();
  }

  ++sys.step;
  return losses::make_breakdown(terms, sys.weights, disc_loss_value);
}

// ---------------------------------------------------------------------------
// checkpoint archive

template <typename T>
void save_attack_checkpoint(const AttackSystem<T>& sys, const std::string& path) {
  io::Archive ar;
  ar.meta["kind"] = "attack";
  ar.meta["dtype"] = std::is_same_v<T, float> ? "f32" : "f64";
  ar.meta["step"] = sys.step;
  ar.meta["config"] = config::to_json(sys.cfg);
  ar.meta["opt_g_steps"] = sys.opt_g.step_count();
  ar.meta["opt_d_steps"] = sys.opt_d.step_count();

  auto add_typed = [&ar](const std::string& name, const T* p, size_t n) {
    if constexpr (std::is_same_v<T, float>)
      ar.add_f32(name, p, n);
    else
      ar.add_f64(name, p, n);
  };
  for (const auto& s : sys.reg_g.slices())
    add_typed("g." + s.name, s.value, static_cast<size_t>(s.size));
  for (const auto& s : sys.reg_d.slices())
    add_typed("d." + s.name, s.value, static_cast<size_t>(s.size));
  add_typed("opt_g.m", sys.opt_g.moment1().data(), sys.opt_g.moment1().size());
  add_typed("opt_g.v", sys.opt_g.moment2().data(), sys.opt_g.moment2().size());
  add_typed("opt_d.m", sys.opt_d.moment1().data(), sys.opt_d.moment1().size());
  add_typed("opt_d.v", sys.opt_d.moment2().data(), sys.opt_d.moment2().size());
  const auto rng_state = sys.rng.save_state();
  ar.add_u64("rng.state", rng_state.data(), rng_state.size());
  ar.write(path);
}

template <typename T>
std::unique_ptr<AttackSystem<T>> load_attack_checkpoint(const std::string& path) {
  io::Archive ar = io::Archive::read(path);
  std::string kind, dtype;
  try {
    kind = ar.meta.at("kind").get<std::string>();
    dtype = ar.meta.at("dtype").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("attack checkpoint metadata malformed: " + std::string(e.what()));
  }
  if (kind != "attack") throw LoadError("not an attack checkpoint: " + path);
  const std::string want = std::is_same_v<T, float> ? "f32" : "f64";
  if (dtype != want)
    throw LoadError("checkpoint dtype " + dtype + " does not match requested " + want);

  config::RunConfig cfg = config::from_json(ar.meta.at("config"));
  auto sys = AttackSystem<T>::make(cfg);
  sys->step = ar.meta.at("step").get<long>();
  sys->opt_g.set_step_count(ar.meta.at("opt_g_steps").get<long>());
  sys->opt_d.set_step_count(ar.meta.at("opt_d_steps").get<long>());

  auto read_typed = [&ar](const std::string& name) {
    if constexpr (std::is_same_v<T, float>)
      return ar.read_f32(name);
    else
      return ar.read_f64(name);
  };
  auto load_registry = [&](nets::ParamRegistry<T>& reg, const std::string& prefix) {
    for (const auto& s : reg.slices()) {
      auto vals = read_typed(prefix + s.name);
      if (static_cast<long>(vals.size()) != s.size)
        throw LoadError("checkpoint tensor " + prefix + s.name + " has wrong size");
      std::copy(vals.begin(), vals.end(), s.value);
    }
  };
  load_registry(sys->reg_g, "g.");
  load_registry(sys->reg_d, "d.");

  auto load_moments = [&](std::vector<T>& dst, const std::string& name) {
    auto vals = read_typed(name);
    if (vals.size() != dst.size())
      throw LoadError("checkpoint tensor " + name + " has wrong size");
    std::copy(vals.begin(), vals.end(), dst.begin());
  };
  load_moments(sys->opt_g.moment1(), "opt_g.m");
  load_moments(sys->opt_g.moment2(), "opt_g.v");
  load_moments(sys->opt_d.moment1(), "opt_d.m");
  load_moments(sys->opt_d.moment2(), "opt_d.v");

  auto state = ar.read_u64("rng.state");
  if (state.size() != 4) throw LoadError("corrupt rng state in checkpoint");
  sys->rng.restore_state({state[0], state[1], state[2], state[3]});
  return sys;
}

// Frame length recorded in a checkpoint without constructing the system.
long checkpoint_frame_len(const std::string& path);

// ---------------------------------------------------------------------------
// drivers (float precision production path)

// Runs cfg.training.total_steps alternating updates over the manifest's train
// subset; writes checkpoints and an NDJSON metrics log into out_dir. When
// resume_checkpoint is nonempty, continues from it (config must match).
// Returns the final checkpoint path.
std::string train(const config::RunConfig& cfg, const DatasetManifest& manifest,
                  const std::string& out_dir,
                  const std::string& resume_checkpoint = "");

struct AttackCorpusResult {
  std::string pairs_path;
  long n_fake = 0;
  long n_real = 0;
};

// Applies the checkpointed generator to every fake clip in the manifest
// (chunk -> generate -> reassemble -> clip -> 16-bit WAV); copies real clips
// byte for byte; writes the pairing index.
AttackCorpusResult attack_corpus(const std::string& checkpoint_path,
                                 const DatasetManifest& manifest,
                                 const std::string& out_dir);

}  // namespace spoofbreak::training
