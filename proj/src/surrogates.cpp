#include "spoofbreak/surrogates.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "spoofbreak/serialize.hpp"
#include "spoofbreak/subprocess.hpp"
#include "spoofbreak/wav.hpp"

namespace spoofbreak::surrogates {

namespace {

bool is_toy_family(const std::string& family) {
  return family == "toy_cnn_small" || family == "toy_cnn_large" ||
         family == "res_tssdnet_like" || family == "inc_tssdnet_like";
}

void check_family(const std::string& family) {
  const auto& known = known_families();
  if (std::find(known.begin(), known.end(), family) == known.end())
    throw ConfigError("unknown surrogate family: " + family);
}

double external_score_one(const std::string& command, const Eigen::MatrixXd& frame,
                          int sample_rate) {
  std::vector<double> samples(static_cast<size_t>(frame.cols()));
  for (long t = 0; t < frame.cols(); ++t) samples[static_cast<size_t>(t)] = frame(0, t);
  const std::string wav_path = temp_path("ext", ".wav");
  wav::write_wav16(wav_path, samples, sample_rate);
  CommandResult res = run_command(command + " " + shell_quote(wav_path));
  std::remove(wav_path.c_str());
  if (res.exit_code != 0)
    throw LoadError("external detector exited with code " +
                    std::to_string(res.exit_code));
  std::istringstream iss(res.out);
  double p = 0.0;
  if (!(iss >> p)) throw LoadError("external detector printed no score");
  return p;
}

}  // namespace

Eigen::VectorXd SurrogateModel::score(const std::vector<Eigen::MatrixXd>& frames) const {
  if (family == "external") {
    Eigen::VectorXd p(static_cast<long>(frames.size()));
    for (size_t i = 0; i < frames.size(); ++i) {
      const double raw = external_score_one(external_command, frames[i], sample_rate);
      p(static_cast<long>(i)) = std::min(std::max(raw, 1e-12), 1.0 - 1e-12);
    }
    return p;
  }
  if (!net) throw LoadError("surrogate " + model_id + " has no loaded network");
  try {
    return logits_to_preal(net->forward_logits(frames, false), real_index);
  } catch (const ShapeError& e) {
    throw ShapeError(std::string(e.what()) + " [model_id=" + model_id + "]");
  }
}

uint64_t SurrogateModel::parameter_digest() const {
  if (family == "external") return fnv1a64("ext:" + external_command);
  std::string bytes;
  for (const auto& s : net->registry().slices())
    bytes.append(reinterpret_cast<const char*>(s.value),
                 static_cast<size_t>(s.size) * sizeof(double));
  return fnv1a64(bytes);
}

void save_surrogate(const SurrogateModel& model, const std::string& path) {
  if (!model.net) throw LoadError("cannot save an external surrogate");
  io::Archive ar;
  ar.meta["kind"] = "surrogate";
  ar.meta["family"] = model.family;
  ar.meta["width"] = model.net->width();
  ar.meta["real_class_index"] = model.real_index;
  ar.meta["sample_rate"] = model.sample_rate;
  ar.meta["heldout_accuracy"] = model.heldout_accuracy;
  for (const auto& s : model.net->registry().slices())
    ar.add_f64(s.name, s.value, static_cast<size_t>(s.size));
  ar.write(path);
}

SurrogateModel load_surrogate(const SurrogateSpec& spec) {
  check_family(spec.family);
  SurrogateModel model;
  model.model_id = spec.model_id.empty() ? spec.family : spec.model_id;
  model.family = spec.family;
  model.real_index = spec.real_class_index;
  if (model.real_index != 0 && model.real_index != 1)
    throw ConfigError("real_class_index must be 0 or 1");

  if (spec.family == "external") {
    if (spec.command.empty())
      throw ConfigError("external surrogate requires a command");
    model.external_command = spec.command;
    return model;
  }

  if (spec.weights_path.empty()) {
    // fresh random net; used by tests and as pre-training scaffolding
    Rng rng(spec.init_seed);
    model.net = make_toy_net<double>(spec.family, spec.width, rng);
    return model;
  }

  io::Archive ar = io::Archive::read(spec.weights_path);
  std::string file_family;
  int file_width = 0;
  try {
    file_family = ar.meta.at("family").get<std::string>();
    file_width = ar.meta.at("width").get<int>();
    if (ar.meta.contains("real_class_index"))
      model.real_index = ar.meta.at("real_class_index").get<int>();
    if (ar.meta.contains("sample_rate"))
      model.sample_rate = ar.meta.at("sample_rate").get<int>();
    if (ar.meta.contains("heldout_accuracy"))
      model.heldout_accuracy = ar.meta.at("heldout_accuracy").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("surrogate checkpoint metadata malformed: " +
                    std::string(e.what()));
  }
  if (file_family != spec.family)
    throw LoadError("surrogate checkpoint family " + file_family +
                    " does not match requested " + spec.family);
  if (spec.real_class_index != 1) model.real_index = spec.real_class_index;

  Rng rng(1);
  model.net = make_toy_net<double>(file_family, file_width, rng);
  for (const auto& s : model.net->registry().slices()) {
    std::vector<double> vals = ar.read_f64(s.name);
    if (static_cast<long>(vals.size()) != s.size)
      throw LoadError("surrogate tensor " + s.name + " has wrong size");
    std::copy(vals.begin(), vals.end(), s.value);
  }
  return model;
}

template <typename T>
EnsembleMember<T> load_ensemble_member(const SurrogateSpec& spec) {
  check_family(spec.family);
  if (!is_toy_family(spec.family))
    throw ConfigError(
        "external surrogates cannot join the training ensemble (no gradients): " +
        spec.family);
  EnsembleMember<T> member;
  member.model_id = spec.model_id.empty() ? spec.family : spec.model_id;
  member.family = spec.family;
  member.real_index = spec.real_class_index;

  if (spec.weights_path.empty()) {
    Rng rng(spec.init_seed);
    member.net = make_toy_net<T>(spec.family, spec.width, rng);
    return member;
  }

  io::Archive ar = io::Archive::read(spec.weights_path);
  std::string file_family;
  int file_width = 0;
  try {
    file_family = ar.meta.at("family").get<std::string>();
    file_width = ar.meta.at("width").get<int>();
    if (ar.meta.contains("real_class_index") && spec.real_class_index == 1)
      member.real_index = ar.meta.at("real_class_index").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("surrogate checkpoint metadata malformed: " +
                    std::string(e.what()));
  }
  if (file_family != spec.family)
    throw LoadError("surrogate checkpoint family " + file_family +
                    " does not match requested " + spec.family);

  Rng rng(1);
  member.net = make_toy_net<T>(file_family, file_width, rng);
  for (const auto& s : member.net->registry().slices()) {
    std::vector<double> vals = ar.read_f64(s.name);
    if (static_cast<long>(vals.size()) != s.size)
      throw LoadError("surrogate tensor " + s.name + " has wrong size");
    for (long i = 0; i < s.size; ++i)
      s.value[i] = static_cast<T>(vals[static_cast<size_t>(i)]);
  }
  return member;
}

template EnsembleMember<float> load_ensemble_member<float>(const SurrogateSpec&);
template EnsembleMember<double> load_ensemble_member<double>(const SurrogateSpec&);

SurrogateModel train_toy_surrogate(const DatasetManifest& manifest,
                                   const ToySurrogateTrainConfig& config) {
  check_family(config.family);
  if (!is_toy_family(config.family))
    throw ConfigError("cannot train the external family");

  struct Item {
    Eigen::MatrixXd frame;
    int cls;  // class index after real_class_index mapping
  };
  const int real_cls = config.real_class_index;
  if (real_cls != 0 && real_cls != 1)
    throw ConfigError("real_class_index must be 0 or 1");

  auto collect = [&](Subset subset, std::vector<Item>& items, bool per_clip_first_only) {
    bool saw_real = false, saw_fake = false;
    for (const ManifestRecord* rec : manifest.subset_records(subset)) {
      AudioClip clip = load_clip(manifest.resolve_path(*rec), config.target_sample_rate);
      clip.clip_id = rec->clip_id;
      (rec->label == Label::kReal ? saw_real : saw_fake) = true;
      auto frames = chunk(clip, config.frame_len);
      const size_t take = per_clip_first_only ? 1 : frames.size();
      for (size_t f = 0; f < take && f < frames.size(); ++f) {
        Item it;
        it.frame.resize(1, config.frame_len);
        for (long t = 0; t < config.frame_len; ++t)
          it.frame(0, t) = frames[f][static_cast<size_t>(t)];
        it.cls = (rec->label == Label::kReal) ? real_cls : 1 - real_cls;
        items.push_back(std::move(it));
      }
    }
    if (!saw_real || !saw_fake)
      throw DataError("surrogate training needs both labels in the " +
                      to_string(subset) + " subset");
  };

  std::vector<Item> train_items, eval_items;
  collect(Subset::kTrain, train_items, false);
  collect(Subset::kEval, eval_items, false);

  Rng rng(config.seed);
  auto net = make_toy_net<double>(config.family, config.width, rng);
  nets::Adam<double> opt(net->registry().param_count(), config.lr);

  std::vector<size_t> order(train_items.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(config.batch_size)) {
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(config.batch_size));
      std::vector<Eigen::MatrixXd> xs;
      std::vector<int> ys;
      for (size_t i = start; i < end; ++i) {
        xs.push_back(train_items[order[i]].frame);
        ys.push_back(train_items[order[i]].cls);
      }
      Eigen::MatrixXd logits = net->forward_logits(xs, true);
      // softmax cross-entropy; dlogits = softmax - onehot, averaged over batch
      Eigen::MatrixXd dlogits(2, logits.cols());
      const double inv_b = 1.0 / static_cast<double>(logits.cols());
      for (long i = 0; i < logits.cols(); ++i) {
        const double m = std::max(logits(0, i), logits(1, i));
        const double e0 = std::exp(logits(0, i) - m);
        const double e1 = std::exp(logits(1, i) - m);
        const double z = e0 + e1;
        dlogits(0, i) = (e0 / z - (ys[static_cast<size_t>(i)] == 0 ? 1.0 : 0.0)) * inv_b;
        dlogits(1, i) = (e1 / z - (ys[static_cast<size_t>(i)] == 1 ? 1.0 : 0.0)) * inv_b;
      }
      net->zero_grad();
      net->backward_logits(dlogits);
      opt.step(net->registry());
    }
  }

  // held-out accuracy over eval items
  long correct = 0;
  for (const Item& it : eval_items) {
    Eigen::MatrixXd logits = net->forward_logits({it.frame}, false);
    const int pred = logits(1, 0) > logits(0, 0) ? 1 : 0;
    if (pred == it.cls) ++correct;
  }

  SurrogateModel model;
  model.model_id = config.family + "-w" +
                   std::to_string(net->width()) + "-s" + std::to_string(config.seed);
  model.family = config.family;
  model.real_index = real_cls;
  model.sample_rate = config.target_sample_rate;
  model.heldout_accuracy =
      eval_items.empty() ? 0.0
                         : static_cast<double>(correct) /
                               static_cast<double>(eval_items.size());
  model.net = std::move(net);
  return model;
}

}  // namespace spoofbreak::surrogates
