#include "mvda/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "mvda/augment.hpp"
#include "mvda/optimizer.hpp"
#include "mvda/rng.hpp"

namespace mvda {

void TrainConfig::validate() const {
  if (learning_rate <= 0) throw std::invalid_argument("train: learning rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("train: max epochs must be >= 1");
  if (patience < 1) throw std::invalid_argument("train: patience must be >= 1");
  if (gamma < 0) throw std::invalid_argument("train: focal gamma must be >= 0");
  for (float a : alpha)
    if (a <= 0) throw std::invalid_argument("train: alpha components must be > 0");
}

void TrainLog::write_csv(const std::string& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("train log: cannot write " + path);
  f << "epoch,train_loss,val_loss,val_metric\n";
  char buf[160];
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    for (const auto& [at, text] : notes)
      if (at == i) f << "# " << text << "\n";
    const EpochStats& e = epochs[i];
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g\n", e.epoch, e.train_loss, e.val_loss,
                  e.val_metric);
    f << buf;
  }
  if (!stop_reason.empty()) f << "# stop_reason=" << stop_reason << "\n";
  if (!f) throw std::runtime_error("train log: write failed " + path);
}

std::vector<float> inverse_frequency_weights(const std::vector<std::int64_t>& class_counts) {
  std::vector<double> inv(class_counts.size());
  double sum = 0;
  for (std::size_t i = 0; i < class_counts.size(); ++i) {
    inv[i] = 1.0 / static_cast<double>(std::max<std::int64_t>(class_counts[i], 1));
    sum += inv[i];
  }
  const double mean = sum / static_cast<double>(class_counts.size());
  std::vector<float> out(class_counts.size());
  for (std::size_t i = 0; i < inv.size(); ++i) out[i] = static_cast<float>(inv[i] / mean);
  return out;
}

namespace {

std::vector<std::uint8_t> mask_bytes(const Mask& m) { return m.data; }

double mask_iou(const Mask& a, const Mask& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const bool pa = a.data[i] != 0, pb = b.data[i] != 0;
    inter += (pa && pb) ? 1 : 0;
    uni += (pa || pb) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Focal-loss settings resolved for Model-L: cross-entropy is the gamma=0,
// unit-alpha special case.
struct SegLossParams {
  float gamma = 2.f;
  float alpha_bg = 1.f;
  float alpha_fg = 1.f;
};

SegLossParams resolve_seg_loss(const TrainConfig& config,
                               const std::vector<SegSample>& train_split) {
  SegLossParams p;
  if (config.loss == LossKind::kCrossEntropy) {
    p.gamma = 0.f;
    return p;
  }
  p.gamma = static_cast<float>(config.gamma);
  if (config.alpha.size() == 2) {
    p.alpha_bg = config.alpha[0];
    p.alpha_fg = config.alpha[1];
    return p;
  }
  std::vector<std::int64_t> counts(2, 0);
  for (const SegSample& s : train_split) {
    const std::size_t fg = s.mask.count();
    counts[1] += static_cast<std::int64_t>(fg);
    counts[0] += static_cast<std::int64_t>(s.mask.size() - fg);
  }
  const std::vector<float> w = inverse_frequency_weights(counts);
  p.alpha_bg = w[0];
  p.alpha_fg = w[1];
  return p;
}

double model_l_sample_loss(Tape<float>& tape, const ModelL<float>& model,
                           const Tensor<float>& image, const Mask& mask,
                           const SegLossParams& lp, float scale, Var<float>* out_var) {
  Var<float> in = tape.input(image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)}));
  Var<float> probs = model.forward(tape, in);
  Var<float> loss =
      tape.binary_focal_map_loss(probs, mask_bytes(mask), lp.gamma, lp.alpha_bg, lp.alpha_fg);
  const double raw = tape.value(loss).data()[0];
  if (out_var) *out_var = scale == 1.f ? loss : tape.mul_scalar(loss, scale);
  return raw;
}

std::pair<double, double> model_l_validate(const ModelL<float>& model,
                                           const std::vector<SegSample>& val_split,
                                           const SegLossParams& lp) {
  double loss_sum = 0, iou_sum = 0;
  for (const SegSample& s : val_split) {
    Tape<float> tape;
    Var<float> in = tape.input(s.image.reshaped({1, 3, s.image.dim(1), s.image.dim(2)}));
    Var<float> probs_var = model.forward(tape, in);
    Var<float> loss = tape.binary_focal_map_loss(probs_var, s.mask.data, lp.gamma, lp.alpha_bg,
                                                 lp.alpha_fg);
    loss_sum += tape.value(loss).data()[0];
    const Tensor<float> probs =
        tape.value(probs_var).reshaped({1, s.image.dim(1), s.image.dim(2)});
    iou_sum += mask_iou(binarize_mask(probs, 0.5), s.mask);
  }
  const double n = static_cast<double>(val_split.size());
  return {loss_sum / n, iou_sum / n};
}

struct ClsLossParams {
  float gamma = 0.f;
  std::vector<float> alpha;  // empty = unit weights
};

ClsLossParams resolve_cls_loss(const TrainConfig& config,
                               const std::vector<ClsSample>& train_split, int num_classes) {
  ClsLossParams p;
  if (config.loss == LossKind::kCrossEntropy) return p;
  p.gamma = static_cast<float>(config.gamma);
  if (!config.alpha.empty()) {
    if (static_cast<int>(config.alpha.size()) != num_classes)
      throw std::invalid_argument("train: alpha size does not match class count");
    p.alpha = config.alpha;
    return p;
  }
  std::vector<std::int64_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (const ClsSample& s : train_split) ++counts[static_cast<std::size_t>(s.label)];
  p.alpha = inverse_frequency_weights(counts);
  return p;
}

double model_c_sample_loss(Tape<float>& tape, const ModelC<float>& model,
                           const std::vector<Tensor<float>>& views, int label,
                           const ClsLossParams& lp, float scale, Var<float>* out_var) {
  std::vector<Var<float>> vars;
  vars.reserve(views.size());
  for (const Tensor<float>& v : views)
    vars.push_back(tape.input(v.reshaped({1, v.dim(0), v.dim(1), v.dim(2)})));
  Var<float> probs = model.forward(tape, vars);
  Var<float> loss = tape.categorical_focal_loss(probs, {label}, lp.gamma, lp.alpha);
  const double raw = tape.value(loss).data()[0];
  if (out_var) *out_var = scale == 1.f ? loss : tape.mul_scalar(loss, scale);
  return raw;
}

std::pair<double, double> model_c_validate(const ModelC<float>& model,
                                           const std::vector<ClsSample>& val_split,
                                           const ClsLossParams& lp) {
  double loss_sum = 0;
  int correct = 0;
  for (const ClsSample& s : val_split) {
    Tape<float> tape;
    loss_sum += model_c_sample_loss(tape, model, s.views, s.label, lp, 1.f, nullptr);
    const std::vector<float> probs = model.infer(s.views);
    int arg = 0;
    for (int k = 1; k < static_cast<int>(probs.size()); ++k)
      if (probs[static_cast<std::size_t>(k)] > probs[static_cast<std::size_t>(arg)]) arg = k;
    if (arg == s.label) ++correct;
  }
  const double n = static_cast<double>(val_split.size());
  return {loss_sum / n, static_cast<double>(correct) / n};
}

// One optimization phase for Model-C (shared by both schedule steps).
void run_model_c_phase(ModelC<float>& model, const std::vector<ClsSample>& train_split,
                       const std::vector<ClsSample>& val_split, const TrainConfig& config,
                       const ClsLossParams& lp, const char* phase_tag, int epoch_offset,
                       TrainLog& log) {
  Adam<float> adam(model.params(), {});
  const std::size_t n = train_split.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng shuffle_rng(Rng::derive(config.seed, std::string("model_c.") + phase_tag + ".epoch",
                                static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double loss_sum = 0;
    std::size_t pos = 0;
    while (pos < n) {
      const std::size_t batch_end = std::min(pos + static_cast<std::size_t>(config.batch_size), n);
      const float scale = 1.f / static_cast<float>(batch_end - pos);
      model.params().zero_grad();
      for (std::size_t bi = pos; bi < batch_end; ++bi) {
        const std::size_t idx = order[bi];
        const ClsSample& s = train_split[idx];
        std::vector<Tensor<float>> views = s.views;
        if (config.augment) {
          for (std::size_t v = 0; v < views.size(); ++v) {
            Rng aug_rng(Rng::derive(config.seed, std::string("model_c.") + phase_tag + ".aug",
                                    (static_cast<std::uint64_t>(epoch) << 32) ^
                                        (idx * kNumViews + v)));
            const std::vector<AugmentOp> ops = draw_classification_augments(aug_rng);
            views[v] = augment_image(views[v], ops);
          }
        }
        Tape<float> tape;
        Var<float> loss{};
        loss_sum += model_c_sample_loss(tape, model, views, s.label, lp, scale, &loss);
        tape.backward(loss);
      }
      adam.step(static_cast<float>(config.learning_rate));
      pos = batch_end;
    }

    const auto [val_loss, val_acc] = model_c_validate(model, val_split, lp);
    log.epochs.push_back({epoch_offset + epoch, loss_sum / static_cast<double>(n), val_loss,
                          val_acc});
  }
}

}  // namespace

double model_c_accuracy(const ModelC<float>& model, const std::vector<ClsSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("model_c_accuracy: empty sample list");
  int correct = 0;
  for (const ClsSample& s : samples) {
    const std::vector<float> probs = model.infer(s.views);
    int arg = 0;
    for (int k = 1; k < static_cast<int>(probs.size()); ++k)
      if (probs[static_cast<std::size_t>(k)] > probs[static_cast<std::size_t>(arg)]) arg = k;
    if (arg == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

TrainLog train_model_l(ModelL<float>& model, const std::vector<SegSample>& train_split,
                       const std::vector<SegSample>& val_split, const TrainConfig& config,
                       const ModelLValHook& val_hook) {
  config.validate();
  if (train_split.empty() || val_split.empty())
    throw std::invalid_argument("train_model_l: empty split");

  const SegLossParams lp = resolve_seg_loss(config, train_split);
  Adam<float> adam(model.params(), {});
  TrainLog log;

  const std::size_t n = train_split.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  double best_val = 0;
  std::vector<Tensor<float>> best_params;
  int epochs_since_improvement = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng shuffle_rng(
        Rng::derive(config.seed, "model_l.epoch", static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double loss_sum = 0;
    std::size_t pos = 0;
    while (pos < n) {
      const std::size_t batch_end = std::min(pos + static_cast<std::size_t>(config.batch_size), n);
      const float scale = 1.f / static_cast<float>(batch_end - pos);
      model.params().zero_grad();
      for (std::size_t bi = pos; bi < batch_end; ++bi) {
        const std::size_t idx = order[bi];
        const SegSample* sample = &train_split[idx];
        SegSample augmented;
        if (config.augment) {
          Rng aug_rng(Rng::derive(config.seed, "model_l.aug",
                                  (static_cast<std::uint64_t>(epoch) << 32) ^ idx));
          const std::vector<AugmentOp> ops = draw_segmentation_augments(aug_rng);
          auto [img, msk] = augment(sample->image, sample->mask, ops);
          augmented = {std::move(img), std::move(msk)};
          sample = &augmented;
        }
        Tape<float> tape;
        Var<float> loss{};
        loss_sum += model_l_sample_loss(tape, model, sample->image, sample->mask, lp, scale,
                                        &loss);
        tape.backward(loss);
      }
      adam.step(static_cast<float>(config.learning_rate));
      pos = batch_end;
    }

    const auto [val_loss, val_metric] =
        val_hook ? val_hook(model, epoch) : model_l_validate(model, val_split, lp);
    log.epochs.push_back({epoch, loss_sum / static_cast<double>(n), val_loss, val_metric});

    if (best_params.empty() || val_loss < best_val) {
      best_val = val_loss;
      best_params = model.params().snapshot_values();
      epochs_since_improvement = 0;
    } else {
      ++epochs_since_improvement;
      if (epochs_since_improvement >= config.patience) {
        log.stop_reason = "early-stop";
        break;
      }
    }
  }
  if (log.stop_reason.empty()) log.stop_reason = "max-epochs";
  model.params().restore_values(best_params);
  return log;
}

TrainLog train_model_c(ModelC<float>& model, const std::vector<ClsSample>& train_split,
                       const std::vector<ClsSample>& val_split, const TrainConfig& phase1,
                       const TrainConfig& phase2) {
  phase1.validate();
  phase2.validate();
  if (train_split.empty() || val_split.empty())
    throw std::invalid_argument("train_model_c: empty split");
  for (const ClsSample& s : train_split)
    if (static_cast<int>(s.views.size()) != model.config().num_views)
      throw std::invalid_argument("train_model_c: sample view count does not match model");

  const ClsLossParams lp1 = resolve_cls_loss(phase1, train_split, model.config().num_classes);
  const ClsLossParams lp2 = resolve_cls_loss(phase2, train_split, model.config().num_classes);

  TrainLog log;
  char note[96];
  std::snprintf(note, sizeof(note), "phase 1: backbone frozen, lr=%g", phase1.learning_rate);
  log.notes.emplace_back(0, note);

  model.params().set_trainable("backbone.", false);
  run_model_c_phase(model, train_split, val_split, phase1, lp1, "phase1", 0, log);

  std::snprintf(note, sizeof(note), "phase 2: fine-tuning all parameters, lr=%g",
                phase2.learning_rate);
  log.notes.emplace_back(log.epochs.size(), note);

  model.params().set_trainable("", true);
  run_model_c_phase(model, train_split, val_split, phase2, lp2, "phase2",
                    static_cast<int>(log.epochs.size()), log);

  log.stop_reason = "max-epochs";
  return log;
}

}  // namespace mvda
