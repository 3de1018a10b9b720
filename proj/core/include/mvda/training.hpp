#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mvda/mask.hpp"
#include "mvda/models.hpp"
#include "mvda/tensor.hpp"

namespace mvda {

enum class LossKind { kFocal, kCrossEntropy };

inline const char* loss_kind_name(LossKind k) {
  return k == LossKind::kFocal ? "focal" : "cross-entropy";
}

inline LossKind loss_kind_from_name(const std::string& name) {
  if (name == "focal") return LossKind::kFocal;
  if (name == "cross-entropy") return LossKind::kCrossEntropy;
  throw std::invalid_argument("unknown loss kind '" + name + "'");
}

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 1;
  int max_epochs = 50;
  int patience = 3;
  LossKind loss = LossKind::kFocal;
  double gamma = 2.0;
  // Per-class weights; empty selects inverse class frequency normalized to
  // mean 1, computed from the training split.
  std::vector<float> alpha;
  bool augment = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_metric = 0;  // mean IoU for Model-L, accuracy for Model-C
};

struct TrainLog {
  std::vector<EpochStats> epochs;
  std::string stop_reason;  // "max-epochs" or "early-stop"
  // Marker lines (e.g. phase boundaries) keyed by the epoch index they
  // precede in the serialized log.
  std::vector<std::pair<std::size_t, std::string>> notes;

  // One epoch per line: epoch,train_loss,val_loss,val_metric. Notes and the
  // stop reason appear as '#' comment lines.
  void write_csv(const std::string& path) const;
};

struct SegSample {
  Tensor<float> image;  // 3 x H x W
  Mask mask;
};

struct ClsSample {
  std::vector<Tensor<float>> views;  // masked view images in role order
  int label = 0;
};

// Test seam: overrides the validation evaluation per epoch, returning
// (val_loss, val_metric).
using ModelLValHook = std::function<std::pair<double, double>(const ModelL<float>&, int epoch)>;

// Per-pixel focal loss, Adam, seeded shuffling, one epoch per pass.
// Validation loss is evaluated after each epoch; training stops when it has
// not improved for `patience` consecutive epochs, and the parameters with
// the best validation loss are restored before returning.
TrainLog train_model_l(ModelL<float>& model, const std::vector<SegSample>& train_split,
                       const std::vector<SegSample>& val_split, const TrainConfig& config,
                       const ModelLValHook& val_hook = nullptr);

// Two-phase schedule: phase 1 trains the head with every backbone parameter
// frozen, phase 2 unfreezes everything and fine-tunes at the lower rate.
// Both phases run their full epoch budgets; the final parameters are kept.
TrainLog train_model_c(ModelC<float>& model, const std::vector<ClsSample>& train_split,
                       const std::vector<ClsSample>& val_split, const TrainConfig& phase1,
                       const TrainConfig& phase2);

// Mean validation loss / accuracy helpers shared with the evaluators.
double model_c_accuracy(const ModelC<float>& model, const std::vector<ClsSample>& samples);

// Inverse-class-frequency weights normalized to mean 1.
std::vector<float> inverse_frequency_weights(const std::vector<std::int64_t>& class_counts);

}  // namespace mvda
