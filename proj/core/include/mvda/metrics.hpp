#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvda/mask.hpp"

namespace mvda {

// Jaccard index |A intersect B| / |A union B|. Two empty masks score 1,
// exactly one empty mask scores 0.
double iou(const Mask& a, const Mask& b);

// Connected component of a binary mask with its detection confidence (mean
// probability over the component; 1 when no probability map is supplied).
struct Instance {
  std::vector<std::size_t> pixels;  // ascending row-major indices
  double confidence = 1.0;
};

// 4-connected components in deterministic order (by top-left pixel).
std::vector<Instance> extract_instances(const Mask& mask,
                                        const std::vector<float>* probabilities = nullptr);

double instance_iou(const Instance& a, const Instance& b);

struct PredictionFlag {
  double confidence = 1.0;
  bool is_tp = false;
};

struct MatchResult {
  int tp = 0, fp = 0, fn = 0;
  struct MatchedPair {
    int prediction = -1;
    int ground_truth = -1;
    double iou = 0;
  };
  std::vector<MatchedPair> pairs;
  std::vector<PredictionFlag> prediction_flags;  // in prediction input order
};

// Greedy matching in descending prediction-confidence order (stable on
// ties): each prediction takes the unmatched ground truth with the highest
// IoU and scores a TP iff that IoU >= threshold. Unmatched predictions are
// FPs, unmatched ground truths FNs.
MatchResult match_instances(const std::vector<Instance>& predictions,
                            const std::vector<Instance>& ground_truth, double iou_threshold);

struct Prf {
  double precision = 0, recall = 0, f1 = 0;
};

// Each value is 0 when its denominator is 0.
Prf precision_recall_f1(const MatchResult& m);

struct PrPoint {
  double confidence = 0, precision = 0, recall = 0;
};

struct PrCurve {
  std::vector<PrPoint> points;  // one per ranked prediction
  double ap = 0;
};

// Ranks predictions by confidence (descending, stable), computes cumulative
// precision/recall, and integrates the precision envelope over recall
// (all-point interpolation). eleven_point selects the legacy 11-point
// average instead.
PrCurve pr_curve_and_ap(std::vector<PredictionFlag> predictions, int total_gt,
                        bool eleven_point = false);

double mean_ap(std::span<const double> per_class_ap);

struct ConfusionMatrix {
  int k = 0;
  std::vector<int> counts;  // row-major, rows = true class

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int classes)
      : k(classes), counts(static_cast<std::size_t>(classes) * classes, 0) {}

  int at(int true_class, int predicted) const {
    return counts[static_cast<std::size_t>(true_class) * k + predicted];
  }
  int total() const;
  // Rows of the normalized matrix sum to 1 for nonempty rows.
  std::vector<double> row_normalized() const;
};

std::pair<ConfusionMatrix, double> confusion_and_accuracy(std::span<const int> true_labels,
                                                          std::span<const int> predicted_labels,
                                                          int k);

// Three-level regrouping of the five damage states.
enum class CoarseState { kMinor = 0, kModerate = 1, kExtreme = 2 };

inline constexpr int kNumCoarseStates = 3;

const char* coarse_state_name(CoarseState s);

// DS-0/DS-1 -> Minor, DS-2/DS-3 -> Moderate, DS-4 -> Extreme.
CoarseState remap_coarse(int fine_level);

}  // namespace mvda
