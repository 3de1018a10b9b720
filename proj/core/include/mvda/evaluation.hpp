#pragma once

#include <optional>
#include <string>

#include "mvda/dataset.hpp"
#include "mvda/metrics.hpp"
#include "mvda/models.hpp"

namespace mvda {

struct ModelLEvaluation {
  double mean_iou = 0;
  double mean_precision = 0;
  double mean_recall = 0;
  double mean_f1 = 0;
  PrCurve pr_curve;
  std::vector<double> ap_per_class;  // one entry: the building class
  double map = 0;
  int images = 0;
};

// Per image: forward, binarize at 0.5, extract instances, match at IoU 0.5.
// Whole-mask IoU and instance P/R/F1 are averaged over images; instance
// predictions pool into one PR curve. eleven_point_ap switches the AP
// integration to the legacy 11-point average.
ModelLEvaluation evaluate_model_l(const ModelL<float>& model, const DatasetManifest& manifest,
                                  SplitKind split, bool eleven_point_ap = false);

struct ModelCEvaluation {
  double accuracy_fine = 0;
  double accuracy_coarse = 0;
  ConfusionMatrix confusion_fine;
  ConfusionMatrix confusion_coarse;
  int buildings = 0;
};

// Runs the stacked pipeline per building (or substitutes ground-truth masks
// in oracle mode) and counts fine and coarse confusion.
ModelCEvaluation evaluate_model_c(const ModelL<float>* model_l, const ModelC<float>& model_c,
                                  const DatasetManifest& manifest, SplitKind split,
                                  bool use_oracle_masks);

struct MetricsReport {
  std::optional<ModelLEvaluation> model_l;
  std::optional<ModelCEvaluation> model_c;
  bool oracle_masks = false;
};

// JSON document with the canonical field names (mean_iou, mean_f1,
// mean_precision, mean_recall, map, accuracy_fine, accuracy_coarse,
// confusion matrices as row-major integer grids).
std::string metrics_report_to_json(const MetricsReport& report);
void save_metrics_report(const MetricsReport& report, const std::string& path);

// Comma-separated rows: confidence,precision,recall.
void save_pr_curve_csv(const PrCurve& curve, const std::string& path);

}  // namespace mvda
