#include "mvda/evaluation.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "mvda/pipeline.hpp"

namespace mvda {

using nlohmann::json;

ModelLEvaluation evaluate_model_l(const ModelL<float>& model, const DatasetManifest& manifest,
                                  SplitKind split, bool eleven_point_ap) {
  const std::vector<const MultiViewSample*> buildings = manifest.in_split(split);
  if (buildings.empty()) throw std::invalid_argument("evaluate_model_l: empty split");

  ModelLEvaluation eval;
  std::vector<PredictionFlag> pooled;
  int total_gt = 0;
  double iou_sum = 0, p_sum = 0, r_sum = 0, f1_sum = 0;

  for (const MultiViewSample* building : buildings) {
    for (int v = 0; v < kNumViews; ++v) {
      const LoadedView view = load_view(manifest, *building, static_cast<ViewRole>(v));
      const Tensor<float> probs = model.infer(view.image);
      const Mask predicted = binarize_mask(probs, 0.5);

      iou_sum += iou(predicted, view.mask);

      const std::vector<float> prob_grid(probs.data(), probs.data() + probs.size());
      const std::vector<Instance> pred_instances = extract_instances(predicted, &prob_grid);
      const std::vector<Instance> gt_instances = extract_instances(view.mask);
      const MatchResult match = match_instances(pred_instances, gt_instances, 0.5);
      const Prf prf = precision_recall_f1(match);
      p_sum += prf.precision;
      r_sum += prf.recall;
      f1_sum += prf.f1;
      pooled.insert(pooled.end(), match.prediction_flags.begin(), match.prediction_flags.end());
      total_gt += static_cast<int>(gt_instances.size());
      ++eval.images;
    }
  }

  const double n = static_cast<double>(eval.images);
  eval.mean_iou = iou_sum / n;
  eval.mean_precision = p_sum / n;
  eval.mean_recall = r_sum / n;
  eval.mean_f1 = f1_sum / n;
  if (total_gt > 0) {
    eval.pr_curve = pr_curve_and_ap(pooled, total_gt, eleven_point_ap);
  } else {
    eval.pr_curve = {};
  }
  eval.ap_per_class = {eval.pr_curve.ap};
  eval.map = mean_ap(eval.ap_per_class);
  return eval;
}

ModelCEvaluation evaluate_model_c(const ModelL<float>* model_l, const ModelC<float>& model_c,
                                  const DatasetManifest& manifest, SplitKind split,
                                  bool use_oracle_masks) {
  const std::vector<const MultiViewSample*> buildings = manifest.in_split(split);
  if (buildings.empty()) throw std::invalid_argument("evaluate_model_c: empty split");
  if (!use_oracle_masks && !model_l)
    throw std::invalid_argument("evaluate_model_c: need a localization model without oracle masks");

  std::vector<int> fine_true, fine_pred, coarse_true, coarse_pred;
  for (const MultiViewSample* building : buildings) {
    const std::array<LoadedView, kNumViews> views = load_all_views(manifest, *building);
    std::array<Tensor<float>, kNumViews> images;
    std::array<Mask, kNumViews> gt_masks;
    for (int v = 0; v < kNumViews; ++v) {
      images[static_cast<std::size_t>(v)] = views[static_cast<std::size_t>(v)].image;
      gt_masks[static_cast<std::size_t>(v)] = views[static_cast<std::size_t>(v)].mask;
    }
    const PipelineResult result =
        run_pipeline(model_l, model_c, images, use_oracle_masks ? &gt_masks : nullptr);
    fine_true.push_back(building->label);
    fine_pred.push_back(result.predicted);
    coarse_true.push_back(static_cast<int>(remap_coarse(building->label)));
    coarse_pred.push_back(static_cast<int>(remap_coarse(result.predicted)));
  }

  ModelCEvaluation eval;
  eval.buildings = static_cast<int>(buildings.size());
  auto [fine_mat, fine_acc] = confusion_and_accuracy(fine_true, fine_pred, kNumDamageStates);
  auto [coarse_mat, coarse_acc] =
      confusion_and_accuracy(coarse_true, coarse_pred, kNumCoarseStates);
  eval.confusion_fine = std::move(fine_mat);
  eval.confusion_coarse = std::move(coarse_mat);
  eval.accuracy_fine = fine_acc;
  eval.accuracy_coarse = coarse_acc;
  return eval;
}

std::string metrics_report_to_json(const MetricsReport& report) {
  json doc;
  doc["oracle_masks"] = report.oracle_masks;
  if (report.model_l) {
    const ModelLEvaluation& m = *report.model_l;
    doc["model_l"] = {{"mean_iou", m.mean_iou},
                      {"mean_f1", m.mean_f1},
                      {"mean_precision", m.mean_precision},
                      {"mean_recall", m.mean_recall},
                      {"ap_per_class", m.ap_per_class},
                      {"map", m.map},
                      {"images", m.images}};
  }
  if (report.model_c) {
    const ModelCEvaluation& m = *report.model_c;
    doc["model_c"] = {{"accuracy_fine", m.accuracy_fine},
                      {"accuracy_coarse", m.accuracy_coarse},
                      {"confusion_fine", m.confusion_fine.counts},
                      {"confusion_coarse", m.confusion_coarse.counts},
                      {"buildings", m.buildings}};
  }
  return doc.dump(2) + "\n";
}

void save_metrics_report(const MetricsReport& report, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("metrics report: cannot write " + path);
  f << metrics_report_to_json(report);
  if (!f) throw std::runtime_error("metrics report: write failed " + path);
}

void save_pr_curve_csv(const PrCurve& curve, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("pr curve: cannot write " + path);
  f << "confidence,precision,recall\n";
  char buf[128];
  for (const PrPoint& p : curve.points) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g\n", p.confidence, p.precision, p.recall);
    f << buf;
  }
  if (!f) throw std::runtime_error("pr curve: write failed " + path);
}

}  // namespace mvda
