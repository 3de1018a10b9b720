#include "mvda/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mvda {

double iou(const Mask& a, const Mask& b) {
  require_same_shape(a, b, "iou");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const bool pa = a.data[i] != 0, pb = b.data[i] != 0;
    inter += (pa && pb) ? 1 : 0;
    uni += (pa || pb) ? 1 : 0;
  }
  if (uni == 0) return 1.0;  // both empty
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<Instance> extract_instances(const Mask& mask,
                                        const std::vector<float>* probabilities) {
  if (probabilities && probabilities->size() != mask.size())
    throw std::invalid_argument("extract_instances: probability map size mismatch");
  std::vector<std::uint8_t> visited(mask.size(), 0);
  std::vector<Instance> out;
  std::vector<std::size_t> stack;

  // Row-major scan; the seed pixel of each fill is the component's smallest
  // row-major index, so discovery order is top-left order.
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask.data[start] || visited[start]) continue;
    Instance inst;
    stack.clear();
    stack.push_back(start);
    visited[start] = 1;
    while (!stack.empty()) {
      const std::size_t idx = stack.back();
      stack.pop_back();
      inst.pixels.push_back(idx);
      const int y = static_cast<int>(idx) / mask.w;
      const int x = static_cast<int>(idx) % mask.w;
      const int ny[4] = {y - 1, y + 1, y, y};
      const int nx[4] = {x, x, x - 1, x + 1};
      for (int k = 0; k < 4; ++k) {
        if (ny[k] < 0 || ny[k] >= mask.h || nx[k] < 0 || nx[k] >= mask.w) continue;
        const std::size_t nidx = static_cast<std::size_t>(ny[k]) * mask.w + nx[k];
        if (mask.data[nidx] && !visited[nidx]) {
          visited[nidx] = 1;
          stack.push_back(nidx);
        }
      }
    }
    std::sort(inst.pixels.begin(), inst.pixels.end());
    if (probabilities) {
      double sum = 0;
      for (std::size_t p : inst.pixels) sum += (*probabilities)[p];
      inst.confidence = sum / static_cast<double>(inst.pixels.size());
    }
    out.push_back(std::move(inst));
  }
  return out;
}

double instance_iou(const Instance& a, const Instance& b) {
  std::size_t inter = 0;
  std::size_t i = 0, j = 0;
  while (i < a.pixels.size() && j < b.pixels.size()) {
    if (a.pixels[i] == b.pixels[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (a.pixels[i] < b.pixels[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const std::size_t uni = a.pixels.size() + b.pixels.size() - inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

MatchResult match_instances(const std::vector<Instance>& predictions,
                            const std::vector<Instance>& ground_truth, double iou_threshold) {
  if (iou_threshold <= 0.0 || iou_threshold >= 1.0)
    throw std::invalid_argument("match_instances: threshold must lie in (0,1)");

  std::vector<int> order(predictions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return predictions[static_cast<std::size_t>(a)].confidence >
           predictions[static_cast<std::size_t>(b)].confidence;
  });

  MatchResult result;
  result.prediction_flags.resize(predictions.size());
  std::vector<std::uint8_t> gt_used(ground_truth.size(), 0);
  for (int pi : order) {
    const Instance& pred = predictions[static_cast<std::size_t>(pi)];
    int best_gt = -1;
    double best_iou = 0;
    for (std::size_t gi = 0; gi < ground_truth.size(); ++gi) {
      if (gt_used[gi]) continue;
      const double v = instance_iou(pred, ground_truth[gi]);
      if (v > best_iou) {
        best_iou = v;
        best_gt = static_cast<int>(gi);
      }
    }
    const bool tp = best_gt >= 0 && best_iou >= iou_threshold;
    result.prediction_flags[static_cast<std::size_t>(pi)] = {pred.confidence, tp};
    if (tp) {
      gt_used[static_cast<std::size_t>(best_gt)] = 1;
      ++result.tp;
      result.pairs.push_back({pi, best_gt, best_iou});
    } else {
      ++result.fp;
    }
  }
  result.fn = static_cast<int>(ground_truth.size()) - result.tp;
  return result;
}

Prf precision_recall_f1(const MatchResult& m) {
  Prf out;
  const int pred = m.tp + m.fp;
  const int gt = m.tp + m.fn;
  out.precision = pred > 0 ? static_cast<double>(m.tp) / pred : 0.0;
  out.recall = gt > 0 ? static_cast<double>(m.tp) / gt : 0.0;
  out.f1 = (out.precision + out.recall) > 0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

PrCurve pr_curve_and_ap(std::vector<PredictionFlag> predictions, int total_gt,
                        bool eleven_point) {
  if (total_gt < 1) throw std::invalid_argument("pr_curve_and_ap: total_gt must be >= 1");
  std::stable_sort(predictions.begin(), predictions.end(),
                   [](const PredictionFlag& a, const PredictionFlag& b) {
                     return a.confidence > b.confidence;
                   });

  PrCurve curve;
  int tp = 0, fp = 0;
  for (const PredictionFlag& p : predictions) {
    if (p.is_tp)
      ++tp;
    else
      ++fp;
    PrPoint point;
    point.confidence = p.confidence;
    point.precision = static_cast<double>(tp) / (tp + fp);
    point.recall = static_cast<double>(tp) / total_gt;
    curve.points.push_back(point);
  }

  if (curve.points.empty()) {
    curve.ap = 0;
    return curve;
  }

  if (eleven_point) {
    double sum = 0;
    for (int j = 0; j <= 10; ++j) {
      const double r = j / 10.0;
      double best = 0;
      for (const PrPoint& p : curve.points)
        if (p.recall >= r) best = std::max(best, p.precision);
      sum += best;
    }
    curve.ap = sum / 11.0;
    return curve;
  }

  // Precision envelope, then rectangle sum over recall increments.
  std::vector<double> envelope(curve.points.size());
  double running = 0;
  for (std::size_t i = curve.points.size(); i-- > 0;) {
    running = std::max(running, curve.points[i].precision);
    envelope[i] = running;
  }
  double ap = 0;
  double prev_recall = 0;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    ap += (curve.points[i].recall - prev_recall) * envelope[i];
    prev_recall = curve.points[i].recall;
  }
  curve.ap = ap;
  return curve;
}

double mean_ap(std::span<const double> per_class_ap) {
  if (per_class_ap.empty()) throw std::invalid_argument("mean_ap: empty AP list");
  double sum = 0;
  for (double a : per_class_ap) sum += a;
  return sum / static_cast<double>(per_class_ap.size());
}

int ConfusionMatrix::total() const {
  int t = 0;
  for (int c : counts) t += c;
  return t;
}

std::vector<double> ConfusionMatrix::row_normalized() const {
  std::vector<double> out(counts.size(), 0.0);
  for (int row = 0; row < k; ++row) {
    int row_total = 0;
    for (int col = 0; col < k; ++col) row_total += at(row, col);
    if (row_total == 0) continue;
    for (int col = 0; col < k; ++col)
      out[static_cast<std::size_t>(row) * k + col] =
          static_cast<double>(at(row, col)) / row_total;
  }
  return out;
}

std::pair<ConfusionMatrix, double> confusion_and_accuracy(std::span<const int> true_labels,
                                                          std::span<const int> predicted_labels,
                                                          int k) {
  if (true_labels.size() != predicted_labels.size())
    throw std::invalid_argument("confusion: label lists differ in length");
  if (true_labels.empty()) throw std::invalid_argument("confusion: empty label lists");
  if (k < 1) throw std::invalid_argument("confusion: k must be >= 1");
  ConfusionMatrix m(k);
  int correct = 0;
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    const int t = true_labels[i], p = predicted_labels[i];
    if (t < 0 || t >= k || p < 0 || p >= k)
      throw std::invalid_argument("confusion: label outside 0.." + std::to_string(k - 1) +
                                  " at index " + std::to_string(i));
    ++m.counts[static_cast<std::size_t>(t) * k + p];
    if (t == p) ++correct;
  }
  return {m, static_cast<double>(correct) / static_cast<double>(true_labels.size())};
}

const char* coarse_state_name(CoarseState s) {
  switch (s) {
    case CoarseState::kMinor: return "Minor";
    case CoarseState::kModerate: return "Moderate";
    case CoarseState::kExtreme: return "Extreme";
  }
  throw std::invalid_argument("unknown coarse state");
}

CoarseState remap_coarse(int fine_level) {
  if (fine_level <= 1) return CoarseState::kMinor;
  if (fine_level <= 3) return CoarseState::kModerate;
  return CoarseState::kExtreme;
}

}  // namespace mvda
