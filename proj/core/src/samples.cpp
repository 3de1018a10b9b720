#include "mvda/samples.hpp"

namespace mvda {

std::vector<SegSample> segmentation_samples(const DatasetManifest& manifest, SplitKind split) {
  std::vector<SegSample> out;
  for (const MultiViewSample* building : manifest.in_split(split))
    for (int v = 0; v < kNumViews; ++v) {
      LoadedView view = load_view(manifest, *building, static_cast<ViewRole>(v));
      out.push_back({std::move(view.image), std::move(view.mask)});
    }
  return out;
}

std::vector<ClsSample> classification_samples(const DatasetManifest& manifest, SplitKind split) {
  std::vector<ClsSample> out;
  for (const MultiViewSample* building : manifest.in_split(split)) {
    ClsSample sample;
    sample.label = building->label;
    for (int v = 0; v < kNumViews; ++v) {
      const LoadedView view = load_view(manifest, *building, static_cast<ViewRole>(v));
      sample.views.push_back(apply_mask(view.image, view.mask));
    }
    out.push_back(std::move(sample));
  }
  return out;
}

std::vector<ClsSample> single_view_samples(const DatasetManifest& manifest, SplitKind split,
                                           ViewRole role) {
  std::vector<ClsSample> out;
  for (const MultiViewSample* building : manifest.in_split(split)) {
    const LoadedView view = load_view(manifest, *building, role);
    ClsSample sample;
    sample.label = building->label;
    sample.views.push_back(apply_mask(view.image, view.mask));
    out.push_back(std::move(sample));
  }
  return out;
}

}  // namespace mvda
