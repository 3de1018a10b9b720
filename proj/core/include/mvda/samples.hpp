#pragma once

#include <vector>

#include "mvda/dataset.hpp"
#include "mvda/training.hpp"

namespace mvda {

// Every view of every building in the split, as (image, mask) pairs for the
// localization model, in manifest order.
std::vector<SegSample> segmentation_samples(const DatasetManifest& manifest, SplitKind split);

// One classifier sample per building: all five views masked by their
// ground-truth masks, in role order.
std::vector<ClsSample> classification_samples(const DatasetManifest& manifest, SplitKind split);

// Single-view variant for the ablation study: one masked view per building.
std::vector<ClsSample> single_view_samples(const DatasetManifest& manifest, SplitKind split,
                                           ViewRole role);

}  // namespace mvda
