#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mvda/mask.hpp"
#include "mvda/models.hpp"
#include "mvda/tensor.hpp"

namespace mvda {

enum class SplitKind { kTrain, kVal, kTest };

inline const char* split_name(SplitKind s) {
  switch (s) {
    case SplitKind::kTrain: return "train";
    case SplitKind::kVal: return "val";
    case SplitKind::kTest: return "test";
  }
  throw std::invalid_argument("unknown split");
}

inline SplitKind split_from_name(const std::string& name) {
  if (name == "train") return SplitKind::kTrain;
  if (name == "val") return SplitKind::kVal;
  if (name == "test") return SplitKind::kTest;
  throw std::invalid_argument("unknown split '" + name + "'");
}

struct ViewPaths {
  std::string image;
  std::string mask;
};

// One building: five views (one per role), a fine damage label, and the
// provenance of the imagery (serialized generator parameters, or "external").
struct MultiViewSample {
  std::string building_id;
  int label = 0;
  std::array<ViewPaths, kNumViews> views;
  std::string provenance = "external";
};

struct DatasetManifest {
  int version = 1;
  std::vector<MultiViewSample> samples;
  std::map<std::string, SplitKind> splits;
  std::string root;  // directory containing the manifest; not serialized

  std::vector<const MultiViewSample*> in_split(SplitKind s) const {
    std::vector<const MultiViewSample*> out;
    for (const auto& sample : samples) {
      auto it = splits.find(sample.building_id);
      if (it != splits.end() && it->second == s) out.push_back(&sample);
    }
    return out;
  }

  const MultiViewSample* find(const std::string& building_id) const {
    for (const auto& sample : samples)
      if (sample.building_id == building_id) return &sample;
    return nullptr;
  }
};

void save_manifest(const DatasetManifest& manifest, const std::string& path);

// Loads and validates: supported version, exactly one view per role, labels
// in 0..4, referenced files present, no duplicate buildings. Violations are
// rejected with the offending building named.
DatasetManifest load_manifest(const std::string& path);

// Building-level shuffle by seed, then assignment by cumulative fraction
// with largest-remainder rounding. Rejects empty splits.
void split_dataset(DatasetManifest& manifest, const std::array<double, 3>& fractions,
                   std::uint64_t seed);

struct LoadedView {
  Tensor<float> image;  // 3 x H x W in [0,1]
  Mask mask;
};

LoadedView load_view(const DatasetManifest& manifest, const MultiViewSample& sample,
                     ViewRole role);
std::array<LoadedView, kNumViews> load_all_views(const DatasetManifest& manifest,
                                                 const MultiViewSample& sample);

}  // namespace mvda
