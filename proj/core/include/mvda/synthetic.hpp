#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "mvda/dataset.hpp"
#include "mvda/mask.hpp"
#include "mvda/tensor.hpp"

namespace mvda {

struct CameraJitter {
  int dx = 0;
  int dy = 0;
  double scale = 1.0;
};

// Procedural flat-shaded scene of one building. Damage is encoded as breached
// wall/roof cells plus debris speckle, scaled by the damage level; the breach
// pattern is a prefix of a seeded cell permutation, so higher levels corrupt
// strict supersets of the pixels corrupted at lower levels.
struct SyntheticSceneSpec {
  int footprint_w = 36;  // facade width seen from ground-1/ground-3
  int footprint_d = 28;  // facade width seen from ground-2/ground-4
  int wall_h = 22;
  std::uint64_t texture_seed = 0;
  int damage_level = 0;                                   // DS-0..DS-4
  std::array<bool, 4> damage_views{};                     // ground views showing damage
  bool roof_damage = false;                               // overhead view shows damage
  double clutter_density = 0.5;
  std::array<CameraJitter, kNumViews> jitter{};
};

struct RenderedView {
  Tensor<float> image;  // 3 x S x S
  Mask mask;
};

RenderedView render_view(const SyntheticSceneSpec& spec, ViewRole role, int image_size);

// Fraction of wall/roof cells breached at each damage level; strictly
// increasing in the level.
double damage_severity_fraction(int level);

struct GeneratorConfig {
  int n_buildings = 40;
  std::array<double, 5> class_mix{0.2, 0.2, 0.2, 0.2, 0.2};
  double directional_fraction = 0.3;
  std::uint64_t seed = 0;
  int image_size = 64;
};

// Renders 5 views + 5 masks per building under out_dir and writes
// out_dir/manifest.json (without split assignments). Fully deterministic
// from the config.
DatasetManifest generate_synthetic_dataset(const GeneratorConfig& config,
                                           const std::string& out_dir);

// The scene spec drawn for building index b under this config; exposed so
// tests can re-render scenes at controlled damage levels.
SyntheticSceneSpec scene_spec_for_building(const GeneratorConfig& config, int building_index,
                                           int* label_out = nullptr);

}  // namespace mvda
