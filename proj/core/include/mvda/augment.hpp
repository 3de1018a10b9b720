#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mvda/mask.hpp"
#include "mvda/rng.hpp"
#include "mvda/tensor.hpp"

namespace mvda {

enum class AugmentKind {
  kHorizontalFlip,
  kAffine,
  kPerspective,
  kBrightnessContrast,
  kBlur,
  kSharpen,
  kGaussianNoise,
  kRandomCrop,
};

// One drawn augmentation with its parameters bound. Geometric ops resample
// with nearest neighbor and apply the identical index map to the mask;
// photometric ops leave the mask untouched.
struct AugmentOp {
  AugmentKind kind;
  double p0 = 0, p1 = 0, p2 = 0, p3 = 0;
  std::uint64_t sample_seed = 0;  // noise stream
};

const char* augment_kind_name(AugmentKind kind);

// Applies ops left to right to a 3xHxW image in [0,1] and its mask.
std::pair<Tensor<float>, Mask> augment(const Tensor<float>& image, const Mask& mask,
                                       std::span<const AugmentOp> ops);

// Image-only variant (classification views have no mask to carry).
Tensor<float> augment_image(const Tensor<float>& image, std::span<const AugmentOp> ops);

// Op draws for the two training recipes. Degenerate affine parameters are
// re-drawn from the stream and never emitted.
std::vector<AugmentOp> draw_segmentation_augments(Rng& rng);
std::vector<AugmentOp> draw_classification_augments(Rng& rng);

}  // namespace mvda
