#pragma once

#include <array>
#include <vector>

#include "mvda/mask.hpp"
#include "mvda/models.hpp"
#include "mvda/tensor.hpp"

namespace mvda {

struct PipelineResult {
  std::array<Mask, kNumViews> masks;
  std::vector<float> probabilities;  // over the k damage states
  int predicted = 0;                 // argmax; ties resolve to the lower state
};

// The stacked pipeline: localization masks each view, the masked views feed
// the multi-view classifier. When oracle_masks is given they replace the
// localization stage (model_l may then be null).
PipelineResult run_pipeline(const ModelL<float>* model_l, const ModelC<float>& model_c,
                            const std::array<Tensor<float>, kNumViews>& views,
                            const std::array<Mask, kNumViews>* oracle_masks = nullptr,
                            double mask_threshold = 0.5);

}  // namespace mvda
