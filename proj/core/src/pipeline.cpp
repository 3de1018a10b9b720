#include "mvda/pipeline.hpp"

#include <stdexcept>

namespace mvda {

PipelineResult run_pipeline(const ModelL<float>* model_l, const ModelC<float>& model_c,
                            const std::array<Tensor<float>, kNumViews>& views,
                            const std::array<Mask, kNumViews>* oracle_masks,
                            double mask_threshold) {
  if (!oracle_masks && !model_l)
    throw std::invalid_argument("run_pipeline: need either a localization model or oracle masks");

  PipelineResult result;
  std::vector<Tensor<float>> masked;
  masked.reserve(kNumViews);
  for (int v = 0; v < kNumViews; ++v) {
    const Tensor<float>& image = views[static_cast<std::size_t>(v)];
    Mask mask = oracle_masks ? (*oracle_masks)[static_cast<std::size_t>(v)]
                             : binarize_mask(model_l->infer(image), mask_threshold);
    masked.push_back(apply_mask(image, mask));
    result.masks[static_cast<std::size_t>(v)] = std::move(mask);
  }

  result.probabilities = model_c.infer(masked);
  result.predicted = 0;
  for (int k = 1; k < static_cast<int>(result.probabilities.size()); ++k)
    if (result.probabilities[static_cast<std::size_t>(k)] >
        result.probabilities[static_cast<std::size_t>(result.predicted)])
      result.predicted = k;
  return result;
}

}  // namespace mvda
