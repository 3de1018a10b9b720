#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvda/mask.hpp"
#include "mvda/ops.hpp"
#include "mvda/rng.hpp"
#include "mvda/tape.hpp"
#include "mvda/tensor.hpp"

namespace mvda {

// Five fine damage states DS-0 (intact) .. DS-4 (destroyed).
inline constexpr int kNumDamageStates = 5;

// Fixed view order: four ground facades then the overhead view.
inline constexpr int kNumViews = 5;

enum class ViewRole { kGround1 = 0, kGround2, kGround3, kGround4, kOverhead };

inline const char* view_role_name(ViewRole role) {
  switch (role) {
    case ViewRole::kGround1: return "ground-1";
    case ViewRole::kGround2: return "ground-2";
    case ViewRole::kGround3: return "ground-3";
    case ViewRole::kGround4: return "ground-4";
    case ViewRole::kOverhead: return "overhead";
  }
  throw std::invalid_argument("unknown view role");
}

inline ViewRole view_role_from_name(const std::string& name) {
  for (int i = 0; i < kNumViews; ++i)
    if (name == view_role_name(static_cast<ViewRole>(i))) return static_cast<ViewRole>(i);
  throw std::invalid_argument("unknown view role '" + name + "'");
}

enum class FusionMode { kEarlyConcat, kViewMax };

inline const char* fusion_mode_name(FusionMode mode) {
  return mode == FusionMode::kEarlyConcat ? "early-concat" : "view-max";
}

inline FusionMode fusion_mode_from_name(const std::string& name) {
  if (name == "early-concat") return FusionMode::kEarlyConcat;
  if (name == "view-max") return FusionMode::kViewMax;
  throw std::invalid_argument("unknown fusion mode '" + name + "'");
}

// Feature extractor shape: a strided 3x3 stem (optionally followed by a 2x2
// max pool) and a chain of depthwise-separable blocks.
struct BackboneConfig {
  struct Block {
    int out_channels = 0;
    int stride = 1;
  };

  int in_channels = 3;
  int stem_channels = 16;
  int stem_stride = 2;
  bool stem_pool = true;
  std::vector<Block> blocks = {{32, 2}, {64, 2}, {64, 1}};

  int feature_channels() const {
    return blocks.empty() ? stem_channels : blocks.back().out_channels;
  }

  // Spatial size of the feature map for a square input; rejects stride
  // sequences that do not divide the input size evenly.
  int feature_size(int input_size) const {
    int s = input_size;
    auto shrink = [&](int stride, const char* stage) {
      if (stride == 1) return;
      if (stride != 2 || s % 2 != 0 || s < 2)
        throw std::invalid_argument(std::string("backbone: ") + stage + " stride " +
                                    std::to_string(stride) + " incompatible with size " +
                                    std::to_string(s));
      s /= 2;
    };
    shrink(stem_stride, "stem");
    if (stem_pool) shrink(2, "stem pool");
    for (const Block& b : blocks) {
      if (b.stride != 1 && b.stride != 2)
        throw std::invalid_argument("backbone: block stride must be 1 or 2");
      shrink(b.stride, "block");
    }
    if (s < 1) throw std::invalid_argument("backbone: input too small for stride sequence");
    return s;
  }
};

namespace detail {

// Fan-in scaled uniform initialization: U(-sqrt(3/fan_in), +sqrt(3/fan_in)).
template <typename T>
Tensor<T> uniform_init(Rng& rng, Shape shape, int fan_in) {
  Tensor<T> t(std::move(shape));
  T* p = t.mutable_data();
  const double limit = std::sqrt(3.0 / fan_in);
  for (std::size_t i = 0; i < t.size(); ++i)
    p[i] = static_cast<T>(rng.uniform(-limit, limit));
  return t;
}

}  // namespace detail

template <typename T>
struct Conv2dLayer {
  std::shared_ptr<Parameter<T>> kernel, bias;
  int stride = 1;
  int padding = 0;

  static Conv2dLayer make(ParameterStore<T>& store, const std::string& prefix, Rng& rng,
                          int out_ch, int in_ch, int k, int stride, int padding) {
    Conv2dLayer layer;
    layer.kernel = store.add(prefix + "kernel",
                             detail::uniform_init<T>(rng, {out_ch, in_ch, k, k}, in_ch * k * k));
    layer.bias = store.add(prefix + "bias", Tensor<T>(Shape{out_ch}));
    layer.stride = stride;
    layer.padding = padding;
    return layer;
  }

  Var<T> apply(Tape<T>& t, Var<T> x) const {
    return t.conv2d(x, t.param(*kernel), t.param(*bias), stride, padding);
  }
};

// Depthwise 3x3 + pointwise 1x1, each followed by relu.
template <typename T>
struct SeparableBlock {
  std::shared_ptr<Parameter<T>> dw_kernel, dw_bias, pw_kernel, pw_bias;
  int stride = 1;

  static SeparableBlock make(ParameterStore<T>& store, const std::string& prefix, Rng& rng,
                             int in_ch, int out_ch, int stride) {
    SeparableBlock b;
    b.dw_kernel =
        store.add(prefix + "dw.kernel", detail::uniform_init<T>(rng, {in_ch, 1, 3, 3}, 9));
    b.dw_bias = store.add(prefix + "dw.bias", Tensor<T>(Shape{in_ch}));
    b.pw_kernel =
        store.add(prefix + "pw.kernel", detail::uniform_init<T>(rng, {out_ch, in_ch, 1, 1}, in_ch));
    b.pw_bias = store.add(prefix + "pw.bias", Tensor<T>(Shape{out_ch}));
    b.stride = stride;
    return b;
  }

  Var<T> apply(Tape<T>& t, Var<T> x) const {
    Var<T> mid = t.relu(t.depthwise_conv2d(x, t.param(*dw_kernel), t.param(*dw_bias), stride, 1));
    return t.relu(t.conv2d(mid, t.param(*pw_kernel), t.param(*pw_bias), 1, 0));
  }
};

template <typename T>
struct DenseLayer {
  std::shared_ptr<Parameter<T>> weight, bias;

  static DenseLayer make(ParameterStore<T>& store, const std::string& prefix, Rng& rng, int in,
                         int out) {
    DenseLayer l;
    l.weight = store.add(prefix + "weight", detail::uniform_init<T>(rng, {in, out}, in));
    l.bias = store.add(prefix + "bias", Tensor<T>(Shape{out}));
    return l;
  }

  Var<T> apply(Tape<T>& t, Var<T> x) const {
    return t.dense(x, t.param(*weight), t.param(*bias));
  }
};

// Image -> C_f x S_f x S_f feature extractor. Initialization is a pure
// function of the seed; two backbones built from the same seed carry
// bitwise identical weights.
template <typename T>
class Backbone {
 public:
  static Backbone build(const BackboneConfig& config, std::uint64_t seed,
                        ParameterStore<T>& store, const std::string& prefix) {
    Backbone net;
    net.config_ = config;
    Rng rng(Rng::derive(seed, "backbone.init"));
    net.stem_ = Conv2dLayer<T>::make(store, prefix + "stem.", rng, config.stem_channels,
                                     config.in_channels, 3, config.stem_stride, 1);
    int ch = config.stem_channels;
    for (std::size_t i = 0; i < config.blocks.size(); ++i) {
      const auto& b = config.blocks[i];
      net.blocks_.push_back(SeparableBlock<T>::make(
          store, prefix + "block" + std::to_string(i) + ".", rng, ch, b.out_channels, b.stride));
      ch = b.out_channels;
    }
    return net;
  }

  Var<T> forward(Tape<T>& t, Var<T> image) const {
    Var<T> x = t.relu(stem_.apply(t, image));
    if (config_.stem_pool) x = t.maxpool2d(x, 2, 2);
    for (const auto& b : blocks_) x = b.apply(t, x);
    return x;
  }

  const BackboneConfig& config() const { return config_; }

 private:
  BackboneConfig config_;
  Conv2dLayer<T> stem_;
  std::vector<SeparableBlock<T>> blocks_;
};

template <typename T>
Backbone<T> build_backbone(const BackboneConfig& config, std::uint64_t seed,
                           ParameterStore<T>& store, const std::string& prefix = "backbone.") {
  return Backbone<T>::build(config, seed, store, prefix);
}

// Pyramid pooling: per bin b, average-pool the feature map to b x b, apply a
// 1x1 conv to C/|bins| channels, resize back, and concatenate every level
// with the input. Output channels: C + |bins| * (C / |bins|).
template <typename T>
Var<T> pyramid_pooling_forward(Tape<T>& t, Var<T> features, const std::vector<int>& bins,
                               const std::vector<Conv2dLayer<T>>& level_convs) {
  const Tensor<T>& f = t.value(features);
  if (f.rank() != 4)
    throw std::invalid_argument("pyramid_pooling: features must be NxCxSxS, got " +
                                shape_str(f.shape()));
  const int s = f.dim(2);
  if (bins.empty() || bins.size() != level_convs.size())
    throw std::invalid_argument("pyramid_pooling: bins and level convs must align");
  std::vector<Var<T>> parts{features};
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const int b = bins[i];
    if (b < 1 || b > s)
      throw std::invalid_argument("pyramid_pooling: bin " + std::to_string(b) +
                                  " exceeds spatial size " + std::to_string(s));
    Var<T> pooled = t.adaptive_avgpool2d(features, b, b);
    Var<T> mixed = level_convs[i].apply(t, pooled);
    parts.push_back(t.bilinear_resize(mixed, s, s));
  }
  return t.concat_channels(parts);
}

// Building localization network (Model-L): backbone -> pyramid pooling ->
// 1x1 conv -> bilinear upsample -> sigmoid, one probability per pixel.
struct ModelLConfig {
  BackboneConfig backbone;
  std::vector<int> bins = {1, 2, 4};
  int input_size = 64;
};

template <typename T>
class ModelL {
 public:
  ModelL(ModelL&&) = default;
  ModelL& operator=(ModelL&&) = default;
  ModelL(const ModelL&) = delete;
  ModelL& operator=(const ModelL&) = delete;

  static ModelL create(const ModelLConfig& config, std::uint64_t seed) {
    ModelL m;
    m.config_ = config;
    const int s_f = config.backbone.feature_size(config.input_size);
    const int c_f = config.backbone.feature_channels();
    if (config.bins.empty())
      throw std::invalid_argument("model_l: at least one pyramid bin required");
    const int level_ch = c_f / static_cast<int>(config.bins.size());
    if (level_ch < 1)
      throw std::invalid_argument("model_l: more pyramid bins than feature channels");
    for (int b : config.bins)
      if (b < 1 || b > s_f)
        throw std::invalid_argument("model_l: pyramid bin " + std::to_string(b) +
                                    " exceeds feature size " + std::to_string(s_f));

    m.params_ = std::make_unique<ParameterStore<T>>();
    m.backbone_ = Backbone<T>::build(config.backbone, seed, *m.params_, "backbone.");
    Rng rng(Rng::derive(seed, "model_l.head.init"));
    for (std::size_t i = 0; i < config.bins.size(); ++i)
      m.pyramid_convs_.push_back(
          Conv2dLayer<T>::make(*m.params_, "pyramid.level" + std::to_string(i) + ".", rng,
                               level_ch, c_f, 1, 1, 0));
    const int concat_ch = c_f + level_ch * static_cast<int>(config.bins.size());
    m.head_ = Conv2dLayer<T>::make(*m.params_, "head.final.", rng, 1, concat_ch, 1, 1, 0);
    return m;
  }

  // image: 1 x 3 x H x W with H = W = input_size. Returns 1 x 1 x H x W
  // building probabilities in (0, 1).
  Var<T> forward(Tape<T>& t, Var<T> image) const {
    const Tensor<T>& v = t.value(image);
    if (v.rank() != 4 || v.dim(1) != config_.backbone.in_channels ||
        v.dim(2) != config_.input_size || v.dim(3) != config_.input_size)
      throw std::invalid_argument("model_l: expected image 1x" +
                                  std::to_string(config_.backbone.in_channels) + "x" +
                                  std::to_string(config_.input_size) + "x" +
                                  std::to_string(config_.input_size) + ", got " +
                                  shape_str(v.shape()));
    Var<T> features = backbone_.forward(t, image);
    Var<T> fused = pyramid_pooling_forward(t, features, config_.bins, pyramid_convs_);
    Var<T> logits = head_.apply(t, fused);
    Var<T> up = t.bilinear_resize(logits, config_.input_size, config_.input_size);
    return t.sigmoid(up);
  }

  // Convenience inference: 3 x H x W image -> 1 x H x W probability map.
  Tensor<T> infer(const Tensor<T>& image) const {
    Tape<T> t;
    Var<T> out = forward(
        t, t.input(image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)})));
    return t.value(out).reshaped({1, config_.input_size, config_.input_size});
  }

  ParameterStore<T>& params() { return *params_; }
  const ParameterStore<T>& params() const { return *params_; }
  const ModelLConfig& config() const { return config_; }

 private:
  ModelL() = default;
  ModelLConfig config_;
  std::unique_ptr<ParameterStore<T>> params_;
  Backbone<T> backbone_;
  std::vector<Conv2dLayer<T>> pyramid_convs_;
  Conv2dLayer<T> head_;
};

// Multi-view damage classifier (Model-C): per-view backbones, fusion into a
// common feature space, then a two-layer fully connected head over k states.
struct ModelCConfig {
  BackboneConfig backbone;
  bool shared_backbone = false;
  FusionMode fusion = FusionMode::kEarlyConcat;
  int head_hidden = 128;
  int num_classes = kNumDamageStates;
  int num_views = kNumViews;
  int input_size = 64;
};

template <typename T>
class ModelC {
 public:
  ModelC(ModelC&&) = default;
  ModelC& operator=(ModelC&&) = default;
  ModelC(const ModelC&) = delete;
  ModelC& operator=(const ModelC&) = delete;

  static ModelC create(const ModelCConfig& config, std::uint64_t seed) {
    if (config.num_views < 1) throw std::invalid_argument("model_c: need at least one view");
    if (config.num_classes < 2) throw std::invalid_argument("model_c: need at least two classes");
    ModelC m;
    m.config_ = config;
    const int s_f = config.backbone.feature_size(config.input_size);
    const int c_f = config.backbone.feature_channels();
    m.params_ = std::make_unique<ParameterStore<T>>();

    const int backbone_count = config.shared_backbone ? 1 : config.num_views;
    for (int i = 0; i < backbone_count; ++i) {
      const std::string prefix =
          config.shared_backbone ? "backbone.shared." : "backbone.v" + std::to_string(i) + ".";
      // Distinct sub-seeds keep per-view backbones independently parameterized.
      m.backbones_.push_back(Backbone<T>::build(
          config.backbone, Rng::derive(seed, "model_c.view", static_cast<std::uint64_t>(i)),
          *m.params_, prefix));
    }

    const int fused_ch = config.fusion == FusionMode::kEarlyConcat ? config.num_views * c_f : c_f;
    m.fused_dim_ = fused_ch * s_f * s_f;
    Rng rng(Rng::derive(seed, "model_c.head.init"));
    m.fc1_ = DenseLayer<T>::make(*m.params_, "head.fc1.", rng, m.fused_dim_, config.head_hidden);
    m.fc2_ = DenseLayer<T>::make(*m.params_, "head.fc2.", rng, config.head_hidden,
                                 config.num_classes);
    return m;
  }

  // views must arrive in the fixed ViewRole order, one 1x3xSxS image each.
  // Returns a 1 x k probability row that sums to 1.
  Var<T> forward(Tape<T>& t, const std::vector<Var<T>>& views) const {
    if (static_cast<int>(views.size()) != config_.num_views)
      throw std::invalid_argument("model_c: expected exactly " +
                                  std::to_string(config_.num_views) + " views, got " +
                                  std::to_string(views.size()));
    std::vector<Var<T>> features;
    features.reserve(views.size());
    for (std::size_t i = 0; i < views.size(); ++i) {
      const Backbone<T>& bb = backbones_[config_.shared_backbone ? 0 : i];
      features.push_back(bb.forward(t, views[i]));
    }
    Var<T> fused = config_.fusion == FusionMode::kEarlyConcat ? t.concat_channels(features)
                                                              : t.eltwise_max(features);
    Var<T> flat = t.reshape(fused, {1, fused_dim_});
    Var<T> hidden = t.relu(fc1_.apply(t, flat));
    Var<T> logits = fc2_.apply(t, hidden);
    return t.softmax_channels(logits);
  }

  // Convenience inference over 3xSxS view images in role order.
  std::vector<T> infer(const std::vector<Tensor<T>>& views) const {
    Tape<T> t;
    std::vector<Var<T>> vars;
    vars.reserve(views.size());
    for (const auto& v : views)
      vars.push_back(t.input(v.reshaped({1, v.dim(0), v.dim(1), v.dim(2)})));
    Var<T> out = forward(t, vars);
    const Tensor<T>& probs = t.value(out);
    return std::vector<T>(probs.data(), probs.data() + probs.size());
  }

  ParameterStore<T>& params() { return *params_; }
  const ParameterStore<T>& params() const { return *params_; }
  const ModelCConfig& config() const { return config_; }

 private:
  ModelC() = default;
  ModelCConfig config_;
  std::unique_ptr<ParameterStore<T>> params_;
  std::vector<Backbone<T>> backbones_;
  DenseLayer<T> fc1_, fc2_;
  int fused_dim_ = 0;
};

// Fuses equally shaped per-view feature maps: channel concatenation in view
// order, or elementwise maximum across views.
template <typename T>
Tensor<T> multi_view_fuse(const std::vector<Tensor<T>>& per_view_features, FusionMode mode) {
  if (per_view_features.empty()) throw std::invalid_argument("multi_view_fuse: no views");
  for (const auto& f : per_view_features)
    if (!f.same_shape(per_view_features[0]))
      throw std::invalid_argument("multi_view_fuse: feature shapes disagree (" +
                                  shape_str(per_view_features[0].shape()) + " vs " +
                                  shape_str(f.shape()) + ")");
  return mode == FusionMode::kEarlyConcat ? ops::concat_channels(per_view_features)
                                          : ops::eltwise_max(per_view_features);
}

// probabilities: 1xHxW (or HxW) map; pixel >= threshold becomes 1.
template <typename T>
Mask binarize_mask(const Tensor<T>& probabilities, double threshold = 0.5) {
  if (threshold <= 0.0 || threshold >= 1.0)
    throw std::invalid_argument("binarize_mask: threshold must lie in (0,1)");
  int h = 0, w = 0;
  if (probabilities.rank() == 2) {
    h = probabilities.dim(0);
    w = probabilities.dim(1);
  } else if (probabilities.rank() == 3 && probabilities.dim(0) == 1) {
    h = probabilities.dim(1);
    w = probabilities.dim(2);
  } else {
    throw std::invalid_argument("binarize_mask: expected HxW or 1xHxW, got " +
                                shape_str(probabilities.shape()));
  }
  Mask m(h, w);
  for (std::size_t i = 0; i < m.size(); ++i)
    m.data[i] = static_cast<double>(probabilities.data()[i]) >= threshold ? 1 : 0;
  return m;
}

// Zeroes masked-out pixels in every channel; building pixels pass through.
template <typename T>
Tensor<T> apply_mask(const Tensor<T>& image, const Mask& mask) {
  if (image.rank() != 3 || image.dim(1) != mask.h || image.dim(2) != mask.w)
    throw std::invalid_argument("apply_mask: image " + shape_str(image.shape()) +
                                " does not match mask " + std::to_string(mask.h) + "x" +
                                std::to_string(mask.w));
  Tensor<T> out = image;
  T* p = out.mutable_data();
  const std::size_t plane = static_cast<std::size_t>(mask.h) * mask.w;
  for (int c = 0; c < image.dim(0); ++c)
    for (std::size_t i = 0; i < plane; ++i)
      if (!mask.data[i]) p[c * plane + i] = T(0);
  return out;
}

}  // namespace mvda
