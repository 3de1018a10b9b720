#include "mvda/augment.hpp"

#include <cmath>
#include <stdexcept>

namespace mvda {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Frame {
  Tensor<float> image;
  Mask mask;
  bool has_mask = false;
  int h() const { return image.dim(1); }
  int w() const { return image.dim(2); }
};

float clamp01(float v) { return v < 0.f ? 0.f : (v > 1.f ? 1.f : v); }

// Nearest-neighbor warp through a dst -> src coordinate map. Image and mask
// go through the same integer index map, so geometric transforms commute
// with per-pixel mask predicates exactly.
template <typename MapFn>
void warp(Frame& f, MapFn&& map) {
  const int h = f.h(), w = f.w(), c = f.image.dim(0);
  Tensor<float> out(Shape{c, h, w});
  Mask mout(h, w);
  float* op = out.mutable_data();
  const float* ip = f.image.data();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double sx = 0, sy = 0;
      map(x, y, sx, sy);
      const int ix = static_cast<int>(std::lround(sx));
      const int iy = static_cast<int>(std::lround(sy));
      if (ix < 0 || iy < 0 || ix >= w || iy >= h) continue;  // fill stays 0
      const std::size_t src = static_cast<std::size_t>(iy) * w + ix;
      const std::size_t dst = static_cast<std::size_t>(y) * w + x;
      for (int ci = 0; ci < c; ++ci) op[ci * plane + dst] = ip[ci * plane + src];
      if (f.has_mask) mout.data[dst] = f.mask.data[src];
    }
  f.image = std::move(out);
  if (f.has_mask) f.mask = std::move(mout);
}

void apply_flip(Frame& f) {
  const int w = f.w();
  warp(f, [w](int x, int y, double& sx, double& sy) {
    sx = w - 1 - x;
    sy = y;
  });
}

// p0 = rotation (rad), p1/p2 = translation (px), p3 = scale. The sampling
// map is the inverse transform about the image center.
void apply_affine(Frame& f, const AugmentOp& op) {
  const double cx = (f.w() - 1) / 2.0, cy = (f.h() - 1) / 2.0;
  const double inv_scale = 1.0 / op.p3;
  const double ca = std::cos(-op.p0), sa = std::sin(-op.p0);
  warp(f, [&](int x, int y, double& sx, double& sy) {
    const double dx = x - cx - op.p1;
    const double dy = y - cy - op.p2;
    sx = cx + inv_scale * (ca * dx - sa * dy);
    sy = cy + inv_scale * (sa * dx + ca * dy);
  });
}

// Small projective warp: src = (x + a*y, y + b*x) / (1 + g*x + h*y), with
// coefficients scaled so the far corner moves by at most ~10% of the size.
void apply_perspective(Frame& f, const AugmentOp& op) {
  warp(f, [&](int x, int y, double& sx, double& sy) {
    const double denom = 1.0 + op.p2 * x + op.p3 * y;
    sx = (x + op.p0 * y) / denom;
    sy = (y + op.p1 * x) / denom;
  });
}

// p0 = x0 fraction, p1 = y0 fraction, p2 = crop fraction; crop then resize
// back with nearest sampling.
void apply_crop(Frame& f, const AugmentOp& op) {
  const int w = f.w(), h = f.h();
  const int cw = std::max(1, static_cast<int>(std::lround(op.p2 * w)));
  const int ch = std::max(1, static_cast<int>(std::lround(op.p2 * h)));
  const int x0 = static_cast<int>(std::lround(op.p0 * (w - cw)));
  const int y0 = static_cast<int>(std::lround(op.p1 * (h - ch)));
  warp(f, [&](int x, int y, double& sx, double& sy) {
    sx = x0 + std::floor((x + 0.5) * cw / w);
    sy = y0 + std::floor((y + 0.5) * ch / h);
  });
}

void apply_brightness_contrast(Frame& f, const AugmentOp& op) {
  float* p = f.image.mutable_data();
  const float bright = static_cast<float>(op.p0);
  const float contrast = static_cast<float>(op.p1);
  for (std::size_t i = 0; i < f.image.size(); ++i)
    p[i] = clamp01((p[i] - 0.5f) * contrast + 0.5f + bright);
}

Tensor<float> box_blur3(const Tensor<float>& img) {
  const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  Tensor<float> out(img.shape());
  float* op = out.mutable_data();
  const float* ip = img.data();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int ci = 0; ci < c; ++ci)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float acc = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = std::min(std::max(y + dy, 0), h - 1);
            const int xx = std::min(std::max(x + dx, 0), w - 1);
            acc += ip[ci * plane + static_cast<std::size_t>(yy) * w + xx];
          }
        op[ci * plane + static_cast<std::size_t>(y) * w + x] = acc / 9.f;
      }
  return out;
}

void apply_blur(Frame& f) { f.image = box_blur3(f.image); }

void apply_sharpen(Frame& f, const AugmentOp& op) {
  Tensor<float> blurred = box_blur3(f.image);
  float* p = f.image.mutable_data();
  const float* b = blurred.data();
  const float amount = static_cast<float>(op.p0);
  for (std::size_t i = 0; i < f.image.size(); ++i)
    p[i] = clamp01(p[i] + amount * (p[i] - b[i]));
}

void apply_noise(Frame& f, const AugmentOp& op) {
  Rng rng(op.sample_seed);
  float* p = f.image.mutable_data();
  const float sigma = static_cast<float>(op.p0);
  for (std::size_t i = 0; i < f.image.size(); ++i)
    p[i] = clamp01(p[i] + sigma * static_cast<float>(rng.normal()));
}

void apply_op(Frame& f, const AugmentOp& op) {
  switch (op.kind) {
    case AugmentKind::kHorizontalFlip: apply_flip(f); break;
    case AugmentKind::kAffine: apply_affine(f, op); break;
    case AugmentKind::kPerspective: apply_perspective(f, op); break;
    case AugmentKind::kBrightnessContrast: apply_brightness_contrast(f, op); break;
    case AugmentKind::kBlur: apply_blur(f); break;
    case AugmentKind::kSharpen: apply_sharpen(f, op); break;
    case AugmentKind::kGaussianNoise: apply_noise(f, op); break;
    case AugmentKind::kRandomCrop: apply_crop(f, op); break;
  }
}

}  // namespace

const char* augment_kind_name(AugmentKind kind) {
  switch (kind) {
    case AugmentKind::kHorizontalFlip: return "horizontal-flip";
    case AugmentKind::kAffine: return "affine";
    case AugmentKind::kPerspective: return "perspective";
    case AugmentKind::kBrightnessContrast: return "brightness-contrast";
    case AugmentKind::kBlur: return "blur";
    case AugmentKind::kSharpen: return "sharpen";
    case AugmentKind::kGaussianNoise: return "gaussian-noise";
    case AugmentKind::kRandomCrop: return "random-crop";
  }
  throw std::invalid_argument("unknown augment kind");
}

std::pair<Tensor<float>, Mask> augment(const Tensor<float>& image, const Mask& mask,
                                       std::span<const AugmentOp> ops) {
  if (image.rank() != 3 || image.dim(1) != mask.h || image.dim(2) != mask.w)
    throw std::invalid_argument("augment: image " + shape_str(image.shape()) +
                                " does not match mask " + std::to_string(mask.h) + "x" +
                                std::to_string(mask.w));
  Frame f{image, mask, true};
  for (const AugmentOp& op : ops) apply_op(f, op);
  return {std::move(f.image), std::move(f.mask)};
}

Tensor<float> augment_image(const Tensor<float>& image, std::span<const AugmentOp> ops) {
  if (image.rank() != 3)
    throw std::invalid_argument("augment: image must be CxHxW, got " + shape_str(image.shape()));
  Frame f{image, Mask(), false};
  for (const AugmentOp& op : ops) apply_op(f, op);
  return std::move(f.image);
}

std::vector<AugmentOp> draw_segmentation_augments(Rng& rng) {
  std::vector<AugmentOp> ops;
  if (rng.bernoulli(0.5)) ops.push_back({AugmentKind::kHorizontalFlip});
  if (rng.bernoulli(0.5)) {
    AugmentOp op{AugmentKind::kAffine};
    // rotation +-15 deg, translation +-10%, scale 0.9..1.1; a degenerate
    // (near-singular) draw is discarded and re-drawn from the stream
    do {
      op.p0 = rng.uniform(-15.0, 15.0) * kPi / 180.0;
      op.p1 = rng.uniform(-0.10, 0.10) * 64;
      op.p2 = rng.uniform(-0.10, 0.10) * 64;
      op.p3 = rng.uniform(0.9, 1.1);
    } while (std::abs(op.p3) < 1e-3);
    ops.push_back(op);
  }
  if (rng.bernoulli(0.3)) {
    AugmentOp op{AugmentKind::kPerspective};
    op.p0 = rng.uniform(-0.1, 0.1);
    op.p1 = rng.uniform(-0.1, 0.1);
    op.p2 = rng.uniform(-0.1, 0.1) / 64.0;
    op.p3 = rng.uniform(-0.1, 0.1) / 64.0;
    ops.push_back(op);
  }
  if (rng.bernoulli(0.5)) {
    AugmentOp op{AugmentKind::kBrightnessContrast};
    op.p0 = rng.uniform(-0.2, 0.2);
    op.p1 = rng.uniform(0.8, 1.2);
    ops.push_back(op);
  }
  if (rng.bernoulli(0.3)) {
    if (rng.bernoulli(0.5)) {
      ops.push_back({AugmentKind::kBlur});
    } else {
      AugmentOp op{AugmentKind::kSharpen};
      op.p0 = rng.uniform(0.5, 1.5);
      ops.push_back(op);
    }
  }
  if (rng.bernoulli(0.3)) {
    AugmentOp op{AugmentKind::kGaussianNoise};
    op.p0 = rng.uniform(0.01, 0.05);
    op.sample_seed = rng.next_u64();
    ops.push_back(op);
  }
  if (rng.bernoulli(0.3)) {
    AugmentOp op{AugmentKind::kRandomCrop};
    op.p0 = rng.uniform();
    op.p1 = rng.uniform();
    op.p2 = rng.uniform(0.9, 1.0);
    ops.push_back(op);
  }
  return ops;
}

std::vector<AugmentOp> draw_classification_augments(Rng& rng) {
  std::vector<AugmentOp> ops;
  if (rng.bernoulli(0.5)) ops.push_back({AugmentKind::kHorizontalFlip});
  if (rng.bernoulli(0.5)) {
    AugmentOp op{AugmentKind::kBrightnessContrast};
    op.p0 = rng.uniform(-0.15, 0.15);
    op.p1 = rng.uniform(0.85, 1.15);
    ops.push_back(op);
  }
  if (rng.bernoulli(0.2)) {
    AugmentOp op{AugmentKind::kGaussianNoise};
    op.p0 = rng.uniform(0.01, 0.03);
    op.sample_seed = rng.next_u64();
    ops.push_back(op);
  }
  return ops;
}

}  // namespace mvda
