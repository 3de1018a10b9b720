#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mvda/tensor.hpp"

// Forward operators. All are pure functions: same inputs give bitwise
// identical outputs. Accumulations run in ascending row-major order
// (channel, then kernel row, then kernel column) so results are
// reproducible across runs.
namespace mvda::ops {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline int conv_out_dim(int in, int kernel, int stride, int padding) {
  return (in + 2 * padding - kernel) / stride + 1;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel,
                 const Tensor<T>& bias, int stride, int padding) {
  require(input.rank() == 4, "conv2d: input must be NxCxHxW, got " + shape_str(input.shape()));
  require(kernel.rank() == 4, "conv2d: kernel must be FxCxkHxkW, got " + shape_str(kernel.shape()));
  require(stride >= 1, "conv2d: stride must be positive");
  require(padding >= 0, "conv2d: padding must be non-negative");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int f = kernel.dim(0), kc = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
  require(kc == c, "conv2d: kernel channels do not match input channels (input " +
                       shape_str(input.shape()) + ", kernel " + shape_str(kernel.shape()) + ")");
  require(bias.rank() == 1 && bias.dim(0) == f,
          "conv2d: bias must have one entry per filter (kernel " + shape_str(kernel.shape()) +
              ", bias " + shape_str(bias.shape()) + ")");
  require(kh <= h + 2 * padding && kw <= w + 2 * padding,
          "conv2d: kernel " + shape_str(kernel.shape()) + " larger than padded input " +
              shape_str(input.shape()));
  const int oh = conv_out_dim(h, kh, stride, padding);
  const int ow = conv_out_dim(w, kw, stride, padding);

  Tensor<T> out(Shape{n, f, oh, ow});
  T* o = out.mutable_data();
  const T* in = input.data();
  const T* k = kernel.data();
  const T* b = bias.data();
  for (int ni = 0; ni < n; ++ni)
    for (int fi = 0; fi < f; ++fi)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          T acc = b[fi];
          for (int ci = 0; ci < c; ++ci)
            for (int ky = 0; ky < kh; ++ky) {
              const int iy = oy * stride - padding + ky;
              if (iy < 0 || iy >= h) continue;
              for (int kx = 0; kx < kw; ++kx) {
                const int ix = ox * stride - padding + kx;
                if (ix < 0 || ix >= w) continue;
                acc += in[((static_cast<std::size_t>(ni) * c + ci) * h + iy) * w + ix] *
                       k[((static_cast<std::size_t>(fi) * c + ci) * kh + ky) * kw + kx];
              }
            }
          o[((static_cast<std::size_t>(ni) * f + fi) * oh + oy) * ow + ox] = acc;
        }
  return out;
}

// Per-channel spatial convolution: one kernel per input channel, channel
// count preserved. Same inner accumulation as conv2d on a single channel.
template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& input, const Tensor<T>& kernel,
                           const Tensor<T>& bias, int stride, int padding) {
  require(input.rank() == 4, "depthwise_conv2d: input must be NxCxHxW");
  require(kernel.rank() == 4 && kernel.dim(1) == 1,
          "depthwise_conv2d: kernel must be Cx1xkHxkW, got " + shape_str(kernel.shape()));
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  require(kernel.dim(0) == c,
          "depthwise_conv2d: one kernel per input channel required (input " +
              shape_str(input.shape()) + ", kernel " + shape_str(kernel.shape()) + ")");
  require(bias.rank() == 1 && bias.dim(0) == c, "depthwise_conv2d: bias must be length C");
  const int kh = kernel.dim(2), kw = kernel.dim(3);
  require(kh <= h + 2 * padding && kw <= w + 2 * padding,
          "depthwise_conv2d: kernel larger than padded input");
  const int oh = conv_out_dim(h, kh, stride, padding);
  const int ow = conv_out_dim(w, kw, stride, padding);

  Tensor<T> out(Shape{n, c, oh, ow});
  T* o = out.mutable_data();
  const T* in = input.data();
  const T* k = kernel.data();
  const T* b = bias.data();
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < c; ++ci)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          T acc = b[ci];
          for (int ky = 0; ky < kh; ++ky) {
            const int iy = oy * stride - padding + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kw; ++kx) {
              const int ix = ox * stride - padding + kx;
              if (ix < 0 || ix >= w) continue;
              acc += in[((static_cast<std::size_t>(ni) * c + ci) * h + iy) * w + ix] *
                     k[(static_cast<std::size_t>(ci) * kh + ky) * kw + kx];
            }
          }
          o[((static_cast<std::size_t>(ni) * c + ci) * oh + oy) * ow + ox] = acc;
        }
  return out;
}

// Depthwise followed by 1x1 pointwise; exactly the composition of
// depthwise_conv2d and conv2d.
template <typename T>
Tensor<T> depthwise_separable_conv(const Tensor<T>& input, const Tensor<T>& depthwise_kernel,
                                   const Tensor<T>& depthwise_bias,
                                   const Tensor<T>& pointwise_kernel,
                                   const Tensor<T>& pointwise_bias, int stride, int padding) {
  require(pointwise_kernel.rank() == 4 && pointwise_kernel.dim(2) == 1 &&
              pointwise_kernel.dim(3) == 1,
          "depthwise_separable_conv: pointwise kernel must be FxCx1x1, got " +
              shape_str(pointwise_kernel.shape()));
  Tensor<T> mid = depthwise_conv2d(input, depthwise_kernel, depthwise_bias, stride, padding);
  return conv2d(mid, pointwise_kernel, pointwise_bias, 1, 0);
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  T* o = out.mutable_data();
  const T* in = input.data();
  for (std::size_t i = 0; i < input.size(); ++i) o[i] = in[i] > T(0) ? in[i] : T(0);
  return out;
}

template <typename T>
T sigmoid_scalar(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  T* o = out.mutable_data();
  const T* in = input.data();
  for (std::size_t i = 0; i < input.size(); ++i) o[i] = sigmoid_scalar(in[i]);
  return out;
}

// Softmax over the channel axis (axis 1), per spatial position. Accepts any
// rank >= 2 tensor laid out N x C x <spatial...>.
template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& input) {
  require(input.rank() >= 2, "softmax: input must have a channel axis, got " +
                                 shape_str(input.shape()));
  const int n = input.dim(0), c = input.dim(1);
  require(c >= 1, "softmax: channel dimension must be >= 1");
  std::size_t spatial = 1;
  for (int i = 2; i < input.rank(); ++i) spatial *= static_cast<std::size_t>(input.dim(i));

  Tensor<T> out(input.shape());
  T* o = out.mutable_data();
  const T* in = input.data();
  for (int ni = 0; ni < n; ++ni)
    for (std::size_t s = 0; s < spatial; ++s) {
      const std::size_t base = static_cast<std::size_t>(ni) * c * spatial + s;
      T mx = in[base];
      for (int ci = 1; ci < c; ++ci) mx = std::max(mx, in[base + ci * spatial]);
      T sum = T(0);
      for (int ci = 0; ci < c; ++ci) {
        const T e = std::exp(in[base + ci * spatial] - mx);
        o[base + ci * spatial] = e;
        sum += e;
      }
      for (int ci = 0; ci < c; ++ci) o[base + ci * spatial] /= sum;
    }
  return out;
}

template <typename T>
Tensor<T> activation(std::string_view kind, const Tensor<T>& input) {
  if (kind == "relu") return relu(input);
  if (kind == "softmax_over_channels") return softmax_channels(input);
  throw std::invalid_argument("activation: unknown kind '" + std::string(kind) + "'");
}

// Max pooling with square window. Ties go to the first element in row-major
// window order; the argmax indices drive the backward routing.
template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& input, int window, int stride,
                    std::vector<std::size_t>* argmax = nullptr) {
  require(input.rank() == 4, "maxpool2d: input must be NxCxHxW");
  require(window >= 1 && stride >= 1, "maxpool2d: window and stride must be positive");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  require(window <= h && window <= w,
          "maxpool2d: window " + std::to_string(window) + " larger than input " +
              shape_str(input.shape()));
  const int oh = (h - window) / stride + 1;
  const int ow = (w - window) / stride + 1;

  Tensor<T> out(Shape{n, c, oh, ow});
  T* o = out.mutable_data();
  const T* in = input.data();
  if (argmax) argmax->assign(out.size(), 0);
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < c; ++ci)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          std::size_t best_idx = 0;
          T best = T(0);
          bool first = true;
          for (int ky = 0; ky < window; ++ky)
            for (int kx = 0; kx < window; ++kx) {
              const int iy = oy * stride + ky;
              const int ix = ox * stride + kx;
              const std::size_t idx =
                  ((static_cast<std::size_t>(ni) * c + ci) * h + iy) * w + ix;
              if (first || in[idx] > best) {
                best = in[idx];
                best_idx = idx;
                first = false;
              }
            }
          const std::size_t oidx = ((static_cast<std::size_t>(ni) * c + ci) * oh + oy) * ow + ox;
          o[oidx] = best;
          if (argmax) (*argmax)[oidx] = best_idx;
        }
  return out;
}

// Adaptive average pooling to an out_h x out_w grid. Window i spans
// [floor(i*H/out), ceil((i+1)*H/out)).
template <typename T>
Tensor<T> adaptive_avgpool2d(const Tensor<T>& input, int out_h, int out_w) {
  require(input.rank() == 4, "adaptive_avgpool2d: input must be NxCxHxW");
  require(out_h >= 1 && out_w >= 1, "adaptive_avgpool2d: output size must be positive");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  require(out_h <= h && out_w <= w,
          "adaptive_avgpool2d: output " + std::to_string(out_h) + "x" + std::to_string(out_w) +
              " larger than input " + shape_str(input.shape()));

  Tensor<T> out(Shape{n, c, out_h, out_w});
  T* o = out.mutable_data();
  const T* in = input.data();
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < c; ++ci)
      for (int oy = 0; oy < out_h; ++oy) {
        const int y0 = (oy * h) / out_h;
        const int y1 = ((oy + 1) * h + out_h - 1) / out_h;
        for (int ox = 0; ox < out_w; ++ox) {
          const int x0 = (ox * w) / out_w;
          const int x1 = ((ox + 1) * w + out_w - 1) / out_w;
          T acc = T(0);
          for (int iy = y0; iy < y1; ++iy)
            for (int ix = x0; ix < x1; ++ix)
              acc += in[((static_cast<std::size_t>(ni) * c + ci) * h + iy) * w + ix];
          o[((static_cast<std::size_t>(ni) * c + ci) * out_h + oy) * out_w + ox] =
              acc / static_cast<T>((y1 - y0) * (x1 - x0));
        }
      }
  return out;
}

// Bilinear interpolation with half-pixel centers (align_corners = false).
// Resizing to the same size is the identity.
template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& input, int out_h, int out_w) {
  require(input.rank() == 4, "bilinear_resize: input must be NxCxHxW");
  require(out_h >= 1 && out_w >= 1, "bilinear_resize: output size must be positive");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);

  Tensor<T> out(Shape{n, c, out_h, out_w});
  T* o = out.mutable_data();
  const T* in = input.data();
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int oy = 0; oy < out_h; ++oy) {
    double fy = (oy + 0.5) * sy - 0.5;
    fy = std::max(0.0, fy);
    int y0 = static_cast<int>(fy);
    if (y0 > h - 1) y0 = h - 1;
    const int y1 = std::min(y0 + 1, h - 1);
    const T wy = static_cast<T>(fy - y0);
    for (int ox = 0; ox < out_w; ++ox) {
      double fx = (ox + 0.5) * sx - 0.5;
      fx = std::max(0.0, fx);
      int x0 = static_cast<int>(fx);
      if (x0 > w - 1) x0 = w - 1;
      const int x1 = std::min(x0 + 1, w - 1);
      const T wx = static_cast<T>(fx - x0);
      for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c; ++ci) {
          const std::size_t plane = (static_cast<std::size_t>(ni) * c + ci) * h;
          const T v00 = in[(plane + y0) * w + x0];
          const T v01 = in[(plane + y0) * w + x1];
          const T v10 = in[(plane + y1) * w + x0];
          const T v11 = in[(plane + y1) * w + x1];
          const T top = v00 + (v01 - v00) * wx;
          const T bot = v10 + (v11 - v10) * wx;
          o[((static_cast<std::size_t>(ni) * c + ci) * out_h + oy) * out_w + ox] =
              top + (bot - top) * wy;
        }
    }
  }
  return out;
}

// Affine map: input (N x D) * weights (D x M) + bias (M).
template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias) {
  require(input.rank() == 2, "dense: input must be NxD, got " + shape_str(input.shape()));
  require(weights.rank() == 2, "dense: weights must be DxM, got " + shape_str(weights.shape()));
  const int n = input.dim(0), d = input.dim(1);
  const int dw = weights.dim(0), m = weights.dim(1);
  require(d == dw, "dense: inner dimensions disagree (input " + shape_str(input.shape()) +
                       ", weights " + shape_str(weights.shape()) + ")");
  require(bias.rank() == 1 && bias.dim(0) == m,
          "dense: bias must be length M (weights " + shape_str(weights.shape()) + ", bias " +
              shape_str(bias.shape()) + ")");

  Tensor<T> out(Shape{n, m});
  T* o = out.mutable_data();
  const T* in = input.data();
  const T* w = weights.data();
  const T* b = bias.data();
  for (int ni = 0; ni < n; ++ni)
    for (int mi = 0; mi < m; ++mi) {
      T acc = b[mi];
      for (int di = 0; di < d; ++di)
        acc += in[static_cast<std::size_t>(ni) * d + di] *
               w[static_cast<std::size_t>(di) * m + mi];
      o[static_cast<std::size_t>(ni) * m + mi] = acc;
    }
  return out;
}

// Channel-axis concatenation of NxCixHxW tensors with matching N, H, W.
template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
  require(!parts.empty(), "concat_channels: no inputs");
  const int n = parts[0].dim(0), h = parts[0].dim(2), w = parts[0].dim(3);
  int total_c = 0;
  for (const auto& p : parts) {
    require(p.rank() == 4, "concat_channels: inputs must be NxCxHxW");
    require(p.dim(0) == n && p.dim(2) == h && p.dim(3) == w,
            "concat_channels: spatial/batch shapes disagree (" + shape_str(parts[0].shape()) +
                " vs " + shape_str(p.shape()) + ")");
    total_c += p.dim(1);
  }
  Tensor<T> out(Shape{n, total_c, h, w});
  T* o = out.mutable_data();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int ni = 0; ni < n; ++ni) {
    std::size_t c_off = 0;
    for (const auto& p : parts) {
      const std::size_t count = static_cast<std::size_t>(p.dim(1)) * plane;
      const T* src = p.data() + static_cast<std::size_t>(ni) * count;
      T* dst = o + (static_cast<std::size_t>(ni) * total_c + c_off) * plane;
      std::copy(src, src + count, dst);
      c_off += static_cast<std::size_t>(p.dim(1));
    }
  }
  return out;
}

// Elementwise maximum across equally shaped tensors. Backward routes the
// gradient to the first input attaining the maximum.
template <typename T>
Tensor<T> eltwise_max(const std::vector<Tensor<T>>& parts) {
  require(!parts.empty(), "eltwise_max: no inputs");
  for (const auto& p : parts)
    require(p.same_shape(parts[0]), "eltwise_max: shapes disagree (" +
                                        shape_str(parts[0].shape()) + " vs " +
                                        shape_str(p.shape()) + ")");
  Tensor<T> out = parts[0];
  T* o = out.mutable_data();
  for (std::size_t pi = 1; pi < parts.size(); ++pi) {
    const T* src = parts[pi].data();
    for (std::size_t i = 0; i < out.size(); ++i)
      if (src[i] > o[i]) o[i] = src[i];
  }
  return out;
}

}  // namespace mvda::ops
