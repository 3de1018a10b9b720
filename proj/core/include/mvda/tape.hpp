#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mvda/losses.hpp"
#include "mvda/ops.hpp"
#include "mvda/tensor.hpp"

namespace mvda {

// Named trainable tensor. Gradients accumulate across backward passes until
// reset; frozen parameters receive no optimizer updates.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool frozen = false;

  Parameter(std::string n, Tensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  std::size_t size() const { return value.size(); }
  void zero_grad() { grad = Tensor<T>(value.shape()); }
};

// Ordered collection of parameters; order defines checkpoint payload order.
template <typename T>
class ParameterStore {
 public:
  std::shared_ptr<Parameter<T>> add(std::string name, Tensor<T> value) {
    for (const auto& p : items_)
      if (p->name == name)
        throw std::invalid_argument("parameter '" + name + "' already registered");
    items_.push_back(std::make_shared<Parameter<T>>(std::move(name), std::move(value)));
    return items_.back();
  }

  const std::vector<std::shared_ptr<Parameter<T>>>& items() const { return items_; }
  std::size_t count() const { return items_.size(); }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& p : items_) n += p->size();
    return n;
  }

  std::shared_ptr<Parameter<T>> find(const std::string& name) const {
    for (const auto& p : items_)
      if (p->name == name) return p;
    return nullptr;
  }

  void zero_grad() {
    for (auto& p : items_) p->zero_grad();
  }

  // Cheap copy of every parameter value (storage is shared until mutated).
  std::vector<Tensor<T>> snapshot_values() const {
    std::vector<Tensor<T>> out;
    out.reserve(items_.size());
    for (const auto& p : items_) out.push_back(p->value);
    return out;
  }

  void restore_values(const std::vector<Tensor<T>>& values) {
    if (values.size() != items_.size())
      throw std::invalid_argument("restore_values: snapshot does not match parameter count");
    for (std::size_t i = 0; i < items_.size(); ++i) {
      if (!values[i].same_shape(items_[i]->value))
        throw std::invalid_argument("restore_values: shape mismatch for '" + items_[i]->name +
                                    "'");
      items_[i]->value = values[i];
    }
  }

  // Sets the frozen flag on every parameter whose name starts with prefix.
  // An empty prefix matches everything. No match is treated as a caller
  // mistake (usually a typo) and rejected.
  int set_trainable(const std::string& prefix, bool trainable) {
    int matched = 0;
    for (auto& p : items_)
      if (p->name.rfind(prefix, 0) == 0) {
        p->frozen = !trainable;
        ++matched;
      }
    if (matched == 0)
      throw std::invalid_argument("set_trainable: no parameter matches prefix '" + prefix + "'");
    return matched;
  }

 private:
  std::vector<std::shared_ptr<Parameter<T>>> items_;
};

template <typename T>
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff over an append-only operation record. Operations
// execute eagerly through ops::*, so the record is already in topological
// order; backward walks it once in reverse. A tape is single-use scratch for
// one forward/backward pair and is not thread-safe; independent tapes may
// run on separate threads.
template <typename T>
class Tape {
 public:
  Var<T> input(Tensor<T> value) { return push(OpKind::kLeaf, {}, std::move(value)); }

  // Binds a parameter as a leaf. Binding the same parameter twice returns the
  // same node, so shared weights accumulate gradients from every use.
  Var<T> param(Parameter<T>& p) {
    auto it = param_vars_.find(&p);
    if (it != param_vars_.end()) return Var<T>{it->second};
    Var<T> v = push(OpKind::kParam, {}, p.value);
    nodes_[v.id].param = &p;
    param_vars_[&p] = v.id;
    return v;
  }

  Var<T> conv2d(Var<T> x, Var<T> kernel, Var<T> bias, int stride, int padding) {
    Var<T> v = push(OpKind::kConv2d, {x.id, kernel.id, bias.id},
                    ops::conv2d(val(x), val(kernel), val(bias), stride, padding));
    nodes_[v.id].i0 = stride;
    nodes_[v.id].i1 = padding;
    return v;
  }

  Var<T> depthwise_conv2d(Var<T> x, Var<T> kernel, Var<T> bias, int stride, int padding) {
    Var<T> v = push(OpKind::kDepthwiseConv2d, {x.id, kernel.id, bias.id},
                    ops::depthwise_conv2d(val(x), val(kernel), val(bias), stride, padding));
    nodes_[v.id].i0 = stride;
    nodes_[v.id].i1 = padding;
    return v;
  }

  Var<T> dense(Var<T> x, Var<T> weights, Var<T> bias) {
    return push(OpKind::kDense, {x.id, weights.id, bias.id},
                ops::dense(val(x), val(weights), val(bias)));
  }

  Var<T> relu(Var<T> x) { return push(OpKind::kRelu, {x.id}, ops::relu(val(x))); }

  Var<T> sigmoid(Var<T> x) { return push(OpKind::kSigmoid, {x.id}, ops::sigmoid(val(x))); }

  Var<T> softmax_channels(Var<T> x) {
    return push(OpKind::kSoftmax, {x.id}, ops::softmax_channels(val(x)));
  }

  Var<T> maxpool2d(Var<T> x, int window, int stride) {
    std::vector<std::size_t> argmax;
    Tensor<T> out = ops::maxpool2d(val(x), window, stride, &argmax);
    Var<T> v = push(OpKind::kMaxPool, {x.id}, std::move(out));
    nodes_[v.id].i0 = window;
    nodes_[v.id].i1 = stride;
    nodes_[v.id].argmax = std::move(argmax);
    return v;
  }

  Var<T> adaptive_avgpool2d(Var<T> x, int out_h, int out_w) {
    Var<T> v = push(OpKind::kAvgPool, {x.id}, ops::adaptive_avgpool2d(val(x), out_h, out_w));
    nodes_[v.id].i0 = out_h;
    nodes_[v.id].i1 = out_w;
    return v;
  }

  Var<T> bilinear_resize(Var<T> x, int out_h, int out_w) {
    Var<T> v = push(OpKind::kBilinear, {x.id}, ops::bilinear_resize(val(x), out_h, out_w));
    nodes_[v.id].i0 = out_h;
    nodes_[v.id].i1 = out_w;
    return v;
  }

  Var<T> concat_channels(const std::vector<Var<T>>& parts) {
    std::vector<int> ids;
    std::vector<Tensor<T>> vals;
    for (Var<T> p : parts) {
      ids.push_back(p.id);
      vals.push_back(val(p));
    }
    return push(OpKind::kConcat, std::move(ids), ops::concat_channels(vals));
  }

  Var<T> eltwise_max(const std::vector<Var<T>>& parts) {
    std::vector<int> ids;
    std::vector<Tensor<T>> vals;
    for (Var<T> p : parts) {
      ids.push_back(p.id);
      vals.push_back(val(p));
    }
    return push(OpKind::kEltwiseMax, std::move(ids), ops::eltwise_max(vals));
  }

  Var<T> reshape(Var<T> x, Shape shape) {
    return push(OpKind::kReshape, {x.id}, val(x).reshaped(std::move(shape)));
  }

  // 1-d window [offset, offset+length) of the flattened input.
  Var<T> slice_flat(Var<T> x, std::size_t offset, std::size_t length) {
    const Tensor<T>& in = val(x);
    if (offset + length > in.size())
      throw std::invalid_argument("slice_flat: window [" + std::to_string(offset) + ", " +
                                  std::to_string(offset + length) + ") exceeds size " +
                                  std::to_string(in.size()));
    std::vector<T> out(in.data() + offset, in.data() + offset + length);
    Var<T> v = push(OpKind::kSliceFlat, {x.id},
                    Tensor<T>(Shape{static_cast<int>(length)}, std::move(out)));
    nodes_[v.id].i0 = static_cast<int>(offset);
    return v;
  }

  Var<T> mul(Var<T> a, Var<T> b) {
    const Tensor<T>& ta = val(a);
    const Tensor<T>& tb = val(b);
    if (!ta.same_shape(tb))
      throw std::invalid_argument("mul: shapes disagree (" + shape_str(ta.shape()) + " vs " +
                                  shape_str(tb.shape()) + ")");
    Tensor<T> out(ta.shape());
    T* o = out.mutable_data();
    for (std::size_t i = 0; i < ta.size(); ++i) o[i] = ta.data()[i] * tb.data()[i];
    return push(OpKind::kMul, {a.id, b.id}, std::move(out));
  }

  Var<T> mul_scalar(Var<T> x, T factor) {
    const Tensor<T>& in = val(x);
    Tensor<T> out(in.shape());
    T* o = out.mutable_data();
    for (std::size_t i = 0; i < in.size(); ++i) o[i] = in.data()[i] * factor;
    Var<T> v = push(OpKind::kMulScalar, {x.id}, std::move(out));
    nodes_[v.id].scalar = static_cast<double>(factor);
    return v;
  }

  Var<T> sum_all(Var<T> x) {
    const Tensor<T>& in = val(x);
    T acc = T(0);
    for (std::size_t i = 0; i < in.size(); ++i) acc += in.data()[i];
    return push(OpKind::kSumAll, {x.id}, Tensor<T>::scalar(acc));
  }

  // Forward identity whose backward multiplies the incoming gradient by
  // factor. Exists to fault-inject wrong gradients in verification tests.
  Var<T> scale_gradient(Var<T> x, T factor) {
    Var<T> v = push(OpKind::kGradHook, {x.id}, val(x));
    nodes_[v.id].scalar = static_cast<double>(factor);
    return v;
  }

  // Mean focal loss over the rows of an N x k probability tensor.
  Var<T> categorical_focal_loss(Var<T> probs, std::vector<int> labels, T gamma,
                                std::vector<T> alpha) {
    const Tensor<T>& p = val(probs);
    if (p.rank() != 2)
      throw std::invalid_argument("categorical_focal_loss: probabilities must be Nxk, got " +
                                  shape_str(p.shape()));
    const int n = p.dim(0), k = p.dim(1);
    if (static_cast<int>(labels.size()) != n)
      throw std::invalid_argument("categorical_focal_loss: " + std::to_string(labels.size()) +
                                  " labels for " + std::to_string(n) + " rows");
    T total = T(0);
    for (int i = 0; i < n; ++i) {
      std::span<const T> row(p.data() + static_cast<std::size_t>(i) * k,
                             static_cast<std::size_t>(k));
      total += focal_loss(row, labels[i], gamma, std::span<const T>(alpha));
    }
    Var<T> v = push(OpKind::kCategoricalFocal, {probs.id},
                    Tensor<T>::scalar(total / static_cast<T>(n)));
    nodes_[v.id].labels = std::move(labels);
    nodes_[v.id].scalar = static_cast<double>(gamma);
    nodes_[v.id].alpha = std::move(alpha);
    return v;
  }

  // Mean two-class focal loss over a 1x1xHxW foreground-probability map
  // against a {0,1} target of the same spatial size.
  Var<T> binary_focal_map_loss(Var<T> probs, std::vector<std::uint8_t> target, T gamma,
                               T alpha_bg, T alpha_fg) {
    const Tensor<T>& p = val(probs);
    if (p.size() != target.size())
      throw std::invalid_argument("binary_focal_map_loss: map size " + std::to_string(p.size()) +
                                  " does not match target size " + std::to_string(target.size()));
    T total = T(0);
    for (std::size_t i = 0; i < p.size(); ++i)
      total += binary_focal_loss(p.data()[i], target[i] ? 1 : 0, gamma, alpha_bg, alpha_fg);
    Var<T> v = push(OpKind::kBinaryFocalMap, {probs.id},
                    Tensor<T>::scalar(total / static_cast<T>(p.size())));
    nodes_[v.id].target = std::move(target);
    nodes_[v.id].scalar = static_cast<double>(gamma);
    nodes_[v.id].alpha = {alpha_bg, alpha_fg};
    return v;
  }

  const Tensor<T>& value(Var<T> v) const { return val(v); }

  std::size_t node_count() const { return nodes_.size(); }

  // Gradient of the last backward() target with respect to v.
  const Tensor<T>& grad(Var<T> v) const {
    check(v);
    if (grads_.empty()) throw std::logic_error("grad: backward() has not run");
    return grads_[static_cast<std::size_t>(v.id)];
  }

  // Reverse pass from a scalar output. Visits every recorded operation once,
  // newest to oldest, and adds each bound parameter's gradient into
  // Parameter::grad (so repeated calls accumulate).
  void backward(Var<T> output) {
    check(output);
    const Node& out = nodes_[static_cast<std::size_t>(output.id)];
    if (out.value.size() != 1)
      throw std::invalid_argument("backward: output must be scalar, got shape " +
                                  shape_str(out.value.shape()));
    grads_.clear();
    grads_.reserve(nodes_.size());
    for (const Node& n : nodes_) grads_.emplace_back(n.value.shape());
    grads_[static_cast<std::size_t>(output.id)].mutable_data()[0] = T(1);

    for (int id = output.id; id >= 0; --id) propagate(id);

    for (std::size_t id = 0; id < nodes_.size(); ++id) {
      Node& n = nodes_[id];
      if (n.kind != OpKind::kParam) continue;
      T* pg = n.param->grad.mutable_data();
      const T* g = grads_[id].data();
      for (std::size_t i = 0; i < n.param->grad.size(); ++i) pg[i] += g[i];
    }
  }

 private:
  enum class OpKind {
    kLeaf,
    kParam,
    kConv2d,
    kDepthwiseConv2d,
    kDense,
    kRelu,
    kSigmoid,
    kSoftmax,
    kMaxPool,
    kAvgPool,
    kBilinear,
    kConcat,
    kEltwiseMax,
    kReshape,
    kSliceFlat,
    kMul,
    kMulScalar,
    kSumAll,
    kGradHook,
    kCategoricalFocal,
    kBinaryFocalMap,
  };

  struct Node {
    OpKind kind;
    std::vector<int> inputs;
    Tensor<T> value;
    int i0 = 0, i1 = 0;
    double scalar = 0.0;
    std::vector<std::size_t> argmax;
    Parameter<T>* param = nullptr;
    std::vector<int> labels;
    std::vector<T> alpha;
    std::vector<std::uint8_t> target;
  };

  Var<T> push(OpKind kind, std::vector<int> inputs, Tensor<T> value) {
    for (int id : inputs) check(Var<T>{id});
    Node n;
    n.kind = kind;
    n.inputs = std::move(inputs);
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var<T>{static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor<T>& val(Var<T> v) const {
    check(v);
    return nodes_[static_cast<std::size_t>(v.id)].value;
  }

  void check(Var<T> v) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
      throw std::invalid_argument("tape: variable does not belong to this record");
  }

  Tensor<T>& g(int id) { return grads_[static_cast<std::size_t>(id)]; }

  void propagate(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    const Tensor<T>& go = grads_[static_cast<std::size_t>(id)];
    switch (n.kind) {
      case OpKind::kLeaf:
      case OpKind::kParam:
        break;
      case OpKind::kConv2d:
        backward_conv(n, go, /*depthwise=*/false);
        break;
      case OpKind::kDepthwiseConv2d:
        backward_conv(n, go, /*depthwise=*/true);
        break;
      case OpKind::kDense:
        backward_dense(n, go);
        break;
      case OpKind::kRelu: {
        const Tensor<T>& x = nodes_[n.inputs[0]].value;
        T* gx = g(n.inputs[0]).mutable_data();
        for (std::size_t i = 0; i < x.size(); ++i)
          if (x.data()[i] > T(0)) gx[i] += go.data()[i];
        break;
      }
      case OpKind::kSigmoid: {
        T* gx = g(n.inputs[0]).mutable_data();
        const T* y = n.value.data();
        for (std::size_t i = 0; i < n.value.size(); ++i)
          gx[i] += go.data()[i] * y[i] * (T(1) - y[i]);
        break;
      }
      case OpKind::kSoftmax:
        backward_softmax(n, go);
        break;
      case OpKind::kMaxPool: {
        T* gx = g(n.inputs[0]).mutable_data();
        for (std::size_t i = 0; i < n.value.size(); ++i) gx[n.argmax[i]] += go.data()[i];
        break;
      }
      case OpKind::kAvgPool:
        backward_avgpool(n, go);
        break;
      case OpKind::kBilinear:
        backward_bilinear(n, go);
        break;
      case OpKind::kConcat: {
        const int nn = n.value.dim(0), h = n.value.dim(2), w = n.value.dim(3);
        const std::size_t plane = static_cast<std::size_t>(h) * w;
        const int total_c = n.value.dim(1);
        std::size_t c_off = 0;
        for (int in_id : n.inputs) {
          Tensor<T>& gi = g(in_id);
          const int ci = nodes_[in_id].value.dim(1);
          T* gp = gi.mutable_data();
          for (int b = 0; b < nn; ++b) {
            const T* src = go.data() + (static_cast<std::size_t>(b) * total_c + c_off) * plane;
            T* dst = gp + static_cast<std::size_t>(b) * ci * plane;
            for (std::size_t i = 0; i < static_cast<std::size_t>(ci) * plane; ++i) dst[i] += src[i];
          }
          c_off += static_cast<std::size_t>(ci);
        }
        break;
      }
      case OpKind::kEltwiseMax: {
        // First input attaining the max receives the gradient. The forward
        // running max used strict >, so bitwise equality identifies it.
        for (std::size_t i = 0; i < n.value.size(); ++i) {
          const T m = n.value.data()[i];
          for (int in_id : n.inputs) {
            if (nodes_[in_id].value.data()[i] == m) {
              g(in_id).mutable_data()[i] += go.data()[i];
              break;
            }
          }
        }
        break;
      }
      case OpKind::kReshape: {
        T* gx = g(n.inputs[0]).mutable_data();
        for (std::size_t i = 0; i < n.value.size(); ++i) gx[i] += go.data()[i];
        break;
      }
      case OpKind::kSliceFlat: {
        T* gx = g(n.inputs[0]).mutable_data();
        const std::size_t off = static_cast<std::size_t>(n.i0);
        for (std::size_t i = 0; i < n.value.size(); ++i) gx[off + i] += go.data()[i];
        break;
      }
      case OpKind::kMul: {
        const Tensor<T>& a = nodes_[n.inputs[0]].value;
        const Tensor<T>& b = nodes_[n.inputs[1]].value;
        T* ga = g(n.inputs[0]).mutable_data();
        T* gb = g(n.inputs[1]).mutable_data();
        for (std::size_t i = 0; i < a.size(); ++i) {
          ga[i] += go.data()[i] * b.data()[i];
          gb[i] += go.data()[i] * a.data()[i];
        }
        break;
      }
      case OpKind::kMulScalar: {
        T* gx = g(n.inputs[0]).mutable_data();
        const T f = static_cast<T>(n.scalar);
        for (std::size_t i = 0; i < n.value.size(); ++i) gx[i] += go.data()[i] * f;
        break;
      }
      case OpKind::kSumAll: {
        T* gx = g(n.inputs[0]).mutable_data();
        const T gs = go.data()[0];
        for (std::size_t i = 0; i < g(n.inputs[0]).size(); ++i) gx[i] += gs;
        break;
      }
      case OpKind::kGradHook: {
        T* gx = g(n.inputs[0]).mutable_data();
        const T f = static_cast<T>(n.scalar);
        for (std::size_t i = 0; i < n.value.size(); ++i) gx[i] += go.data()[i] * f;
        break;
      }
      case OpKind::kCategoricalFocal: {
        const Tensor<T>& p = nodes_[n.inputs[0]].value;
        const int rows = p.dim(0), k = p.dim(1);
        T* gx = g(n.inputs[0]).mutable_data();
        const T gs = go.data()[0] / static_cast<T>(rows);
        const T gamma = static_cast<T>(n.scalar);
        for (int i = 0; i < rows; ++i) {
          const int y = n.labels[static_cast<std::size_t>(i)];
          const std::size_t idx = static_cast<std::size_t>(i) * k + y;
          const T a = n.alpha.empty() ? T(1) : n.alpha[static_cast<std::size_t>(y)];
          gx[idx] += gs * detail::focal_term_dprob(detail::clip_prob(p.data()[idx]), gamma, a);
        }
        break;
      }
      case OpKind::kBinaryFocalMap: {
        const Tensor<T>& p = nodes_[n.inputs[0]].value;
        T* gx = g(n.inputs[0]).mutable_data();
        const T gs = go.data()[0] / static_cast<T>(p.size());
        const T gamma = static_cast<T>(n.scalar);
        for (std::size_t i = 0; i < p.size(); ++i)
          gx[i] += gs * binary_focal_loss_dprob(p.data()[i], n.target[i] ? 1 : 0, gamma,
                                                n.alpha[0], n.alpha[1]);
        break;
      }
    }
  }

  void backward_conv(Node& n, const Tensor<T>& go, bool depthwise) {
    const Tensor<T>& x = nodes_[n.inputs[0]].value;
    const Tensor<T>& k = nodes_[n.inputs[1]].value;
    Tensor<T>& gx_t = g(n.inputs[0]);
    Tensor<T>& gk_t = g(n.inputs[1]);
    Tensor<T>& gb_t = g(n.inputs[2]);
    T* gx = gx_t.mutable_data();
    T* gk = gk_t.mutable_data();
    T* gb = gb_t.mutable_data();
    const int stride = n.i0, padding = n.i1;
    const int nn = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int f = n.value.dim(1), oh = n.value.dim(2), ow = n.value.dim(3);
    const int kh = k.dim(2), kw = k.dim(3);
    for (int ni = 0; ni < nn; ++ni)
      for (int fi = 0; fi < f; ++fi)
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox) {
            const T gv = go.data()[((static_cast<std::size_t>(ni) * f + fi) * oh + oy) * ow + ox];
            if (gv == T(0)) continue;
            gb[fi] += gv;
            const int c_lo = depthwise ? fi : 0;
            const int c_hi = depthwise ? fi + 1 : c;
            for (int ci = c_lo; ci < c_hi; ++ci)
              for (int ky = 0; ky < kh; ++ky) {
                const int iy = oy * stride - padding + ky;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < kw; ++kx) {
                  const int ix = ox * stride - padding + kx;
                  if (ix < 0 || ix >= w) continue;
                  const std::size_t xi =
                      ((static_cast<std::size_t>(ni) * c + ci) * h + iy) * w + ix;
                  const std::size_t ki =
                      depthwise ? (static_cast<std::size_t>(fi) * kh + ky) * kw + kx
                                : ((static_cast<std::size_t>(fi) * c + ci) * kh + ky) * kw + kx;
                  gx[xi] += gv * k.data()[ki];
                  gk[ki] += gv * x.data()[xi];
                }
              }
          }
  }

  void backward_dense(Node& n, const Tensor<T>& go) {
    const Tensor<T>& x = nodes_[n.inputs[0]].value;
    const Tensor<T>& w = nodes_[n.inputs[1]].value;
    T* gx = g(n.inputs[0]).mutable_data();
    T* gw = g(n.inputs[1]).mutable_data();
    T* gb = g(n.inputs[2]).mutable_data();
    const int nn = x.dim(0), d = x.dim(1), m = w.dim(1);
    for (int ni = 0; ni < nn; ++ni)
      for (int mi = 0; mi < m; ++mi) {
        const T gv = go.data()[static_cast<std::size_t>(ni) * m + mi];
        if (gv == T(0)) continue;
        gb[mi] += gv;
        for (int di = 0; di < d; ++di) {
          gx[static_cast<std::size_t>(ni) * d + di] +=
              gv * w.data()[static_cast<std::size_t>(di) * m + mi];
          gw[static_cast<std::size_t>(di) * m + mi] +=
              gv * x.data()[static_cast<std::size_t>(ni) * d + di];
        }
      }
  }

  void backward_softmax(Node& n, const Tensor<T>& go) {
    const Tensor<T>& y = n.value;
    T* gx = g(n.inputs[0]).mutable_data();
    const int nn = y.dim(0), c = y.dim(1);
    std::size_t spatial = 1;
    for (int i = 2; i < y.rank(); ++i) spatial *= static_cast<std::size_t>(y.dim(i));
    for (int ni = 0; ni < nn; ++ni)
      for (std::size_t s = 0; s < spatial; ++s) {
        const std::size_t base = static_cast<std::size_t>(ni) * c * spatial + s;
        T dot = T(0);
        for (int ci = 0; ci < c; ++ci)
          dot += go.data()[base + ci * spatial] * y.data()[base + ci * spatial];
        for (int ci = 0; ci < c; ++ci) {
          const std::size_t idx = base + ci * spatial;
          gx[idx] += y.data()[idx] * (go.data()[idx] - dot);
        }
      }
  }

  void backward_avgpool(Node& n, const Tensor<T>& go) {
    const Tensor<T>& x = nodes_[n.inputs[0]].value;
    T* gx = g(n.inputs[0]).mutable_data();
    const int nn = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int oh = n.i0, ow = n.i1;
    for (int ni = 0; ni < nn; ++ni)
      for (int ci = 0; ci < c; ++ci)
        for (int oy = 0; oy < oh; ++oy) {
          const int y0 = (oy * h) / oh;
          const int y1 = ((oy + 1) * h + oh - 1) / oh;
          for (int ox = 0; ox < ow; ++ox) {
            const int x0 = (ox * w) / ow;
            const int x1 = ((ox + 1) * w + ow - 1) / ow;
            const T gv =
                go.data()[((static_cast<std::size_t>(ni) * c + ci) * oh + oy) * ow + ox] /
                static_cast<T>((y1 - y0) * (x1 - x0));
            for (int iy = y0; iy < y1; ++iy)
              for (int ix = x0; ix < x1; ++ix)
                gx[((static_cast<std::size_t>(ni) * c + ci) * h + iy) * w + ix] += gv;
          }
        }
  }

  void backward_bilinear(Node& n, const Tensor<T>& go) {
    const Tensor<T>& x = nodes_[n.inputs[0]].value;
    T* gx = g(n.inputs[0]).mutable_data();
    const int nn = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int oh = n.i0, ow = n.i1;
    const double sy = static_cast<double>(h) / oh;
    const double sx = static_cast<double>(w) / ow;
    for (int oy = 0; oy < oh; ++oy) {
      double fy = (oy + 0.5) * sy - 0.5;
      fy = std::max(0.0, fy);
      int y0 = static_cast<int>(fy);
      if (y0 > h - 1) y0 = h - 1;
      const int y1 = std::min(y0 + 1, h - 1);
      const T wy = static_cast<T>(fy - y0);
      for (int ox = 0; ox < ow; ++ox) {
        double fx = (ox + 0.5) * sx - 0.5;
        fx = std::max(0.0, fx);
        int x0 = static_cast<int>(fx);
        if (x0 > w - 1) x0 = w - 1;
        const int x1 = std::min(x0 + 1, w - 1);
        const T wx = static_cast<T>(fx - x0);
        for (int ni = 0; ni < nn; ++ni)
          for (int ci = 0; ci < c; ++ci) {
            const std::size_t plane = (static_cast<std::size_t>(ni) * c + ci) * h;
            const T gv =
                go.data()[((static_cast<std::size_t>(ni) * c + ci) * oh + oy) * ow + ox];
            gx[(plane + y0) * w + x0] += gv * (T(1) - wy) * (T(1) - wx);
            gx[(plane + y0) * w + x1] += gv * (T(1) - wy) * wx;
            gx[(plane + y1) * w + x0] += gv * wy * (T(1) - wx);
            gx[(plane + y1) * w + x1] += gv * wy * wx;
          }
      }
    }
  }

  std::vector<Node> nodes_;
  std::vector<Tensor<T>> grads_;
  std::unordered_map<const Parameter<T>*, int> param_vars_;
};

}  // namespace mvda
