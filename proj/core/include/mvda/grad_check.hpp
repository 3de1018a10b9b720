#pragma once

#include <cmath>
#include <cstring>
#include <functional>
#include <stdexcept>

#include "mvda/tape.hpp"

namespace mvda {

// Outcome of a reverse-mode vs central-finite-difference comparison.
template <typename T>
struct GradCheckReport {
  bool pass = false;
  T max_rel_error = T(0);
  std::size_t worst_index = 0;
  T analytic_at_worst = T(0);
  T numeric_at_worst = T(0);
  std::size_t elements_checked = 0;
};

namespace detail {

template <typename T>
T rel_error(T a, T b) {
  const T denom = std::max({std::abs(a), std::abs(b), static_cast<T>(1e-12)});
  return std::abs(a - b) / denom;
}

template <typename T>
void update_report(GradCheckReport<T>& r, std::size_t index, T analytic, T numeric) {
  const T e = rel_error(analytic, numeric);
  if (e > r.max_rel_error) {
    r.max_rel_error = e;
    r.worst_index = index;
    r.analytic_at_worst = analytic;
    r.numeric_at_worst = numeric;
  }
  ++r.elements_checked;
}

}  // namespace detail

// Builds the scalar graph for a given input variable. The same builder is
// reused for the reverse-mode pass and every finite-difference evaluation.
template <typename T>
using ScalarGraphFn = std::function<Var<T>(Tape<T>&, Var<T>)>;

// Compares the reverse-mode gradient of fn at `point` against central finite
// differences, elementwise. Meant to run in 64-bit mode; a 32-bit
// instantiation exists but cannot resolve the default tolerances.
template <typename T>
GradCheckReport<T> grad_check(const ScalarGraphFn<T>& fn, const Tensor<T>& point, T step,
                              T tolerance) {
  if (step <= T(0)) throw std::invalid_argument("grad_check: step must be positive");
  auto eval = [&fn](const Tensor<T>& x) -> T {
    Tape<T> tape;
    Var<T> out = fn(tape, tape.input(x));
    const Tensor<T>& v = tape.value(out);
    if (v.size() != 1)
      throw std::invalid_argument("grad_check: function output must be scalar, got " +
                                  shape_str(v.shape()));
    return v.data()[0];
  };

  // Two evaluations must agree bitwise; otherwise the function is not
  // deterministic and finite differences are meaningless.
  const T v1 = eval(point);
  const T v2 = eval(point);
  if (std::memcmp(&v1, &v2, sizeof(T)) != 0)
    throw std::invalid_argument("grad_check: function is not deterministic");

  Tape<T> tape;
  Var<T> in = tape.input(point);
  Var<T> out = fn(tape, in);
  if (tape.value(out).size() != 1)
    throw std::invalid_argument("grad_check: function output must be scalar");
  tape.backward(out);
  const Tensor<T> analytic = tape.grad(in);

  GradCheckReport<T> report;
  Tensor<T> probe = point;
  T* p = probe.mutable_data();
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const T saved = p[i];
    p[i] = saved + step;
    const T fp = eval(probe);
    p[i] = saved - step;
    const T fm = eval(probe);
    p[i] = saved;
    const T numeric = (fp - fm) / (T(2) * step);
    detail::update_report(report, i, analytic.data()[i], numeric);
  }
  report.pass = report.max_rel_error < tolerance;
  return report;
}

// Same comparison, but over every element of every parameter bound by the
// graph builder. Used for whole-model checks where the differentiation
// variables are the weights rather than the input image.
template <typename T>
GradCheckReport<T> grad_check_params(ParameterStore<T>& params,
                                     const std::function<Var<T>(Tape<T>&)>& forward_loss,
                                     T step, T tolerance) {
  if (step <= T(0)) throw std::invalid_argument("grad_check_params: step must be positive");
  auto eval = [&forward_loss]() -> T {
    Tape<T> tape;
    Var<T> out = forward_loss(tape);
    const Tensor<T>& v = tape.value(out);
    if (v.size() != 1)
      throw std::invalid_argument("grad_check_params: loss must be scalar, got " +
                                  shape_str(v.shape()));
    return v.data()[0];
  };

  const T v1 = eval();
  const T v2 = eval();
  if (std::memcmp(&v1, &v2, sizeof(T)) != 0)
    throw std::invalid_argument("grad_check_params: function is not deterministic");

  params.zero_grad();
  {
    Tape<T> tape;
    Var<T> out = forward_loss(tape);
    tape.backward(out);
  }

  GradCheckReport<T> report;
  std::size_t flat_index = 0;
  for (const auto& p : params.items()) {
    T* values = p->value.mutable_data();
    for (std::size_t i = 0; i < p->size(); ++i, ++flat_index) {
      const T saved = values[i];
      values[i] = saved + step;
      const T fp = eval();
      values[i] = saved - step;
      const T fm = eval();
      values[i] = saved;
      const T numeric = (fp - fm) / (T(2) * step);
      detail::update_report(report, flat_index, p->grad.data()[i], numeric);
    }
  }
  report.pass = report.max_rel_error < tolerance;
  return report;
}

}  // namespace mvda
