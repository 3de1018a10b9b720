#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvda {

// Probabilities are clipped to [kProbClip, 1 - kProbClip] before the log so
// the loss stays finite for saturated predictions.
inline constexpr double kProbClip = 1e-7;

namespace detail {

template <typename T>
T clip_prob(T p) {
  const T lo = static_cast<T>(kProbClip);
  const T hi = static_cast<T>(1.0 - kProbClip);
  return p < lo ? lo : (p > hi ? hi : p);
}

// -alpha * (1-p)^gamma * log(p) evaluated at an already clipped p.
template <typename T>
T focal_term(T p, T gamma, T alpha) {
  return -alpha * static_cast<T>(std::pow(static_cast<double>(T(1) - p),
                                          static_cast<double>(gamma))) *
         std::log(p);
}

// d/dp of focal_term at an interior p; zero outside the clip range.
template <typename T>
T focal_term_dprob(T p, T gamma, T alpha) {
  if (p <= static_cast<T>(kProbClip) || p >= static_cast<T>(1.0 - kProbClip)) return T(0);
  const T one_minus = T(1) - p;
  const T pow_g = static_cast<T>(std::pow(static_cast<double>(one_minus),
                                          static_cast<double>(gamma)));
  T d = -alpha * pow_g / p;
  if (gamma != T(0)) {
    const T pow_g1 = static_cast<T>(std::pow(static_cast<double>(one_minus),
                                             static_cast<double>(gamma) - 1.0));
    d += alpha * gamma * pow_g1 * std::log(p);
  }
  return d;
}

template <typename T>
void check_class_probs(std::span<const T> probabilities, int true_class) {
  if (probabilities.empty()) throw std::invalid_argument("loss: empty probability vector");
  if (true_class < 0 || true_class >= static_cast<int>(probabilities.size()))
    throw std::invalid_argument("loss: class index " + std::to_string(true_class) +
                                " outside 0.." + std::to_string(probabilities.size() - 1));
  T sum = T(0);
  for (T p : probabilities) sum += p;
  if (std::abs(static_cast<double>(sum) - 1.0) > 1e-5)
    throw std::invalid_argument("loss: probabilities sum to " +
                                std::to_string(static_cast<double>(sum)) + ", expected 1");
}

}  // namespace detail

// Focal loss -alpha[y] * (1 - p_y)^gamma * log(p_y). With gamma = 0 and unit
// alpha this reduces exactly to cross entropy.
template <typename T>
T focal_loss(std::span<const T> probabilities, int true_class, T gamma,
             std::span<const T> alpha) {
  detail::check_class_probs(probabilities, true_class);
  if (gamma < T(0)) throw std::invalid_argument("focal_loss: gamma must be >= 0");
  if (!alpha.empty() && alpha.size() != probabilities.size())
    throw std::invalid_argument("focal_loss: alpha size " + std::to_string(alpha.size()) +
                                " does not match class count " +
                                std::to_string(probabilities.size()));
  const T a = alpha.empty() ? T(1) : alpha[static_cast<std::size_t>(true_class)];
  const T p = detail::clip_prob(probabilities[static_cast<std::size_t>(true_class)]);
  return detail::focal_term(p, gamma, a);
}

template <typename T>
T focal_loss(const std::vector<T>& probabilities, int true_class, T gamma,
             const std::vector<T>& alpha = {}) {
  return focal_loss(std::span<const T>(probabilities), true_class, gamma,
                    std::span<const T>(alpha));
}

// -log(p_y) with the same clipping.
template <typename T>
T cross_entropy_loss(std::span<const T> probabilities, int true_class) {
  detail::check_class_probs(probabilities, true_class);
  return -std::log(detail::clip_prob(probabilities[static_cast<std::size_t>(true_class)]));
}

template <typename T>
T cross_entropy_loss(const std::vector<T>& probabilities, int true_class) {
  return cross_entropy_loss(std::span<const T>(probabilities), true_class);
}

// Two-class focal loss on a single foreground probability. target selects the
// true class: 1 = foreground (probability p), 0 = background (1 - p).
template <typename T>
T binary_focal_loss(T p, int target, T gamma, T alpha_bg, T alpha_fg) {
  const T pt = detail::clip_prob(target == 1 ? p : T(1) - p);
  return detail::focal_term(pt, gamma, target == 1 ? alpha_fg : alpha_bg);
}

// d/dp of binary_focal_loss.
template <typename T>
T binary_focal_loss_dprob(T p, int target, T gamma, T alpha_bg, T alpha_fg) {
  if (target == 1) return detail::focal_term_dprob(detail::clip_prob(p), gamma, alpha_fg);
  return -detail::focal_term_dprob(detail::clip_prob(T(1) - p), gamma, alpha_bg);
}

}  // namespace mvda
