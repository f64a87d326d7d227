#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "drx/tensor.hpp"

namespace drx {

struct LossConfig {
  std::vector<double> alpha;  // per class; empty = inverse class frequency
  double gamma = 2.0;
  double epsilon = 0.1;

  void validate() const {
    if (!(gamma >= 0.0)) throw ConfigError("loss.gamma must be >= 0");
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ConfigError("loss.epsilon must lie in [0,1)");
    for (double a : alpha)
      if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("loss.alpha entries must be positive and finite");
  }
};

// ỹ = (1-ε)y + ε/K, row by row over a flat N×K buffer.
template <typename T>
std::vector<T> smooth_labels(std::span<const T> y, double epsilon, std::size_t k) {
  if (k == 0 || y.size() % k != 0) throw ShapeError("smooth_labels: length is not a multiple of K");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw std::invalid_argument("smooth_labels: epsilon outside [0,1)");
  std::vector<T> out(y.size());
  const T keep = static_cast<T>(1.0 - epsilon), spread = static_cast<T>(epsilon / static_cast<double>(k));
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = keep * y[i] + spread;
  return out;
}

template <typename T>
std::vector<T> one_hot(std::span<const int> labels, std::size_t k) {
  std::vector<T> out(labels.size() * k, T(0));
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= k) throw ShapeError("one_hot: label out of range");
    out[n * k + static_cast<std::size_t>(labels[n])] = T(1);
  }
  return out;
}

// Mean-one weights proportional to 1/count. Empty classes are weighted as if
// they held a single sample.
inline std::vector<double> inverse_frequency_alpha(const std::vector<std::size_t>& counts) {
  if (counts.empty()) return {};
  std::vector<double> a(counts.size());
  double total = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    a[k] = 1.0 / static_cast<double>(std::max<std::size_t>(counts[k], 1));
    total += a[k];
  }
  for (auto& v : a) v *= static_cast<double>(counts.size()) / total;
  return a;
}

namespace detail {

template <typename T>
void check_rows(std::span<const T> rows, std::size_t k, const char* what) {
  for (std::size_t n = 0; n < rows.size() / k; ++n) {
    double s = 0;
    for (std::size_t j = 0; j < k; ++j) s += static_cast<double>(rows[n * k + j]);
    if (std::abs(s - 1.0) > 1e-4) {
      throw NumericError(std::string("focal_loss: ") + what + " row " + std::to_string(n) + " sums to " +
                         std::to_string(s));
    }
  }
}

}  // namespace detail

inline constexpr double kLogClamp = 1e-12;

// L = -(1/N) Σ_n Σ_k α_k (1-p_nk)^γ ỹ_nk log(max(p_nk, 1e-12))
template <typename T>
Tensor<T> focal_loss(const Tensor<T>& probs, std::span<const T> targets, std::span<const double> alpha, double gamma) {
  detail::expect_rank(probs.shape(), 2, "focal_loss", "probs");
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  if (targets.size() != n * k) throw ShapeError("focal_loss: targets do not match probs " + shape_str(probs.shape()));
  if (alpha.size() != k) throw ShapeError("focal_loss: need one alpha per class");
  if (n == 0) throw ShapeError("focal_loss: empty batch");
  detail::check_rows(probs.data(), k, "probability");
  detail::check_rows(targets, k, "target");

  const auto p = probs.data();
  double total = 0;
  for (std::size_t i = 0; i < n * k; ++i) {
    const double pi = static_cast<double>(p[i]), y = static_cast<double>(targets[i]);
    if (y == 0.0) continue;
    const double w = gamma == 0.0 ? 1.0 : std::pow(1.0 - pi, gamma);
    total -= alpha[i % k] * w * y * std::log(std::max(pi, kLogClamp));
  }
  const double loss = total / static_cast<double>(n);

  auto pd = probs.node()->data;
  std::vector<T> tg(targets.begin(), targets.end());
  std::vector<double> al(alpha.begin(), alpha.end());
  return Tensor<T>::from_op(
      "focal_loss", {1}, {static_cast<T>(loss)}, {probs}, [=](TensorNode<T>& self) {
        auto& pp = *self.parents[0];
        if (!pp.requires_grad) return;
        auto& g = pp.ensure_grad();
        const double up = static_cast<double>(self.grad[0]) / static_cast<double>(n);
        for (std::size_t i = 0; i < n * k; ++i) {
          const double pi = static_cast<double>((*pd)[i]), y = static_cast<double>(tg[i]);
          if (y == 0.0) continue;
          const double q = 1.0 - pi;
          const bool clamped = pi < kLogClamp;
          const double logp = std::log(std::max(pi, kLogClamp));
          const double dlog = clamped ? 0.0 : 1.0 / pi;
          double d;
          if (gamma == 0.0) {
            d = dlog;
          } else {
            const double w = std::pow(q, gamma);
            const double dw = q > 0.0 ? -gamma * std::pow(q, gamma - 1.0) : 0.0;
            d = dw * logp + w * dlog;
          }
          g[i] += static_cast<T>(-up * al[i % k] * y * d);
        }
      });
}

// Plain cross-entropy -(1/N) Σ y log p, used as the γ=0 reference.
template <typename T>
double cross_entropy(std::span<const T> probs, std::span<const T> targets, std::size_t k) {
  double total = 0;
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (targets[i] != T(0)) total -= static_cast<double>(targets[i]) * std::log(static_cast<double>(probs[i]));
  return total / static_cast<double>(probs.size() / k);
}

}  // namespace drx
