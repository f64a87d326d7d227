#pragma once

#include "drx/tensor.hpp"

namespace drx {

inline constexpr double kSigmaMin = 1e-3;

// s = sigmoid(W2 relu(W1 z)), z = GAP(F). W1 is C×C/r, W2 is C/r×C.
template <typename T>
Tensor<T> se_gate(const Tensor<T>& f, const Tensor<T>& w1, const Tensor<T>& w2) {
  return sigmoid(matmul(relu(matmul(global_avg_pool(f), w1)), w2));
}

template <typename T>
Tensor<T> se_block(const Tensor<T>& f, const Tensor<T>& w1, const Tensor<T>& w2) {
  return scale_channels(f, se_gate(f, w1, w2));
}

// M_c = sigmoid(GAP(F) Wm + GMP(F) Wn), N×C
template <typename T>
Tensor<T> channel_attention(const Tensor<T>& f, const Tensor<T>& wm, const Tensor<T>& wn) {
  return sigmoid(add(matmul(global_avg_pool(f), wm), matmul(global_max_pool(f), wn)));
}

// M_s = sigmoid(conv7x7([mean_c F; max_c F])), N×1×h×w
template <typename T>
Tensor<T> spatial_attention(const Tensor<T>& f, const Tensor<T>& kernel) {
  if (kernel.shape() != Shape{1, 2, kernel.dim(2), kernel.dim(3)}) {
    throw ShapeError("spatial_attention: kernel must be 1x2xkxk, got " + shape_str(kernel.shape()));
  }
  return sigmoid(conv2d(channel_pool(f), kernel, 1, Padding::same));
}

template <typename T>
struct Refined {
  Tensor<T> channel_gate;  // M_c
  Tensor<T> after_channel; // M_c ⊙ F
  Tensor<T> spatial_gate;  // M_s, computed from M_c ⊙ F
  Tensor<T> out;           // F'
};

template <typename T>
Refined<T> refine(const Tensor<T>& f, const Tensor<T>& wm, const Tensor<T>& wn, const Tensor<T>& kernel) {
  Refined<T> r;
  r.channel_gate = channel_attention(f, wm, wn);
  r.after_channel = scale_channels(f, r.channel_gate);
  r.spatial_gate = spatial_attention(r.after_channel, kernel);
  r.out = scale_spatial(r.after_channel, r.spatial_gate);
  return r;
}

template <typename T>
struct FuzzyOutput {
  Tensor<T> sigma;           // K
  Tensor<T> log_membership;  // N×K, -||x-c_k||^2 / (2 sigma_k^2)
  Tensor<T> probs;           // softmax of the above
};

// sigma = sigma_min + softplus(raw)
template <typename T>
Tensor<T> fuzzy_sigma(const Tensor<T>& sigma_raw) {
  return add_scalar(softplus(sigma_raw), static_cast<T>(kSigmaMin));
}

template <typename T>
FuzzyOutput<T> fuzzy_head(const Tensor<T>& x, const Tensor<T>& centroids, const Tensor<T>& sigma_raw) {
  FuzzyOutput<T> out;
  out.sigma = fuzzy_sigma(sigma_raw);
  out.log_membership = gaussian_log_membership(x, centroids, out.sigma);
  out.probs = softmax(out.log_membership);
  return out;
}

// raw value for which fuzzy_sigma gives `sigma`
inline double sigma_raw_for(double sigma) {
  const double s = sigma - kSigmaMin;
  if (!(s > 0)) throw std::invalid_argument("sigma_raw_for: sigma must exceed the minimum width");
  return s > 30 ? s : std::log(std::expm1(s));
}

}  // namespace drx
