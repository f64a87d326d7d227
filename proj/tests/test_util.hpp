#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "drx/tensor.hpp"

namespace drx::testing {

inline Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                                    bool requires_grad = true) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor<double>::from(std::move(shape), std::move(v), requires_grad);
}

// Scalar readout sum(y ⊙ w) with fixed random weights, so that no gradient
// coordinate is structurally zero.
inline Tensor<double> weighted_readout(const Tensor<double>& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  auto w = random_tensor(y.shape(), rng, 0.5, 1.5, false);
  return sum(mul(y, w));
}

}  // namespace drx::testing
