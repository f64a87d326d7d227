#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "drx/tensor/tensor.hpp"

namespace drx {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
  // coordinates dropped by the kink probe (not counted in `coordinates`)
  std::size_t nonsmooth = 0;
};

struct GradCheckOptions {
  double eps = 1e-5;
  // 0 checks every element; otherwise a seeded random subset per input.
  std::size_t max_coords_per_input = 0;
  std::uint64_t seed = 0;
  // denominator floor of the relative error; gradients below it are
  // effectively compared in absolute terms
  double floor = 1e-8;
  // when > 0, the floor is raised to scale_floor * max|analytic| over all
  // inputs, so coordinates far below the gradient scale are judged at that
  // scale rather than against finite-difference rounding noise
  double scale_floor = 0.0;
  // when > 0, each coordinate is also differenced at eps/10; if the two
  // estimates differ by more than this relative amount, a kink (relu, max)
  // lies within eps and the coordinate is reported as non-smooth instead
  double kink_tolerance = 0.0;
};

inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Central-difference check of every leaf in `inputs` against the analytic
// gradient produced by backward(f()). `f` must rebuild its graph from the
// current contents of the inputs on each call.
template <typename T>
GradCheckResult finite_diff_check(const std::function<Tensor<T>()>& f, std::vector<Tensor<T>> inputs,
                                  const GradCheckOptions& opt = {}) {
  if (!(opt.eps > 0)) throw std::invalid_argument("finite_diff_check: eps must be positive");
  for (auto& in : inputs) in.zero_grad();
  Tensor<T> root = f();
  if (root.numel() != 1) throw GraphError("finite_diff_check: function output is not a scalar");
  std::vector<std::vector<T>> analytic(inputs.size());
  if (root.requires_grad()) {
    backward(root);
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].has_grad()) {
      analytic[i].assign(inputs[i].grad().begin(), inputs[i].grad().end());
    } else {
      analytic[i].assign(inputs[i].numel(), T(0));
    }
  }

  double floor = opt.floor;
  if (opt.scale_floor > 0) {
    double peak = 0;
    for (const auto& a : analytic)
      for (const T v : a) peak = std::max(peak, std::abs(static_cast<double>(v)));
    floor = std::max(floor, opt.scale_floor * peak);
  }

  std::mt19937_64 rng(opt.seed);
  GradCheckResult res;
  const T eps = static_cast<T>(opt.eps);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto x = inputs[i].mutable_data();
    std::vector<std::size_t> coords(x.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (opt.max_coords_per_input && coords.size() > opt.max_coords_per_input) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opt.max_coords_per_input);
      std::sort(coords.begin(), coords.end());
    }
    for (const std::size_t j : coords) {
      const T orig = x[j];
      x[j] = orig + eps;
      const double fp = static_cast<double>(f().item());
      x[j] = orig - eps;
      const double fm = static_cast<double>(f().item());
      x[j] = orig;
      const double num = (fp - fm) / (2.0 * static_cast<double>(eps));
      if (opt.kink_tolerance > 0) {
        const T small = eps / T(10);
        x[j] = orig + small;
        const double sp = static_cast<double>(f().item());
        x[j] = orig - small;
        const double sm = static_cast<double>(f().item());
        x[j] = orig;
        const double num_small = (sp - sm) / (2.0 * static_cast<double>(small));
        if (relative_error(num, num_small, floor) > opt.kink_tolerance) {
          ++res.nonsmooth;
          continue;
        }
      }
      const double err = relative_error(static_cast<double>(analytic[i][j]), num, floor);
      ++res.coordinates;
      if (res.coordinates == 1 || err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst_input = i;
        res.worst_index = j;
        res.analytic = static_cast<double>(analytic[i][j]);
        res.numeric = num;
      }
    }
  }
  for (auto& in : inputs) in.zero_grad();
  return res;
}

}  // namespace drx
