#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "drx/evaluation/metrics.hpp"
#include "drx/model/model.hpp"
#include "drx/tensor.hpp"
#include "drx/training/loss.hpp"

namespace drx {

struct OracleLine {
  std::string name;
  double error = 0;
  double tolerance = 0;
  bool pass = false;
};

inline bool all_pass(const std::vector<OracleLine>& lines) {
  for (const auto& l : lines)
    if (!l.pass) return false;
  return !lines.empty();
}

namespace detail {

inline Tensor<double> rand_t(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor<double>::from(std::move(shape), std::move(v), true);
}

// sum(y * w) with fixed positive weights so no output is ignored
inline Tensor<double> readout(const Tensor<double>& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::vector<double> w(y.numel());
  for (auto& v : w) v = u(rng);
  return sum(mul(y, Tensor<double>::from(y.shape(), std::move(w))));
}

}  // namespace detail

// Relative errors are taken against max(|a|, |n|, 1e-3 * max|g|): central
// differences at eps=1e-5 carry ~1e-10 absolute rounding noise, which would
// otherwise dominate coordinates whose true gradient is ~1e-9.
inline constexpr double kOracleScaleFloor = 1e-3;

// Central differences in double against backward() for every differentiable
// op, the attention blocks, the focal loss and a small composed model.
inline std::vector<OracleLine> gradient_oracle_suite(std::uint64_t seed = 1) {
  using detail::rand_t;
  using detail::readout;
  std::mt19937_64 rng(seed);
  std::vector<OracleLine> out;
  auto run = [&](const std::string& name, const std::function<Tensor<double>()>& f, std::vector<Tensor<double>> in,
                 double tol = 1e-6) {
    GradCheckOptions opt;
    opt.scale_floor = kOracleScaleFloor;
    const auto r = finite_diff_check<double>(f, std::move(in), opt);
    out.push_back({name, r.max_rel_error, tol, r.max_rel_error < tol});
  };

  {
    auto x = rand_t({1, 2, 5, 5}, rng), k = rand_t({3, 2, 3, 3}, rng);
    run("conv2d same s1", [&] { return readout(conv2d(x, k, 1, Padding::same), seed); }, {x, k});
    run("conv2d same s2", [&] { return readout(conv2d(x, k, 2, Padding::same), seed); }, {x, k});
    run("conv2d valid s1", [&] { return readout(conv2d(x, k, 1, Padding::valid), seed); }, {x, k});
  }
  {
    auto f = rand_t({2, 3, 4, 4}, rng), b = rand_t({3}, rng), s = rand_t({2, 3}, rng), m = rand_t({2, 1, 4, 4}, rng);
    run("add_channel_bias", [&] { return readout(add_channel_bias(f, b), seed); }, {f, b});
    run("global_avg_pool", [&] { return readout(global_avg_pool(f), seed); }, {f});
    run("global_max_pool", [&] { return readout(global_max_pool(f), seed); }, {f});
    run("channel_pool", [&] { return readout(channel_pool(f), seed); }, {f});
    run("scale_channels", [&] { return readout(scale_channels(f, s), seed); }, {f, s});
    run("scale_spatial", [&] { return readout(scale_spatial(f, m), seed); }, {f, m});
  }
  {
    auto x = rand_t({3, 4}, rng), w = rand_t({4, 5}, rng), b = rand_t({5}, rng), y = rand_t({3, 4}, rng);
    run("matmul", [&] { return readout(matmul(x, w), seed); }, {x, w});
    run("dense", [&] { return readout(dense(x, w, b), seed); }, {x, w, b});
    run("relu", [&] { return readout(relu(x), seed); }, {x});
    run("sigmoid", [&] { return readout(sigmoid(x), seed); }, {x});
    run("softplus", [&] { return readout(softplus(x), seed); }, {x});
    run("exp", [&] { return readout(exp(x), seed); }, {x});
    run("softmax", [&] { return readout(softmax(x), seed); }, {x});
    run("add/mul", [&] { return readout(add(mul(x, y), x), seed); }, {x, y});
    run("scale/add_scalar", [&] { return readout(add_scalar(scale(x, 3.0), 0.25), seed); }, {x});
    run("mean/select", [&] { return add(mean(x), select(x, 5)); }, {x});
  }
  {
    auto x = rand_t({4, 3}, rng), c = rand_t({5, 3}, rng), sg = rand_t({5}, rng, 0.5, 2.0);
    auto raw = rand_t({5}, rng);
    run("gaussian_log_membership", [&] { return readout(gaussian_log_membership(x, c, sg), seed); }, {x, c, sg});
    run("fuzzy_head", [&] { return readout(fuzzy_head(x, c, raw).probs, seed); }, {x, c, raw});
  }
  {
    auto f = rand_t({2, 8, 4, 4}, rng), w1 = rand_t({8, 2}, rng), w2 = rand_t({2, 8}, rng);
    auto wm = rand_t({8, 8}, rng), wn = rand_t({8, 8}, rng), ker = rand_t({1, 2, 7, 7}, rng, -0.3, 0.3);
    run("se_block", [&] { return readout(se_block(f, w1, w2), seed); }, {f, w1, w2});
    run("channel_attention", [&] { return readout(channel_attention(f, wm, wn), seed); }, {f, wm, wn});
    run("spatial_attention", [&] { return readout(spatial_attention(f, ker), seed); }, {f, ker});
  }
  {
    auto logits = rand_t({4, 3}, rng, -2, 2);
    const std::vector<int> labels{0, 2, 1, 2};
    const auto t = smooth_labels<double>(one_hot<double>(labels, 3), 0.1, 3);
    const std::vector<double> alpha{0.7, 1.1, 1.2};
    run("focal_loss", [&] { return focal_loss(softmax(logits), std::span<const double>(t), alpha, 2.0); }, {logits});
  }
  {
    ModelConfig cfg;
    cfg.input_h = cfg.input_w = 8;
    cfg.stages = {{6, 2, true, 2}, {8, 2, true, 2}};
    cfg.head_dim = 4;
    cfg.num_classes = 3;
    Model<double> m(cfg, seed);
    std::uniform_real_distribution<double> jit(-0.5, 0.5);
    std::mt19937_64 jr(seed + 100);
    for (auto& p : m.parameters())
      for (auto& v : p.value.mutable_data()) v += jit(jr);
    auto x = rand_t({2, 3, 8, 8}, rng, 0, 1);
    std::vector<Tensor<double>> params;
    for (auto& p : m.parameters()) params.push_back(p.value);
    run("full model", [&] { return readout(m.forward(x).logits, seed); }, params, 1e-4);
  }
  return out;
}

// Confusion/report against per-sample counting and AUC against the O(N^2)
// pair count, on randomized instances with N <= 200 and K <= 5.
inline std::vector<OracleLine> metric_oracle_suite(std::uint64_t seed = 1, std::size_t instances = 100) {
  std::mt19937_64 rng(seed);
  double worst_count = 0, worst_auc = 0;
  std::size_t aucs = 0;
  for (std::size_t rep = 0; rep < instances; ++rep) {
    const std::size_t k = 2 + rng() % 4, n = 20 + rng() % 181;
    std::uniform_int_distribution<int> lab(0, static_cast<int>(k) - 1);
    std::uniform_int_distribution<int> q(0, 30);
    std::vector<int> t(n), p(n);
    std::vector<double> s(n * k);
    for (std::size_t i = 0; i < n; ++i) t[i] = lab(rng), p[i] = lab(rng);
    for (auto& v : s) v = q(rng) / 30.0;
    const auto cm = confusion(t, p, k);
    const auto rep_ = class_report(cm);
    for (std::size_t c = 0; c < k; ++c) {
      double tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const bool tc = static_cast<std::size_t>(t[i]) == c, pc = static_cast<std::size_t>(p[i]) == c;
        tp += tc && pc;
        fp += !tc && pc;
        fn += tc && !pc;
      }
      for (std::size_t j = 0; j < k; ++j) {
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < n; ++i) cnt += static_cast<std::size_t>(t[i]) == c && static_cast<std::size_t>(p[i]) == j;
        if (cnt != cm.at(c, j)) worst_count = std::max(worst_count, 1.0);
      }
      const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0, rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
      const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
      worst_count = std::max({worst_count, std::abs(prec - rep_.classes[c].precision),
                              std::abs(rec - rep_.classes[c].recall), std::abs(f1 - rep_.classes[c].f1)});
    }
    RocResult roc;
    try {
      roc = roc_auc_ovr(t, s, k, false);
    } catch (const DataError&) {
      continue;
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (!roc.defined[c]) continue;
      double wins = 0, pairs = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (static_cast<std::size_t>(t[i]) != c) continue;
        for (std::size_t j = 0; j < n; ++j) {
          if (static_cast<std::size_t>(t[j]) == c) continue;
          const double a = s[i * k + c], b = s[j * k + c];
          wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
          pairs += 1;
        }
      }
      worst_auc = std::max(worst_auc, std::abs(wins / pairs - roc.auc[c]));
      ++aucs;
    }
  }
  return {{"confusion/precision/recall/F1 vs counting", worst_count, 0.0, worst_count == 0.0},
          {"one-vs-rest AUC vs pairwise (" + std::to_string(aucs) + " curves)", worst_auc, 1e-9, worst_auc < 1e-9}};
}

}  // namespace drx
