#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "drx/model/model.hpp"

namespace drx {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("optim.lr must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw ConfigError("optim betas must lie in [0,1)");
    }
    if (!(eps > 0.0)) throw ConfigError("optim.eps must be > 0");
    if (!(weight_decay >= 0.0)) throw ConfigError("optim.weight_decay must be >= 0");
  }
};

// AdamW with decoupled weight decay. Moments are kept in double.
template <typename T>
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  double lr() const { return cfg_.lr; }
  void set_lr(double lr) { cfg_.lr = lr; }
  std::size_t steps() const { return t_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

  // Parameters whose gradient was never touched count as zero-gradient.
  void step(std::vector<Parameter<T>>& params) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.value.numel(), 0.0);
        v_.emplace_back(p.value.numel(), 0.0);
      }
    }
    if (m_.size() != params.size()) throw ShapeError("adamw: parameter list changed between steps");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (m_[i].size() != params[i].value.numel()) throw ShapeError("adamw: shape of " + params[i].name + " changed");
      for (const T g : params[i].value.grad())
        if (!std::isfinite(static_cast<double>(g))) throw NumericError("adamw: non-finite gradient in " + params[i].name);
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto w = params[i].value.mutable_data();
      const auto g = params[i].value.grad();
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        const double gj = g.empty() ? 0.0 : static_cast<double>(g[j]);
        double wj = static_cast<double>(w[j]);
        wj -= cfg_.lr * cfg_.weight_decay * wj;
        m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
        v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
        wj -= cfg_.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.eps);
        w[j] = static_cast<T>(wj);
      }
    }
  }

 private:
  AdamWConfig cfg_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct SchedulerConfig {
  std::string mode = "plateau";  // plateau | constant
  double factor = 0.5;
  std::size_t patience = 5;
  double min_lr = 1e-6;
  double threshold = 1e-4;  // absolute improvement needed

  void validate() const {
    if (mode != "plateau" && mode != "constant") throw ConfigError("scheduler.mode must be plateau or constant");
    if (!(factor > 0.0 && factor < 1.0)) throw ConfigError("scheduler.factor must lie in (0,1)");
    if (!(min_lr >= 0.0)) throw ConfigError("scheduler.min_lr must be >= 0");
    if (!(threshold >= 0.0)) throw ConfigError("scheduler.threshold must be >= 0");
  }
};

// Reduce-on-plateau on the validation loss: after `patience` epochs without
// an improvement larger than `threshold`, lr <- max(lr * factor, min_lr).
class PlateauScheduler {
 public:
  PlateauScheduler(SchedulerConfig cfg, double lr) : cfg_(std::move(cfg)), lr_(std::max(lr, cfg_.min_lr)) {
    cfg_.validate();
  }

  double lr() const { return lr_; }
  double best() const { return best_; }
  std::size_t wait() const { return wait_; }

  double step(double val_loss) {
    if (!std::isfinite(val_loss)) throw NumericError("scheduler: validation loss is not finite");
    if (cfg_.mode == "constant") return lr_;
    if (val_loss < best_ - cfg_.threshold) {
      best_ = val_loss;
      wait_ = 0;
      return lr_;
    }
    if (++wait_ >= cfg_.patience) {
      lr_ = std::max(lr_ * cfg_.factor, cfg_.min_lr);
      wait_ = 0;
    }
    return lr_;
  }

 private:
  SchedulerConfig cfg_;
  double lr_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t wait_ = 0;
};

}  // namespace drx
