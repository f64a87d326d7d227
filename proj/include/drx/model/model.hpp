#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "drx/imaging/image.hpp"
#include "drx/model/blocks.hpp"
#include "drx/model/config.hpp"

namespace drx {

inline constexpr double kConvBiasInit = 0.01;

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
};

struct ForwardOptions {
  // Parameters enter the graph as constants (inference, Grad-CAM).
  bool constant_params = false;
  // Cut the graph at this layer and expose it as a fresh gradient leaf.
  std::optional<std::string> tap_layer;
};

template <typename T>
struct ForwardResult {
  Tensor<T> logits;  // log-memberships, N×K
  Tensor<T> probs;   // N×K
  Tensor<T> feature; // head input, N×d
  Tensor<T> tapped;  // defined when a tap layer was requested
  std::map<std::string, Tensor<T>> cache;  // layer id -> activation

  // exp of the log-memberships, no graph
  std::vector<T> memberships() const {
    std::vector<T> out(logits.data().begin(), logits.data().end());
    for (auto& v : out) v = std::exp(v);
    return out;
  }
};

// N×3×H×W batch from interleaved unit-range images.
template <typename T>
Tensor<T> images_to_batch(std::span<const ImageF* const> images) {
  if (images.empty()) throw ShapeError("images_to_batch: empty batch");
  const std::size_t h = images[0]->height, w = images[0]->width;
  std::vector<T> v(images.size() * 3 * h * w);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto& img = *images[n];
    if (img.height != h || img.width != w) throw ShapeError("images_to_batch: images differ in size");
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) v[((n * 3 + c) * h + y) * w + x] = static_cast<T>(img.at(y, x, c));
  }
  return Tensor<T>::from({images.size(), 3, h, w}, std::move(v));
}

template <typename T>
Tensor<T> image_to_batch(const ImageF& img) {
  const ImageF* p = &img;
  return images_to_batch<T>(std::span<const ImageF* const>(&p, 1));
}

// Conv backbone with SE stages, channel + spatial refinement, dense head
// projection and Gaussian fuzzy classifier.
//
// Parameter order (also the checkpoint order):
//   conv{i}.weight conv{i}.bias [se{i}.w1 se{i}.w2]   for each stage i = 1..S
//   ca.wm ca.wn sa.kernel head.weight head.bias fuzzy.centroids fuzzy.sigma_raw
template <typename T>
class Model {
 public:
  Model() = default;

  explicit Model(ModelConfig config, std::uint64_t seed = 0) : config_(std::move(config)) {
    config_.validate();
    std::mt19937_64 rng(seed);
    auto normal = [&](Shape s, double stddev) {
      std::normal_distribution<double> d(0.0, stddev);
      std::vector<T> v(shape_numel(s));
      for (auto& x : v) x = static_cast<T>(d(rng));
      add(std::move(s), std::move(v));
    };
    auto zeros = [&](Shape s) { add(std::move(s), std::vector<T>(shape_numel(s), T(0))); };

    std::size_t cin = 3;
    for (const auto& st : config_.stages) {
      normal({st.channels, cin, 3, 3}, std::sqrt(2.0 / static_cast<double>(cin * 9)));
      // slightly positive so all-black patches sit off the relu kink
      add({st.channels}, std::vector<T>(st.channels, static_cast<T>(kConvBiasInit)));
      if (st.se) {
        const std::size_t hidden = st.channels / st.se_ratio;
        normal({st.channels, hidden}, std::sqrt(2.0 / static_cast<double>(st.channels)));
        zeros({hidden, st.channels});
      }
      cin = st.channels;
    }
    zeros({cin, cin});
    zeros({cin, cin});
    zeros({1, 2, 7, 7});
    normal({cin, config_.head_dim}, std::sqrt(1.0 / static_cast<double>(cin)));
    zeros({config_.head_dim});
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    std::vector<T> c(config_.num_classes * config_.head_dim);
    for (auto& x : c) x = static_cast<T>(u(rng));
    add({config_.num_classes, config_.head_dim}, std::move(c));
    add({config_.num_classes}, std::vector<T>(config_.num_classes, static_cast<T>(sigma_raw_for(1.0))));
    name_parameters();
  }

  const ModelConfig& config() const { return config_; }
  std::vector<Parameter<T>>& parameters() { return params_; }
  const std::vector<Parameter<T>>& parameters() const { return params_; }

  std::size_t num_scalars() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
  }

  Tensor<T>& param(const std::string& name) {
    for (auto& p : params_)
      if (p.name == name) return p.value;
    throw std::out_of_range("model: no parameter named " + name);
  }
  const Tensor<T>& param(const std::string& name) const { return const_cast<Model*>(this)->param(name); }

  void zero_grad() {
    for (auto& p : params_) p.value.zero_grad();
  }

  // Layer ids accepted as tap points, shallow to deep.
  std::vector<std::string> layer_ids() const {
    std::vector<std::string> ids;
    for (std::size_t i = 1; i <= config_.stages.size(); ++i) ids.push_back("stage" + std::to_string(i));
    ids.insert(ids.end(), {"backbone", "channel", "refined"});
    return ids;
  }

  ForwardResult<T> forward(const Tensor<T>& input, const ForwardOptions& opt = {}) const {
    if (input.rank() != 4 || input.dim(1) != 3 || input.dim(2) != config_.input_h || input.dim(3) != config_.input_w) {
      throw ShapeError("model: expected input N×3×" + std::to_string(config_.input_h) + "×" +
                       std::to_string(config_.input_w) + ", got " + shape_str(input.shape()));
    }
    if (opt.tap_layer) {
      const auto ids = layer_ids();
      if (std::find(ids.begin(), ids.end(), *opt.tap_layer) == ids.end()) {
        throw ConfigError("model: unknown layer id '" + *opt.tap_layer + "'");
      }
    }
    ForwardResult<T> r;
    std::size_t pi = 0;
    auto next = [&]() -> Tensor<T> {
      const auto& t = params_.at(pi++).value;
      return opt.constant_params ? t.detach() : t;
    };
    auto mark = [&](const std::string& id, Tensor<T> t) {
      if (opt.tap_layer && *opt.tap_layer == id) {
        t = t.tap();
        r.tapped = t;
      }
      r.cache[id] = t;
      return t;
    };

    Tensor<T> f = input;
    for (std::size_t i = 0; i < config_.stages.size(); ++i) {
      const auto& st = config_.stages[i];
      auto w = next();
      auto b = next();
      f = relu(add_channel_bias(conv2d(f, w, st.stride, Padding::same), b));
      if (st.se) {
        auto w1 = next();
        auto w2 = next();
        f = se_block(f, w1, w2);
      }
      f = mark("stage" + std::to_string(i + 1), f);
    }
    f = mark("backbone", f);
    auto wm = next();
    auto wn = next();
    auto mc = channel_attention(f, wm, wn);
    f = mark("channel", scale_channels(f, mc));
    auto ms = spatial_attention(f, next());
    f = mark("refined", scale_spatial(f, ms));
    r.cache["channel_gate"] = mc;
    r.cache["spatial_gate"] = ms;

    auto hw = next();
    auto hb = next();
    r.feature = dense(global_avg_pool(f), hw, hb);
    auto centroids = next();
    auto sigma_raw = next();
    auto head = fuzzy_head(r.feature, centroids, sigma_raw);
    r.logits = head.log_membership;
    r.probs = head.probs;
    return r;
  }

  template <typename U>
  Model<U> cast() const {
    Model<U> m;
    m.config_ = config_;
    for (const auto& p : params_) {
      std::vector<U> v(p.value.numel());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<U>(p.value[i]);
      m.params_.push_back({p.name, Tensor<U>::from(p.value.shape(), std::move(v), true)});
    }
    return m;
  }

  // Rebuilds a model from externally stored tensors; names, order and shapes
  // must match layout(cfg).
  static Model from_parameters(ModelConfig cfg, std::vector<Parameter<T>> params) {
    cfg.validate();
    const auto expect = layout(cfg);
    if (params.size() != expect.size()) {
      throw ShapeError("model: expected " + std::to_string(expect.size()) + " parameters, got " +
                       std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].name != expect[i].first || params[i].value.shape() != expect[i].second) {
        throw ShapeError("model: parameter " + std::to_string(i) + " is " + params[i].name + " " +
                         shape_str(params[i].value.shape()) + ", expected " + expect[i].first + " " +
                         shape_str(expect[i].second));
      }
    }
    Model m;
    m.config_ = std::move(cfg);
    m.params_ = std::move(params);
    return m;
  }

  // Expected names and shapes for this config, in registration order.
  static std::vector<std::pair<std::string, Shape>> layout(const ModelConfig& cfg) {
    std::vector<std::pair<std::string, Shape>> out;
    std::size_t cin = 3;
    for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
      const auto& st = cfg.stages[i];
      const auto k = std::to_string(i + 1);
      out.push_back({"conv" + k + ".weight", {st.channels, cin, 3, 3}});
      out.push_back({"conv" + k + ".bias", {st.channels}});
      if (st.se) {
        out.push_back({"se" + k + ".w1", {st.channels, st.channels / st.se_ratio}});
        out.push_back({"se" + k + ".w2", {st.channels / st.se_ratio, st.channels}});
      }
      cin = st.channels;
    }
    out.push_back({"ca.wm", {cin, cin}});
    out.push_back({"ca.wn", {cin, cin}});
    out.push_back({"sa.kernel", {1, 2, 7, 7}});
    out.push_back({"head.weight", {cin, cfg.head_dim}});
    out.push_back({"head.bias", {cfg.head_dim}});
    out.push_back({"fuzzy.centroids", {cfg.num_classes, cfg.head_dim}});
    out.push_back({"fuzzy.sigma_raw", {cfg.num_classes}});
    return out;
  }

 private:
  template <typename>
  friend class Model;

  void add(Shape s, std::vector<T> v) { params_.push_back({"", Tensor<T>::from(std::move(s), std::move(v), true)}); }

  void name_parameters() {
    const auto names = layout(config_);
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i].name = names.at(i).first;
  }

  ModelConfig config_;
  std::vector<Parameter<T>> params_;
};

}  // namespace drx
