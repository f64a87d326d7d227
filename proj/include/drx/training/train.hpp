#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "drx/dataset/index.hpp"
#include "drx/imaging/augment.hpp"
#include "drx/imaging/pipeline.hpp"
#include "drx/model/model.hpp"
#include "drx/training/history.hpp"
#include "drx/training/loss.hpp"
#include "drx/training/optim.hpp"

namespace drx {

// Preprocessed, in-memory view of a split dataset.
struct PreparedData {
  std::vector<ImageF> images;
  std::vector<int> labels;
  std::vector<std::string> ids;
  std::vector<std::vector<Box>> lesions;
  std::vector<std::size_t> train, val, test;
  std::size_t num_classes = 0;
  std::vector<std::string> class_names;

  const std::vector<std::size_t>& split(Split s) const {
    switch (s) {
      case Split::train: return train;
      case Split::val: return val;
      case Split::test: return test;
    }
    return train;
  }

  std::vector<std::size_t> class_counts(Split s) const {
    std::vector<std::size_t> c(num_classes, 0);
    for (auto i : split(s)) ++c[static_cast<std::size_t>(labels[i])];
    return c;
  }
};

// Runs the preprocessing pipeline once per distinct image; replicas reuse
// their source.
inline PreparedData prepare_data(const DatasetIndex& index, const PreprocessConfig& pre) {
  PreparedData d;
  d.num_classes = index.num_classes();
  d.class_names = index.merge.names;
  d.images.resize(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto& s = index.samples[i];
    if (s.replica_of && *s.replica_of < i) {
      d.images[i] = d.images[*s.replica_of];
    } else {
      d.images[i] = to_unit(preprocess(index.image(i), pre));
    }
    d.images[i].source_id = s.id;
    d.labels.push_back(s.label);
    d.ids.push_back(s.id);
    d.lesions.push_back(s.lesions);
    if (!s.split) throw DataError("prepare_data: sample " + s.id + " has no split assignment");
    switch (*s.split) {
      case Split::train: d.train.push_back(i); break;
      case Split::val: d.val.push_back(i); break;
      case Split::test: d.test.push_back(i); break;
    }
  }
  return d;
}

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  AdamWConfig optim;
  SchedulerConfig scheduler;
  LossConfig loss;
  AugmentConfig augment;

  void validate() const {
    if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
    optim.validate();
    scheduler.validate();
    loss.validate();
    augment.validate();
  }
};

struct SplitScore {
  double loss = 0;
  double accuracy = 0;
  std::vector<float> probs;  // N×K, row order of the index list
};

namespace detail {

inline constexpr std::uint64_t kShuffleSalt = 0x5u;
inline constexpr std::uint64_t kAugmentSalt = 0xa;
inline constexpr std::uint64_t kMixupSalt = 0x1b;

template <typename T>
std::size_t argmax_row(std::span<const T> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

inline std::vector<double> resolve_alpha(const LossConfig& cfg, const PreparedData& d) {
  if (cfg.alpha.empty()) return inverse_frequency_alpha(d.class_counts(Split::train));
  if (cfg.alpha.size() != d.num_classes) {
    throw ConfigError("loss.alpha has " + std::to_string(cfg.alpha.size()) + " entries for " +
                      std::to_string(d.num_classes) + " classes");
  }
  return cfg.alpha;
}

}  // namespace detail

// Probabilities for a list of images, batched, no gradient.
inline std::vector<float> predict(const Model<float>& model, const std::vector<const ImageF*>& images,
                                  std::size_t batch = 32) {
  std::vector<float> out;
  for (std::size_t b = 0; b < images.size(); b += batch) {
    const std::size_t e = std::min(images.size(), b + batch);
    auto x = images_to_batch<float>(std::span<const ImageF* const>(images.data() + b, e - b));
    auto r = model.forward(x, {.constant_params = true});
    out.insert(out.end(), r.probs.data().begin(), r.probs.data().end());
  }
  return out;
}

// Focal loss on smoothed one-hot targets plus accuracy, no augmentation.
inline SplitScore score_split(const Model<float>& model, const PreparedData& d, const std::vector<std::size_t>& idx,
                              const std::vector<double>& alpha, const LossConfig& loss, std::size_t batch = 32) {
  SplitScore s;
  if (idx.empty()) throw DataError("score_split: split is empty");
  const std::size_t k = d.num_classes;
  std::vector<const ImageF*> imgs;
  for (auto i : idx) imgs.push_back(&d.images[i]);
  s.probs = predict(model, imgs, batch);
  std::vector<int> labels;
  for (auto i : idx) labels.push_back(d.labels[i]);
  const auto targets = smooth_labels<float>(one_hot<float>(labels, k), loss.epsilon, k);
  s.loss = static_cast<double>(
      focal_loss(Tensor<float>::from({idx.size(), k}, s.probs), std::span<const float>(targets), alpha, loss.gamma).item());
  std::size_t hit = 0;
  for (std::size_t n = 0; n < idx.size(); ++n)
    if (detail::argmax_row(std::span<const float>(s.probs).subspan(n * k, k)) == static_cast<std::size_t>(labels[n])) ++hit;
  s.accuracy = static_cast<double>(hit) / static_cast<double>(idx.size());
  return s;
}

struct TrainResult {
  Model<float> final_model;
  Model<float> best_model;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<double> alpha;
  TrainHistory history;
};

// One augmented, optionally mixed batch: inputs and (unsmoothed) targets.
struct Batch {
  Tensor<float> x;
  std::vector<float> y;
};

inline Batch make_batch(const PreparedData& d, std::span<const std::size_t> members, std::size_t epoch,
                        std::size_t batch_no, const TrainConfig& cfg) {
  const std::size_t k = d.num_classes;
  std::vector<ImageF> imgs;
  imgs.reserve(members.size());
  for (auto i : members) {
    auto rng = rng_stream(cfg.seed, i, epoch, detail::kAugmentSalt);
    imgs.push_back(augment(d.images[i], cfg.augment, rng));
  }
  std::vector<const ImageF*> ptrs;
  for (const auto& im : imgs) ptrs.push_back(&im);
  Batch b;
  b.x = images_to_batch<float>(ptrs);
  std::vector<int> labels;
  for (auto i : members) labels.push_back(d.labels[i]);
  b.y = one_hot<float>(labels, k);
  if (cfg.augment.mixup_enabled && members.size() > 1) {
    auto rng = rng_stream(cfg.seed, epoch, batch_no, detail::kMixupSalt);
    const double lambda = sample_beta(cfg.augment.mixup_alpha, rng);
    std::vector<std::size_t> perm(members.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::size_t px = b.x.numel() / members.size();
    std::vector<float> x(b.x.data().begin(), b.x.data().end()), y = b.y;
    const auto xs = b.x.data();
    for (std::size_t n = 0; n < members.size(); ++n) {
      const std::size_t j = perm[n];
      auto m = mixup<float>(xs.subspan(n * px, px), std::span<const float>(b.y).subspan(n * k, k), xs.subspan(j * px, px),
                            std::span<const float>(b.y).subspan(j * k, k), lambda);
      std::copy(m.x.begin(), m.x.end(), x.begin() + static_cast<long>(n * px));
      std::copy(m.y.begin(), m.y.end(), y.begin() + static_cast<long>(n * k));
    }
    b.x = Tensor<float>::from(b.x.shape(), std::move(x));
    b.y = std::move(y);
  }
  return b;
}

// Full-epoch loop without early stopping. The model passed in is consumed.
inline TrainResult train(Model<float> model, const PreparedData& d, const TrainConfig& cfg,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  if (model.config().num_classes != d.num_classes) {
    throw ConfigError("train: model has " + std::to_string(model.config().num_classes) + " classes, data has " +
                      std::to_string(d.num_classes));
  }
  TrainResult res;
  res.alpha = detail::resolve_alpha(cfg.loss, d);
  if (cfg.epochs == 0) {
    res.best_model = model.cast<float>();
    res.final_model = std::move(model);
    return res;
  }
  if (d.train.empty()) throw DataError("train: the train split is empty");
  if (d.val.empty()) throw DataError("train: the validation split is empty");

  const std::size_t k = d.num_classes;
  AdamW<float> opt(cfg.optim);
  PlateauScheduler sched(cfg.scheduler, cfg.optim.lr);
  std::vector<std::size_t> order = d.train;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = sched.lr();
    opt.set_lr(lr);
    auto srng = rng_stream(cfg.seed, epoch, 0, detail::kShuffleSalt);
    order = d.train;
    std::shuffle(order.begin(), order.end(), srng);

    double loss_sum = 0;
    std::size_t hits = 0, seen = 0;
    for (std::size_t b0 = 0, bn = 0; b0 < order.size(); b0 += cfg.batch_size, ++bn) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
      const std::span<const std::size_t> members(order.data() + b0, b1 - b0);
      try {
        Batch batch = make_batch(d, members, epoch, bn, cfg);
        const auto targets = smooth_labels<float>(batch.y, cfg.loss.epsilon, k);
        auto out = model.forward(batch.x);
        auto loss = focal_loss(out.probs, std::span<const float>(targets), res.alpha, cfg.loss.gamma);
        backward(loss);
        opt.step(model.parameters());
        model.zero_grad();
        loss_sum += static_cast<double>(loss.item()) * static_cast<double>(members.size());
        const auto p = out.probs.data();
        for (std::size_t n = 0; n < members.size(); ++n) {
          if (detail::argmax_row(p.subspan(n * k, k)) ==
              detail::argmax_row(std::span<const float>(batch.y).subspan(n * k, k)))
            ++hits;
        }
        seen += members.size();
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(bn + 1) + ": " + e.what());
      }
    }

    const SplitScore val = score_split(model, d, d.val, res.alpha, cfg.loss, std::max<std::size_t>(cfg.batch_size, 32));
    EpochRecord rec{epoch, loss_sum / static_cast<double>(seen), val.loss,
                    static_cast<double>(hits) / static_cast<double>(seen), val.accuracy, lr};
    if (val.loss < res.best_val_loss) {
      res.best_val_loss = val.loss;
      res.best_epoch = epoch;
      res.best_model = model.cast<float>();
    }
    sched.step(val.loss);
    res.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  res.final_model = std::move(model);
  return res;
}

inline constexpr double kVerifyGradFloor = 1e-6;
inline constexpr double kVerifyKinkTolerance = 1e-5;

struct GradVerifyResult {
  GradCheckResult check;
  std::string worst_param;
};

// Re-runs one training batch in 64-bit and compares the loss gradient with
// central differences on a sampled set of coordinates per parameter. At the
// loss level, rounding noise in the differences is around 1e-10, so the
// relative error uses a 1e-6 denominator floor. A full-size network has
// relu/max-pool kinks within eps of many coordinates (a conv bias moves
// every pixel of its channel); those are detected by the kink probe and
// reported separately rather than compared.
inline GradVerifyResult verify_gradients(const Model<float>& model, const PreparedData& d,
                                         std::span<const std::size_t> members, const TrainConfig& cfg,
                                         std::size_t coords_per_param = 4) {
  auto m = model.cast<double>();
  const std::size_t k = d.num_classes;
  const auto alpha = detail::resolve_alpha(cfg.loss, d);
  Batch b = make_batch(d, members, 1, 0, cfg);
  std::vector<double> xd(b.x.data().begin(), b.x.data().end());
  auto x = Tensor<double>::from(b.x.shape(), std::move(xd));
  std::vector<double> yd(b.y.begin(), b.y.end());
  const auto targets = smooth_labels<double>(yd, cfg.loss.epsilon, k);
  std::vector<Tensor<double>> params;
  for (auto& p : m.parameters()) params.push_back(p.value);
  GradCheckOptions opt;
  opt.max_coords_per_input = coords_per_param;
  opt.seed = cfg.seed;
  opt.floor = kVerifyGradFloor;
  opt.kink_tolerance = kVerifyKinkTolerance;
  GradVerifyResult r;
  r.check = finite_diff_check<double>(
      [&] { return focal_loss(m.forward(x).probs, std::span<const double>(targets), alpha, cfg.loss.gamma); }, params,
      opt);
  r.worst_param = m.parameters()[r.check.worst_input].name;
  return r;
}

}  // namespace drx
