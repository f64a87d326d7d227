#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "drx/errors.hpp"

namespace drx {

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::size_t k = 0;
  std::vector<std::size_t> counts;  // row-major k×k
  std::vector<std::string> names;

  std::size_t at(std::size_t t, std::size_t p) const { return counts[t * k + p]; }
  std::size_t total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }
  std::size_t trace() const {
    std::size_t s = 0;
    for (std::size_t i = 0; i < k; ++i) s += at(i, i);
    return s;
  }
  std::size_t row_sum(std::size_t t) const {
    std::size_t s = 0;
    for (std::size_t j = 0; j < k; ++j) s += at(t, j);
    return s;
  }
  std::size_t col_sum(std::size_t p) const {
    std::size_t s = 0;
    for (std::size_t i = 0; i < k; ++i) s += at(i, p);
    return s;
  }

  // header: true\pred,<names...>
  std::string to_csv() const {
    std::string s = "true\\pred";
    for (std::size_t j = 0; j < k; ++j) s += "," + name(j);
    s += "\n";
    for (std::size_t i = 0; i < k; ++i) {
      s += name(i);
      for (std::size_t j = 0; j < k; ++j) s += "," + std::to_string(at(i, j));
      s += "\n";
    }
    return s;
  }

  std::string name(std::size_t i) const { return i < names.size() ? names[i] : "class" + std::to_string(i); }
};

inline ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> pred, std::size_t k,
                                 std::vector<std::string> names = {}) {
  if (truth.size() != pred.size()) throw ShapeError("confusion: label vectors differ in length");
  if (k == 0) throw ShapeError("confusion: K must be positive");
  ConfusionMatrix cm{k, std::vector<std::size_t>(k * k, 0), std::move(names)};
  for (std::size_t n = 0; n < truth.size(); ++n) {
    if (truth[n] < 0 || pred[n] < 0 || static_cast<std::size_t>(truth[n]) >= k || static_cast<std::size_t>(pred[n]) >= k) {
      throw DataError("confusion: label out of range at sample " + std::to_string(n));
    }
    ++cm.counts[static_cast<std::size_t>(truth[n]) * k + static_cast<std::size_t>(pred[n])];
  }
  return cm;
}

struct ClassMetrics {
  double precision = 0, recall = 0, f1 = 0;
  std::size_t support = 0;
  bool precision_undefined = false, recall_undefined = false, f1_undefined = false;
};

struct MetricTriple {
  double precision = 0, recall = 0, f1 = 0;
};

struct ClassReport {
  std::vector<std::string> names;
  std::vector<ClassMetrics> classes;
  double accuracy = 0;
  std::size_t total = 0;
  MetricTriple macro, weighted;

  bool any_undefined() const {
    for (const auto& c : classes)
      if (c.precision_undefined || c.recall_undefined || c.f1_undefined) return true;
    return false;
  }
};

// Macro/weighted rows from per-class values. Accuracy is the support-weighted
// recall, which equals trace/total when the values come from counts.
inline ClassReport aggregate_report(std::vector<ClassMetrics> classes, std::vector<std::string> names = {}) {
  if (classes.empty()) throw DataError("class_report: no classes");
  ClassReport r;
  r.names = std::move(names);
  r.classes = std::move(classes);
  for (const auto& c : r.classes) r.total += c.support;
  if (r.total == 0) throw DataError("class_report: zero total support");
  const double k = static_cast<double>(r.classes.size()), n = static_cast<double>(r.total);
  for (const auto& c : r.classes) {
    const double w = static_cast<double>(c.support) / n;
    r.macro.precision += c.precision / k;
    r.macro.recall += c.recall / k;
    r.macro.f1 += c.f1 / k;
    r.weighted.precision += c.precision * w;
    r.weighted.recall += c.recall * w;
    r.weighted.f1 += c.f1 * w;
  }
  r.accuracy = r.weighted.recall;
  return r;
}

inline ClassReport class_report(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw DataError("class_report: confusion matrix is empty");
  std::vector<ClassMetrics> cls(cm.k);
  for (std::size_t i = 0; i < cm.k; ++i) {
    auto& c = cls[i];
    const double tp = static_cast<double>(cm.at(i, i));
    const std::size_t pred = cm.col_sum(i), actual = cm.row_sum(i);
    c.support = actual;
    if (pred == 0) c.precision_undefined = true;
    else c.precision = tp / static_cast<double>(pred);
    if (actual == 0) c.recall_undefined = true;
    else c.recall = tp / static_cast<double>(actual);
    if (c.precision + c.recall == 0.0) c.f1_undefined = true;
    else c.f1 = 2 * c.precision * c.recall / (c.precision + c.recall);
  }
  auto r = aggregate_report(std::move(cls), cm.names);
  r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
  return r;
}

struct RocCurve {
  std::vector<double> fpr, tpr;
};

struct RocResult {
  std::vector<double> auc;       // 0 where undefined
  std::vector<bool> defined;
  double macro = 0;              // over defined classes
  std::vector<RocCurve> curves;  // empty curve where undefined
};

namespace detail {

// 1-based average ranks, ties sharing the mean rank.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = r;
    i = j + 1;
  }
  return rank;
}

inline RocCurve roc_curve(const std::vector<double>& s, const std::vector<bool>& pos, std::size_t np, std::size_t nn) {
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  RocCurve c{{0.0}, {0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && s[order[j]] == s[order[i]]) {
      (pos[order[j]] ? tp : fp) += 1;
      ++j;
    }
    c.fpr.push_back(static_cast<double>(fp) / static_cast<double>(nn));
    c.tpr.push_back(static_cast<double>(tp) / static_cast<double>(np));
    i = j;
  }
  return c;
}

}  // namespace detail

// One-vs-rest AUC per class via the Mann-Whitney rank statistic.
inline RocResult roc_auc_ovr(std::span<const int> truth, std::span<const double> scores, std::size_t k,
                             bool with_curves = true) {
  const std::size_t n = truth.size();
  if (scores.size() != n * k) throw ShapeError("roc_auc_ovr: score matrix must be N×K");
  for (double v : scores)
    if (!std::isfinite(v)) throw NumericError("roc_auc_ovr: non-finite score");
  RocResult r;
  r.auc.assign(k, 0.0);
  r.defined.assign(k, false);
  r.curves.resize(k);
  std::size_t defined = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> s(n);
    std::vector<bool> pos(n);
    std::size_t np = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (truth[i] < 0 || static_cast<std::size_t>(truth[i]) >= k) throw DataError("roc_auc_ovr: label out of range");
      s[i] = scores[i * k + c];
      pos[i] = static_cast<std::size_t>(truth[i]) == c;
      np += pos[i];
    }
    const std::size_t nn = n - np;
    if (np == 0 || nn == 0) continue;
    const auto rank = detail::average_ranks(s);
    double rsum = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (pos[i]) rsum += rank[i];
    const double dp = static_cast<double>(np), dn = static_cast<double>(nn);
    r.auc[c] = (rsum - dp * (dp + 1) / 2) / (dp * dn);
    r.defined[c] = true;
    if (with_curves) r.curves[c] = detail::roc_curve(s, pos, np, nn);
    r.macro += r.auc[c];
    ++defined;
  }
  if (defined == 0) throw DataError("roc_auc_ovr: AUC undefined for every class (single-class ground truth)");
  r.macro /= static_cast<double>(defined);
  return r;
}

}  // namespace drx
