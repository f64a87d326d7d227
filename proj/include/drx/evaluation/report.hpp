#pragma once

#include <cmath>
#include <cstdio>
#include <string>

#include "drx/evaluation/metrics.hpp"

namespace drx {

// Two-decimal half-up rounding; the 1e-9 nudge keeps binary neighbours of
// x.xx5 from rounding down.
inline double round2(double x) { return std::floor(x * 100.0 + 0.5 + 1e-9) / 100.0; }

inline std::string fixed2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", round2(x));
  return buf;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

inline std::string full(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string pad_right(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

inline std::string pad_left(std::string s, std::size_t w) {
  if (s.size() < w) s.insert(0, w - s.size(), ' ');
  return s;
}

}  // namespace detail

// Fixed-width table: per-class rows, Accuracy, Macro Avg, Weighted Avg.
// Undefined metrics print as 0.00 followed by '*'.
inline std::string render_text(const ClassReport& r) {
  std::size_t lw = 12;
  auto label = [&](std::size_t i) { return i < r.names.size() ? r.names[i] : "class" + std::to_string(i); };
  for (std::size_t i = 0; i < r.classes.size(); ++i) lw = std::max(lw, label(i).size());
  lw += 2;
  auto cell = [](double v, bool undefined) { return detail::pad_left(fixed2(v) + (undefined ? "*" : " "), 11); };
  auto blank = [] { return std::string(11, ' '); };
  std::string s = detail::pad_right("Label", lw) + detail::pad_left("Precision ", 11) + detail::pad_left("Recall ", 11) +
                  detail::pad_left("F1-Score ", 11) + detail::pad_left("Support", 9) + "\n";
  for (std::size_t i = 0; i < r.classes.size(); ++i) {
    const auto& c = r.classes[i];
    s += detail::pad_right(label(i), lw) + cell(c.precision, c.precision_undefined) + cell(c.recall, c.recall_undefined) +
         cell(c.f1, c.f1_undefined) + detail::pad_left(std::to_string(c.support), 9) + "\n";
  }
  s += detail::pad_right("Accuracy", lw) + blank() + blank() + cell(r.accuracy, false) +
       detail::pad_left(std::to_string(r.total), 9) + "\n";
  s += detail::pad_right("Macro Avg", lw) + cell(r.macro.precision, false) + cell(r.macro.recall, false) +
       cell(r.macro.f1, false) + detail::pad_left(std::to_string(r.total), 9) + "\n";
  s += detail::pad_right("Weighted Avg", lw) + cell(r.weighted.precision, false) + cell(r.weighted.recall, false) +
       cell(r.weighted.f1, false) + detail::pad_left(std::to_string(r.total), 9) + "\n";
  if (r.any_undefined()) s += "* undefined (zero denominator), reported as 0.00\n";
  return s;
}

// label,precision,recall,f1,support at full precision. The accuracy row
// leaves precision and recall empty.
inline std::string render_csv(const ClassReport& r) {
  std::string s = "label,precision,recall,f1,support\n";
  for (std::size_t i = 0; i < r.classes.size(); ++i) {
    const auto& c = r.classes[i];
    s += detail::csv_field(i < r.names.size() ? r.names[i] : "class" + std::to_string(i)) + "," +
         detail::full(c.precision) + "," + detail::full(c.recall) + "," + detail::full(c.f1) + "," +
         std::to_string(c.support) + "\n";
  }
  s += "accuracy,,," + detail::full(r.accuracy) + "," + std::to_string(r.total) + "\n";
  s += "macro avg," + detail::full(r.macro.precision) + "," + detail::full(r.macro.recall) + "," +
       detail::full(r.macro.f1) + "," + std::to_string(r.total) + "\n";
  s += "weighted avg," + detail::full(r.weighted.precision) + "," + detail::full(r.weighted.recall) + "," +
       detail::full(r.weighted.f1) + "," + std::to_string(r.total) + "\n";
  return s;
}

inline std::string render_roc(const RocResult& roc, const std::vector<std::string>& names) {
  std::string s = "ROC-AUC (one-vs-rest)\n";
  for (std::size_t c = 0; c < roc.auc.size(); ++c) {
    s += "  " + detail::pad_right(c < names.size() ? names[c] : "class" + std::to_string(c), 28) +
         (roc.defined[c] ? fixed2(roc.auc[c]) : std::string("undefined")) + "\n";
  }
  s += "  " + detail::pad_right("Macro", 28) + fixed2(roc.macro) + "\n";
  return s;
}

}  // namespace drx
