#pragma once

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

namespace drx {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;
  double val_loss = 0;
  double train_acc = 0;
  double val_acc = 0;
  double lr = 0;  // rate used during the epoch
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  std::string to_csv() const {
    std::string s = "epoch,train_loss,val_loss,train_acc,val_acc,lr\n";
    char buf[256];
    for (const auto& e : epochs) {
      std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g\n", e.epoch, e.train_loss, e.val_loss, e.train_acc,
                    e.val_acc, e.lr);
      s += buf;
    }
    return s;
  }
};

namespace detail {

inline std::string polyline(const std::vector<double>& ys, double lo, double hi, double x0, double y0, double w,
                            double h) {
  std::string pts;
  char buf[64];
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double x = x0 + (ys.size() > 1 ? w * static_cast<double>(i) / static_cast<double>(ys.size() - 1) : w / 2);
    const double y = y0 + h - (hi > lo ? (ys[i] - lo) / (hi - lo) : 0.5) * h;
    std::snprintf(buf, sizeof buf, "%s%.1f,%.1f", i ? " " : "", x, y);
    pts += buf;
  }
  return pts;
}

}  // namespace detail

// Two panels (accuracy, loss), train solid and validation dashed.
inline std::string history_svg(const TrainHistory& h) {
  const double pw = 360, ph = 220, pad = 40;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(int(2 * pw + 3 * pad)) +
                    "\" height=\"" + std::to_string(int(ph + 2 * pad)) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  auto panel = [&](double x0, const char* title, std::vector<double> tr, std::vector<double> va, bool unit) {
    double lo = 0, hi = 1;
    if (!unit) {
      lo = 0;
      hi = 0;
      for (double v : tr) hi = std::max(hi, v);
      for (double v : va) hi = std::max(hi, v);
      if (hi <= 0) hi = 1;
    }
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.0f\" y=\"%.0f\" width=\"%.0f\" height=\"%.0f\" fill=\"none\" stroke=\"#888\"/>\n"
                  "<text x=\"%.0f\" y=\"%.0f\">%s</text>\n"
                  "<text x=\"%.0f\" y=\"%.0f\" text-anchor=\"end\">%.3g</text>\n"
                  "<text x=\"%.0f\" y=\"%.0f\" text-anchor=\"end\">%.3g</text>\n",
                  x0, pad, pw, ph, x0, pad - 8, title, x0 - 4, pad + 10, hi, x0 - 4, pad + ph, lo);
    svg += buf;
    svg += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"" +
           detail::polyline(tr, lo, hi, x0, pad, pw, ph) + "\"/>\n";
    svg += "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" stroke-dasharray=\"5,3\" points=\"" +
           detail::polyline(va, lo, hi, x0, pad, pw, ph) + "\"/>\n";
  };
  std::vector<double> ta, va, tl, vl;
  for (const auto& e : h.epochs) {
    ta.push_back(e.train_acc);
    va.push_back(e.val_acc);
    tl.push_back(e.train_loss);
    vl.push_back(e.val_loss);
  }
  panel(pad, "accuracy (train solid, val dashed)", ta, va, true);
  panel(2 * pad + pw, "loss (train solid, val dashed)", tl, vl, false);
  svg += "</svg>\n";
  return svg;
}

}  // namespace drx
