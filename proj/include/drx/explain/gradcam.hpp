#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "drx/dataset/index.hpp"
#include "drx/imaging/image.hpp"
#include "drx/model/model.hpp"

namespace drx {

struct Heatmap {
  std::size_t height = 0, width = 0;
  std::vector<double> values;  // row-major, >= 0
  bool normalized = false;
  int target_class = 0;
  std::string layer;

  double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
  double max() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }

  // h rows of w comma-separated reals
  std::string to_csv() const {
    std::string s;
    char buf[32];
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        std::snprintf(buf, sizeof buf, "%.17g", at(y, x));
        if (x) s += ',';
        s += buf;
      }
      s += '\n';
    }
    return s;
  }
};

// Divides by the max when it is positive; a second call is a no-op.
inline Heatmap normalize(Heatmap h) {
  const double m = h.max();
  if (m > 0.0)
    for (auto& v : h.values) v /= m;
  h.normalized = true;
  return h;
}

// ReLU(sum_k alpha_k A^k) with alpha_k the spatial mean of d(log mu_c)/dA^k,
// unnormalised. Parameters enter as constants so the graph only spans the
// layers above the tap.
template <typename T>
Heatmap grad_cam_raw(const Model<T>& model, const ImageF& image, int target_class, const std::string& layer = "refined") {
  const auto k = model.config().num_classes;
  if (target_class < 0 || static_cast<std::size_t>(target_class) >= k) {
    throw ConfigError("grad_cam: target class " + std::to_string(target_class) + " outside [0," + std::to_string(k) + ")");
  }
  ForwardOptions opt;
  opt.constant_params = true;
  opt.tap_layer = layer;
  auto fwd = model.forward(image_to_batch<T>(image), opt);
  const auto& a = fwd.tapped;
  const std::size_t c = a.dim(1), h = a.dim(2), w = a.dim(3), hw = h * w;
  if (hw == 0 || c == 0) throw ShapeError("grad_cam: layer '" + layer + "' has zero-size maps");
  backward(select(fwd.logits, static_cast<std::size_t>(target_class)));

  const auto act = a.data();
  const auto g = a.grad();
  Heatmap hm{h, w, std::vector<double>(hw, 0.0), false, target_class, layer};
  for (std::size_t ch = 0; ch < c; ++ch) {
    double alpha = 0;
    if (!g.empty())
      for (std::size_t i = 0; i < hw; ++i) alpha += static_cast<double>(g[ch * hw + i]);
    alpha /= static_cast<double>(hw);
    if (alpha == 0.0) continue;
    for (std::size_t i = 0; i < hw; ++i) hm.values[i] += alpha * static_cast<double>(act[ch * hw + i]);
  }
  for (auto& v : hm.values) v = std::max(v, 0.0);
  return hm;
}

template <typename T>
Heatmap grad_cam(const Model<T>& model, const ImageF& image, int target_class, const std::string& layer = "refined") {
  return normalize(grad_cam_raw(model, image, target_class, layer));
}

// Bilinear, half-pixel centres, edge clamp (same convention as resize()).
inline Heatmap upsample(const Heatmap& hm, std::size_t out_h, std::size_t out_w) {
  if (hm.values.empty()) throw ShapeError("upsample: empty heatmap");
  Heatmap out{out_h, out_w, std::vector<double>(out_h * out_w), hm.normalized, hm.target_class, hm.layer};
  auto src = [](std::size_t i, std::size_t n_out, std::size_t n_in) {
    const double s = (static_cast<double>(i) + 0.5) * static_cast<double>(n_in) / static_cast<double>(n_out) - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(n_in - 1));
  };
  for (std::size_t y = 0; y < out_h; ++y) {
    const double sy = src(y, out_h, hm.height);
    const auto y0 = static_cast<std::size_t>(sy);
    const auto y1 = std::min(y0 + 1, hm.height - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double sx = src(x, out_w, hm.width);
      const auto x0 = static_cast<std::size_t>(sx);
      const auto x1 = std::min(x0 + 1, hm.width - 1);
      const double fx = sx - static_cast<double>(x0);
      const double top = hm.at(y0, x0) + (hm.at(y0, x1) - hm.at(y0, x0)) * fx;
      const double bot = hm.at(y1, x0) + (hm.at(y1, x1) - hm.at(y1, x0)) * fx;
      out.values[y * out_w + x] = top + (bot - top) * fy;
    }
  }
  return out;
}

// 256-entry red to yellow ramp, RGB in [0,255].
inline const std::array<std::array<std::uint8_t, 3>, 256>& heat_colormap() {
  static const auto table = [] {
    std::array<std::array<std::uint8_t, 3>, 256> t{};
    for (std::size_t i = 0; i < 256; ++i) t[i] = {255, static_cast<std::uint8_t>(i), 0};
    return t;
  }();
  return table;
}

// out = (1 - alpha*h) * img + alpha*h * colormap(h), with the heatmap
// upsampled to the image size.
inline ImageF overlay(const Heatmap& hm, const ImageF& img, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("overlay: alpha must lie in [0,1]");
  const auto up = (hm.height == img.height && hm.width == img.width) ? hm : upsample(hm, img.height, img.width);
  const auto& cmap = heat_colormap();
  ImageF out = img;
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const double h = std::clamp(up.at(y, x), 0.0, 1.0);
      const double a = alpha * h;
      if (a == 0.0) continue;
      const auto& col = cmap[static_cast<std::size_t>(std::lround(h * 255.0))];
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = (1.0 - a) * img.at(y, x, c) + a * (col[c] / 255.0);
        out.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  return out;
}

// Share of heatmap mass (after upsampling to h×w) inside the union of boxes,
// each grown by `dilation` pixels per side.
inline double mass_inside(const Heatmap& hm, const std::vector<Box>& boxes, std::size_t h, std::size_t w,
                          double dilation) {
  const auto up = (hm.height == h && hm.width == w) ? hm : upsample(hm, h, w);
  double in = 0, total = 0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double v = up.at(y, x);
      total += v;
      const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
      for (const auto& b : boxes) {
        if (px >= b.x0 - dilation && px <= b.x1 + dilation && py >= b.y0 - dilation && py <= b.y1 + dilation) {
          in += v;
          break;
        }
      }
    }
  return total > 0 ? in / total : 0.0;
}

}  // namespace drx
