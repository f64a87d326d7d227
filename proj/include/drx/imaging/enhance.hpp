#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "drx/errors.hpp"
#include "drx/imaging/image.hpp"

namespace drx {

// Bounding box of pixels whose brightest channel exceeds `black_threshold`,
// grown to a square around the box centre. Area outside the frame is black.
inline ImageU8 circular_crop(const ImageU8& img, int black_threshold = 10) {
  if (black_threshold < 0 || black_threshold > 255) throw std::invalid_argument("circular_crop: threshold outside [0,255]");
  long y0 = -1, y1 = -1, x0 = -1, x1 = -1;
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const int m = std::max({img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)});
      if (m <= black_threshold) continue;
      const long ly = static_cast<long>(y), lx = static_cast<long>(x);
      if (y0 < 0) {
        y0 = y1 = ly;
        x0 = x1 = lx;
      }
      y0 = std::min(y0, ly);
      y1 = std::max(y1, ly);
      x0 = std::min(x0, lx);
      x1 = std::max(x1, lx);
    }
  if (y0 < 0) return img;

  const long bh = y1 - y0 + 1, bw = x1 - x0 + 1;
  const long side = std::max(bh, bw);
  // floor division for possibly negative offsets
  auto floor_half = [](long v) { return v >= 0 ? v / 2 : -((-v + 1) / 2); };
  const long top = y0 + floor_half(bh - side);
  const long left = x0 + floor_half(bw - side);

  ImageU8 out(static_cast<std::size_t>(side), static_cast<std::size_t>(side), 0);
  out.source_id = img.source_id;
  for (long y = 0; y < side; ++y) {
    const long sy = top + y;
    if (sy < 0 || sy >= static_cast<long>(img.height)) continue;
    for (long x = 0; x < side; ++x) {
      const long sx = left + x;
      if (sx < 0 || sx >= static_cast<long>(img.width)) continue;
      for (std::size_t c = 0; c < 3; ++c)
        out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) =
            img.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx), c);
    }
  }
  return out;
}

namespace detail {

template <typename P>
P store_pixel(double v) {
  if constexpr (std::is_same_v<P, std::uint8_t>) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  } else {
    return static_cast<P>(v);
  }
}

}  // namespace detail

// Bilinear resampling with half-pixel centres and edge clamping.
template <typename P>
BasicImage<P> resize(const BasicImage<P>& img, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw std::invalid_argument("resize: output size must be positive");
  if (img.empty()) throw std::invalid_argument("resize: empty input");
  BasicImage<P> out(out_h, out_w);
  out.source_id = img.source_id;
  const double sy = static_cast<double>(img.height) / static_cast<double>(out_h);
  const double sx = static_cast<double>(img.width) / static_cast<double>(out_w);
  struct Tap {
    std::size_t i0, i1;
    double w;
  };
  auto taps = [](std::size_t n_out, std::size_t n_in, double scale) {
    std::vector<Tap> t(n_out);
    for (std::size_t i = 0; i < n_out; ++i) {
      double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(n_in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(src));
      const auto i1 = std::min(i0 + 1, n_in - 1);
      t[i] = {i0, i1, src - static_cast<double>(i0)};
    }
    return t;
  };
  const auto ty = taps(out_h, img.height, sy);
  const auto tx = taps(out_w, img.width, sx);
  for (std::size_t y = 0; y < out_h; ++y)
    for (std::size_t x = 0; x < out_w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const double a = img.at(ty[y].i0, tx[x].i0, c), b = img.at(ty[y].i0, tx[x].i1, c);
        const double d = img.at(ty[y].i1, tx[x].i0, c), e = img.at(ty[y].i1, tx[x].i1, c);
        const double top = a + (b - a) * tx[x].w;
        const double bot = d + (e - d) * tx[x].w;
        out.at(y, x, c) = detail::store_pixel<P>(top + (bot - top) * ty[y].w);
      }
  return out;
}

struct ClaheParams {
  std::size_t tiles_x = 8;
  std::size_t tiles_y = 8;
  // multiple of the uniform bin height; +inf disables clipping
  double clip_limit = 2.0;
};

// CLAHE on a single 8-bit plane (row-major h×w).
inline std::vector<std::uint8_t> clahe_plane(const std::vector<std::uint8_t>& plane, std::size_t h, std::size_t w,
                                             const ClaheParams& p = {}) {
  if (p.tiles_x < 1 || p.tiles_y < 1) throw std::invalid_argument("clahe: tile counts must be >= 1");
  if (p.tiles_x > w || p.tiles_y > h) {
    throw std::invalid_argument("clahe: " + std::to_string(p.tiles_x) + "x" + std::to_string(p.tiles_y) +
                                " tiles exceed image size " + std::to_string(w) + "x" + std::to_string(h));
  }
  if (!(p.clip_limit >= 1.0)) throw std::invalid_argument("clahe: clip limit must be >= 1");
  if (plane.size() != h * w) throw std::invalid_argument("clahe: plane size mismatch");

  const std::size_t tx = p.tiles_x, ty = p.tiles_y;
  auto bound = [](std::size_t i, std::size_t n, std::size_t tiles) { return i * n / tiles; };

  std::vector<std::array<std::uint8_t, 256>> luts(tx * ty);
  for (std::size_t j = 0; j < ty; ++j)
    for (std::size_t i = 0; i < tx; ++i) {
      const std::size_t ya = bound(j, h, ty), yb = bound(j + 1, h, ty);
      const std::size_t xa = bound(i, w, tx), xb = bound(i + 1, w, tx);
      const std::size_t area = (yb - ya) * (xb - xa);
      std::array<std::size_t, 256> hist{};
      for (std::size_t y = ya; y < yb; ++y)
        for (std::size_t x = xa; x < xb; ++x) ++hist[plane[y * w + x]];

      if (std::isfinite(p.clip_limit)) {
        const auto limit = std::max<std::size_t>(
            1, static_cast<std::size_t>(p.clip_limit * static_cast<double>(area) / 256.0));
        std::size_t excess = 0;
        for (auto& b : hist)
          if (b > limit) {
            excess += b - limit;
            b = limit;
          }
        const std::size_t each = excess / 256, rest = excess % 256;
        for (auto& b : hist) b += each;
        for (std::size_t r = 0; r < rest; ++r) ++hist[r * 256 / rest];
      }

      auto& lut = luts[j * tx + i];
      std::size_t cdf = 0;
      for (std::size_t v = 0; v < 256; ++v) {
        cdf += hist[v];
        const double level = 255.0 * static_cast<double>(cdf) / static_cast<double>(area);
        lut[v] = static_cast<std::uint8_t>(std::min(255L, std::lround(level)));
      }
    }

  // Neighbouring tile centres and blend weight for each column/row.
  struct Tap {
    std::size_t a, b;
    double w;
  };
  auto taps = [&](std::size_t n, std::size_t tiles) {
    std::vector<double> centers(tiles);
    for (std::size_t t = 0; t < tiles; ++t)
      centers[t] = (static_cast<double>(bound(t, n, tiles)) + static_cast<double>(bound(t + 1, n, tiles)) - 1.0) / 2.0;
    std::vector<Tap> out(n);
    for (std::size_t v = 0; v < n; ++v) {
      const double pos = static_cast<double>(v);
      if (pos <= centers.front()) {
        out[v] = {0, 0, 0.0};
      } else if (pos >= centers.back()) {
        out[v] = {tiles - 1, tiles - 1, 0.0};
      } else {
        std::size_t t = 0;
        while (t + 1 < tiles && centers[t + 1] <= pos) ++t;
        out[v] = {t, t + 1, (pos - centers[t]) / (centers[t + 1] - centers[t])};
      }
    }
    return out;
  };
  const auto cx = taps(w, tx);
  const auto cy = taps(h, ty);

  std::vector<std::uint8_t> out(plane.size());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const std::uint8_t v = plane[y * w + x];
      const auto& ry = cy[y];
      const auto& rx = cx[x];
      const double l00 = luts[ry.a * tx + rx.a][v], l01 = luts[ry.a * tx + rx.b][v];
      const double l10 = luts[ry.b * tx + rx.a][v], l11 = luts[ry.b * tx + rx.b][v];
      const double top = l00 + (l01 - l00) * rx.w;
      const double bot = l10 + (l11 - l10) * rx.w;
      out[y * w + x] = static_cast<std::uint8_t>(std::clamp(std::lround(top + (bot - top) * ry.w), 0L, 255L));
    }
  return out;
}

// CLAHE on Rec. 601 luminance; RGB is rescaled by the luminance ratio.
inline ImageU8 clahe(const ImageU8& img, const ClaheParams& p = {}) {
  const std::size_t n = img.height * img.width;
  std::vector<double> y(n);
  std::vector<std::uint8_t> plane(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = luminance(img.pixels[3 * i], img.pixels[3 * i + 1], img.pixels[3 * i + 2]);
    plane[i] = static_cast<std::uint8_t>(std::clamp(std::lround(y[i]), 0L, 255L));
  }
  const auto eq = clahe_plane(plane, img.height, img.width, p);
  ImageU8 out(img.height, img.width);
  out.source_id = img.source_id;
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] <= 0.0) {
      for (std::size_t c = 0; c < 3; ++c) out.pixels[3 * i + c] = eq[i];
      continue;
    }
    const double ratio = static_cast<double>(eq[i]) / y[i];
    for (std::size_t c = 0; c < 3; ++c)
      out.pixels[3 * i + c] = detail::store_pixel<std::uint8_t>(std::min(255.0, img.pixels[3 * i + c] * ratio));
  }
  return out;
}

struct GammaMode {
  enum class Kind { fixed, adaptive } kind = Kind::adaptive;
  double value = 1.0;  // used when fixed

  static GammaMode fixed(double g) { return {Kind::fixed, g}; }
  static GammaMode adaptive() { return {Kind::adaptive, 1.0}; }
};

// Exponent that moves the mean luminance of `img` toward 0.5, clamped to [0.5, 2].
inline double adaptive_gamma(const ImageF& img) {
  const double m = mean_luminance(img);
  if (!(m > 0.0) || !(m < 1.0)) return 1.0;
  return std::clamp(std::log(0.5) / std::log(m), 0.5, 2.0);
}

inline ImageF gamma_correct(const ImageF& img, GammaMode mode, double* used = nullptr) {
  double g = mode.value;
  if (mode.kind == GammaMode::Kind::fixed) {
    if (!(g >= 0.25 && g <= 4.0)) throw std::invalid_argument("gamma_correct: fixed gamma outside [0.25, 4]");
  } else {
    g = adaptive_gamma(img);
  }
  if (used) *used = g;
  ImageF out = img;
  if (g == 1.0) return out;
  for (auto& v : out.pixels) v = v > 0.0f ? static_cast<float>(std::pow(static_cast<double>(v), g)) : 0.0f;
  return out;
}

}  // namespace drx
