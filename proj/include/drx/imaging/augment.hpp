#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "drx/errors.hpp"
#include "drx/imaging/image.hpp"

namespace drx {

// Independent generator for one (seed, a, b, salt) key; used for per-sample,
// per-epoch streams so results do not depend on iteration order.
inline std::mt19937_64 rng_stream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                                  std::uint64_t salt = 0) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(a), hi(a), lo(b), hi(b), lo(salt), hi(salt)};
  return std::mt19937_64(seq);
}

struct AugmentConfig {
  bool flip_enabled = true;
  double flip_h_prob = 0.5;
  double flip_v_prob = 0.5;
  bool rotate_enabled = true;
  double rotation_deg = 15.0;  // uniform in [-deg, deg]
  bool zoom_enabled = true;
  double zoom_min = 0.9;
  double zoom_max = 1.1;
  bool brightness_enabled = true;
  double brightness_min = -0.1;
  double brightness_max = 0.1;
  bool mixup_enabled = true;
  double mixup_alpha = 0.2;

  static AugmentConfig disabled() {
    AugmentConfig c;
    c.flip_enabled = c.rotate_enabled = c.zoom_enabled = c.brightness_enabled = c.mixup_enabled = false;
    return c;
  }

  void validate() const {
    auto prob = [](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string("augment.") + name + " must lie in [0,1]");
    };
    prob(flip_h_prob, "flip_h");
    prob(flip_v_prob, "flip_v");
    if (!(rotation_deg >= 0.0)) throw ConfigError("augment.rotation must be >= 0");
    if (!(zoom_min > 0.0 && zoom_max >= zoom_min)) throw ConfigError("augment.zoom interval must be positive and ordered");
    if (!(brightness_max >= brightness_min)) throw ConfigError("augment.brightness interval must be ordered");
    if (!(mixup_alpha > 0.0)) throw ConfigError("augment.mixup_alpha must be > 0");
  }
};

template <typename P>
BasicImage<P> flip_horizontal(const BasicImage<P>& img) {
  BasicImage<P> out = img;
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

template <typename P>
BasicImage<P> flip_vertical(const BasicImage<P>& img) {
  BasicImage<P> out = img;
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = img.at(img.height - 1 - y, x, c);
  return out;
}

namespace detail {

// Inverse-mapped bilinear warp; samples falling outside the frame are black.
template <typename Map>
ImageF warp(const ImageF& img, Map&& src_of) {
  ImageF out(img.height, img.width, 0.0f);
  out.source_id = img.source_id;
  const double maxx = static_cast<double>(img.width - 1), maxy = static_cast<double>(img.height - 1);
  constexpr double tol = 1e-9;
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      auto [sx, sy] = src_of(static_cast<double>(x), static_cast<double>(y));
      if (sx < -tol || sy < -tol || sx > maxx + tol || sy > maxy + tol) continue;
      sx = std::clamp(sx, 0.0, maxx);
      sy = std::clamp(sy, 0.0, maxy);
      const auto x0 = static_cast<std::size_t>(std::floor(sx)), y0 = static_cast<std::size_t>(std::floor(sy));
      const auto x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
      const double wx = sx - static_cast<double>(x0), wy = sy - static_cast<double>(y0);
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = img.at(y0, x0, c) + (img.at(y0, x1, c) - img.at(y0, x0, c)) * wx;
        const double bot = img.at(y1, x0, c) + (img.at(y1, x1, c) - img.at(y1, x0, c)) * wx;
        out.at(y, x, c) = static_cast<float>(top + (bot - top) * wy);
      }
    }
  return out;
}

}  // namespace detail

inline ImageF rotate(const ImageF& img, double degrees) {
  if (degrees == 0.0) return img;
  const double t = degrees * std::numbers::pi / 180.0;
  const double ct = std::cos(t), st = std::sin(t);
  const double cx = (static_cast<double>(img.width) - 1.0) / 2.0, cy = (static_cast<double>(img.height) - 1.0) / 2.0;
  return detail::warp(img, [&](double x, double y) {
    const double dx = x - cx, dy = y - cy;
    return std::pair{ct * dx + st * dy + cx, -st * dx + ct * dy + cy};
  });
}

// Scale about the centre; factor > 1 zooms in, < 1 exposes black borders.
inline ImageF zoom(const ImageF& img, double factor) {
  if (factor == 1.0) return img;
  const double cx = (static_cast<double>(img.width) - 1.0) / 2.0, cy = (static_cast<double>(img.height) - 1.0) / 2.0;
  return detail::warp(img, [&](double x, double y) {
    return std::pair{cx + (x - cx) / factor, cy + (y - cy) / factor};
  });
}

inline ImageF adjust_brightness(const ImageF& img, double delta) {
  if (delta == 0.0) return img;
  ImageF out = img;
  for (auto& v : out.pixels) v = std::clamp(static_cast<float>(v + delta), 0.0f, 1.0f);
  return out;
}

// flip -> rotate -> zoom -> brightness, all draws taken from `rng`.
inline ImageF augment(const ImageF& img, const AugmentConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  ImageF out = img;
  if (cfg.flip_enabled) {
    if (u01(rng) < cfg.flip_h_prob) out = flip_horizontal(out);
    if (u01(rng) < cfg.flip_v_prob) out = flip_vertical(out);
  }
  if (cfg.rotate_enabled && cfg.rotation_deg > 0.0) {
    out = rotate(out, std::uniform_real_distribution<double>(-cfg.rotation_deg, cfg.rotation_deg)(rng));
  }
  if (cfg.zoom_enabled && cfg.zoom_max > cfg.zoom_min) {
    out = zoom(out, std::uniform_real_distribution<double>(cfg.zoom_min, cfg.zoom_max)(rng));
  } else if (cfg.zoom_enabled) {
    out = zoom(out, cfg.zoom_min);
  }
  if (cfg.brightness_enabled) {
    const double d = cfg.brightness_max > cfg.brightness_min
                         ? std::uniform_real_distribution<double>(cfg.brightness_min, cfg.brightness_max)(rng)
                         : cfg.brightness_min;
    out = adjust_brightness(out, d);
  }
  return out;
}

// λ ~ Beta(alpha, alpha) via two Gamma draws.
inline double sample_beta(double alpha, std::mt19937_64& rng) {
  if (!(alpha > 0.0)) throw std::invalid_argument("sample_beta: alpha must be > 0");
  std::gamma_distribution<double> g(alpha, 1.0);
  const double a = g(rng), b = g(rng);
  if (a + b <= 0.0) return 0.5;
  return a / (a + b);
}

template <typename T>
struct MixupResult {
  std::vector<T> x;
  std::vector<T> y;
};

// x = λ·x_i + (1-λ)·x_j and the same convex combination of the label vectors.
template <typename T>
MixupResult<T> mixup(std::span<const T> x_i, std::span<const T> y_i, std::span<const T> x_j,
                     std::span<const T> y_j, double lambda) {
  if (x_i.size() != x_j.size()) throw ShapeError("mixup: images differ in size");
  if (y_i.size() != y_j.size()) throw ShapeError("mixup: label vectors differ in length");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("mixup: lambda outside [0,1]");
  MixupResult<T> r{std::vector<T>(x_i.size()), std::vector<T>(y_i.size())};
  const T l = static_cast<T>(lambda), m = static_cast<T>(1.0 - lambda);
  for (std::size_t k = 0; k < x_i.size(); ++k) r.x[k] = l * x_i[k] + m * x_j[k];
  for (std::size_t k = 0; k < y_i.size(); ++k) r.y[k] = l * y_i[k] + m * y_j[k];
  return r;
}

}  // namespace drx
