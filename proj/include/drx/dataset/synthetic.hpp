#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>

#include "drx/dataset/index.hpp"
#include "drx/imaging/augment.hpp"

namespace drx {

struct SyntheticSpec {
  std::size_t image_size = 64;
  std::array<std::size_t, kNumGrades> counts{200, 100, 100, 100, 100};
  std::uint64_t seed = 7;
  // lesion blobs per grade; half bright (exudate-like), half dark (haemorrhage-like)
  std::array<std::size_t, kNumGrades> lesions_per_grade{0, 3, 6, 11, 15};
  double lesion_radius_min = 1.6;  // pixels at 64 px, scaled with image size
  double lesion_radius_max = 2.6;

  void validate() const {
    if (image_size < 32) throw ConfigError("synthetic.image_size must be >= 32");
    if (!(lesion_radius_min > 0.0 && lesion_radius_max >= lesion_radius_min)) {
      throw ConfigError("synthetic lesion radius interval is invalid");
    }
  }
};

struct DiscGeometry {
  double cx = 0, cy = 0, r = 0;
};

namespace detail {

inline void paint(ImageU8& img, int x, int y, std::array<double, 3> rgb) {
  if (x < 0 || y < 0 || x >= static_cast<int>(img.width) || y >= static_cast<int>(img.height)) return;
  for (std::size_t c = 0; c < 3; ++c)
    img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) =
        static_cast<std::uint8_t>(std::clamp(std::lround(rgb[c]), 0L, 255L));
}

}  // namespace detail

// One fundus-like image: dark field, bright disc with vignetting, vessel
// strokes, and `lesions` blobs inside 0.75 of the disc radius.
inline LabeledSample render_synthetic(const SyntheticSpec& spec, int grade, std::size_t ordinal,
                                      DiscGeometry* disc_out = nullptr) {
  auto rng = rng_stream(spec.seed, ordinal, static_cast<std::uint64_t>(grade), 0x5e7u);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 3.0);
  const double size = static_cast<double>(spec.image_size);
  const double scale = size / 64.0;

  DiscGeometry disc{size / 2.0 + (u(rng) - 0.5) * 3.0 * scale, size / 2.0 + (u(rng) - 0.5) * 3.0 * scale,
                    size * (0.43 + 0.03 * u(rng))};
  const std::array<double, 3> base{150.0 + 30.0 * u(rng), 60.0 + 15.0 * u(rng), 25.0 + 10.0 * u(rng)};

  ImageU8 img(spec.image_size, spec.image_size, 0);
  for (std::size_t y = 0; y < spec.image_size; ++y)
    for (std::size_t x = 0; x < spec.image_size; ++x) {
      const double dx = static_cast<double>(x) + 0.5 - disc.cx, dy = static_cast<double>(y) + 0.5 - disc.cy;
      const double rr = (dx * dx + dy * dy) / (disc.r * disc.r);
      if (rr > 1.0) {
        const double v = std::max(0.0, 3.0 + noise(rng));
        detail::paint(img, static_cast<int>(x), static_cast<int>(y), {v, v, v});
        continue;
      }
      const double fall = 1.0 - 0.35 * rr;
      detail::paint(img, static_cast<int>(x), static_cast<int>(y),
                    {base[0] * fall + noise(rng), base[1] * fall + noise(rng), base[2] * fall + noise(rng)});
    }

  // vessels: quadratic curves from near the centre outward
  const int vessels = 4 + static_cast<int>(u(rng) * 3);
  for (int v = 0; v < vessels; ++v) {
    const double a0 = 2.0 * std::numbers::pi * (v + u(rng) * 0.6) / vessels;
    const double bend = (u(rng) - 0.5) * 1.2;
    const double r0 = 0.1 * disc.r, r2 = 0.92 * disc.r;
    const double p0x = disc.cx + r0 * std::cos(a0), p0y = disc.cy + r0 * std::sin(a0);
    const double p1x = disc.cx + 0.55 * disc.r * std::cos(a0 + bend), p1y = disc.cy + 0.55 * disc.r * std::sin(a0 + bend);
    const double p2x = disc.cx + r2 * std::cos(a0 + 0.5 * bend), p2y = disc.cy + r2 * std::sin(a0 + 0.5 * bend);
    const int steps = static_cast<int>(4 * disc.r);
    for (int s = 0; s <= steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      const double x = (1 - t) * (1 - t) * p0x + 2 * (1 - t) * t * p1x + t * t * p2x;
      const double y = (1 - t) * (1 - t) * p0y + 2 * (1 - t) * t * p1y + t * t * p2y;
      const int px = static_cast<int>(std::floor(x)), py = static_cast<int>(std::floor(y));
      const auto& cur = img;
      if (px < 0 || py < 0 || px >= static_cast<int>(cur.width) || py >= static_cast<int>(cur.height)) continue;
      const double f = 0.55;
      detail::paint(img, px, py,
                    {cur.at(static_cast<std::size_t>(py), static_cast<std::size_t>(px), 0) * f,
                     cur.at(static_cast<std::size_t>(py), static_cast<std::size_t>(px), 1) * f * 0.8,
                     cur.at(static_cast<std::size_t>(py), static_cast<std::size_t>(px), 2) * f * 0.8});
    }
  }

  LabeledSample s;
  s.grade = grade;
  s.label = grade;
  const std::size_t n_lesions = spec.lesions_per_grade[static_cast<std::size_t>(grade)];
  for (std::size_t l = 0; l < n_lesions; ++l) {
    const double rad = scale * (spec.lesion_radius_min + (spec.lesion_radius_max - spec.lesion_radius_min) * u(rng));
    const double reach = std::max(0.0, 0.75 * disc.r - rad);
    const double ang = 2.0 * std::numbers::pi * u(rng);
    const double dist = reach * std::sqrt(u(rng));
    const double lx = disc.cx + dist * std::cos(ang), ly = disc.cy + dist * std::sin(ang);
    const bool bright = (l % 2) == 0;
    const std::array<double, 3> colour = bright ? std::array<double, 3>{240.0, 215.0, 110.0}
                                                : std::array<double, 3>{70.0, 14.0, 8.0};
    Box box{static_cast<int>(std::floor(lx - rad)), static_cast<int>(std::floor(ly - rad)),
            static_cast<int>(std::ceil(lx + rad)), static_cast<int>(std::ceil(ly + rad))};
    for (int y = box.y0; y < box.y1; ++y)
      for (int x = box.x0; x < box.x1; ++x) {
        const double dx = x + 0.5 - lx, dy = y + 0.5 - ly;
        if (dx * dx + dy * dy <= rad * rad) detail::paint(img, x, y, colour);
      }
    s.lesions.push_back(box);
  }

  char id[32];
  std::snprintf(id, sizeof id, "syn%05zu", ordinal);
  s.id = id;
  img.source_id = s.id;
  s.image = std::move(img);
  if (disc_out) *disc_out = disc;
  return s;
}

// Grades are emitted in blocks (all grade-0 images first, and so on).
inline DatasetIndex synthesize_fundus(const SyntheticSpec& spec) {
  spec.validate();
  DatasetIndex index;
  std::size_t ordinal = 0;
  for (int g = 0; g < kNumGrades; ++g)
    for (std::size_t i = 0; i < spec.counts[static_cast<std::size_t>(g)]; ++i)
      index.samples.push_back(render_synthetic(spec, g, ordinal++));
  return index;
}

}  // namespace drx
