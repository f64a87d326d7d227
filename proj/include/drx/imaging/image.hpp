#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "drx/errors.hpp"

namespace drx {

// Interleaved H×W×3 RGB raster. The 8-bit form is the storage/codec form,
// the float form (values in [0,1]) is the processing form.
template <typename P>
struct BasicImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<P> pixels;
  std::string source_id;

  BasicImage() = default;
  BasicImage(std::size_t h, std::size_t w, P fill = P{}) : height(h), width(w), pixels(h * w * 3, fill) {}

  P& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * 3 + c]; }
  P at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * 3 + c]; }
  bool empty() const { return pixels.empty(); }

  bool operator==(const BasicImage& o) const {
    return height == o.height && width == o.width && pixels == o.pixels;
  }
};

using ImageU8 = BasicImage<std::uint8_t>;
using ImageF = BasicImage<float>;

inline std::uint8_t to_u8(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

inline ImageF to_unit(const ImageU8& img) {
  ImageF out(img.height, img.width);
  out.source_id = img.source_id;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) out.pixels[i] = static_cast<float>(img.pixels[i]) / 255.0f;
  return out;
}

inline ImageU8 to_u8(const ImageF& img) {
  ImageU8 out(img.height, img.width);
  out.source_id = img.source_id;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) out.pixels[i] = to_u8(img.pixels[i]);
  return out;
}

// Rec. 601 luma
inline double luminance(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

template <typename P>
double mean_luminance(const BasicImage<P>& img) {
  if (img.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
    s += luminance(img.pixels[i], img.pixels[i + 1], img.pixels[i + 2]);
  }
  return s / static_cast<double>(img.height * img.width);
}

}  // namespace drx
