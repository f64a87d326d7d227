#pragma once

#include <png.h>

#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "drx/errors.hpp"
#include "drx/imaging/image.hpp"

namespace drx {

enum class ImageFormat { ppm, png };

using Bytes = std::vector<std::uint8_t>;

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path.string());
}

namespace detail {

class PpmHeaderReader {
 public:
  explicit PpmHeaderReader(const Bytes& b) : b_(b) {}

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* field) {
    skip_space_and_comments();
    std::size_t v = 0, digits = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + (b_[pos_++] - '0');
      if (++digits > 9) throw DecodeError(std::string("ppm: ") + field + " too large");
    }
    if (digits == 0) throw DecodeError(std::string("ppm: malformed header, expected ") + field);
    return v;
  }

  std::size_t pos_ = 0;

 private:
  const Bytes& b_;
};

}  // namespace detail

inline ImageU8 decode_ppm(const Bytes& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw DecodeError("ppm: missing P6 magic");
  detail::PpmHeaderReader r(bytes);
  r.pos_ = 2;
  const auto w = r.number("width");
  const auto h = r.number("height");
  const auto maxval = r.number("maxval");
  if (w == 0 || h == 0) throw DecodeError("ppm: zero image dimension");
  if (maxval != 255) throw DecodeError("ppm: unsupported bit depth (maxval " + std::to_string(maxval) + ")");
  if (r.pos_ >= bytes.size() || !std::isspace(bytes[r.pos_])) throw DecodeError("ppm: malformed header");
  ++r.pos_;
  const std::size_t need = w * h * 3;
  if (bytes.size() - r.pos_ < need) {
    throw DecodeError("ppm: truncated pixel data (" + std::to_string(bytes.size() - r.pos_) + " of " +
                      std::to_string(need) + " bytes)");
  }
  ImageU8 img(h, w);
  std::memcpy(img.pixels.data(), bytes.data() + r.pos_, need);
  return img;
}

inline Bytes encode_ppm(const ImageU8& img) {
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

// 8-bit PNG of any colour type is converted to RGB; 16-bit input is refused.
inline ImageU8 decode_png(const Bytes& bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    std::string msg = image.message;
    png_image_free(&image);
    throw DecodeError("png: " + msg);
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw DecodeError("png: unsupported bit depth (16-bit); only 8-bit RGB is supported");
  }
  image.format = PNG_FORMAT_RGB;
  ImageU8 img(image.height, image.width);
  if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw DecodeError("png: " + msg);
  }
  return img;
}

inline Bytes encode_png(const ImageU8& img) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels.data(), 0, nullptr)) {
    throw DataError(std::string("png encode: ") + image.message);
  }
  Bytes out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels.data(), 0, nullptr)) {
    throw DataError(std::string("png encode: ") + image.message);
  }
  out.resize(size);
  return out;
}

inline ImageU8 decode(const Bytes& bytes, ImageFormat fmt) {
  return fmt == ImageFormat::ppm ? decode_ppm(bytes) : decode_png(bytes);
}

inline Bytes encode(const ImageU8& img, ImageFormat fmt) {
  return fmt == ImageFormat::ppm ? encode_ppm(img) : encode_png(img);
}

inline ImageFormat format_from_path(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (ext == ".ppm") return ImageFormat::ppm;
  if (ext == ".png") return ImageFormat::png;
  throw DecodeError("unsupported image format: " + p.string());
}

inline ImageU8 load_image(const std::filesystem::path& p) {
  const auto fmt = format_from_path(p);
  ImageU8 img = decode(read_file(p), fmt);
  img.source_id = p.stem().string();
  return img;
}

inline void save_image(const std::filesystem::path& p, const ImageU8& img) {
  write_file(p, encode(img, format_from_path(p)));
}

}  // namespace drx
