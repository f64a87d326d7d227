#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "drx/imaging/codec.hpp"
#include "drx/model/model.hpp"

namespace drx {

// Layout (all integers little-endian):
//   "DRXCKPT\0"  u32 version
//   u32 len, config text
//   u32 count, then per parameter: u32 len, name, u32 rank, u64 dims[rank],
//                                  u64 n, f32 values[n]
//   u32 len, metadata text ("key=value" lines)
inline constexpr char kCheckpointMagic[8] = {'D', 'R', 'X', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

using CheckpointMeta = std::map<std::string, std::string>;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  Model<float> model;
  CheckpointMeta meta;
};

namespace detail {

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename U>
  void le(U v) {
    using Bits = std::conditional_t<sizeof(U) == 4, std::uint32_t, std::uint64_t>;
    const auto bits = std::bit_cast<Bits>(v);
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  void text(const std::string& s) {
    le(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& b) : b_(b) {}
  const std::uint8_t* take(std::size_t n) {
    if (n > b_.size() - pos_) {
      throw CheckpointError(CheckpointError::Kind::corrupt, "checkpoint: truncated at byte " + std::to_string(pos_));
    }
    const auto* p = b_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <typename U>
  U le() {
    using Bits = std::conditional_t<sizeof(U) == 4, std::uint32_t, std::uint64_t>;
    const auto* p = take(sizeof(U));
    Bits bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<Bits>(p[i]) << (8 * i);
    return std::bit_cast<U>(bits);
  }
  std::string text() {
    const auto n = le<std::uint32_t>();
    const auto* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

inline std::string meta_to_text(const CheckpointMeta& meta) {
  std::string s;
  for (const auto& [k, v] : meta) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw ConfigError("checkpoint metadata key/value may not contain '=' or newlines: " + k);
    }
    s += k + "=" + v + "\n";
  }
  return s;
}

inline CheckpointMeta meta_from_text(const std::string& text) {
  CheckpointMeta meta;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError(CheckpointError::Kind::corrupt, "checkpoint: bad metadata line");
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return meta;
}

}  // namespace detail

// Parameters are stored as float32 whatever T is.
template <typename T>
std::vector<std::uint8_t> encode_checkpoint(const Model<T>& model, const CheckpointMeta& meta = {},
                                            std::uint32_t version = kCheckpointVersion) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.le(version);
  w.text(model.config().to_text());
  w.le(static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto& p : model.parameters()) {
    w.text(p.name);
    w.le(static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) w.le(static_cast<std::uint64_t>(d));
    w.le(static_cast<std::uint64_t>(p.value.numel()));
    for (const T v : p.value.data()) w.le(static_cast<float>(v));
  }
  w.text(detail::meta_to_text(meta));
  return w.take();
}

inline Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  using Kind = CheckpointError::Kind;
  detail::ByteReader r(bytes);
  if (bytes.size() < sizeof kCheckpointMagic || std::memcmp(r.take(8), kCheckpointMagic, 8) != 0) {
    throw CheckpointError(Kind::corrupt, "checkpoint: bad magic, not a drx checkpoint");
  }
  Checkpoint ck;
  ck.version = r.le<std::uint32_t>();
  if (ck.version != kCheckpointVersion) {
    throw CheckpointError(Kind::version, "checkpoint: format version " + std::to_string(ck.version) +
                                             " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  ModelConfig cfg;
  try {
    cfg = ModelConfig::from_text(r.text());
  } catch (const ConfigError& e) {
    throw CheckpointError(Kind::corrupt, std::string("checkpoint: unreadable architecture config: ") + e.what());
  }
  const auto count = r.le<std::uint32_t>();
  std::vector<Parameter<float>> params;
  for (std::uint32_t i = 0; i < count; ++i) {
    Parameter<float> p;
    p.name = r.text();
    const auto rank = r.le<std::uint32_t>();
    if (rank > 8) throw CheckpointError(Kind::corrupt, "checkpoint: implausible rank for " + p.name);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.le<std::uint64_t>());
    const auto n = r.le<std::uint64_t>();
    if (n != shape_numel(shape)) throw CheckpointError(Kind::corrupt, "checkpoint: length mismatch for " + p.name);
    if (n > bytes.size()) throw CheckpointError(Kind::corrupt, "checkpoint: truncated data for " + p.name);
    std::vector<float> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = r.le<float>();
    p.value = Tensor<float>::from(std::move(shape), std::move(v), true);
    params.push_back(std::move(p));
  }
  ck.meta = detail::meta_from_text(r.text());
  if (!r.done()) throw CheckpointError(Kind::corrupt, "checkpoint: trailing bytes after metadata");
  try {
    ck.model = Model<float>::from_parameters(std::move(cfg), std::move(params));
  } catch (const ShapeError& e) {
    throw CheckpointError(Kind::corrupt, std::string("checkpoint: ") + e.what());
  }
  return ck;
}

template <typename T>
void save_checkpoint(const Model<T>& model, const std::filesystem::path& path, const CheckpointMeta& meta = {}) {
  const auto bytes = encode_checkpoint(model, meta);
  auto tmp = path;
  tmp += ".tmp";
  write_file(tmp, bytes);
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

// Loads into an existing model; the stored architecture must equal its config.
inline CheckpointMeta load_checkpoint_into(Model<float>& model, const std::filesystem::path& path) {
  auto ck = load_checkpoint(path);
  if (!(ck.model.config() == model.config())) {
    throw CheckpointError(CheckpointError::Kind::config_mismatch,
                          "checkpoint: architecture mismatch\n  file:  " + ck.model.config().to_text() +
                              "  model: " + model.config().to_text());
  }
  model = std::move(ck.model);
  return ck.meta;
}

}  // namespace drx
