#pragma once

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "drx/dataset/index.hpp"
#include "drx/errors.hpp"
#include "drx/imaging/codec.hpp"

namespace drx {

inline constexpr const char* kArtifactVersion = "0.1.0";

// Incremental SHA-256 over OpenSSL's EVP interface.
class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256: init failed");
  }

  Sha256& update(const void* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw std::runtime_error("sha256: update failed");
    return *this;
  }
  Sha256& update(std::string_view s) { return update(s.data(), s.size()); }

  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), md, &len) != 1) throw std::runtime_error("sha256: final failed");
    std::string out;
    char buf[3];
    for (unsigned i = 0; i < len; ++i) {
      std::snprintf(buf, sizeof buf, "%02x", md[i]);
      out += buf;
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline std::string sha256_hex(std::string_view s) { return Sha256().update(s).hex(); }

inline std::string sha256_file(const std::filesystem::path& p) {
  const auto bytes = read_file(p);
  return Sha256().update(bytes.data(), bytes.size()).hex();
}

// Hash over ids, grades, split assignment and raw pixels of every sample.
inline std::string dataset_fingerprint(const DatasetIndex& idx) {
  Sha256 h;
  h.update(split_manifest_csv(idx));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx.samples[i].replica_of) continue;
    const auto img = idx.image(i);
    const std::string dims = std::to_string(img.height) + "x" + std::to_string(img.width) + ";";
    h.update(dims);
    h.update(img.pixels.data(), img.pixels.size());
  }
  return h.hex();
}

// Ordered key=value text; no timestamps, so identical runs give identical files.
class RunManifest {
 public:
  void set(const std::string& key, const std::string& value) { kv_[key] = value; }
  std::string text() const {
    std::string s;
    for (const auto& [k, v] : kv_) s += k + "=" + v + "\n";
    return s;
  }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace drx
