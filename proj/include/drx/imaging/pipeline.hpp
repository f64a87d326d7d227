#pragma once

#include <string>
#include <utility>
#include <vector>

#include "drx/imaging/enhance.hpp"
#include "drx/imaging/image.hpp"

namespace drx {

enum class PreprocessStage { crop, resize, clahe, gamma };

inline std::string stage_name(PreprocessStage s) {
  switch (s) {
    case PreprocessStage::crop: return "crop";
    case PreprocessStage::resize: return "resize";
    case PreprocessStage::clahe: return "clahe";
    case PreprocessStage::gamma: return "gamma";
  }
  return "?";
}

inline PreprocessStage parse_stage(const std::string& s) {
  if (s == "crop") return PreprocessStage::crop;
  if (s == "resize") return PreprocessStage::resize;
  if (s == "clahe") return PreprocessStage::clahe;
  if (s == "gamma") return PreprocessStage::gamma;
  throw std::invalid_argument("unknown preprocessing stage '" + s + "'");
}

struct PreprocessConfig {
  int crop_threshold = 10;
  std::size_t out_h = 224;
  std::size_t out_w = 224;
  bool clahe_enabled = true;
  ClaheParams clahe;
  bool gamma_enabled = true;
  GammaMode gamma = GammaMode::adaptive();
  std::vector<PreprocessStage> order{PreprocessStage::crop, PreprocessStage::resize, PreprocessStage::clahe,
                                     PreprocessStage::gamma};
};

inline ImageU8 apply_stage(const ImageU8& img, PreprocessStage stage, const PreprocessConfig& cfg) {
  switch (stage) {
    case PreprocessStage::crop: return circular_crop(img, cfg.crop_threshold);
    case PreprocessStage::resize: return resize(img, cfg.out_h, cfg.out_w);
    case PreprocessStage::clahe: return cfg.clahe_enabled ? clahe(img, cfg.clahe) : img;
    case PreprocessStage::gamma: {
      if (!cfg.gamma_enabled) return img;
      ImageU8 out = to_u8(gamma_correct(to_unit(img), cfg.gamma));
      out.source_id = img.source_id;
      return out;
    }
  }
  return img;
}

// Every intermediate result, in configured order.
inline std::vector<std::pair<PreprocessStage, ImageU8>> preprocess_stages(const ImageU8& img,
                                                                          const PreprocessConfig& cfg) {
  std::vector<std::pair<PreprocessStage, ImageU8>> out;
  ImageU8 cur = img;
  for (const auto s : cfg.order) {
    cur = apply_stage(cur, s, cfg);
    out.emplace_back(s, cur);
  }
  return out;
}

inline ImageU8 preprocess(const ImageU8& img, const PreprocessConfig& cfg) {
  ImageU8 cur = img;
  for (const auto s : cfg.order) cur = apply_stage(cur, s, cfg);
  return cur;
}

}  // namespace drx
