#pragma once

#include <algorithm>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "drx/errors.hpp"

namespace drx {

struct StageConfig {
  std::size_t channels = 16;
  std::size_t stride = 2;
  bool se = true;
  std::size_t se_ratio = 4;

  // the ratio is irrelevant when SE is off
  bool operator==(const StageConfig& o) const {
    return channels == o.channels && stride == o.stride && se == o.se && (!se || se_ratio == o.se_ratio);
  }
};

struct ModelConfig {
  std::size_t input_h = 64;
  std::size_t input_w = 64;
  std::vector<StageConfig> stages{{16, 2, true, 4}, {32, 2, true, 4}, {64, 2, true, 4}, {128, 2, true, 4}};
  std::size_t head_dim = 16;
  std::size_t num_classes = 3;

  bool operator==(const ModelConfig&) const = default;

  std::size_t feature_channels() const { return stages.empty() ? 3 : stages.back().channels; }

  std::size_t total_stride() const {
    std::size_t s = 1;
    for (const auto& st : stages) s *= st.stride;
    return s;
  }

  void validate() const {
    if (input_h == 0 || input_w == 0) throw ConfigError("model: input size must be positive");
    if (stages.empty()) throw ConfigError("model: at least one backbone stage is required");
    for (std::size_t i = 0; i < stages.size(); ++i) {
      const auto& s = stages[i];
      const std::string at = "model: stage " + std::to_string(i + 1) + ": ";
      if (s.channels == 0) throw ConfigError(at + "channels must be >= 1");
      if (s.stride != 1 && s.stride != 2) throw ConfigError(at + "stride must be 1 or 2");
      if (s.se && (s.se_ratio == 0 || s.channels % s.se_ratio != 0)) {
        throw ConfigError(at + "SE ratio " + std::to_string(s.se_ratio) + " must divide " +
                          std::to_string(s.channels) + " channels");
      }
    }
    if (total_stride() > std::min(input_h, input_w)) {
      throw ConfigError("model: product of strides exceeds the input size");
    }
    if (head_dim == 0) throw ConfigError("model: head_dim must be >= 1");
    if (num_classes < 2) throw ConfigError("model: need at least two classes");
  }

  // "C/stride/ratio,..." with ratio 0 meaning no SE
  static std::string stages_to_text(const std::vector<StageConfig>& stages) {
    std::ostringstream os;
    for (std::size_t i = 0; i < stages.size(); ++i) {
      if (i) os << ",";
      os << stages[i].channels << "/" << stages[i].stride << "/" << (stages[i].se ? stages[i].se_ratio : 0);
    }
    return os.str();
  }

  static std::vector<StageConfig> stages_from_text(const std::string& val) {
    auto number = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      std::size_t pos = 0;
      unsigned long long v = 0;
      try {
        v = std::stoull(s, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos == 0 || pos != s.size()) throw ConfigError("model config: bad number '" + s + "' in stages");
      return static_cast<std::size_t>(v);
    };
    std::vector<StageConfig> out;
    std::istringstream ss(val);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto a = item.find('/'), b = item.rfind('/');
      if (a == std::string::npos || a == b) throw ConfigError("model config: stage must be C/stride/ratio");
      StageConfig st;
      st.channels = number(item.substr(0, a));
      st.stride = number(item.substr(a + 1, b - a - 1));
      const auto r = number(item.substr(b + 1));
      st.se = r != 0;
      st.se_ratio = r ? r : StageConfig{}.se_ratio;
      out.push_back(st);
    }
    return out;
  }

  // Line-oriented text stored in checkpoints, e.g.
  //   input=64x64
  //   stages=16/2/4,32/2/4,64/2/0     (channels/stride/se_ratio, 0 = no SE)
  //   head_dim=16
  //   classes=3
  std::string to_text() const {
    std::ostringstream os;
    os << "input=" << input_h << "x" << input_w << "\nstages=" << stages_to_text(stages);
    os << "\nhead_dim=" << head_dim << "\nclasses=" << num_classes << "\n";
    return os.str();
  }

  static ModelConfig from_text(const std::string& text) {
    ModelConfig c;
    c.stages.clear();
    bool seen_input = false, seen_stages = false, seen_head = false, seen_classes = false;
    std::istringstream in(text);
    std::string line;
    auto number = [](const std::string& s, const std::string& key) {
      std::size_t pos = 0;
      unsigned long long v = 0;
      try {
        v = std::stoull(s, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos == 0 || pos != s.size()) throw ConfigError("model config: bad number '" + s + "' for " + key);
      return static_cast<std::size_t>(v);
    };
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("model config: expected key=value, got '" + line + "'");
      const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
      if (key == "input") {
        const auto x = val.find('x');
        if (x == std::string::npos) throw ConfigError("model config: input must be HxW");
        c.input_h = number(val.substr(0, x), key);
        c.input_w = number(val.substr(x + 1), key);
        seen_input = true;
      } else if (key == "stages") {
        c.stages = stages_from_text(val);
        seen_stages = true;
      } else if (key == "head_dim") {
        c.head_dim = number(val, key);
        seen_head = true;
      } else if (key == "classes") {
        c.num_classes = number(val, key);
        seen_classes = true;
      } else {
        throw ConfigError("model config: unknown key '" + key + "'");
      }
    }
    if (!(seen_input && seen_stages && seen_head && seen_classes)) {
      throw ConfigError("model config: missing one of input, stages, head_dim, classes");
    }
    c.validate();
    return c;
  }
};

}  // namespace drx
