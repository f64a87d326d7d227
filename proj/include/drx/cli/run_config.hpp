#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "drx/dataset/index.hpp"
#include "drx/dataset/synthetic.hpp"
#include "drx/imaging/pipeline.hpp"
#include "drx/model/config.hpp"
#include "drx/training/train.hpp"

namespace drx {

struct DataConfig {
  std::string source = "synthetic";  // synthetic | csv
  std::filesystem::path csv;
  std::filesystem::path images;
  std::string class_merge = "3class";
  SplitFractions fractions;
  std::uint64_t split_seed = 0;
  bool oversample = false;  // balance train classes by replication
};

struct ExplainConfig {
  std::string layer = "refined";
  double overlay_alpha = 0.5;
};

// Everything a run needs. Defaults are the full-scale settings; the model
// input size follows preprocess.size and the class count follows the merge.
struct RunConfig {
  DataConfig data;
  SyntheticSpec synthetic;
  PreprocessConfig preprocess;
  AugmentConfig augment;
  std::vector<StageConfig> stages = ModelConfig{}.stages;
  std::size_t head_dim = ModelConfig{}.head_dim;
  LossConfig loss;
  AdamWConfig optim;
  SchedulerConfig scheduler;
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "runs/default";
  ExplainConfig explain;

  ClassMergeMap merge() const { return ClassMergeMap::by_name(data.class_merge); }

  ModelConfig model_config() const {
    ModelConfig m;
    m.input_h = preprocess.out_h;
    m.input_w = preprocess.out_w;
    m.stages = stages;
    m.head_dim = head_dim;
    m.num_classes = merge().num_classes();
    return m;
  }

  TrainConfig train_config() const {
    TrainConfig t;
    t.epochs = epochs;
    t.batch_size = batch_size;
    t.seed = seed;
    t.optim = optim;
    t.scheduler = scheduler;
    t.loss = loss;
    t.augment = augment;
    return t;
  }

  void validate() const {
    if (data.source != "synthetic" && data.source != "csv") throw ConfigError("data.source must be synthetic or csv");
    if (data.source == "csv") {
      if (data.csv.empty()) throw ConfigError("data.csv: required when data.source = csv");
      if (!std::filesystem::is_regular_file(data.csv)) throw ConfigError("data.csv: file not found: " + data.csv.string());
      if (data.images.empty()) throw ConfigError("data.images: required when data.source = csv");
      if (!std::filesystem::is_directory(data.images)) {
        throw ConfigError("data.images: directory not found: " + data.images.string());
      }
    }
    merge().validate();
    synthetic.validate();
    if (preprocess.out_h == 0 || preprocess.out_w == 0) throw ConfigError("preprocess.size must be positive");
    if (preprocess.order.empty()) throw ConfigError("preprocess.order must name at least one stage");
    model_config().validate();
    train_config().validate();
    if (!(explain.overlay_alpha >= 0.0 && explain.overlay_alpha <= 1.0)) {
      throw ConfigError("explain.overlay_alpha must lie in [0,1]");
    }
  }
};

namespace detail {

inline std::string fmt_num(double v) {
  char buf[32];
  for (int p = 1; p <= 17; ++p) {
    std::snprintf(buf, sizeof buf, "%.*g", p, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    const auto b = cur.find_first_not_of(" \t"), e = cur.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : cur.substr(b, e - b + 1));
  }
  return out;
}

inline std::string join(const std::vector<std::string>& v, const char* sep = ",") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

// Table of every key: section.key -> (read from string, write to string).
struct KeyBinding {
  std::function<void(RunConfig&, const std::string&)> read;
  std::function<std::string(const RunConfig&)> write;
};

inline double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || !std::isfinite(d)) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return d;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || r.ec != std::errc{} || r.ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::string show_bool(bool b) { return b ? "true" : "false"; }

inline const std::map<std::string, KeyBinding>& key_table() {
  using R = RunConfig;
  static const std::map<std::string, KeyBinding> table = [] {
    std::map<std::string, KeyBinding> t;
    auto num = [&](const std::string& key, auto member) {
      t[key] = {[key, member](R& c, const std::string& v) { member(c) = parse_double(key, v); },
                [member](const R& c) { return fmt_num(member(const_cast<R&>(c))); }};
    };
    auto uint = [&](const std::string& key, auto member) {
      t[key] = {[key, member](R& c, const std::string& v) {
                  member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(parse_uint(key, v));
                },
                [member](const R& c) { return std::to_string(member(const_cast<R&>(c))); }};
    };
    auto flag = [&](const std::string& key, auto member) {
      t[key] = {[key, member](R& c, const std::string& v) { member(c) = parse_bool(key, v); },
                [member](const R& c) { return show_bool(member(const_cast<R&>(c))); }};
    };
    auto str = [&](const std::string& key, auto member) {
      t[key] = {[member](R& c, const std::string& v) { member(c) = v; },
                [member](const R& c) { return std::string(member(const_cast<R&>(c))); }};
    };
    auto path = [&](const std::string& key, auto member) {
      t[key] = {[member](R& c, const std::string& v) { member(c) = v; },
                [member](const R& c) { return member(const_cast<R&>(c)).string(); }};
    };

    str("data.source", [](R& c) -> std::string& { return c.data.source; });
    path("data.csv", [](R& c) -> std::filesystem::path& { return c.data.csv; });
    path("data.images", [](R& c) -> std::filesystem::path& { return c.data.images; });
    str("data.class_merge", [](R& c) -> std::string& { return c.data.class_merge; });
    num("data.train_fraction", [](R& c) -> double& { return c.data.fractions.train; });
    num("data.val_fraction", [](R& c) -> double& { return c.data.fractions.val; });
    num("data.test_fraction", [](R& c) -> double& { return c.data.fractions.test; });
    uint("data.split_seed", [](R& c) -> std::uint64_t& { return c.data.split_seed; });
    flag("data.oversample", [](R& c) -> bool& { return c.data.oversample; });

    uint("synthetic.image_size", [](R& c) -> std::size_t& { return c.synthetic.image_size; });
    uint("synthetic.seed", [](R& c) -> std::uint64_t& { return c.synthetic.seed; });
    num("synthetic.lesion_radius_min", [](R& c) -> double& { return c.synthetic.lesion_radius_min; });
    num("synthetic.lesion_radius_max", [](R& c) -> double& { return c.synthetic.lesion_radius_max; });
    auto grade_list = [&](const std::string& key, auto member) {
      t[key] = {[key, member](R& c, const std::string& v) {
                  const auto items = split_list(v);
                  if (items.size() != kNumGrades) {
                    throw ConfigError(key + ": expected " + std::to_string(kNumGrades) + " comma-separated counts");
                  }
                  for (std::size_t i = 0; i < items.size(); ++i) member(c)[i] = parse_uint(key, items[i]);
                },
                [member](const R& c) {
                  std::vector<std::string> s;
                  for (auto n : member(const_cast<R&>(c))) s.push_back(std::to_string(n));
                  return join(s);
                }};
    };
    grade_list("synthetic.counts", [](R& c) -> auto& { return c.synthetic.counts; });
    grade_list("synthetic.lesions", [](R& c) -> auto& { return c.synthetic.lesions_per_grade; });

    t["preprocess.order"] = {[](R& c, const std::string& v) {
                               c.preprocess.order.clear();
                               for (const auto& s : split_list(v)) {
                                 try {
                                   c.preprocess.order.push_back(parse_stage(s));
                                 } catch (const std::invalid_argument& e) {
                                   throw ConfigError(std::string("preprocess.order: ") + e.what());
                                 }
                               }
                             },
                             [](const R& c) {
                               std::vector<std::string> s;
                               for (auto st : c.preprocess.order) s.push_back(stage_name(st));
                               return join(s);
                             }};
    t["preprocess.size"] = {[](R& c, const std::string& v) {
                              const auto x = v.find('x');
                              if (x == std::string::npos) throw ConfigError("preprocess.size: expected HxW, got '" + v + "'");
                              c.preprocess.out_h = parse_uint("preprocess.size", v.substr(0, x));
                              c.preprocess.out_w = parse_uint("preprocess.size", v.substr(x + 1));
                            },
                            [](const R& c) {
                              return std::to_string(c.preprocess.out_h) + "x" + std::to_string(c.preprocess.out_w);
                            }};
    uint("preprocess.crop_threshold", [](R& c) -> int& { return c.preprocess.crop_threshold; });
    flag("preprocess.clahe", [](R& c) -> bool& { return c.preprocess.clahe_enabled; });
    uint("preprocess.clahe_tiles_x", [](R& c) -> std::size_t& { return c.preprocess.clahe.tiles_x; });
    uint("preprocess.clahe_tiles_y", [](R& c) -> std::size_t& { return c.preprocess.clahe.tiles_y; });
    t["preprocess.clahe_clip"] = {[](R& c, const std::string& v) {
                                    c.preprocess.clahe.clip_limit = v == "inf" ? std::numeric_limits<double>::infinity()
                                                                               : parse_double("preprocess.clahe_clip", v);
                                  },
                                  [](const R& c) {
                                    return std::isinf(c.preprocess.clahe.clip_limit) ? std::string("inf")
                                                                                     : fmt_num(c.preprocess.clahe.clip_limit);
                                  }};
    t["preprocess.gamma"] = {[](R& c, const std::string& v) {
                               if (v == "off") {
                                 c.preprocess.gamma_enabled = false;
                               } else if (v == "adaptive") {
                                 c.preprocess.gamma_enabled = true;
                                 c.preprocess.gamma = GammaMode::adaptive();
                               } else {
                                 const double g = parse_double("preprocess.gamma", v);
                                 if (!(g > 0.0)) throw ConfigError("preprocess.gamma: exponent must be > 0");
                                 c.preprocess.gamma_enabled = true;
                                 c.preprocess.gamma = GammaMode::fixed(g);
                               }
                             },
                             [](const R& c) {
                               if (!c.preprocess.gamma_enabled) return std::string("off");
                               if (c.preprocess.gamma.kind == GammaMode::Kind::adaptive) return std::string("adaptive");
                               return fmt_num(c.preprocess.gamma.value);
                             }};

    flag("augment.flip", [](R& c) -> bool& { return c.augment.flip_enabled; });
    num("augment.flip_h_prob", [](R& c) -> double& { return c.augment.flip_h_prob; });
    num("augment.flip_v_prob", [](R& c) -> double& { return c.augment.flip_v_prob; });
    flag("augment.rotate", [](R& c) -> bool& { return c.augment.rotate_enabled; });
    num("augment.rotation_deg", [](R& c) -> double& { return c.augment.rotation_deg; });
    flag("augment.zoom", [](R& c) -> bool& { return c.augment.zoom_enabled; });
    num("augment.zoom_min", [](R& c) -> double& { return c.augment.zoom_min; });
    num("augment.zoom_max", [](R& c) -> double& { return c.augment.zoom_max; });
    flag("augment.brightness", [](R& c) -> bool& { return c.augment.brightness_enabled; });
    num("augment.brightness_min", [](R& c) -> double& { return c.augment.brightness_min; });
    num("augment.brightness_max", [](R& c) -> double& { return c.augment.brightness_max; });
    flag("augment.mixup", [](R& c) -> bool& { return c.augment.mixup_enabled; });
    num("augment.mixup_alpha", [](R& c) -> double& { return c.augment.mixup_alpha; });

    t["model.stages"] = {[](R& c, const std::string& v) {
                           try {
                             c.stages = ModelConfig::stages_from_text(v);
                           } catch (const ConfigError& e) {
                             throw ConfigError(std::string("model.stages: ") + e.what());
                           }
                         },
                         [](const R& c) { return ModelConfig::stages_to_text(c.stages); }};
    uint("model.head_dim", [](R& c) -> std::size_t& { return c.head_dim; });

    t["loss.alpha"] = {[](R& c, const std::string& v) {
                         c.loss.alpha.clear();
                         if (v == "auto") return;
                         for (const auto& s : split_list(v)) c.loss.alpha.push_back(parse_double("loss.alpha", s));
                       },
                       [](const R& c) {
                         if (c.loss.alpha.empty()) return std::string("auto");
                         std::vector<std::string> s;
                         for (double a : c.loss.alpha) s.push_back(fmt_num(a));
                         return join(s);
                       }};
    num("loss.gamma", [](R& c) -> double& { return c.loss.gamma; });
    num("loss.label_smoothing", [](R& c) -> double& { return c.loss.epsilon; });

    num("optim.lr", [](R& c) -> double& { return c.optim.lr; });
    num("optim.beta1", [](R& c) -> double& { return c.optim.beta1; });
    num("optim.beta2", [](R& c) -> double& { return c.optim.beta2; });
    num("optim.eps", [](R& c) -> double& { return c.optim.eps; });
    num("optim.weight_decay", [](R& c) -> double& { return c.optim.weight_decay; });

    str("scheduler.mode", [](R& c) -> std::string& { return c.scheduler.mode; });
    num("scheduler.factor", [](R& c) -> double& { return c.scheduler.factor; });
    uint("scheduler.patience", [](R& c) -> std::size_t& { return c.scheduler.patience; });
    num("scheduler.min_lr", [](R& c) -> double& { return c.scheduler.min_lr; });
    num("scheduler.threshold", [](R& c) -> double& { return c.scheduler.threshold; });

    uint("train.epochs", [](R& c) -> std::size_t& { return c.epochs; });
    uint("train.batch_size", [](R& c) -> std::size_t& { return c.batch_size; });
    uint("train.seed", [](R& c) -> std::uint64_t& { return c.seed; });
    path("output.dir", [](R& c) -> std::filesystem::path& { return c.out_dir; });

    str("explain.layer", [](R& c) -> std::string& { return c.explain.layer; });
    num("explain.overlay_alpha", [](R& c) -> double& { return c.explain.overlay_alpha; });
    return t;
  }();
  return table;
}

inline const std::vector<std::string>& section_order() {
  static const std::vector<std::string> s{"data",  "synthetic", "preprocess", "augment", "model", "loss",
                                          "optim", "scheduler", "train",      "output",  "explain"};
  return s;
}

}  // namespace detail

// Canonical INI text with every key; also the input of the config hash.
inline std::string to_ini(const RunConfig& c) {
  std::string s;
  for (const auto& sec : detail::section_order()) {
    s += "[" + sec + "]\n";
    for (const auto& [key, b] : detail::key_table())
      if (key.compare(0, sec.size() + 1, sec + ".") == 0) s += key.substr(sec.size() + 1) + " = " + b.write(c) + "\n";
    s += "\n";
  }
  return s;
}

// Relative data/output paths resolve against `base_dir`. Unknown sections
// and keys are rejected.
inline RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {}) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config: " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  RunConfig c;
  const auto& table = detail::key_table();
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty()) throw ConfigError("config: key '" + section + "' outside any section");
    if (std::find(detail::section_order().begin(), detail::section_order().end(), section) ==
        detail::section_order().end()) {
      throw ConfigError("config: unknown section [" + section + "]");
    }
    for (const auto& [key, node] : keys) {
      const auto full = section + "." + key;
      const auto it = table.find(full);
      if (it == table.end()) throw ConfigError("config: unknown key '" + full + "'");
      it->second.read(c, node.data());
    }
  }
  auto rebase = [&](std::filesystem::path& p) {
    if (!p.empty() && p.is_relative() && !base_dir.empty()) p = base_dir / p;
  };
  rebase(c.data.csv);
  rebase(c.data.images);
  rebase(c.out_dir);
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

// Synthesises or loads, merges classes, splits, optionally oversamples.
inline DatasetIndex build_index(const RunConfig& c, std::vector<std::string>* warnings = nullptr) {
  DatasetIndex idx = c.data.source == "csv" ? load_csv_index(c.data.csv, c.data.images) : synthesize_fundus(c.synthetic);
  idx = merge_classes(idx, c.merge());
  idx = stratified_split(idx, c.data.fractions, c.data.split_seed, warnings);
  if (c.data.oversample) idx = oversample(idx, Split::train, OversampleTarget::balance(), c.data.split_seed);
  return idx;
}

}  // namespace drx
