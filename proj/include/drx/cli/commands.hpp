#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>

#include "drx/cli/manifest.hpp"
#include "drx/cli/run_config.hpp"
#include "drx/cli/verify.hpp"
#include "drx/evaluation/report.hpp"
#include "drx/explain/gradcam.hpp"
#include "drx/explain/membership.hpp"
#include "drx/model/checkpoint.hpp"
#include "drx/training/train.hpp"

namespace drx {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitData = 3, kExitNumeric = 4, kExitOther = 1 };

// Maps the library's error types onto process exit codes.
template <typename F>
int run_guarded(F&& body, std::ostream& err) {
  try {
    body();
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ShapeError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitOther;
  }
}

namespace detail {

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  write_file(p, Bytes(s.begin(), s.end()));
}

inline std::filesystem::path ensure_dir(const std::filesystem::path& p) {
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec || !std::filesystem::is_directory(p)) throw DataError("cannot create output directory " + p.string());
  return p;
}

// The output directory is excluded so the same run written elsewhere hashes
// the same.
inline std::string config_hash(RunConfig c) {
  c.out_dir.clear();
  return sha256_hex(to_ini(c));
}

inline Model<float> load_model_for(const RunConfig& cfg, const std::filesystem::path& ckpt, CheckpointMeta* meta = nullptr) {
  auto ck = load_checkpoint(ckpt);
  const auto want = cfg.model_config();
  const auto& have = ck.model.config();
  if (have.num_classes != want.num_classes) {
    throw ConfigError("class-count mismatch: checkpoint has " + std::to_string(have.num_classes) +
                      " classes, config selects " + std::to_string(want.num_classes) + " (" + cfg.data.class_merge + ")");
  }
  if (have.input_h != want.input_h || have.input_w != want.input_w) {
    throw ConfigError("checkpoint input is " + std::to_string(have.input_h) + "x" + std::to_string(have.input_w) +
                      " but preprocess.size is " + std::to_string(want.input_h) + "x" + std::to_string(want.input_w));
  }
  if (meta) *meta = ck.meta;
  return std::move(ck.model);
}

inline ImageF load_preprocessed(const RunConfig& cfg, const std::filesystem::path& image) {
  if (!std::filesystem::is_regular_file(image)) throw DataError("image not found: " + image.string());
  return to_unit(preprocess(load_image(image), cfg.preprocess));
}

}  // namespace detail

struct TrainOptions {
  std::filesystem::path config;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  bool emit_svg = false;
  bool verify_grads = false;
};

inline RunConfig resolve_train_config(const TrainOptions& o) {
  auto cfg = load_run_config(o.config);
  if (o.epochs) cfg.epochs = *o.epochs;
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.out_dir = *o.out;
  cfg.validate();
  return cfg;
}

// Writes history.csv, checkpoint_best.drx, checkpoint_final.drx, split.csv,
// config.ini and manifest.txt under the output directory.
inline void cmd_train(const TrainOptions& o, std::ostream& log) {
  const auto cfg = resolve_train_config(o);
  std::vector<std::string> warnings;
  const auto idx = build_index(cfg, &warnings);
  for (const auto& w : warnings) log << "warning: " << w << "\n";
  const auto d = prepare_data(idx, cfg.preprocess);
  const auto tc = cfg.train_config();
  log << "data: " << d.train.size() << " train / " << d.val.size() << " val / " << d.test.size() << " test, "
      << d.num_classes << " classes\n";
  Model<float> model(cfg.model_config(), cfg.seed);
  log << "model: " << model.num_scalars() << " parameters\n";

  if (o.verify_grads) {
    if (d.train.empty()) throw DataError("verify-grads: the train split is empty");
    const std::size_t nb = std::min(tc.batch_size, d.train.size());
    const auto r = verify_gradients(model, d, std::span<const std::size_t>(d.train.data(), nb), tc);
    log << "verify-grads: max rel error " << r.check.max_rel_error << " over " << r.check.coordinates
        << " coordinates (worst " << r.worst_param << ": analytic " << r.check.analytic << ", numeric "
        << r.check.numeric << "), " << r.check.nonsmooth << " skipped at kinks\n";
    if (r.check.nonsmooth * 2 > r.check.coordinates + r.check.nonsmooth) {
      throw NumericError("verify-grads: most sampled coordinates sit at a kink; no usable comparison");
    }
    if (!(r.check.max_rel_error < 1e-4)) {
      throw NumericError("verify-grads: gradient mismatch " + detail::fmt_num(r.check.max_rel_error) + " in " +
                         r.worst_param);
    }
  }

  const auto dir = detail::ensure_dir(cfg.out_dir);
  auto result = train(std::move(model), d, tc, [&](const EpochRecord& e) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "epoch %zu/%zu  loss %.4f  val_loss %.4f  acc %.4f  val_acc %.4f  lr %.3g\n",
                  e.epoch, tc.epochs, e.train_loss, e.val_loss, e.train_acc, e.val_acc, e.lr);
    log << buf << std::flush;
  });

  const auto chash = detail::config_hash(cfg);
  CheckpointMeta meta{{"config_sha256", chash},
                      {"seed", std::to_string(cfg.seed)},
                      {"classes", detail::join(d.class_names, ";")},
                      {"class_merge", cfg.data.class_merge}};
  auto best_meta = meta;
  best_meta["epoch"] = std::to_string(result.best_epoch);
  auto final_meta = meta;
  final_meta["epoch"] = std::to_string(result.history.epochs.size());
  save_checkpoint(result.best_model, dir / "checkpoint_best.drx", best_meta);
  save_checkpoint(result.final_model, dir / "checkpoint_final.drx", final_meta);
  detail::write_text(dir / "history.csv", result.history.to_csv());
  detail::write_text(dir / "split.csv", split_manifest_csv(idx));
  detail::write_text(dir / "config.ini", to_ini(cfg));
  if (o.emit_svg) detail::write_text(dir / "history.svg", history_svg(result.history));

  RunManifest m;
  m.set("artifact_version", kArtifactVersion);
  m.set("config_sha256", chash);
  m.set("seed", std::to_string(cfg.seed));
  m.set("dataset_fingerprint", dataset_fingerprint(idx));
  m.set("epochs", std::to_string(result.history.epochs.size()));
  m.set("best_epoch", std::to_string(result.best_epoch));
  m.set("checkpoint_best_sha256", sha256_file(dir / "checkpoint_best.drx"));
  m.set("checkpoint_final_sha256", sha256_file(dir / "checkpoint_final.drx"));
  m.set("history_sha256", sha256_file(dir / "history.csv"));
  detail::write_text(dir / "manifest.txt", m.text());
  log << "wrote " << dir.string() << "\n";
}

struct EvaluateOptions {
  std::filesystem::path config;
  std::filesystem::path checkpoint;
  std::string split = "test";
  std::optional<std::filesystem::path> out;
};

// report.txt, report.csv, confusion.csv, roc.txt, roc_curves.csv
inline void cmd_evaluate(const EvaluateOptions& o, std::ostream& log) {
  auto cfg = load_run_config(o.config);
  cfg.validate();
  Split split;
  try {
    split = parse_split(o.split);
  } catch (const std::exception&) {
    throw ConfigError("--split must be train, val or test");
  }
  const auto model = detail::load_model_for(cfg, o.checkpoint);
  const auto idx = build_index(cfg);
  const auto d = prepare_data(idx, cfg.preprocess);
  const auto& members = d.split(split);
  if (members.empty()) throw DataError("the " + o.split + " split is empty");

  std::vector<const ImageF*> imgs;
  std::vector<int> truth, pred;
  for (auto i : members) {
    imgs.push_back(&d.images[i]);
    truth.push_back(d.labels[i]);
  }
  const auto probs = predict(model, imgs);
  const std::size_t k = d.num_classes;
  std::vector<double> scores(probs.begin(), probs.end());
  for (std::size_t n = 0; n < members.size(); ++n) {
    pred.push_back(static_cast<int>(detail::argmax_row(std::span<const float>(probs).subspan(n * k, k))));
  }
  const auto cm = confusion(truth, pred, k, d.class_names);
  const auto report = class_report(cm);

  std::string roc_text, curves = "class,fpr,tpr\n";
  try {
    const auto roc = roc_auc_ovr(truth, scores, k);
    roc_text = render_roc(roc, d.class_names);
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t i = 0; i < roc.curves[c].fpr.size(); ++i) {
        curves += detail::csv_field(d.class_names[c]) + "," + detail::full(roc.curves[c].fpr[i]) + "," +
                  detail::full(roc.curves[c].tpr[i]) + "\n";
      }
  } catch (const DataError& e) {
    roc_text = std::string("ROC-AUC undefined: ") + e.what() + "\n";
  }

  const auto dir = detail::ensure_dir(o.out ? *o.out : cfg.out_dir / ("eval_" + o.split));
  const auto text = render_text(report);
  detail::write_text(dir / "report.txt", text);
  detail::write_text(dir / "report.csv", render_csv(report));
  detail::write_text(dir / "confusion.csv", cm.to_csv());
  detail::write_text(dir / "roc.txt", roc_text);
  detail::write_text(dir / "roc_curves.csv", curves);
  log << "split: " << o.split << " (" << members.size() << " images)\n" << text << "\n" << roc_text;
}

struct ExplainOptions {
  std::filesystem::path config;
  std::filesystem::path checkpoint;
  std::filesystem::path image;
  std::string target = "predicted";  // or a class id
  std::optional<std::string> layer;
  std::optional<std::filesystem::path> out;
};

// <stem>_overlay.png, <stem>_heatmap.csv, <stem>_membership.txt
inline void cmd_explain(const ExplainOptions& o, std::ostream& log) {
  auto cfg = load_run_config(o.config);
  cfg.validate();
  const auto model = detail::load_model_for(cfg, o.checkpoint);
  const auto img = detail::load_preprocessed(cfg, o.image);
  const auto names = cfg.merge().names;
  const auto rep = membership_report(model, img, names);

  int target = rep.predicted;
  if (o.target != "predicted") {
    std::size_t pos = 0;
    int v = -1;
    try {
      v = std::stoi(o.target, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != o.target.size() || v < 0 || static_cast<std::size_t>(v) >= names.size()) {
      throw ConfigError("--class must be 'predicted' or an id in [0," + std::to_string(names.size()) + ")");
    }
    target = v;
  }
  const auto layer = o.layer ? *o.layer : cfg.explain.layer;
  const auto hm = grad_cam(model, img, target, layer);
  const auto ov = overlay(hm, img, cfg.explain.overlay_alpha);

  const auto dir = detail::ensure_dir(o.out ? *o.out : cfg.out_dir / "explain");
  const auto stem = o.image.stem().string();
  save_image(dir / (stem + "_overlay.png"), to_u8(ov));
  detail::write_text(dir / (stem + "_heatmap.csv"), hm.to_csv());
  const auto text = rep.to_text() + "target_class=" + std::to_string(target) + "\nlayer=" + layer + "\nheatmap=" +
                    std::to_string(hm.height) + "x" + std::to_string(hm.width) + "\n";
  detail::write_text(dir / (stem + "_membership.txt"), text);
  log << text;
}

struct PreviewOptions {
  std::filesystem::path config;
  std::filesystem::path image;
  std::optional<std::filesystem::path> out;
};

// One PNG per preprocessing stage, in configured order, then one
// augmentation draw: <k>_<stage>.png.
inline void cmd_preview(const PreviewOptions& o, std::ostream& log) {
  auto cfg = load_run_config(o.config);
  cfg.validate();
  if (!std::filesystem::is_regular_file(o.image)) throw DataError("image not found: " + o.image.string());
  const auto src = load_image(o.image);
  const auto dir = detail::ensure_dir(o.out ? *o.out : cfg.out_dir / "preview");
  const auto stages = preprocess_stages(src, cfg.preprocess);
  std::size_t k = 1;
  for (const auto& [stage, img] : stages) {
    const auto name = std::to_string(k++) + "_" + stage_name(stage) + ".png";
    save_image(dir / name, img);
    log << name << "\n";
  }
  auto rng = rng_stream(cfg.seed, 0, 0, 0x9e1u);
  const auto last = stages.empty() ? src : stages.back().second;
  const auto aug = to_u8(augment(to_unit(last), cfg.augment, rng));
  const auto name = std::to_string(k) + "_augment.png";
  save_image(dir / name, aug);
  log << name << "\n";
}

struct SynthOptions {
  std::optional<std::filesystem::path> spec;  // INI with a [synthetic] section
  std::filesystem::path out;
};

// <id>.ppm per sample, labels.csv (id_code,diagnosis) and lesions.csv.
inline void cmd_synth(const SynthOptions& o, std::ostream& log) {
  SyntheticSpec spec;
  if (o.spec) spec = load_run_config(*o.spec).synthetic;
  spec.validate();
  const auto idx = synthesize_fundus(spec);
  const auto dir = detail::ensure_dir(o.out);
  std::string labels = "id_code,diagnosis\n", boxes = "id_code,x0,y0,x1,y1\n";
  for (const auto& s : idx.samples) {
    try {
      write_file(dir / (s.id + ".ppm"), encode_ppm(*s.image));
    } catch (const std::exception& e) {
      throw DataError(std::string("synth: ") + e.what());
    }
    labels += s.id + "," + std::to_string(s.grade) + "\n";
    for (const auto& b : s.lesions) {
      boxes += s.id + "," + std::to_string(b.x0) + "," + std::to_string(b.y0) + "," + std::to_string(b.x1) + "," +
               std::to_string(b.y1) + "\n";
    }
  }
  detail::write_text(dir / "labels.csv", labels);
  detail::write_text(dir / "lesions.csv", boxes);
  log << "wrote " << idx.size() << " images to " << dir.string() << "\n";
}

inline void cmd_init_config(const std::optional<std::filesystem::path>& out, std::ostream& log) {
  const auto text = to_ini(RunConfig{});
  if (!out) {
    log << text;
    return;
  }
  if (out->has_parent_path()) detail::ensure_dir(out->parent_path());
  detail::write_text(*out, text);
  log << "wrote " << out->string() << "\n";
}

// Both oracle suites; throws NumericError when any line fails.
inline void cmd_verify(std::uint64_t seed, std::ostream& log) {
  auto lines = gradient_oracle_suite(seed);
  const auto metric = metric_oracle_suite(seed);
  lines.insert(lines.end(), metric.begin(), metric.end());
  for (const auto& l : lines) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-4s %-48s err %.3e  tol %.0e\n", l.pass ? "ok" : "FAIL", l.name.c_str(), l.error,
                  l.tolerance);
    log << buf;
  }
  if (!all_pass(lines)) throw NumericError("verify: oracle mismatch");
  log << "all " << lines.size() << " oracle checks passed\n";
}

}  // namespace drx
