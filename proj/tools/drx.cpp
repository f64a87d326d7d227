// drx: train / evaluate / explain / preview / synth / init-config / verify

#include <CLI11.hpp>
#include <iostream>

#include "drx/cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace drx;
  CLI::App app{"Attention-augmented fuzzy CNN for diabetic retinopathy grading"};
  app.require_subcommand(1);

  TrainOptions train_opt;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  std::string out;
  auto* train = app.add_subcommand("train", "train a model from a run config");
  train->add_option("--config", train_opt.config, "run config (INI)")->required();
  auto* epochs_opt = train->add_option("--epochs", epochs, "override train.epochs");
  auto* seed_opt = train->add_option("--seed", seed, "override train.seed");
  auto* out_opt = train->add_option("--out", out, "override output.dir");
  train->add_flag("--emit-svg", train_opt.emit_svg, "also write history.svg");
  train->add_flag("--verify-grads", train_opt.verify_grads, "check one batch against finite differences first");

  EvaluateOptions eval_opt;
  std::string eval_out;
  auto* evaluate = app.add_subcommand("evaluate", "classification report for a checkpoint");
  evaluate->add_option("--config", eval_opt.config, "run config (INI)")->required();
  evaluate->add_option("--checkpoint", eval_opt.checkpoint, "checkpoint file")->required();
  evaluate->add_option("--split", eval_opt.split, "train, val or test")->capture_default_str();
  auto* eval_out_opt = evaluate->add_option("--out", eval_out, "output directory");

  ExplainOptions explain_opt;
  std::string explain_out, layer;
  auto* explain = app.add_subcommand("explain", "Grad-CAM overlay and membership report for one image");
  explain->add_option("--config", explain_opt.config, "run config (INI)")->required();
  explain->add_option("--checkpoint", explain_opt.checkpoint, "checkpoint file")->required();
  explain->add_option("--image", explain_opt.image, "PNG or PPM image")->required();
  explain->add_option("--class", explain_opt.target, "'predicted' or a class id")->capture_default_str();
  auto* layer_opt = explain->add_option("--layer", layer, "target layer id (default explain.layer)");
  auto* explain_out_opt = explain->add_option("--out", explain_out, "output directory");

  PreviewOptions preview_opt;
  std::string preview_out;
  auto* preview = app.add_subcommand("preview", "write every preprocessing stage and one augmentation draw");
  preview->add_option("--config", preview_opt.config, "run config (INI)")->required();
  preview->add_option("--image", preview_opt.image, "PNG or PPM image")->required();
  auto* preview_out_opt = preview->add_option("--out", preview_out, "output directory");

  SynthOptions synth_opt;
  std::string spec;
  auto* synth = app.add_subcommand("synth", "generate a synthetic fundus dataset in APTOS layout");
  auto* spec_opt = synth->add_option("--spec", spec, "INI file with a [synthetic] section");
  synth->add_option("--out", synth_opt.out, "output directory")->required();

  std::string init_out;
  auto* init = app.add_subcommand("init-config", "print or write a config with every default");
  auto* init_out_opt = init->add_option("--out", init_out, "destination file (stdout if omitted)");

  std::uint64_t verify_seed = 1;
  auto* verify = app.add_subcommand("verify", "run the gradient and metric oracle suites");
  verify->add_option("--seed", verify_seed, "seed for the randomized instances")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  auto& log = std::cout;
  return run_guarded(
      [&] {
        if (*train) {
          if (*epochs_opt) train_opt.epochs = epochs;
          if (*seed_opt) train_opt.seed = seed;
          if (*out_opt) train_opt.out = out;
          cmd_train(train_opt, log);
        } else if (*evaluate) {
          if (*eval_out_opt) eval_opt.out = eval_out;
          cmd_evaluate(eval_opt, log);
        } else if (*explain) {
          if (*layer_opt) explain_opt.layer = layer;
          if (*explain_out_opt) explain_opt.out = explain_out;
          cmd_explain(explain_opt, log);
        } else if (*preview) {
          if (*preview_out_opt) preview_opt.out = preview_out;
          cmd_preview(preview_opt, log);
        } else if (*synth) {
          if (*spec_opt) synth_opt.spec = spec;
          cmd_synth(synth_opt, log);
        } else if (*init) {
          cmd_init_config(*init_out_opt ? std::optional<std::filesystem::path>(init_out) : std::nullopt, log);
        } else if (*verify) {
          cmd_verify(verify_seed, log);
        }
      },
      std::cerr);
}
