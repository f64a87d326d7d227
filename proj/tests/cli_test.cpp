#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "drx/cli/commands.hpp"

namespace fs = std::filesystem;
using namespace drx;

namespace {

fs::path scratch(const std::string& name) {
  // per process: ctest runs each case separately and possibly in parallel
  const auto p = fs::temp_directory_path() / ("drx_cli_test_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

// Small enough to train in a couple of seconds.
const char* kTinyConfig = R"([synthetic]
image_size = 64
counts = 8,6,6,6,6
[preprocess]
size = 32x32
order = resize
[augment]
flip = false
rotate = false
zoom = false
brightness = false
mixup = false
[model]
stages = 4/2/2,8/2/2
head_dim = 4
[train]
epochs = 2
batch_size = 8
seed = 5
[output]
dir = run
)";

fs::path write_config(const fs::path& dir, const std::string& text = kTinyConfig) {
  const auto p = dir / "run.ini";
  std::ofstream(p) << text;
  return p;
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string("\"") + DRX_BIN + "\" " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(RunConfig, DefaultsRoundTripThroughIni) {
  const RunConfig def;
  const auto text = to_ini(def);
  const auto back = parse_run_config(text);
  EXPECT_EQ(to_ini(back), text);
  EXPECT_EQ(back.stages.size(), def.stages.size());
  EXPECT_EQ(back.model_config().to_text(), def.model_config().to_text());
  EXPECT_NO_THROW(back.validate());
}

TEST(RunConfig, NonDefaultValuesRoundTrip) {
  const auto c = parse_run_config(kTinyConfig);
  EXPECT_EQ(c.preprocess.out_h, 32u);
  EXPECT_EQ(c.stages.size(), 2u);
  EXPECT_EQ(c.stages[1].channels, 8u);
  EXPECT_EQ(c.epochs, 2u);
  const auto again = parse_run_config(to_ini(c));
  EXPECT_EQ(to_ini(again), to_ini(c));
}

TEST(RunConfig, UnknownKeysAndSectionsAreRejected) {
  EXPECT_THROW(parse_run_config("[train]\nepochz = 3\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[nonsense]\na = 1\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[train]\nepochs = three\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[model]\nstages = 4/2\n"), ConfigError);
}

TEST(RunConfig, RelativePathsFollowTheConfigFile) {
  const auto dir = scratch("rebase");
  const auto p = write_config(dir, "[data]\nsource = csv\ncsv = a/labels.csv\nimages = a\n[output]\ndir = out\n");
  const auto c = load_run_config(p);
  EXPECT_EQ(c.data.csv, dir / "a/labels.csv");
  EXPECT_EQ(c.out_dir, dir / "out");
}

TEST(RunConfig, MissingDatasetPathNamesTheField) {
  auto c = parse_run_config("[data]\nsource = csv\ncsv = /nonexistent/labels.csv\nimages = /nonexistent\n");
  try {
    c.validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("data.csv"), std::string::npos) << e.what();
  }
}

TEST(Manifest, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Cli, SynthWritesOneFilePerSample) {
  const auto dir = scratch("synth");
  write_config(dir, "[synthetic]\nimage_size = 64\ncounts = 10,10,10,10,10\n");
  std::ostringstream log;
  cmd_synth({dir / "run.ini", dir / "out"}, log);
  std::size_t ppm = 0;
  for (const auto& e : fs::directory_iterator(dir / "out")) ppm += e.path().extension() == ".ppm";
  EXPECT_EQ(ppm, 50u);
  const auto labels = slurp(dir / "out" / "labels.csv");
  EXPECT_EQ(count_lines(labels), 51u);
  EXPECT_EQ(labels.substr(0, labels.find('\n')), "id_code,diagnosis");

  // the written dataset loads back through the csv source
  const auto idx = load_csv_index(dir / "out" / "labels.csv", dir / "out");
  EXPECT_EQ(idx.size(), 50u);
}

class TrainedRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = scratch("train");
    config_ = write_config(dir_);
    std::ostringstream log;
    TrainOptions o;
    o.config = config_;
    o.emit_svg = true;
    cmd_train(o, log);
    cmd_synth({config_, dir_ / "imgs"}, log);
  }
  static fs::path dir_, config_;
};
fs::path TrainedRun::dir_, TrainedRun::config_;

TEST_F(TrainedRun, WritesArtifactsWithOneHistoryRowPerEpoch) {
  const auto run = dir_ / "run";
  for (const char* f : {"checkpoint_best.drx", "checkpoint_final.drx", "history.csv", "history.svg", "split.csv",
                        "config.ini", "manifest.txt"}) {
    EXPECT_TRUE(fs::exists(run / f)) << f;
  }
  EXPECT_EQ(count_lines(slurp(run / "history.csv")), 3u);  // header + 2 epochs
}

TEST_F(TrainedRun, EpochOverrideAndManifestDeterminism) {
  std::ostringstream log;
  TrainOptions o;
  o.config = config_;
  o.epochs = 1;
  o.out = dir_ / "one_a";
  cmd_train(o, log);
  o.out = dir_ / "one_b";
  cmd_train(o, log);
  EXPECT_EQ(count_lines(slurp(dir_ / "one_a" / "history.csv")), 2u);
  const auto a = slurp(dir_ / "one_a" / "manifest.txt"), b = slurp(dir_ / "one_b" / "manifest.txt");
  EXPECT_EQ(a, b);
  EXPECT_NE(a.find("dataset_fingerprint="), std::string::npos);
  EXPECT_NE(a.find("artifact_version="), std::string::npos);
}

TEST_F(TrainedRun, EvaluateIsDeterministic) {
  std::ostringstream log;
  EvaluateOptions o;
  o.config = config_;
  o.checkpoint = dir_ / "run" / "checkpoint_best.drx";
  o.out = dir_ / "eval_a";
  cmd_evaluate(o, log);
  o.out = dir_ / "eval_b";
  cmd_evaluate(o, log);
  for (const char* f : {"report.txt", "report.csv", "confusion.csv", "roc.txt", "roc_curves.csv"}) {
    ASSERT_TRUE(fs::exists(dir_ / "eval_a" / f)) << f;
    EXPECT_EQ(slurp(dir_ / "eval_a" / f), slurp(dir_ / "eval_b" / f)) << f;
  }
  const auto report = slurp(dir_ / "eval_a" / "report.txt");
  EXPECT_NE(report.find("Macro Avg"), std::string::npos);
  EXPECT_NE(report.find("Weighted Avg"), std::string::npos);
}

TEST_F(TrainedRun, ExplainWritesOverlayHeatmapAndMemberships) {
  const auto image = dir_ / "imgs" / "syn00000.ppm";
  ASSERT_TRUE(fs::exists(image));

  auto explain_into = [&](const std::string& target, const std::string& sub) {
    std::ostringstream log;
    ExplainOptions o;
    o.config = config_;
    o.checkpoint = dir_ / "run" / "checkpoint_best.drx";
    o.image = image;
    o.target = target;
    o.layer = "stage1";
    o.out = dir_ / sub;
    cmd_explain(o, log);
    return dir_ / sub;
  };
  const auto a = explain_into("0", "ex0"), b = explain_into("2", "ex2");
  ASSERT_TRUE(fs::exists(a / "syn00000_overlay.png"));
  const auto overlay = load_image(a / "syn00000_overlay.png");
  EXPECT_EQ(overlay.height, 32u);
  EXPECT_EQ(overlay.width, 32u);

  const auto heat = slurp(a / "syn00000_heatmap.csv");
  std::istringstream rows(heat);
  std::string row;
  std::size_t h = 0, w = 0;
  while (std::getline(rows, row)) {
    ++h;
    w = std::count(row.begin(), row.end(), ',') + 1;
  }
  EXPECT_EQ(h, 16u);  // stage1 of a 32x32 input at stride 2
  EXPECT_EQ(w, 16u);
  EXPECT_NE(heat, slurp(b / "syn00000_heatmap.csv"));

  const auto mem = slurp(a / "syn00000_membership.txt");
  EXPECT_NE(mem.find("memberships=["), std::string::npos);
  EXPECT_NE(mem.find("target_class=0"), std::string::npos);
  auto line = [](const std::string& text, const std::string& key) {
    const auto at = text.find(key);
    return at == std::string::npos ? std::string() : text.substr(at, text.find('\n', at) - at);
  };
  // the membership report does not depend on the explained class
  const auto mem2 = slurp(b / "syn00000_membership.txt");
  EXPECT_EQ(line(mem, "memberships_full="), line(mem2, "memberships_full="));
  EXPECT_NE(line(mem2, "target_class="), "");
}

TEST_F(TrainedRun, ExplainRejectsABadClass) {
  std::ostringstream log;
  ExplainOptions o;
  o.config = config_;
  o.checkpoint = dir_ / "run" / "checkpoint_best.drx";
  o.image = dir_ / "imgs" / "syn00000.ppm";
  o.target = "7";
  EXPECT_THROW(cmd_explain(o, log), ConfigError);
}

TEST(Cli, PreviewWritesEveryStage) {
  const auto dir = scratch("preview");
  write_config(dir);
  std::ostringstream slog;
  cmd_synth({dir / "run.ini", dir / "imgs"}, slog);
  const auto cfg_path = write_config(dir, R"([synthetic]
image_size = 64
[preprocess]
size = 48x48
order = crop,resize,clahe,gamma
[augment]
flip = false
rotate = false
zoom = false
brightness = false
mixup = false
)");
  std::ostringstream log;
  cmd_preview({cfg_path, dir / "imgs" / "syn00000.ppm", dir / "pv"}, log);
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir / "pv")) n += e.path().extension() == ".png";
  EXPECT_EQ(n, 5u);
  const auto resized = load_image(dir / "pv" / "2_resize.png");
  const auto clahe = load_image(dir / "pv" / "3_clahe.png");
  const auto gamma = load_image(dir / "pv" / "4_gamma.png");
  const auto aug = load_image(dir / "pv" / "5_augment.png");
  EXPECT_EQ(resized.height, 48u);
  EXPECT_NE(resized.pixels, clahe.pixels);
  EXPECT_EQ(gamma.pixels, aug.pixels);  // augmentation disabled: identity
}

TEST(Cli, InitConfigParsesBack) {
  const auto dir = scratch("init");
  std::ostringstream log;
  cmd_init_config(dir / "default.ini", log);
  EXPECT_EQ(to_ini(parse_run_config(slurp(dir / "default.ini"))), to_ini(RunConfig{}));
  EXPECT_EQ(load_run_config(dir / "default.ini").out_dir, dir / "runs/default");
}

TEST(CliBinary, ExitCodes) {
  const auto dir = scratch("exit");
  EXPECT_EQ(run_binary("init-config"), 0);
  EXPECT_EQ(run_binary("no-such-command"), 2);
  EXPECT_EQ(run_binary("train"), 2);  // --config missing

  std::ofstream(dir / "bad_key.ini") << "[train]\nepochz = 1\n";
  EXPECT_EQ(run_binary("train --config " + (dir / "bad_key.ini").string()), 2);

  std::ofstream(dir / "missing.ini") << "[data]\nsource = csv\ncsv = nowhere.csv\nimages = nowhere\n";
  EXPECT_EQ(run_binary("train --config " + (dir / "missing.ini").string()), 2);

  std::ofstream(dir / "ok.ini") << "[synthetic]\nimage_size = 64\n";
  EXPECT_EQ(run_binary("preview --config " + (dir / "ok.ini").string() + " --image " + (dir / "none.png").string() +
                       " --out " + (dir / "pv").string()),
            3);

  std::ofstream(dir / "garbage.ppm") << "P6\n4 4\n255\nxx";
  EXPECT_EQ(run_binary("preview --config " + (dir / "ok.ini").string() + " --image " + (dir / "garbage.ppm").string() +
                       " --out " + (dir / "pv").string()),
            3);
}
