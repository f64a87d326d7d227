#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "drx/dataset/index.hpp"
#include "drx/dataset/synthetic.hpp"

using namespace drx;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("drx_dataset_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

DatasetIndex index_with_grades(const std::vector<std::size_t>& per_grade) {
  DatasetIndex idx;
  for (std::size_t g = 0; g < per_grade.size(); ++g)
    for (std::size_t i = 0; i < per_grade[g]; ++i) {
      LabeledSample s;
      s.id = "g" + std::to_string(g) + "_" + std::to_string(i);
      s.grade = s.label = static_cast<int>(g);
      idx.samples.push_back(s);
    }
  return idx;
}

std::array<std::size_t, 3> split_counts(const DatasetIndex& idx, int grade) {
  std::array<std::size_t, 3> c{};
  for (const auto& s : idx.samples)
    if (s.grade == grade) ++c[static_cast<std::size_t>(*s.split)];
  return c;
}

}  // namespace

TEST(LoadCsv, ThreeRowsInFileOrder) {
  TempDir dir;
  write_text(dir.path / "labels.csv", "id_code,diagnosis\r\nb,0\r\na,2\r\nc,4\r\n");
  for (const char* id : {"a", "b", "c"}) write_file(dir.path / (std::string(id) + ".ppm"), encode_ppm(ImageU8(2, 2, 9)));
  auto idx = load_csv_index(dir.path / "labels.csv", dir.path);
  ASSERT_EQ(idx.size(), 3u);
  EXPECT_EQ(idx.samples[0].id, "b");
  EXPECT_EQ(idx.samples[1].grade, 2);
  EXPECT_EQ(idx.samples[2].grade, 4);
  EXPECT_EQ(idx.image(1).at(1, 1, 2), 9);
}

TEST(LoadCsv, BadDiagnosisNamesRow) {
  TempDir dir;
  write_text(dir.path / "labels.csv", "id_code,diagnosis\na,1\nb,5\n");
  write_file(dir.path / "a.ppm", encode_ppm(ImageU8(1, 1)));
  write_file(dir.path / "b.ppm", encode_ppm(ImageU8(1, 1)));
  try {
    load_csv_index(dir.path / "labels.csv", dir.path);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
  }
}

TEST(LoadCsv, MissingFilesAreCollected) {
  TempDir dir;
  write_text(dir.path / "labels.csv", "id_code,diagnosis\na,1\nb,0\nc,3\n");
  write_file(dir.path / "b.ppm", encode_ppm(ImageU8(1, 1)));
  try {
    load_csv_index(dir.path / "labels.csv", dir.path);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 2 (a)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("row 4 (c)"), std::string::npos) << msg;
  }
}

TEST(LoadCsv, MalformedRowAndHeader) {
  TempDir dir;
  write_text(dir.path / "x.csv", "id_code,diagnosis\na,1,extra\n");
  EXPECT_THROW(load_csv_index(dir.path / "x.csv", dir.path), DataError);
  write_text(dir.path / "y.csv", "image,level\na,1\n");
  EXPECT_THROW(load_csv_index(dir.path / "y.csv", dir.path), DataError);
}

TEST(StratifiedSplit, ExactDivision) {
  auto idx = stratified_split(index_with_grades({100}), {}, 1);
  EXPECT_EQ(split_counts(idx, 0), (std::array<std::size_t, 3>{70, 15, 15}));
}

TEST(StratifiedSplit, UnevenClassSizes) {
  // enumerated largest-remainder allocation
  // 60 -> 42/9/9; 30 -> 21/4.5/4.5 -> 21/5/4; 10 -> 7/1.5/1.5 -> 7/2/1
  auto idx = stratified_split(index_with_grades({60, 30, 10}), {}, 3);
  EXPECT_EQ(split_counts(idx, 0), (std::array<std::size_t, 3>{42, 9, 9}));
  EXPECT_EQ(split_counts(idx, 1), (std::array<std::size_t, 3>{21, 5, 4}));
  EXPECT_EQ(split_counts(idx, 2), (std::array<std::size_t, 3>{7, 2, 1}));
}

TEST(StratifiedSplit, ProportionsWithinOneSampleRandomized) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> d(3, 400);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> sizes(5);
    for (auto& s : sizes) s = d(rng);
    auto idx = stratified_split(index_with_grades(sizes), {}, static_cast<std::uint64_t>(trial));
    for (int g = 0; g < 5; ++g) {
      auto c = split_counts(idx, g);
      const double n = static_cast<double>(sizes[static_cast<std::size_t>(g)]);
      EXPECT_LT(std::abs(c[0] - 0.70 * n), 1.0);
      EXPECT_LT(std::abs(c[1] - 0.15 * n), 1.0);
      EXPECT_LT(std::abs(c[2] - 0.15 * n), 1.0);
      EXPECT_EQ(c[0] + c[1] + c[2], sizes[static_cast<std::size_t>(g)]);
    }
  }
}

TEST(StratifiedSplit, DeterministicAndSeedSensitive) {
  auto base = index_with_grades({40, 40});
  auto a = stratified_split(base, {}, 5);
  auto b = stratified_split(base, {}, 5);
  auto c = stratified_split(base, {}, 6);
  EXPECT_EQ(split_manifest_csv(a), split_manifest_csv(b));
  EXPECT_NE(split_manifest_csv(a), split_manifest_csv(c));
}

TEST(StratifiedSplit, TinyClassGoesToTrainWithWarning) {
  std::vector<std::string> warnings;
  auto idx = stratified_split(index_with_grades({20, 2}), {}, 1, &warnings);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_EQ(split_counts(idx, 1), (std::array<std::size_t, 3>{2, 0, 0}));
}

TEST(StratifiedSplit, RejectsBadFractions) {
  EXPECT_THROW(stratified_split(index_with_grades({10}), {0.5, 0.3, 0.3}, 1), ConfigError);
  EXPECT_THROW(stratified_split(index_with_grades({10}), {1.0, 0.0, 0.0}, 1), ConfigError);
}

TEST(ClassDistribution, EmptyAndBalanced) {
  DatasetIndex empty;
  auto d0 = class_distribution(empty);
  EXPECT_EQ(d0.total, 0u);
  for (auto c : d0.counts) EXPECT_EQ(c, 0u);
  for (auto f : d0.fractions) EXPECT_EQ(f, 0.0);

  auto d = class_distribution(index_with_grades({20, 20, 20, 20, 20}));
  for (auto f : d.fractions) EXPECT_DOUBLE_EQ(f, 0.2);
  EXPECT_NE(d.to_text().find("Proliferative DR"), std::string::npos);
  EXPECT_EQ(d.to_csv().substr(0, 25), "class,name,count,fraction");
}

TEST(MergeClasses, IdentityAndTableOne) {
  auto idx = index_with_grades({1, 1, 1, 1, 1});
  auto same = merge_classes(idx, ClassMergeMap::identity());
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(same.samples[i].label, idx.samples[i].label);
  auto merged = merge_classes(stratified_split(index_with_grades({10, 10, 10, 10, 10}), {}, 2), ClassMergeMap::three_class());
  const std::array<int, 5> expect{0, 1, 1, 2, 2};
  for (const auto& s : merged.samples) {
    EXPECT_EQ(s.label, expect[static_cast<std::size_t>(s.grade)]);
    EXPECT_TRUE(s.split.has_value());
  }
  EXPECT_EQ(merged.num_classes(), 3u);
  const auto d = class_distribution(merged);
  EXPECT_EQ(d.total, merged.size());
  EXPECT_EQ(d.counts, (std::vector<std::size_t>{10, 20, 20}));
}

TEST(MergeClasses, InvalidMapRejected) {
  ClassMergeMap bad = ClassMergeMap::three_class();
  bad.to_merged = {0, 1, 1, 1, 1};  // id 2 unused
  EXPECT_THROW(merge_classes(index_with_grades({1}), bad), ConfigError);
  bad.to_merged = {0, 1, 2, 3, 2};
  EXPECT_THROW(merge_classes(index_with_grades({1}), bad), ConfigError);
}

TEST(Oversample, ReplicatesMinority) {
  auto idx = index_with_grades({100, 10});
  idx.merge.names = {"a", "b"};
  for (auto& s : idx.samples) s.split = Split::train;
  auto out = oversample(idx, Split::train, OversampleTarget::balance(), 3);
  auto d = class_distribution(out, Split::train);
  EXPECT_EQ(d.counts, (std::vector<std::size_t>{100, 100}));
  std::size_t replicas = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i < idx.size()) EXPECT_EQ(out.samples[i].id, idx.samples[i].id);
    if (out.samples[i].replica_of) {
      ++replicas;
      EXPECT_EQ(out.samples[*out.samples[i].replica_of].grade, 1);
    }
  }
  EXPECT_EQ(replicas, 90u);
}

TEST(Oversample, BalancedIsUnchangedAndGuardsSplits) {
  auto idx = stratified_split(index_with_grades({20, 20}), {}, 1);
  idx.merge.names = {"a", "b"};
  auto out = oversample(idx, Split::train, OversampleTarget::balance(), 3);
  EXPECT_EQ(out.size(), idx.size());
  EXPECT_THROW(oversample(idx, Split::test, OversampleTarget::balance(), 3), DataError);
  EXPECT_THROW(oversample(idx, Split::val, OversampleTarget::balance(), 3), DataError);

  auto targeted = oversample(idx, Split::train, OversampleTarget::per_class({20, 30}), 3);
  EXPECT_EQ(class_distribution(targeted, Split::train).counts, (std::vector<std::size_t>{20, 30}));
  // val/test untouched
  EXPECT_EQ(targeted.indices(Split::val), idx.indices(Split::val));
  EXPECT_EQ(targeted.indices(Split::test), idx.indices(Split::test));
}

TEST(Synthetic, LesionScheduleAndDeterminism) {
  SyntheticSpec spec;
  spec.counts = {2, 2, 2, 2, 2};
  auto a = synthesize_fundus(spec);
  auto b = synthesize_fundus(spec);
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(*a.samples[i].image, *b.samples[i].image);
    EXPECT_EQ(a.samples[i].image->height, 64u);
  }
  EXPECT_TRUE(a.samples[0].lesions.empty());
  EXPECT_GT(a.samples[8].lesions.size(), a.samples[2].lesions.size());
  spec.seed = 8;
  EXPECT_NE(*synthesize_fundus(spec).samples[0].image, *a.samples[0].image);
}

TEST(Synthetic, LesionBoxesInsideDisc) {
  SyntheticSpec spec;
  for (std::size_t size : {32u, 64u, 96u}) {
    spec.image_size = size;
    for (std::size_t i = 0; i < 40; ++i) {
      DiscGeometry disc;
      auto s = render_synthetic(spec, 4, i, &disc);
      for (const auto& b : s.lesions)
        for (int y : {b.y0, b.y1})
          for (int x : {b.x0, b.x1}) {
            const double dx = x - disc.cx, dy = y - disc.cy;
            EXPECT_LE(std::sqrt(dx * dx + dy * dy), disc.r) << "size " << size;
          }
    }
  }
}

TEST(Synthetic, RoundTripsThroughCsvLoader) {
  TempDir dir;
  SyntheticSpec spec;
  spec.counts = {2, 1, 1, 1, 1};
  auto idx = synthesize_fundus(spec);
  std::string csv = "id_code,diagnosis\n";
  for (const auto& s : idx.samples) {
    write_file(dir.path / (s.id + ".ppm"), encode_ppm(*s.image));
    csv += s.id + "," + std::to_string(s.grade) + "\n";
  }
  write_text(dir.path / "labels.csv", csv);
  auto back = load_csv_index(dir.path / "labels.csv", dir.path);
  ASSERT_EQ(back.size(), idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) EXPECT_EQ(back.image(i), *idx.samples[i].image);
}
