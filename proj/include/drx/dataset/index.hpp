#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "drx/errors.hpp"
#include "drx/imaging/augment.hpp"
#include "drx/imaging/codec.hpp"
#include "drx/imaging/image.hpp"

namespace drx {

inline constexpr int kNumGrades = 5;
inline const std::array<const char*, kNumGrades> kGradeNames{"No DR", "Mild", "Moderate", "Severe",
                                                             "Proliferative DR"};

enum class Split { train, val, test };

inline std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + s + "'");
}

// Half-open pixel rectangle [x0,x1)×[y0,y1).
struct Box {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

struct LabeledSample {
  std::string id;
  int grade = 0;  // raw 0..4
  int label = 0;  // after class merge
  std::filesystem::path path;
  std::optional<ImageU8> image;
  std::optional<Split> split;
  std::vector<Box> lesions;  // synthetic data only
  std::optional<std::size_t> replica_of;
};

// Surjective map from raw grades onto contiguous merged class ids.
struct ClassMergeMap {
  std::array<int, kNumGrades> to_merged{0, 1, 2, 3, 4};
  std::vector<std::string> names{kGradeNames.begin(), kGradeNames.end()};
  std::string id = "5class";

  static ClassMergeMap identity() { return {}; }

  // {0}, {1,2}, {3,4}
  static ClassMergeMap three_class() {
    return {{0, 1, 1, 2, 2}, {"No DR", "Mild/Moderate DR", "Severe/Proliferative DR"}, "3class"};
  }

  static ClassMergeMap by_name(const std::string& name) {
    if (name == "5class") return identity();
    if (name == "3class") return three_class();
    throw ConfigError("unknown class merge '" + name + "' (expected 5class or 3class)");
  }

  std::size_t num_classes() const { return names.size(); }

  void validate() const {
    std::vector<bool> hit(names.size(), false);
    for (int m : to_merged) {
      if (m < 0 || static_cast<std::size_t>(m) >= names.size()) throw ConfigError("class merge: grade mapped outside [0,K)");
      hit[static_cast<std::size_t>(m)] = true;
    }
    for (bool h : hit)
      if (!h) throw ConfigError("class merge: merged ids are not contiguous");
  }

  int apply(int grade) const {
    if (grade < 0 || grade >= kNumGrades) throw DataError("class merge: unmapped grade " + std::to_string(grade));
    return to_merged[static_cast<std::size_t>(grade)];
  }
};

struct DatasetIndex {
  std::vector<LabeledSample> samples;
  ClassMergeMap merge;

  std::size_t size() const { return samples.size(); }
  std::size_t num_classes() const { return merge.num_classes(); }

  std::vector<std::size_t> indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (samples[i].split == s) out.push_back(i);
    return out;
  }

  ImageU8 image(std::size_t i) const {
    const auto& s = samples.at(i);
    if (s.image) return *s.image;
    ImageU8 img = load_image(s.path);
    img.source_id = s.id;
    return img;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  for (auto& c : cells) {
    const auto b = c.find_first_not_of(" \t");
    const auto e = c.find_last_not_of(" \t");
    c = b == std::string::npos ? std::string() : c.substr(b, e - b + 1);
  }
  return cells;
}

}  // namespace detail

// APTOS layout: `id_code,diagnosis` header and `<id_code>.png` (or .ppm) images.
inline DatasetIndex load_csv_index(const std::filesystem::path& csv_path, const std::filesystem::path& image_dir) {
  std::ifstream in(csv_path);
  if (!in) throw DataError("cannot open label file " + csv_path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(csv_path.string() + ": empty file");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);  // UTF-8 BOM
  const auto header = detail::split_csv_line(line);
  const auto id_col = std::find(header.begin(), header.end(), "id_code") - header.begin();
  const auto dx_col = std::find(header.begin(), header.end(), "diagnosis") - header.begin();
  if (id_col == static_cast<long>(header.size()) || dx_col == static_cast<long>(header.size())) {
    throw DataError(csv_path.string() + ": header must contain id_code and diagnosis columns");
  }

  DatasetIndex index;
  std::vector<std::string> missing;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError(csv_path.string() + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                      " fields, expected " + std::to_string(header.size()));
    }
    const std::string& id = cells[static_cast<std::size_t>(id_col)];
    const std::string& dx = cells[static_cast<std::size_t>(dx_col)];
    if (id.empty()) throw DataError(csv_path.string() + ": row " + std::to_string(row) + " has an empty id_code");
    if (dx.size() != 1 || dx[0] < '0' || dx[0] > '4') {
      throw DataError(csv_path.string() + ": row " + std::to_string(row) + " diagnosis '" + dx +
                      "' is not a grade in 0..4");
    }
    LabeledSample s;
    s.id = id;
    s.grade = dx[0] - '0';
    s.label = s.grade;
    for (const char* ext : {".png", ".ppm"}) {
      auto p = image_dir / (id + ext);
      if (std::filesystem::exists(p)) {
        s.path = p;
        break;
      }
    }
    if (s.path.empty()) missing.push_back("row " + std::to_string(row) + " (" + id + ")");
    index.samples.push_back(std::move(s));
  }
  if (!missing.empty()) {
    std::string msg = "missing image files for " + std::to_string(missing.size()) + " rows:";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }
  return index;
}

inline DatasetIndex merge_classes(const DatasetIndex& index, const ClassMergeMap& map) {
  map.validate();
  DatasetIndex out = index;
  out.merge = map;
  for (auto& s : out.samples) s.label = map.apply(s.grade);
  return out;
}

struct SplitFractions {
  double train = 0.70, val = 0.15, test = 0.15;
};

// Per raw grade: seeded shuffle, then largest-remainder allocation so every
// split count is within one sample of its exact share.
inline DatasetIndex stratified_split(const DatasetIndex& index, SplitFractions f = {}, std::uint64_t seed = 0,
                                     std::vector<std::string>* warnings = nullptr) {
  const std::array<double, 3> frac{f.train, f.val, f.test};
  for (double v : frac)
    if (!(v > 0.0)) throw ConfigError("split fractions must be positive");
  if (std::abs(frac[0] + frac[1] + frac[2] - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");

  DatasetIndex out = index;
  std::map<int, std::vector<std::size_t>> by_grade;
  for (std::size_t i = 0; i < out.samples.size(); ++i) by_grade[out.samples[i].grade].push_back(i);

  for (auto& [grade, members] : by_grade) {
    const std::size_t n = members.size();
    if (n < 3) {
      if (warnings) {
        warnings->push_back("grade " + std::to_string(grade) + " has " + std::to_string(n) +
                            " samples; all placed in train");
      }
      for (auto i : members) out.samples[i].split = Split::train;
      continue;
    }
    auto rng = rng_stream(seed, static_cast<std::uint64_t>(grade), 0, 0x5311u);
    std::shuffle(members.begin(), members.end(), rng);

    std::array<std::size_t, 3> count{};
    std::array<double, 3> rem{};
    std::size_t assigned = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      const double exact = static_cast<double>(n) * frac[s];
      count[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
      rem[s] = exact - static_cast<double>(count[s]);
      assigned += count[s];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rem[a] > rem[b]; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++count[order[k % 3]];

    std::size_t pos = 0;
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t c = 0; c < count[s]; ++c) out.samples[members[pos++]].split = static_cast<Split>(s);
  }
  return out;
}

struct ClassDistribution {
  std::vector<std::string> names;
  std::vector<std::size_t> counts;
  std::vector<double> fractions;
  std::size_t total = 0;

  std::string to_text(std::size_t bar_width = 40) const {
    std::ostringstream os;
    std::size_t widest = 0;
    for (const auto& n : names) widest = std::max(widest, n.size());
    const std::size_t peak = counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
    for (std::size_t k = 0; k < names.size(); ++k) {
      const std::size_t bar = peak ? counts[k] * bar_width / peak : 0;
      os << std::left << std::setw(static_cast<int>(widest)) << names[k] << " | " << std::string(bar, '#')
         << std::string(bar_width - bar, ' ') << " | " << std::right << std::setw(6) << counts[k] << "  ("
         << std::fixed << std::setprecision(1) << 100.0 * fractions[k] << "%)\n";
    }
    os << "total " << total << "\n";
    return os.str();
  }

  std::string to_csv() const {
    std::ostringstream os;
    os << "class,name,count,fraction\n";
    os << std::setprecision(17);
    for (std::size_t k = 0; k < names.size(); ++k) os << k << ',' << names[k] << ',' << counts[k] << ',' << fractions[k] << '\n';
    return os.str();
  }
};

// Counts per active (merged) class, optionally restricted to one split.
inline ClassDistribution class_distribution(const DatasetIndex& index, std::optional<Split> only = std::nullopt) {
  ClassDistribution d;
  d.names = index.merge.names;
  d.counts.assign(index.num_classes(), 0);
  for (const auto& s : index.samples) {
    if (only && s.split != only) continue;
    ++d.counts.at(static_cast<std::size_t>(s.label));
    ++d.total;
  }
  d.fractions.resize(d.counts.size());
  for (std::size_t k = 0; k < d.counts.size(); ++k) {
    d.fractions[k] = d.total ? static_cast<double>(d.counts[k]) / static_cast<double>(d.total) : 0.0;
  }
  return d;
}

struct OversampleTarget {
  bool balanced = true;
  std::vector<std::size_t> counts;  // per merged class, when not balanced

  static OversampleTarget balance() { return {}; }
  static OversampleTarget per_class(std::vector<std::size_t> c) { return {false, std::move(c)}; }
};

// Replicates minority records of the train split until targets are met.
// Replicas are appended after the originals.
inline DatasetIndex oversample(const DatasetIndex& index, Split split, const OversampleTarget& target,
                               std::uint64_t seed) {
  if (split != Split::train) {
    throw DataError("oversample: refusing to oversample the " + split_name(split) + " split (leakage guard)");
  }
  const std::size_t k = index.num_classes();
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < index.samples.size(); ++i)
    if (index.samples[i].split == Split::train) members[static_cast<std::size_t>(index.samples[i].label)].push_back(i);

  std::vector<std::size_t> want(k);
  if (target.balanced) {
    std::size_t peak = 0;
    for (const auto& m : members) peak = std::max(peak, m.size());
    want.assign(k, peak);
  } else {
    if (target.counts.size() != k) throw ConfigError("oversample: expected one target count per class");
    want = target.counts;
  }

  DatasetIndex out = index;
  for (std::size_t c = 0; c < k; ++c) {
    if (want[c] < members[c].size()) {
      throw ConfigError("oversample: target " + std::to_string(want[c]) + " for class " + std::to_string(c) +
                        " is below its current count " + std::to_string(members[c].size()));
    }
    if (want[c] == members[c].size()) continue;
    if (members[c].empty()) throw DataError("oversample: class " + std::to_string(c) + " has no train samples");
    auto order = members[c];
    auto rng = rng_stream(seed, c, 0, 0x0ae5u);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t r = 0; r < want[c] - members[c].size(); ++r) {
      const std::size_t src = order[r % order.size()];
      LabeledSample rep = index.samples[src];
      rep.id += "#r" + std::to_string(r);
      rep.replica_of = src;
      out.samples.push_back(std::move(rep));
    }
  }
  return out;
}

// `id_code,diagnosis,merged_label,split`
inline std::string split_manifest_csv(const DatasetIndex& index) {
  std::ostringstream os;
  os << "id_code,diagnosis,merged_label,split\n";
  for (const auto& s : index.samples) {
    os << s.id << ',' << s.grade << ',' << s.label << ',' << (s.split ? split_name(*s.split) : "") << '\n';
  }
  return os.str();
}

}  // namespace drx
