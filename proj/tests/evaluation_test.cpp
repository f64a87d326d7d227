#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "drx/evaluation/report.hpp"

using namespace drx;

namespace {

// O(N^2) pairwise AUC: P(score_pos > score_neg) + 0.5 P(tie).
double pairwise_auc(const std::vector<int>& y, const std::vector<double>& s, std::size_t k, std::size_t c) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (static_cast<std::size_t>(y[i]) != c) continue;
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (static_cast<std::size_t>(y[j]) == c) continue;
      const double a = s[i * k + c], b = s[j * k + c];
      wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
      pairs += 1;
    }
  }
  return wins / pairs;
}

std::vector<ClassMetrics> published_rows() {
  auto row = [](double p, double r, double f, std::size_t n) {
    ClassMetrics m;
    m.precision = p;
    m.recall = r;
    m.f1 = f;
    m.support = n;
    return m;
  };
  return {row(0.98, 0.99, 0.99, 199), row(0.82, 0.91, 0.87, 117), row(0.81, 0.58, 0.67, 50)};
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') cur += '"', ++i;
      else if (c == '"') quoted = false;
      else cur += c;
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

TEST(Confusion, PerfectPredictionsAreDiagonal) {
  std::vector<int> y{0, 1, 2, 2, 1, 0};
  auto cm = confusion(y, y, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(cm.at(i, j), i == j ? 2u : 0u);
}

TEST(Confusion, SingleOffDiagonal) {
  std::vector<int> t{0}, p{2};
  auto cm = confusion(t, p, 3);
  EXPECT_EQ(cm.at(0, 2), 1u);
  EXPECT_EQ(cm.total(), 1u);
}

TEST(Confusion, MatchesCountingOracle) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> d(0, 4);
  std::vector<int> t(200), p(200);
  for (std::size_t i = 0; i < 200; ++i) t[i] = d(rng), p[i] = d(rng);
  auto cm = confusion(t, p, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      std::size_t n = 0;
      for (std::size_t s = 0; s < 200; ++s) n += (t[s] == i && p[s] == j);
      EXPECT_EQ(cm.at(i, j), n);
    }
  EXPECT_EQ(cm.total(), 200u);
}

TEST(Confusion, RejectsOutOfRange) {
  std::vector<int> t{0, 3}, p{0, 0};
  EXPECT_THROW(confusion(t, p, 3), DataError);
  std::vector<int> neg{-1};
  std::vector<int> z{0};
  EXPECT_THROW(confusion(neg, z, 3), DataError);
  EXPECT_THROW(confusion(std::vector<int>{0, 1}, std::vector<int>{0}, 3), ShapeError);
}

TEST(Confusion, CsvLayout) {
  std::vector<int> t{0, 1, 1}, p{0, 1, 0};
  auto cm = confusion(t, p, 2, {"a", "b"});
  EXPECT_EQ(cm.to_csv(), "true\\pred,a,b\na,1,0\nb,1,1\n");
}

TEST(ClassReport, AllCorrectIsOne) {
  std::vector<int> y{0, 1, 2, 0, 1, 2};
  auto r = class_report(confusion(y, y, 3));
  for (const auto& c : r.classes) {
    EXPECT_EQ(c.precision, 1.0);
    EXPECT_EQ(c.recall, 1.0);
    EXPECT_EQ(c.f1, 1.0);
  }
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.macro.f1, 1.0);
  EXPECT_EQ(r.weighted.precision, 1.0);
}

TEST(ClassReport, MatchesFormulaOracleOnRandomMatrices) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    std::uniform_int_distribution<int> d(0, 3);
    std::vector<int> t(60), p(60);
    for (std::size_t i = 0; i < 60; ++i) t[i] = d(rng), p[i] = d(rng);
    auto r = class_report(confusion(t, p, 4));
    double tr = 0, wp = 0;
    for (int c = 0; c < 4; ++c) {
      double tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < 60; ++i) {
        tp += (t[i] == c && p[i] == c);
        fp += (t[i] != c && p[i] == c);
        fn += (t[i] == c && p[i] != c);
      }
      tr += tp;
      const double prec = tp + fp > 0 ? tp / (tp + fp) : 0, rec = tp + fn > 0 ? tp / (tp + fn) : 0;
      const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0;
      EXPECT_NEAR(r.classes[c].precision, prec, 1e-12);
      EXPECT_NEAR(r.classes[c].recall, rec, 1e-12);
      EXPECT_NEAR(r.classes[c].f1, f1, 1e-12);
      EXPECT_EQ(r.classes[c].support, static_cast<std::size_t>(tp + fn));
      wp += prec * (tp + fn) / 60.0;
    }
    EXPECT_NEAR(r.accuracy, tr / 60.0, 1e-12);
    EXPECT_NEAR(r.weighted.precision, wp, 1e-12);
    // support-weighted recall is accuracy
    EXPECT_NEAR(r.weighted.recall, r.accuracy, 1e-12);
  }
}

TEST(ClassReport, ZeroDenominatorIsFlaggedZero) {
  std::vector<int> t{0, 0, 1}, p{0, 0, 0};
  auto r = class_report(confusion(t, p, 3));
  EXPECT_TRUE(r.classes[1].precision_undefined);  // never predicted
  EXPECT_EQ(r.classes[1].precision, 0.0);
  EXPECT_TRUE(r.classes[1].f1_undefined);
  EXPECT_TRUE(r.classes[2].recall_undefined);  // no support
  EXPECT_EQ(r.classes[2].support, 0u);
  EXPECT_FALSE(r.classes[0].precision_undefined);
  const auto text = render_text(r);
  EXPECT_NE(text.find("0.00*"), std::string::npos);
  EXPECT_NE(text.find("undefined"), std::string::npos);
}

TEST(ClassReport, EmptyMatrixThrows) {
  std::vector<int> none;
  EXPECT_THROW(class_report(confusion(none, none, 3)), DataError);
}

TEST(ClassReport, PermutingClassesPermutesRows) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> d(0, 2);
  std::vector<int> t(90), p(90);
  for (std::size_t i = 0; i < 90; ++i) t[i] = d(rng), p[i] = d(rng);
  const int perm[3] = {2, 0, 1};
  std::vector<int> tp(90), pp(90);
  for (std::size_t i = 0; i < 90; ++i) tp[i] = perm[t[i]], pp[i] = perm[p[i]];
  auto a = class_report(confusion(t, p, 3));
  auto b = class_report(confusion(tp, pp, 3));
  for (int c = 0; c < 3; ++c) {
    EXPECT_DOUBLE_EQ(a.classes[c].precision, b.classes[perm[c]].precision);
    EXPECT_DOUBLE_EQ(a.classes[c].recall, b.classes[perm[c]].recall);
    EXPECT_DOUBLE_EQ(a.classes[c].f1, b.classes[perm[c]].f1);
  }
  EXPECT_NEAR(a.macro.f1, b.macro.f1, 1e-15);
  EXPECT_NEAR(a.weighted.recall, b.weighted.recall, 1e-15);
  EXPECT_EQ(a.accuracy, b.accuracy);
}

TEST(PublishedReport, AggregatesFromPerClassRows) {
  auto r = aggregate_report(published_rows(), {"No DR", "Mild/Moderate DR", "Severe/Proliferative DR"});
  EXPECT_EQ(r.total, 366u);
  EXPECT_EQ(fixed2(r.macro.precision), "0.87");
  EXPECT_EQ(fixed2(r.macro.recall), "0.83");
  EXPECT_EQ(fixed2(r.macro.f1), "0.84");
  EXPECT_EQ(fixed2(r.weighted.precision), "0.91");
  EXPECT_EQ(fixed2(r.weighted.recall), "0.91");
  EXPECT_EQ(fixed2(r.weighted.f1), "0.91");
  EXPECT_EQ(fixed2(r.accuracy), "0.91");
}

TEST(PublishedReport, RenderedMacroRow) {
  auto r = aggregate_report(published_rows(), {"No DR", "Mild/Moderate DR", "Severe/Proliferative DR"});
  const auto text = render_text(r);
  std::istringstream in(text);
  std::string line;
  bool macro = false, weighted = false, acc = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<std::string> w;
    for (std::string t; ls >> t;) w.push_back(t);
    if (line.rfind("Macro Avg", 0) == 0) {
      macro = true;
      EXPECT_EQ(w, (std::vector<std::string>{"Macro", "Avg", "0.87", "0.83", "0.84", "366"}));
    } else if (line.rfind("Weighted Avg", 0) == 0) {
      weighted = true;
      EXPECT_EQ(w, (std::vector<std::string>{"Weighted", "Avg", "0.91", "0.91", "0.91", "366"}));
    } else if (line.rfind("Accuracy", 0) == 0) {
      acc = true;
      EXPECT_EQ(w, (std::vector<std::string>{"Accuracy", "0.91", "366"}));
    }
  }
  EXPECT_TRUE(macro && weighted && acc);
  EXPECT_EQ(text.find("undefined"), std::string::npos);
  EXPECT_NE(text.find("Severe/Proliferative DR"), std::string::npos);
}

TEST(Render, HalfUpRounding) {
  EXPECT_EQ(fixed2(0.845), "0.85");
  EXPECT_EQ(fixed2(0.835), "0.84");
  EXPECT_EQ(fixed2(0.125), "0.13");
  EXPECT_EQ(fixed2(0.8249), "0.82");
  EXPECT_EQ(fixed2(1.0), "1.00");
  EXPECT_EQ(fixed2(0.0), "0.00");
}

TEST(Render, CsvRoundTrip) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> d(0, 2);
  std::vector<int> t(77), p(77);
  for (std::size_t i = 0; i < 77; ++i) t[i] = d(rng), p[i] = d(rng);
  auto r = class_report(confusion(t, p, 3, {"a,1", "b\"q", "c"}));
  std::istringstream in(render_csv(r));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "label,precision,recall,f1,support");
  for (std::size_t c = 0; c < 3; ++c) {
    std::getline(in, line);
    auto f = split_csv_line(line);
    ASSERT_EQ(f.size(), 5u);
    EXPECT_EQ(f[0], r.names[c]);
    EXPECT_NEAR(std::stod(f[1]), r.classes[c].precision, 1e-12);
    EXPECT_NEAR(std::stod(f[2]), r.classes[c].recall, 1e-12);
    EXPECT_NEAR(std::stod(f[3]), r.classes[c].f1, 1e-12);
    EXPECT_EQ(std::stoul(f[4]), r.classes[c].support);
  }
  std::getline(in, line);
  auto acc = split_csv_line(line);
  EXPECT_EQ(acc[0], "accuracy");
  EXPECT_NEAR(std::stod(acc[3]), r.accuracy, 1e-12);
  std::getline(in, line);
  auto mac = split_csv_line(line);
  EXPECT_EQ(mac[0], "macro avg");
  EXPECT_NEAR(std::stod(mac[1]), r.macro.precision, 1e-12);
  EXPECT_NEAR(std::stod(mac[3]), r.macro.f1, 1e-12);
  std::getline(in, line);
  auto wt = split_csv_line(line);
  EXPECT_EQ(wt[0], "weighted avg");
  EXPECT_NEAR(std::stod(wt[2]), r.weighted.recall, 1e-12);
}

TEST(Roc, PerfectAndReversed) {
  std::vector<int> y{0, 0, 1, 1};
  std::vector<double> good{0.9, 0.1, 0.8, 0.2, 0.3, 0.7, 0.1, 0.9};
  auto r = roc_auc_ovr(y, good, 2);
  EXPECT_EQ(r.auc[0], 1.0);
  EXPECT_EQ(r.auc[1], 1.0);
  EXPECT_EQ(r.macro, 1.0);
  std::vector<double> bad{0.1, 0.9, 0.2, 0.8, 0.7, 0.3, 0.9, 0.1};
  auto b = roc_auc_ovr(y, bad, 2);
  EXPECT_EQ(b.auc[0], 0.0);
  EXPECT_EQ(b.macro, 0.0);
}

TEST(Roc, AllTiedIsHalf) {
  std::vector<int> y{0, 1, 0, 1};
  std::vector<double> s(8, 0.5);
  auto r = roc_auc_ovr(y, s, 2);
  EXPECT_DOUBLE_EQ(r.auc[0], 0.5);
}

TEST(Roc, MatchesPairwiseOracle) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 100, k = 3;
    std::uniform_int_distribution<int> d(0, 2);
    // coarse scores so ties occur
    std::uniform_int_distribution<int> q(0, 20);
    std::vector<int> y(n);
    std::vector<double> s(n * k);
    for (auto& v : y) v = d(rng);
    for (auto& v : s) v = q(rng) / 20.0;
    auto r = roc_auc_ovr(y, s, k);
    double macro = 0;
    int defined = 0;
    for (std::size_t c = 0; c < k; ++c) {
      if (!r.defined[c]) continue;
      const double o = pairwise_auc(y, s, k, c);
      EXPECT_NEAR(r.auc[c], o, 1e-9) << "rep " << rep << " class " << c;
      macro += o;
      ++defined;
    }
    EXPECT_NEAR(r.macro, macro / defined, 1e-9);
  }
}

TEST(Roc, RankInvariance) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g;
  std::vector<int> y(80);
  std::vector<double> s(80 * 3), t(80 * 3);
  for (std::size_t i = 0; i < 80; ++i) y[i] = static_cast<int>(i % 3);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = g(rng), t[i] = std::exp(3 * s[i]) + 7;
  auto a = roc_auc_ovr(y, s, 3), b = roc_auc_ovr(y, t, 3);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(a.auc[c], b.auc[c]);
}

TEST(Roc, UndefinedClassExcludedFromMacro) {
  std::vector<int> y{0, 1, 0, 1};
  std::vector<double> s{0.8, 0.1, 0.1, 0.2, 0.7, 0.1, 0.3, 0.6, 0.1, 0.2, 0.7, 0.1};
  auto r = roc_auc_ovr(y, s, 3);
  EXPECT_FALSE(r.defined[2]);
  EXPECT_TRUE(r.curves[2].fpr.empty());
  EXPECT_DOUBLE_EQ(r.macro, (r.auc[0] + r.auc[1]) / 2);
}

TEST(Roc, SingleClassGroundTruthThrows) {
  std::vector<int> y{1, 1, 1};
  std::vector<double> s(9, 0.3);
  EXPECT_THROW(roc_auc_ovr(y, s, 3), DataError);
}

TEST(Roc, RejectsBadInput) {
  std::vector<int> y{0, 1};
  std::vector<double> s{0.5, 0.5, NAN, 0.5};
  EXPECT_THROW(roc_auc_ovr(y, s, 2), NumericError);
  std::vector<double> short_s{0.5};
  EXPECT_THROW(roc_auc_ovr(y, short_s, 2), ShapeError);
}

TEST(Roc, CurveIsMonotoneAndSpansUnitSquare) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u;
  std::vector<int> y(50);
  std::vector<double> s(100);
  for (std::size_t i = 0; i < 50; ++i) y[i] = static_cast<int>(i % 2);
  for (auto& v : s) v = std::round(u(rng) * 10) / 10;
  auto r = roc_auc_ovr(y, s, 2);
  for (const auto& c : r.curves) {
    ASSERT_GE(c.fpr.size(), 2u);
    EXPECT_EQ(c.fpr.front(), 0.0);
    EXPECT_EQ(c.tpr.front(), 0.0);
    EXPECT_EQ(c.fpr.back(), 1.0);
    EXPECT_EQ(c.tpr.back(), 1.0);
    for (std::size_t i = 1; i < c.fpr.size(); ++i) {
      EXPECT_GE(c.fpr[i], c.fpr[i - 1]);
      EXPECT_GE(c.tpr[i], c.tpr[i - 1]);
    }
    // trapezoid area under the tie-grouped curve equals the rank AUC
  }
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& c = r.curves[k];
    double area = 0;
    for (std::size_t i = 1; i < c.fpr.size(); ++i) area += (c.fpr[i] - c.fpr[i - 1]) * (c.tpr[i] + c.tpr[i - 1]) / 2;
    EXPECT_NEAR(area, r.auc[k], 1e-12);
  }
}
