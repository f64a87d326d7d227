#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "drx/evaluation/report.hpp"
#include "drx/model/model.hpp"

namespace drx {

struct MembershipReport {
  std::vector<double> memberships;  // raw mu_k = exp(log mu_k)
  std::vector<double> probs;
  int predicted = 0;
  double entropy = 0;  // nats
  std::vector<std::string> names;

  // key=value lines; bracketed vectors at two decimals, *_full fields at
  // round-trip precision.
  std::string to_text() const {
    auto vec2 = [](const std::vector<double>& v) {
      std::string s = "[";
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fixed2(v[i]);
      return s + "]";
    };
    auto vecfull = [](const std::vector<double>& v) {
      std::string s;
      char buf[32];
      for (std::size_t i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", v[i]);
        s += (i ? "," : "") + std::string(buf);
      }
      return s;
    };
    const auto p = static_cast<std::size_t>(predicted);
    std::string s = "predicted=" + std::to_string(predicted);
    if (p < names.size()) s += " (" + names[p] + ")";
    s += "\nmemberships=" + vec2(memberships) + "\nprobabilities=" + vec2(probs) + "\nentropy=" + fixed2(entropy) +
         "\nmemberships_full=" + vecfull(memberships) + "\nprobabilities_full=" + vecfull(probs);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", entropy);
    return s + "\nentropy_full=" + buf + "\n";
  }
};

inline double entropy(const std::vector<double>& p) {
  double h = 0;
  for (double v : p)
    if (v > 0) h -= v * std::log(v);
  return h;
}

// Row `row` of an existing forward pass.
template <typename T>
MembershipReport membership_report(const ForwardResult<T>& fwd, std::size_t row = 0,
                                   std::vector<std::string> names = {}) {
  const std::size_t k = fwd.probs.dim(1);
  if (row >= fwd.probs.dim(0)) throw ShapeError("membership_report: row out of range");
  MembershipReport r;
  r.names = std::move(names);
  const auto lp = fwd.logits.data(), pp = fwd.probs.data();
  for (std::size_t j = 0; j < k; ++j) {
    r.memberships.push_back(std::exp(static_cast<double>(lp[row * k + j])));
    r.probs.push_back(static_cast<double>(pp[row * k + j]));
  }
  r.predicted = static_cast<int>(std::max_element(r.probs.begin(), r.probs.end()) - r.probs.begin());
  r.entropy = entropy(r.probs);
  return r;
}

template <typename T>
MembershipReport membership_report(const Model<T>& model, const ImageF& image, std::vector<std::string> names = {}) {
  ForwardOptions opt;
  opt.constant_params = true;
  return membership_report(model.forward(image_to_batch<T>(image), opt), 0, std::move(names));
}

}  // namespace drx
