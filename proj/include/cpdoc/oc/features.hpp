#pragma once

// Sparse feature vectors and linear functions over them. Tabular agents use
// one-hot features; continuous agents use dense cosine features. Both share
// the same linear-function machinery.

#include <utility>
#include <vector>

#include "cpdoc/core/error.hpp"

namespace cpdoc {

struct FeatureVec {
  int dim = 0;
  std::vector<std::pair<int, double>> active;  // (index, value), indices unique

  static FeatureVec one_hot(int dim, int index) {
    if (index < 0 || index >= dim) throw UsageError("one_hot: index out of range");
    FeatureVec f;
    f.dim = dim;
    f.active.emplace_back(index, 1.0);
    return f;
  }

  static FeatureVec dense(const std::vector<double>& values) {
    FeatureVec f;
    f.dim = static_cast<int>(values.size());
    f.active.reserve(values.size());
    for (int i = 0; i < f.dim; ++i) f.active.emplace_back(i, values[static_cast<std::size_t>(i)]);
    return f;
  }
};

class LinearFn {
 public:
  LinearFn() = default;
  explicit LinearFn(int dim) : w_(static_cast<std::size_t>(dim), 0.0) {}

  double value(const FeatureVec& f) const {
    double s = 0.0;
    for (const auto& [i, v] : f.active) s += w_[static_cast<std::size_t>(i)] * v;
    return s;
  }

  void add_scaled(const FeatureVec& f, double coef) {
    for (const auto& [i, v] : f.active) w_[static_cast<std::size_t>(i)] += coef * v;
  }

  std::vector<double>& weights() { return w_; }
  const std::vector<double>& weights() const { return w_; }
  int dim() const { return static_cast<int>(w_.size()); }

 private:
  std::vector<double> w_;
};

}  // namespace cpdoc
