#pragma once

// Central finite-difference oracle used by the gradient tests. Kept in test
// code so it stays independent of the tape implementation it checks.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "cpdoc/tensor/tensor.hpp"

namespace testsupport {

// Relative error between two gradient vectors: ||a - b|| / max(||a||, ||b||).
inline double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max(std::sqrt(na), std::sqrt(nb));
  if (denom < 1e-300) return std::sqrt(diff);
  return std::sqrt(diff) / denom;
}

// Central differences of a scalar-valued forward function with respect to
// every entry of `param`. The function must re-run the full forward pass.
inline std::vector<double> fd_gradient(cpdoc::Tensor param,
                                       const std::function<double()>& forward,
                                       double h = 1e-5) {
  std::vector<double> g(param.size());
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double saved = param[i];
    param[i] = saved + h;
    const double fp = forward();
    param[i] = saved - h;
    const double fm = forward();
    param[i] = saved;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace testsupport
