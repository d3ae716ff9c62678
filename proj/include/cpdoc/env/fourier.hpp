#pragma once

// Cosine features cos(pi * <c, s>) over coefficient vectors c in {0..3}^4,
// giving a 256-dimensional encoding of a [0,1]^4 state.

#include <array>
#include <cmath>
#include <vector>

#include "cpdoc/core/error.hpp"

namespace cpdoc {

constexpr int kFourierOrder = 4;    // coefficients 0..3 per dimension
constexpr int kFourierDims = 256;   // 4^4 coefficient vectors

inline std::vector<double> fourier_features(const std::array<double, 4>& s) {
  for (double v : s)
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("fourier_features: coordinate outside [0,1]");
  std::vector<double> out(kFourierDims);
  constexpr double pi = 3.14159265358979323846;
  int idx = 0;
  for (int c0 = 0; c0 < kFourierOrder; ++c0)
    for (int c1 = 0; c1 < kFourierOrder; ++c1)
      for (int c2 = 0; c2 < kFourierOrder; ++c2)
        for (int c3 = 0; c3 < kFourierOrder; ++c3)
          out[static_cast<std::size_t>(idx++)] =
              std::cos(pi * (c0 * s[0] + c1 * s[1] + c2 * s[2] + c3 * s[3]));
  return out;
}

}  // namespace cpdoc
