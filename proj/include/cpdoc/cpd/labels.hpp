#pragma once

// Self-supervised boundary labels: triangular smoothing of the intrinsic
// signal, spike detection at local maxima above mean + k*std, and
// non-maximum suppression within the smoothing half-width.

#include <algorithm>
#include <cmath>
#include <vector>

#include "cpdoc/core/error.hpp"

namespace cpdoc {

inline std::vector<double> smooth_signal(const std::vector<double>& s, int delta) {
  const int T = static_cast<int>(s.size());
  std::vector<double> out(static_cast<std::size_t>(T), 0.0);
  for (int t = 0; t < T; ++t) {
    double num = 0.0, den = 0.0;
    for (int d = -delta; d <= delta; ++d) {
      const int u = t + d;
      if (u < 0 || u >= T) continue;
      const double w = 1.0 - std::abs(d) / static_cast<double>(delta + 1);
      num += w * s[static_cast<std::size_t>(u)];
      den += w;
    }
    out[static_cast<std::size_t>(t)] = num / den;
  }
  return out;
}

inline std::vector<int> pseudo_labels(const std::vector<double>& signal, int delta,
                                      double spike_z) {
  const int T = static_cast<int>(signal.size());
  std::vector<int> y(static_cast<std::size_t>(T), 0);
  if (T < 2 * delta + 1) return y;

  const std::vector<double> s = smooth_signal(signal, delta);
  double mean = 0.0;
  for (double v : s) mean += v;
  mean /= T;
  double var = 0.0;
  for (double v : s) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / T);
  if (sd < 1e-12) return y;  // flat signal: nothing to mark
  const double cut = mean + spike_z * sd;

  // local maxima above the cut, interior positions only
  std::vector<int> candidates;
  for (int t = 1; t < T - 1; ++t) {
    const double v = s[static_cast<std::size_t>(t)];
    if (v < cut) continue;
    if (v > s[static_cast<std::size_t>(t - 1)] && v >= s[static_cast<std::size_t>(t + 1)])
      candidates.push_back(t);
  }

  // keep the strongest within each delta-neighbourhood (earliest on ties)
  std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) {
    return s[static_cast<std::size_t>(a)] > s[static_cast<std::size_t>(b)];
  });
  std::vector<int> kept;
  for (int t : candidates) {
    bool suppressed = false;
    for (int k : kept)
      if (std::abs(k - t) <= delta) {
        suppressed = true;
        break;
      }
    if (!suppressed) kept.push_back(t);
  }
  for (int t : kept) y[static_cast<std::size_t>(t)] = 1;
  return y;
}

inline std::vector<double> label_smooth(const std::vector<int>& y, double eps) {
  if (eps < 0.0 || eps >= 1.0) throw ConfigError("label_smooth: eps outside [0,1)");
  std::vector<double> out;
  out.reserve(y.size());
  for (int v : y) out.push_back((1.0 - eps) * v + eps / 2.0);
  return out;
}

}  // namespace cpdoc
