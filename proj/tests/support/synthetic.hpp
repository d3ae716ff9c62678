#pragma once

// Piecewise-stationary Gaussian sequences with known change points, used to
// exercise the boundary detector end to end.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cpdoc/core/rng.hpp"
#include "cpdoc/cpd/tokens.hpp"

namespace testsupport {

struct SyntheticSeq {
  cpdoc::TokenSeq tokens;
  std::vector<int> boundaries;  // regime starts, in [1, T)
};

// Regimes of Gaussian observations; at each change every dimension's mean
// jumps by 1.5-2.5 noise standard deviations in a random direction.
inline SyntheticSeq make_mean_shift_seq(cpdoc::Rng& rng, int length = 200, int n_actions = 4,
                                        double sigma = 0.3) {
  SyntheticSeq out;
  const int regimes = 3 + rng.uniform_int(3);  // 3..5
  std::vector<int> cuts;
  while (static_cast<int>(cuts.size()) < regimes - 1) {
    const int c = 10 + rng.uniform_int(length - 20);
    bool ok = true;
    for (int e : cuts)
      if (std::abs(e - c) < 15) ok = false;
    if (ok) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());
  out.boundaries = cuts;

  std::array<double, 4> mu{};
  for (double& m : mu) m = rng.uniform(-0.5, 0.5);
  std::vector<std::array<double, 4>> obs;
  std::size_t next_cut = 0;
  for (int t = 0; t < length; ++t) {
    if (next_cut < cuts.size() && t == cuts[next_cut]) {
      for (double& m : mu) {
        const double dir = rng.uniform() < 0.5 ? -1.0 : 1.0;
        m += dir * rng.uniform(1.5, 2.5) * sigma;
      }
      ++next_cut;
    }
    std::array<double, 4> o{};
    for (int i = 0; i < 4; ++i) o[static_cast<std::size_t>(i)] = mu[static_cast<std::size_t>(i)] + sigma * rng.normal();
    obs.push_back(o);
  }

  cpdoc::TokenSeq& seq = out.tokens;
  seq.obs = obs;
  // two intrinsic channels: the one-step jump and a short two-sided mean
  // contrast; both spike at regime changes, mimicking TD-error/reward-delta
  std::vector<double> jump(static_cast<std::size_t>(length), 0.0);
  std::vector<double> contrast(static_cast<std::size_t>(length), 0.0);
  const auto mean_over = [&](int lo, int hi) {  // [lo, hi)
    std::array<double, 4> m{};
    for (int t = lo; t < hi; ++t)
      for (int i = 0; i < 4; ++i)
        m[static_cast<std::size_t>(i)] += obs[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
    for (double& v : m) v /= static_cast<double>(hi - lo);
    return m;
  };
  for (int t = 1; t < length; ++t) {
    double d2 = 0.0;
    for (int i = 0; i < 4; ++i) {
      const double d = obs[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] -
                       obs[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(i)];
      d2 += d * d;
    }
    jump[static_cast<std::size_t>(t)] = std::sqrt(d2);
    const std::array<double, 4> before = mean_over(std::max(0, t - 3), t);
    const std::array<double, 4> after = mean_over(t, std::min(length, t + 3));
    double c2 = 0.0;
    for (int i = 0; i < 4; ++i) {
      const double d = after[static_cast<std::size_t>(i)] - before[static_cast<std::size_t>(i)];
      c2 += d * d;
    }
    contrast[static_cast<std::size_t>(t)] = std::sqrt(c2);
  }
  cpdoc::detail::znorm(jump);
  cpdoc::detail::znorm(contrast);
  for (int t = 0; t < length; ++t) {
    seq.actions.push_back(rng.uniform_int(n_actions));
    seq.rewards.push_back(0.0);
    seq.z.push_back({jump[static_cast<std::size_t>(t)], contrast[static_cast<std::size_t>(t)]});
  }
  return out;
}

}  // namespace testsupport
