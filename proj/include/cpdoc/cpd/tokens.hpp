#pragma once

// Trajectory tokenization for the change-point detector: per-step records of
// (state, action, reward) plus intrinsic signals (|TD-error|, |reward delta|)
// z-normalized within the episode.

#include <array>
#include <cmath>
#include <vector>

#include "cpdoc/core/error.hpp"
#include "cpdoc/oc/episode.hpp"

namespace cpdoc {

struct TokenSeq {
  std::vector<int> state_ids;                 // tabular states (empty when continuous)
  std::vector<std::array<double, 4>> obs;     // raw observations
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<std::array<double, 2>> z;       // normalized intrinsic signals
  int start = 0;                              // absolute index of the first token

  int size() const { return static_cast<int>(actions.size()); }
};

namespace detail {

inline void znorm(std::vector<double>& v) {
  if (v.empty()) return;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  const double sd = std::sqrt(var);
  for (double& x : v) x = (sd > 1e-12) ? (x - mean) / sd : 0.0;
}

}  // namespace detail

inline TokenSeq tokenize(const Trajectory& traj, bool tabular) {
  TokenSeq seq;
  const int T = static_cast<int>(traj.steps.size());
  std::vector<double> td(static_cast<std::size_t>(T)), dr(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const Transition& tr = traj.steps[static_cast<std::size_t>(t)];
    td[static_cast<std::size_t>(t)] = std::abs(tr.td_error);
    dr[static_cast<std::size_t>(t)] =
        (t == 0) ? 0.0 : std::abs(tr.reward - traj.steps[static_cast<std::size_t>(t - 1)].reward);
    if (tabular) seq.state_ids.push_back(tr.state_id);
    seq.obs.push_back(tr.obs);
    seq.actions.push_back(tr.action);
    seq.rewards.push_back(tr.reward);
  }
  detail::znorm(td);
  detail::znorm(dr);
  for (int t = 0; t < T; ++t)
    seq.z.push_back({td[static_cast<std::size_t>(t)], dr[static_cast<std::size_t>(t)]});
  return seq;
}

// Scalar spike signal driving the pseudo-labeler.
inline std::vector<double> combined_signal(const TokenSeq& seq) {
  std::vector<double> s;
  s.reserve(seq.z.size());
  for (const auto& zi : seq.z) s.push_back(0.5 * (zi[0] + zi[1]));
  return s;
}

inline TokenSeq token_slice(const TokenSeq& seq, int begin, int len) {
  if (begin < 0 || len < 1 || begin + len > seq.size())
    throw UsageError("token_slice: range outside the sequence");
  TokenSeq out;
  out.start = seq.start + begin;
  const auto b = static_cast<std::size_t>(begin), e = static_cast<std::size_t>(begin + len);
  if (!seq.state_ids.empty())
    out.state_ids.assign(seq.state_ids.begin() + static_cast<long>(b),
                         seq.state_ids.begin() + static_cast<long>(e));
  out.obs.assign(seq.obs.begin() + static_cast<long>(b), seq.obs.begin() + static_cast<long>(e));
  out.actions.assign(seq.actions.begin() + static_cast<long>(b),
                     seq.actions.begin() + static_cast<long>(e));
  out.rewards.assign(seq.rewards.begin() + static_cast<long>(b),
                     seq.rewards.begin() + static_cast<long>(e));
  out.z.assign(seq.z.begin() + static_cast<long>(b), seq.z.begin() + static_cast<long>(e));
  return out;
}

}  // namespace cpdoc
