#pragma once

// Boundary inference over whole trajectories (chunked, causal), thresholded
// segmentation with neighbourhood merging, and point-adjusted accuracy.

#include <algorithm>
#include <cmath>
#include <vector>

#include "cpdoc/cpd/model.hpp"
#include "cpdoc/cpd/tokens.hpp"

namespace cpdoc {

// Per-step boundary probabilities. The trajectory is scanned in windows of
// length `window` advancing by `stride`; each window contributes its trailing
// `stride` positions (the first window contributes all of them), so every
// probability sees between window-stride+1 and window tokens of history and
// nothing ahead of its own position.
inline std::vector<double> boundary_probs(CPDModel& model, const TokenSeq& seq) {
  const int T = seq.size();
  const int W = model.hyper().window;
  const int S = model.hyper().stride;
  std::vector<double> p(static_cast<std::size_t>(T), 0.0);
  if (T == 0) return p;

  for (int c = 0;; c += S) {
    const int len = std::min(W, T - c);
    if (len < 1) break;
    const int emit_from = (c == 0) ? 0 : c + W - S;
    if (emit_from >= T) break;
    Tape tape;
    CPDForward f = model.forward(tape, token_slice(seq, c, len));
    if (!f.p.finite()) throw DivergenceError("cpd: non-finite boundary probabilities");
    for (int t = emit_from; t < c + len; ++t)
      p[static_cast<std::size_t>(t)] = f.p[static_cast<std::size_t>(t - c)];
    if (c + len >= T) break;
  }
  return p;
}

struct SegmentList {
  std::vector<int> boundaries;                    // strictly increasing, in [1, T)
  std::vector<std::pair<int, int>> segments;      // [start, end) covering [0, T)
  std::vector<int> indicators;                    // raw thresholded b_t
};

inline SegmentList segment_from_probs(const std::vector<double>& p, double threshold, int delta) {
  const int T = static_cast<int>(p.size());
  SegmentList out;
  out.indicators.assign(static_cast<std::size_t>(T), 0);
  std::vector<int> hits;
  for (int t = 1; t < T; ++t)
    if (p[static_cast<std::size_t>(t)] >= threshold) {
      out.indicators[static_cast<std::size_t>(t)] = 1;
      hits.push_back(t);
    }

  // merge runs of indicators closer than delta, keeping the strongest
  std::size_t i = 0;
  while (i < hits.size()) {
    std::size_t j = i;
    while (j + 1 < hits.size() && hits[j + 1] - hits[j] <= delta) ++j;
    int best = hits[i];
    for (std::size_t k = i; k <= j; ++k)
      if (p[static_cast<std::size_t>(hits[k])] > p[static_cast<std::size_t>(best)]) best = hits[k];
    out.boundaries.push_back(best);
    i = j + 1;
  }

  int prev = 0;
  for (int b : out.boundaries) {
    out.segments.emplace_back(prev, b);
    prev = b;
  }
  out.segments.emplace_back(prev, T);
  return out;
}

inline SegmentList segment(CPDModel& model, const TokenSeq& seq) {
  return segment_from_probs(boundary_probs(model, seq), model.hyper().threshold,
                            model.hyper().delta);
}

struct DetectionScore {
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
  int matched = 0;
};

inline DetectionScore cpd_accuracy(const std::vector<int>& predicted,
                                   const std::vector<int>& reference, int tolerance) {
  DetectionScore s;
  std::vector<bool> used(reference.size(), false);
  int tp = 0;
  for (int pr : predicted) {
    int best = -1;
    int best_dist = tolerance + 1;
    for (std::size_t r = 0; r < reference.size(); ++r) {
      if (used[r]) continue;
      const int dist = std::abs(reference[r] - pr);
      if (dist < best_dist) {
        best_dist = dist;
        best = static_cast<int>(r);
      }
    }
    if (best >= 0) {
      used[static_cast<std::size_t>(best)] = true;
      ++tp;
    }
  }
  s.matched = tp;
  if (!predicted.empty()) s.precision = static_cast<double>(tp) / predicted.size();
  else s.precision = reference.empty() ? 1.0 : 0.0;
  if (!reference.empty()) s.recall = static_cast<double>(tp) / reference.size();
  const double denom = s.precision + s.recall;
  s.f1 = (denom > 0.0) ? 2.0 * s.precision * s.recall / denom : 0.0;
  return s;
}

}  // namespace cpdoc
