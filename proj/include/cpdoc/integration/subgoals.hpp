#pragma once

// Subgoal discovery over detected segments: mean-pooled embeddings, k-means
// clustering with k-means++ seeding, reach-radius estimation, reward shaping,
// termination-logit warm starts, and periodic drift-gated refresh.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <vector>

#include "cpdoc/core/error.hpp"
#include "cpdoc/core/rng.hpp"
#include "cpdoc/integration/losses.hpp"
#include "cpdoc/oc/agent.hpp"
#include "cpdoc/oc/features.hpp"

namespace cpdoc {

using Embedding = std::vector<double>;

inline double embedding_dist(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) throw UsageError("embedding distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Arithmetic mean of the per-state embeddings of one segment.
inline Embedding pool_segment(const std::vector<Embedding>& phis) {
  if (phis.empty()) throw UsageError("pool_segment: empty segment");
  Embedding out(phis.front().size(), 0.0);
  for (const Embedding& p : phis) {
    if (p.size() != out.size()) throw UsageError("pool_segment: dimension mismatch");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += p[i];
  }
  for (double& v : out) v /= static_cast<double>(phis.size());
  return out;
}

struct ClusterResult {
  bool ok = false;               // false when there were fewer points than clusters
  std::vector<int> assignment;   // point index -> cluster
  std::vector<Embedding> prototypes;
  int iterations = 0;
};

// k-means with k-means++ seeding; at most `max_iter` sweeps, stopping when the
// assignment stabilizes. Empty clusters are re-seeded from the point farthest
// from its current center.
inline ClusterResult cluster_segments(const std::vector<Embedding>& points, int K, Rng& rng,
                                      int max_iter = 50) {
  ClusterResult out;
  const int M = static_cast<int>(points.size());
  if (K < 1) throw ConfigError("cluster_segments: K must be positive");
  if (M < K) return out;

  std::vector<Embedding> centers;
  centers.push_back(points[static_cast<std::size_t>(rng.uniform_int(M))]);
  std::vector<double> d2(static_cast<std::size_t>(M), 0.0);
  while (static_cast<int>(centers.size()) < K) {
    double total = 0.0;
    for (int m = 0; m < M; ++m) {
      double best = std::numeric_limits<double>::infinity();
      for (const Embedding& c : centers)
        best = std::min(best, embedding_dist(points[static_cast<std::size_t>(m)], c));
      d2[static_cast<std::size_t>(m)] = best * best;
      total += best * best;
    }
    int pick = 0;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      for (int m = 0; m < M; ++m) {
        acc += d2[static_cast<std::size_t>(m)];
        if (acc >= r) {
          pick = m;
          break;
        }
      }
    } else {
      pick = rng.uniform_int(M);  // all points coincide with a center
    }
    centers.push_back(points[static_cast<std::size_t>(pick)]);
  }

  std::vector<int> assign(static_cast<std::size_t>(M), -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (int m = 0; m < M; ++m) {
      int best = 0;
      double bd = embedding_dist(points[static_cast<std::size_t>(m)], centers[0]);
      for (int k = 1; k < K; ++k) {
        const double d = embedding_dist(points[static_cast<std::size_t>(m)],
                                        centers[static_cast<std::size_t>(k)]);
        if (d < bd) {
          bd = d;
          best = k;
        }
      }
      if (assign[static_cast<std::size_t>(m)] != best) {
        assign[static_cast<std::size_t>(m)] = best;
        changed = true;
      }
    }
    out.iterations = it + 1;
    if (!changed && it > 0) break;

    std::vector<int> count(static_cast<std::size_t>(K), 0);
    std::vector<Embedding> sums(static_cast<std::size_t>(K),
                                Embedding(points.front().size(), 0.0));
    for (int m = 0; m < M; ++m) {
      const int k = assign[static_cast<std::size_t>(m)];
      ++count[static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < sums[static_cast<std::size_t>(k)].size(); ++i)
        sums[static_cast<std::size_t>(k)][i] += points[static_cast<std::size_t>(m)][i];
    }
    for (int k = 0; k < K; ++k) {
      if (count[static_cast<std::size_t>(k)] > 0) {
        for (std::size_t i = 0; i < sums[static_cast<std::size_t>(k)].size(); ++i)
          centers[static_cast<std::size_t>(k)][i] =
              sums[static_cast<std::size_t>(k)][i] / count[static_cast<std::size_t>(k)];
      } else {
        int far = 0;
        double fd = -1.0;
        for (int m = 0; m < M; ++m) {
          const int a = assign[static_cast<std::size_t>(m)];
          const double d = embedding_dist(points[static_cast<std::size_t>(m)],
                                          centers[static_cast<std::size_t>(a)]);
          if (d > fd) {
            fd = d;
            far = m;
          }
        }
        centers[static_cast<std::size_t>(k)] = points[static_cast<std::size_t>(far)];
      }
    }
  }

  out.ok = true;
  out.assignment = std::move(assign);
  out.prototypes = std::move(centers);
  return out;
}

// 10th percentile of the pairwise distances in the clustering set.
inline double compute_reach_radius(const std::vector<Embedding>& points, double quantile = 0.10) {
  std::vector<double> d;
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j)
      d.push_back(embedding_dist(points[i], points[j]));
  if (d.empty()) return 0.0;
  const std::size_t idx = static_cast<std::size_t>(
      quantile * static_cast<double>(d.size() - 1));
  std::nth_element(d.begin(), d.begin() + static_cast<long>(idx), d.end());
  return d[idx];
}

struct SubgoalSet {
  std::vector<Embedding> prototypes;  // index k maps onto option k
  double reach_radius = 0.0;
  double alpha_bonus = 0.0;

  bool empty() const { return prototypes.empty(); }
  bool near(int k, const Embedding& phi) const {
    return embedding_dist(prototypes[static_cast<std::size_t>(k)], phi) <= reach_radius;
  }
};

// One-shot shaping bonus: fires on the first step of an option execution whose
// embedding reaches the option's prototype; `fired` is the per-execution latch
// owned by the caller and reset whenever a new execution starts.
inline double shaping_bonus(const SubgoalSet& subgoals, int option, const Embedding& phi,
                            bool& fired) {
  if (subgoals.empty() || subgoals.alpha_bonus == 0.0 || fired) return 0.0;
  if (option < 0 || option >= static_cast<int>(subgoals.prototypes.size())) return 0.0;
  if (!subgoals.near(option, phi)) return 0.0;
  fired = true;
  return subgoals.alpha_bonus;
}

namespace detail {

// Cholesky solve of the SPD system A x = b (A modified in place).
inline std::vector<double> solve_spd(std::vector<std::vector<double>>& A, std::vector<double> b) {
  const std::size_t n = A.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = A[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= A[i][k] * A[j][k];
      if (i == j) {
        if (s <= 0.0) throw UsageError("least squares: matrix not positive definite");
        A[i][i] = std::sqrt(s);
      } else {
        A[i][j] = s / A[j][j];
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {  // forward: L y = b
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= A[i][k] * b[k];
    b[i] = s / A[i][i];
  }
  for (std::size_t ii = n; ii-- > 0;) {  // backward: L^T x = y
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= A[k][ii] * b[k];
    b[ii] = s / A[ii][ii];
  }
  return b;
}

}  // namespace detail

struct BetaInitSample {
  FeatureVec feat;
  Embedding phi;
};

// Raise termination logits of option k by `boost` on states near prototype k.
// One-hot features are boosted directly; dense features get a ridge
// least-squares fit of the boosted logit targets.
inline void beta_init_near_subgoals(OptionCriticAgent& agent, const SubgoalSet& subgoals,
                                    double boost, const std::vector<BetaInitSample>& samples,
                                    bool tabular, double ridge = 1e-6) {
  if (subgoals.empty() || boost == 0.0 || samples.empty()) return;
  const int K = static_cast<int>(subgoals.prototypes.size());
  if (K > agent.n_options()) throw UsageError("beta init: more prototypes than options");

  if (tabular) {
    for (int k = 0; k < K; ++k) {
      LinearFn& nu = agent.termination[static_cast<std::size_t>(k)];
      for (const BetaInitSample& s : samples) {
        if (!subgoals.near(k, s.phi)) continue;
        if (s.feat.active.size() != 1)
          throw UsageError("beta init: tabular mode expects one-hot features");
        nu.weights()[static_cast<std::size_t>(s.feat.active.front().first)] += boost;
      }
    }
    return;
  }

  const std::size_t D = static_cast<std::size_t>(agent.feature_dim());
  std::vector<std::vector<double>> gram(D, std::vector<double>(D, 0.0));
  std::vector<std::vector<double>> dense;
  dense.reserve(samples.size());
  for (const BetaInitSample& s : samples) {
    std::vector<double> x(D, 0.0);
    for (const auto& [i, v] : s.feat.active) x[static_cast<std::size_t>(i)] = v;
    for (std::size_t i = 0; i < D; ++i)
      for (std::size_t j = 0; j <= i; ++j) gram[i][j] += x[i] * x[j];
    dense.push_back(std::move(x));
  }
  for (std::size_t i = 0; i < D; ++i) {
    gram[i][i] += ridge;
    for (std::size_t j = i + 1; j < D; ++j) gram[i][j] = gram[j][i];
  }

  for (int k = 0; k < K; ++k) {
    LinearFn& nu = agent.termination[static_cast<std::size_t>(k)];
    std::vector<double> rhs(D, 0.0);
    for (std::size_t m = 0; m < samples.size(); ++m) {
      const double target =
          nu.value(samples[m].feat) + (subgoals.near(k, samples[m].phi) ? boost : 0.0);
      for (std::size_t i = 0; i < D; ++i) rhs[i] += dense[m][i] * target;
    }
    std::vector<std::vector<double>> A = gram;
    nu.weights() = detail::solve_spd(A, std::move(rhs));
  }
}

struct SegmentRecord {
  int episode = 0;
  Embedding embedding;             // pooled over the segment
  std::vector<FeatureVec> feats;   // per-state features
  std::vector<Embedding> phis;     // per-state embeddings
  std::vector<int> actions;
};

struct RefreshEvent {
  int refresh_index = 0;
  int episode = 0;
  std::vector<Embedding> prototypes;
  double displacement = 0.0;
  bool adopted = false;
};

struct SubgoalTrackerConfig {
  int n_clusters = 4;
  double alpha_bonus = 0.0;
  int period = 50;              // episodes between refresh attempts; <= 0 disables
  double drift_threshold = 0.0; // adopt only when mean prototype movement exceeds this
  int history_episodes = 10;    // retain segments from this many recent episodes
};

// Rolling segment store with periodic, drift-gated subgoal re-estimation.
class SubgoalTracker {
 public:
  explicit SubgoalTracker(SubgoalTrackerConfig cfg) : cfg_(cfg) {
    subgoals_.alpha_bonus = cfg.alpha_bonus;
  }

  const SubgoalTrackerConfig& config() const { return cfg_; }
  const SubgoalSet& subgoals() const { return subgoals_; }
  bool has_subgoals() const { return !subgoals_.empty(); }
  const std::vector<RefreshEvent>& refreshes() const { return refreshes_; }
  int segments_held() const { return static_cast<int>(history_.size()); }

  void add_segment(SegmentRecord rec) {
    history_.push_back(std::move(rec));
    const int cutoff = history_.back().episode - cfg_.history_episodes;
    while (!history_.empty() && history_.front().episode <= cutoff) history_.pop_front();
  }

  // Re-cluster on schedule; adopt only past the drift threshold (always on the
  // first successful clustering). Returns true when new prototypes took over.
  bool maybe_refresh(int episode, Rng& rng) {
    if (cfg_.period <= 0) return false;
    if (episode % cfg_.period != 0) return false;
    std::vector<Embedding> points;
    points.reserve(history_.size());
    for (const SegmentRecord& r : history_) points.push_back(r.embedding);
    const ClusterResult cr = cluster_segments(points, cfg_.n_clusters, rng);
    if (!cr.ok) return false;  // not enough segments yet: keep what we have

    RefreshEvent ev;
    ev.refresh_index = static_cast<int>(refreshes_.size());
    ev.episode = episode;
    ev.prototypes = cr.prototypes;
    if (subgoals_.empty()) {
      ev.adopted = true;
    } else {
      double disp = 0.0;
      for (const Embedding& c : cr.prototypes) {
        double best = std::numeric_limits<double>::infinity();
        for (const Embedding& old : subgoals_.prototypes)
          best = std::min(best, embedding_dist(c, old));
        disp += best;
      }
      ev.displacement = disp / static_cast<double>(cr.prototypes.size());
      ev.adopted = ev.displacement > cfg_.drift_threshold;
    }
    if (ev.adopted) {
      subgoals_.prototypes = cr.prototypes;
      subgoals_.reach_radius = compute_reach_radius(points);
      last_assignment_ = cr.assignment;
      bc_clusters_.assign(static_cast<std::size_t>(cfg_.n_clusters), {});
      int m = 0;
      for (const SegmentRecord& r : history_) {
        const int k = cr.assignment[static_cast<std::size_t>(m++)];
        auto& bucket = bc_clusters_[static_cast<std::size_t>(k)];
        for (std::size_t t = 0; t < r.feats.size(); ++t)
          bucket.push_back({r.feats[t], r.actions[t]});
      }
    }
    refreshes_.push_back(std::move(ev));
    return refreshes_.back().adopted;
  }

  // State-action data of the most recently adopted clustering, cluster k
  // feeding option k.
  const std::vector<std::vector<BCSample>>& bc_clusters() const { return bc_clusters_; }

  // Uniform (with replacement) sample of segment states for the diversity term.
  std::vector<FeatureVec> sample_states(int n, Rng& rng) const {
    std::vector<const FeatureVec*> pool;
    for (const SegmentRecord& r : history_)
      for (const FeatureVec& f : r.feats) pool.push_back(&f);
    std::vector<FeatureVec> out;
    if (pool.empty()) return out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      out.push_back(*pool[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(pool.size())))]);
    return out;
  }

  // Near-subgoal warm-start samples drawn from the retained segment states.
  std::vector<BetaInitSample> beta_samples() const {
    std::vector<BetaInitSample> out;
    for (const SegmentRecord& r : history_)
      for (std::size_t t = 0; t < r.feats.size(); ++t) out.push_back({r.feats[t], r.phis[t]});
    return out;
  }

 private:
  SubgoalTrackerConfig cfg_;
  std::deque<SegmentRecord> history_;
  SubgoalSet subgoals_;
  std::vector<int> last_assignment_;
  std::vector<std::vector<BCSample>> bc_clusters_;
  std::vector<RefreshEvent> refreshes_;
};

}  // namespace cpdoc
