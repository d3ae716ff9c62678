#pragma once

// Couplings between the boundary detector and the option learner: sharpened
// termination supervision, behavioral-cloning pretraining, pairwise KL
// diversity, and the weighted total objective.

#include <cmath>
#include <string>
#include <vector>

#include "cpdoc/core/error.hpp"
#include "cpdoc/oc/agent.hpp"
#include "cpdoc/oc/features.hpp"

namespace cpdoc {

// Temperature-sharpened Bernoulli: p^{1/tau} / (p^{1/tau} + (1-p)^{1/tau}).
inline double sharpen(double p, double tau) {
  if (tau <= 0.0) throw ConfigError("sharpen: tau must be positive");
  const double pc = std::min(1.0 - 1e-7, std::max(1e-7, p));
  const double a = std::pow(pc, 1.0 / tau);
  const double b = std::pow(1.0 - pc, 1.0 / tau);
  return a / (a + b);
}

struct TerminationSupervisionConfig {
  double tau = 0.5;         // target sharpening temperature
  double threshold = 0.6;   // boundary indicator cut on p_t
  int half_width = 2;       // neighborhood radius around boundaries
  double alpha_w = 1.0;     // extra weight inside the neighborhood
  double lambda_beta = 0.5; // loss weight
  double lr = 0.0;          // step size applied to termination weights
};

struct TerminationSupervisionResult {
  double loss = 0.0;       // mean weighted BCE over the steps
  double grad_norm = 0.0;  // L2 norm of the applied logit gradients
};

// Per-position weights: 1 everywhere, 1 + alpha_w within half_width of a
// thresholded boundary.
inline std::vector<double> boundary_weights(const std::vector<double>& p, double threshold,
                                            int half_width, double alpha_w) {
  const int T = static_cast<int>(p.size());
  std::vector<double> w(static_cast<std::size_t>(T), 1.0);
  for (int t = 0; t < T; ++t) {
    if (p[static_cast<std::size_t>(t)] < threshold) continue;
    for (int u = std::max(0, t - half_width); u <= std::min(T - 1, t + half_width); ++u)
      w[static_cast<std::size_t>(u)] = 1.0 + alpha_w;
  }
  return w;
}

// Weighted BCE pushing each step's termination probability toward the
// sharpened boundary probability. Touches only the termination weights of the
// options that were active; with lr = 0 it just reports the loss.
inline TerminationSupervisionResult termination_supervision(
    OptionCriticAgent& agent, const std::vector<FeatureVec>& feats,
    const std::vector<int>& options, const std::vector<double>& p,
    const TerminationSupervisionConfig& cfg) {
  if (feats.size() != options.size() || feats.size() != p.size())
    throw UsageError("termination supervision: sequence lengths disagree");
  TerminationSupervisionResult out;
  const int T = static_cast<int>(feats.size());
  if (T == 0) return out;

  const std::vector<double> w = boundary_weights(p, cfg.threshold, cfg.half_width, cfg.alpha_w);
  double g2 = 0.0;
  std::vector<double> logit_grad(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const std::size_t ti = static_cast<std::size_t>(t);
    const double target = sharpen(p[ti], cfg.tau);
    double bhat = agent.termination_prob(options[ti], feats[ti]);
    bhat = std::min(1.0 - 1e-7, std::max(1e-7, bhat));
    out.loss += -w[ti] * (target * std::log(bhat) + (1.0 - target) * std::log(1.0 - bhat));
    const double g = w[ti] * (bhat - target) / static_cast<double>(T);
    logit_grad[ti] = g;
    g2 += g * g;
  }
  // batch gradient: evaluate everywhere first, then apply
  if (cfg.lr > 0.0)
    for (int t = 0; t < T; ++t)
      agent.termination[static_cast<std::size_t>(options[static_cast<std::size_t>(t)])].add_scaled(
          feats[static_cast<std::size_t>(t)],
          -cfg.lr * cfg.lambda_beta * logit_grad[static_cast<std::size_t>(t)]);
  out.loss /= static_cast<double>(T);
  out.grad_norm = std::sqrt(g2);
  return out;
}

// Symmetric sum over ordered option pairs of KL(pi_i || pi_j), averaged over
// the sampled states. Positive lr runs gradient ASCENT on the intra-option
// preferences: diversity is rewarded, not penalized.
struct DiversityResult {
  double value = 0.0;
};

inline DiversityResult diversity_update(OptionCriticAgent& agent,
                                        const std::vector<FeatureVec>& states, double lr,
                                        double lambda_div) {
  DiversityResult out;
  if (agent.n_options() < 2 || states.empty()) return out;
  const int n_opt = agent.n_options();
  const int n_act = agent.n_actions();
  const double inv_n = 1.0 / static_cast<double>(states.size());
  const double inv_temp = 1.0 / agent.hyper.temperature;

  for (const FeatureVec& f : states) {
    std::vector<std::vector<double>> pi(static_cast<std::size_t>(n_opt));
    for (int i = 0; i < n_opt; ++i) {
      pi[static_cast<std::size_t>(i)] = agent.intra_probs(i, f);
      for (double& v : pi[static_cast<std::size_t>(i)]) v = std::max(v, 1e-12);
    }
    // logit-space gradients accumulated per option, then applied once
    std::vector<std::vector<double>> glogit(
        static_cast<std::size_t>(n_opt), std::vector<double>(static_cast<std::size_t>(n_act), 0.0));
    for (int i = 0; i < n_opt; ++i)
      for (int j = 0; j < n_opt; ++j) {
        if (i == j) continue;
        const auto& a = pi[static_cast<std::size_t>(i)];
        const auto& b = pi[static_cast<std::size_t>(j)];
        double kl = 0.0;
        for (int k = 0; k < n_act; ++k)
          kl += a[static_cast<std::size_t>(k)] *
                std::log(a[static_cast<std::size_t>(k)] / b[static_cast<std::size_t>(k)]);
        out.value += kl * inv_n;
        if (lr > 0.0)
          for (int k = 0; k < n_act; ++k) {
            const std::size_t ki = static_cast<std::size_t>(k);
            const double la = std::log(a[ki] / b[ki]);
            glogit[static_cast<std::size_t>(i)][ki] += a[ki] * (la - kl);  // first argument
            glogit[static_cast<std::size_t>(j)][ki] += b[ki] - a[ki];      // second argument
          }
      }
    if (lr > 0.0)
      for (int i = 0; i < n_opt; ++i)
        for (int k = 0; k < n_act; ++k)
          agent.intra[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].add_scaled(
              f, lr * lambda_div * inv_n * inv_temp *
                     glogit[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]);
  }
  return out;
}

struct BCSample {
  FeatureVec feat;
  int action = 0;
};

struct BCReport {
  std::vector<double> epoch_loss;       // mean NLL per epoch, before each update
  std::vector<int> skipped_options;     // clusters with no data
};

// Full-batch NLL descent per option on its assigned cluster; options without
// data are skipped and reported.
inline BCReport bc_pretrain(OptionCriticAgent& agent,
                            const std::vector<std::vector<BCSample>>& clusters, int epochs,
                            double lr) {
  BCReport rep;
  if (static_cast<int>(clusters.size()) > agent.n_options())
    throw UsageError("bc_pretrain: more clusters than options");
  const int n_act = agent.n_actions();
  const double inv_temp = 1.0 / agent.hyper.temperature;
  for (int k = 0; k < static_cast<int>(clusters.size()); ++k)
    if (clusters[static_cast<std::size_t>(k)].empty()) rep.skipped_options.push_back(k);

  for (int e = 0; e < epochs; ++e) {
    double total = 0.0;
    long count = 0;
    for (int k = 0; k < static_cast<int>(clusters.size()); ++k) {
      const auto& data = clusters[static_cast<std::size_t>(k)];
      if (data.empty()) continue;
      const double inv_m = 1.0 / static_cast<double>(data.size());
      for (const BCSample& s : data) {
        const std::vector<double> pi = agent.intra_probs(k, s.feat);
        total += -std::log(std::max(pi[static_cast<std::size_t>(s.action)], 1e-12));
        ++count;
        for (int a = 0; a < n_act; ++a) {
          const double g = (pi[static_cast<std::size_t>(a)] - (a == s.action ? 1.0 : 0.0)) * inv_m;
          agent.intra[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)].add_scaled(
              s.feat, -lr * inv_temp * g);
        }
      }
    }
    if (count > 0) rep.epoch_loss.push_back(total / static_cast<double>(count));
  }
  return rep;
}

// Mean NLL of a dataset under the current policies (no update) — used to
// evaluate held-out splits.
inline double bc_eval(const OptionCriticAgent& agent,
                      const std::vector<std::vector<BCSample>>& clusters) {
  double total = 0.0;
  long count = 0;
  for (int k = 0; k < static_cast<int>(clusters.size()); ++k)
    for (const BCSample& s : clusters[static_cast<std::size_t>(k)]) {
      const std::vector<double> pi = agent.intra_probs(k, s.feat);
      total += -std::log(std::max(pi[static_cast<std::size_t>(s.action)], 1e-12));
      ++count;
    }
  return count > 0 ? total / static_cast<double>(count) : 0.0;
}

struct LossComponents {
  double rl = 0.0;
  double termination = 0.0;
  double diversity = 0.0;
  double bc = 0.0;
  double cpd = 0.0;
};

struct LossWeights {
  double termination = 0.5;
  double diversity = 0.01;
  double bc = 1.0;
  double cpd = 1.0;
};

// Weighted aggregate; diversity enters with a maximization sign.
inline double total_loss(const LossComponents& c, const LossWeights& w) {
  if (w.termination < 0.0 || w.diversity < 0.0 || w.bc < 0.0 || w.cpd < 0.0)
    throw ConfigError("total_loss: weights must be nonnegative");
  return c.rl + w.termination * c.termination - w.diversity * c.diversity + w.bc * c.bc +
         w.cpd * c.cpd;
}

}  // namespace cpdoc
