#pragma once

// Option-Critic agent over linear features: Boltzmann intra-option policies,
// sigmoid termination functions, Q_U/Q_Omega critics, and the intra-option
// policy-gradient and termination-gradient updates. One implementation serves
// both the tabular (one-hot) and the linear function-approximation settings.

#include <algorithm>
#include <cmath>
#include <vector>

#include "cpdoc/core/error.hpp"
#include "cpdoc/core/rng.hpp"
#include "cpdoc/oc/features.hpp"

namespace cpdoc {

struct AgentHyper {
  double alpha_critic = 0.5;
  double alpha_theta = 0.25;
  double alpha_beta = 0.25;
  double temperature = 0.001;
  double eps_option = 0.0;
  double eps_action = 0.0;        // epsilon-greedy over intra actions (continuous control)
  double eps_action_decay = 1.0;  // multiplied in once per episode
  double gamma = 0.99;
  double eta = 0.0;  // deliberation cost: margin added on the continuation side
};

struct CriticDelta {
  double td_u = 0.0;      // Q_U temporal-difference error
  double td_omega = 0.0;  // Q_Omega temporal-difference error
};

class OptionCriticAgent {
 public:
  OptionCriticAgent(int n_options, int n_actions, int feature_dim, AgentHyper hyper)
      : hyper(hyper), n_options_(n_options), n_actions_(n_actions), feature_dim_(feature_dim) {
    if (n_options < 1 || n_actions < 1 || feature_dim < 1)
      throw UsageError("agent: sizes must be positive");
    if (hyper.temperature <= 0.0) throw ConfigError("agent: temperature must be positive");
    if (hyper.gamma <= 0.0 || hyper.gamma > 1.0) throw ConfigError("agent: gamma outside (0,1]");
    intra.assign(static_cast<std::size_t>(n_options), {});
    q_u.assign(static_cast<std::size_t>(n_options), {});
    for (int w = 0; w < n_options; ++w) {
      intra[static_cast<std::size_t>(w)].assign(static_cast<std::size_t>(n_actions),
                                                LinearFn(feature_dim));
      q_u[static_cast<std::size_t>(w)].assign(static_cast<std::size_t>(n_actions),
                                              LinearFn(feature_dim));
      termination.emplace_back(feature_dim);
      q_omega.emplace_back(feature_dim);
    }
  }

  int n_options() const { return n_options_; }
  int n_actions() const { return n_actions_; }
  int feature_dim() const { return feature_dim_; }

  double q_omega_value(int option, const FeatureVec& f) const {
    return q_omega[static_cast<std::size_t>(option)].value(f);
  }

  double v_value(const FeatureVec& f) const {
    double best = q_omega[0].value(f);
    for (int w = 1; w < n_options_; ++w) best = std::max(best, q_omega_value(w, f));
    return best;
  }

  int greedy_option(const FeatureVec& f) const {
    int best = 0;
    double best_q = q_omega_value(0, f);
    for (int w = 1; w < n_options_; ++w) {
      const double q = q_omega_value(w, f);
      if (q > best_q) {  // ties keep the lowest id
        best_q = q;
        best = w;
      }
    }
    return best;
  }

  int select_option(const FeatureVec& f, Rng& rng) const {
    if (hyper.eps_option > 0.0 && rng.uniform() < hyper.eps_option)
      return static_cast<int>(rng.uniform_int(n_options_));
    return greedy_option(f);
  }

  std::vector<double> intra_probs(int option, const FeatureVec& f) const {
    std::vector<double> p(static_cast<std::size_t>(n_actions_));
    double mx = -1e300;
    for (int a = 0; a < n_actions_; ++a) {
      p[static_cast<std::size_t>(a)] =
          intra[static_cast<std::size_t>(option)][static_cast<std::size_t>(a)].value(f) /
          hyper.temperature;
      mx = std::max(mx, p[static_cast<std::size_t>(a)]);
    }
    double z = 0.0;
    for (double& v : p) {
      v = std::exp(v - mx);
      z += v;
    }
    for (double& v : p) v /= z;
    return p;
  }

  int intra_action(int option, const FeatureVec& f, Rng& rng) const {
    if (hyper.eps_action > 0.0 && rng.uniform() < hyper.eps_action)
      return static_cast<int>(rng.uniform_int(n_actions_));
    const std::vector<double> p = intra_probs(option, f);
    double u = rng.uniform();
    for (int a = 0; a < n_actions_; ++a) {
      u -= p[static_cast<std::size_t>(a)];
      if (u <= 0.0) return a;
    }
    return n_actions_ - 1;
  }

  double termination_prob(int option, const FeatureVec& f) const {
    const double logit = termination[static_cast<std::size_t>(option)].value(f);
    return 1.0 / (1.0 + std::exp(-logit));
  }

  // One-step TD update of both critics toward r + gamma * U(s', option), where
  // U blends continuation and re-selection through the termination function.
  CriticDelta critic_update(const FeatureVec& f, int option, int action, double reward,
                            const FeatureVec& f_next, bool done) {
    double target = reward;
    if (!done) {
      const double beta = termination_prob(option, f_next);
      const double cont = q_omega_value(option, f_next);
      const double best = v_value(f_next);
      target += hyper.gamma * ((1.0 - beta) * cont + beta * best);
    }
    CriticDelta d;
    auto& qu = q_u[static_cast<std::size_t>(option)][static_cast<std::size_t>(action)];
    d.td_u = target - qu.value(f);
    qu.add_scaled(f, hyper.alpha_critic * d.td_u);
    auto& qo = q_omega[static_cast<std::size_t>(option)];
    d.td_omega = target - qo.value(f);
    qo.add_scaled(f, hyper.alpha_critic * d.td_omega);
    return d;
  }

  double q_u_value(int option, int action, const FeatureVec& f) const {
    return q_u[static_cast<std::size_t>(option)][static_cast<std::size_t>(action)].value(f);
  }

  // Log-softmax ascent on the taken action's preference, scaled by q_u.
  void intra_update(const FeatureVec& f, int option, int action, double q_u_val) {
    const std::vector<double> p = intra_probs(option, f);
    for (int a = 0; a < n_actions_; ++a) {
      const double indicator = (a == action) ? 1.0 : 0.0;
      intra[static_cast<std::size_t>(option)][static_cast<std::size_t>(a)].add_scaled(
          f, hyper.alpha_theta * q_u_val * (indicator - p[static_cast<std::size_t>(a)]));
    }
  }

  // Termination update at the arrival state. Returns the raw gradient-sample
  // coefficient g = -beta (1-beta) (A + eta); parameters move by alpha_beta * g
  // along the feature direction. Positive advantage prolongs the option.
  double termination_update(const FeatureVec& f_arrival, int option) {
    const double beta = termination_prob(option, f_arrival);
    const double advantage = q_omega_value(option, f_arrival) - v_value(f_arrival);
    const double g = -beta * (1.0 - beta) * (advantage + hyper.eta);
    termination[static_cast<std::size_t>(option)].add_scaled(f_arrival, hyper.alpha_beta * g);
    return g;
  }

  void decay_exploration() { hyper.eps_action *= hyper.eps_action_decay; }

  AgentHyper hyper;
  // exposed parameter tables: [option][action] preferences / action values,
  // [option] termination logits and option values
  std::vector<std::vector<LinearFn>> intra;
  std::vector<LinearFn> termination;
  std::vector<LinearFn> q_omega;
  std::vector<std::vector<LinearFn>> q_u;

 private:
  int n_options_;
  int n_actions_;
  int feature_dim_;
};

}  // namespace cpdoc
