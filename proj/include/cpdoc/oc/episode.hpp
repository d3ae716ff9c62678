#pragma once

// Call-and-return execution of an option-critic agent in an environment
// adapter: sample an option, follow its intra policy until the termination
// function fires, re-select, repeat. Hooks let callers shape rewards, observe
// transitions, and override termination sampling.

#include <array>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <vector>

#include "cpdoc/core/rng.hpp"
#include "cpdoc/oc/agent.hpp"
#include "cpdoc/oc/features.hpp"

namespace cpdoc {

struct EnvView {
  FeatureVec f;
  int state_id = -1;           // tabular state index, -1 when continuous
  std::array<double, 4> obs{};  // raw observation for sequence encoders
  double reward = 0.0;
  bool done = false;
  bool at_doorway = false;  // gridworld reference-boundary marker
};

struct Transition {
  int t = 0;
  int state_id = -1;
  std::array<double, 4> obs{};
  int action = 0;
  double reward = 0.0;   // environment reward
  double shaped = 0.0;   // reward the learner saw (env + bonus)
  int option = 0;
  bool option_start = false;
  bool terminated = false;  // termination fired at the arrival state
  double td_error = 0.0;    // |Q_Omega TD error| at this step
  bool done = false;
  bool enters_doorway = false;  // arrival state is a doorway
};

struct Trajectory {
  std::vector<Transition> steps;
};

struct EpisodeHooks {
  std::function<double(int option, const EnvView& arrival)> shaped_bonus;
  std::function<double(int option, const EnvView& arrival)> beta_override;
  std::function<void(const Transition&)> on_transition;
};

struct EpisodeStats {
  int steps = 0;
  double ret = 0.0;
  int switches = 0;
  int executions = 1;
  double mean_option_len = 0.0;
  std::vector<int> usage;
};

template <class Env>
EpisodeStats run_episode(OptionCriticAgent& agent, Env& env, Rng& agent_rng, Rng& env_rng,
                         const EpisodeHooks& hooks = {}, Trajectory* out = nullptr) {
  EpisodeStats stats;
  stats.usage.assign(static_cast<std::size_t>(agent.n_options()), 0);

  EnvView view = env.reset(env_rng);
  int option = agent.select_option(view.f, agent_rng);
  bool pending_start = true;

  for (int t = 0;; ++t) {
    const int action = agent.intra_action(option, view.f, agent_rng);
    EnvView next = env.step(action, env_rng);

    const double bonus = hooks.shaped_bonus ? hooks.shaped_bonus(option, next) : 0.0;
    const double r_learn = next.reward + bonus;

    const CriticDelta delta = agent.critic_update(view.f, option, action, r_learn, next.f, next.done);
    // Q_Omega acts as a state-option baseline: expectation of the update is
    // unchanged, but centered feedback keeps positive-reward tasks from
    // saturating the low-temperature softmax onto the first rewarded action.
    agent.intra_update(view.f, option, action,
                       agent.q_u_value(option, action, view.f) - agent.q_omega_value(option, view.f));
    if (!next.done) agent.termination_update(next.f, option);

    ++stats.steps;
    stats.ret += next.reward;
    ++stats.usage[static_cast<std::size_t>(option)];

    Transition tr;
    tr.t = t;
    tr.state_id = view.state_id;
    tr.obs = view.obs;
    tr.action = action;
    tr.reward = next.reward;
    tr.shaped = r_learn;
    tr.option = option;
    tr.option_start = pending_start;
    tr.td_error = std::abs(delta.td_omega);
    tr.done = next.done;
    tr.enters_doorway = next.at_doorway;
    pending_start = false;

    if (next.done) {
      if (out) out->steps.push_back(tr);
      if (hooks.on_transition) hooks.on_transition(tr);
      break;
    }

    const double beta = hooks.beta_override ? hooks.beta_override(option, next)
                                            : agent.termination_prob(option, next.f);
    const bool fired = agent_rng.uniform() < beta;
    tr.terminated = fired;
    if (out) out->steps.push_back(tr);
    if (hooks.on_transition) hooks.on_transition(tr);

    if (fired) {
      ++stats.executions;
      const int chosen = agent.select_option(next.f, agent_rng);
      if (chosen != option) ++stats.switches;
      option = chosen;
      pending_start = true;
    }
    view = next;
  }

  stats.mean_option_len = static_cast<double>(stats.steps) / stats.executions;
  return stats;
}

}  // namespace cpdoc
