#pragma once

// Experiment configuration: JSON schema, defaults, and validation with
// field-path error messages. One config file fully describes a run batch
// (environment, variant, agent and detector hyperparameters, output layout).

#include <fstream>
#include <string>
#include <vector>

#include "cpdoc/core/error.hpp"
#include "cpdoc/cpd/model.hpp"
#include "cpdoc/env/fourrooms.hpp"
#include "cpdoc/env/pinball.hpp"
#include "cpdoc/oc/agent.hpp"
#include "json.hpp"

namespace cpdoc {

enum class Variant { OC, OCD, CPD_OC, CPD_OCD };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::OC: return "oc";
    case Variant::OCD: return "ocd";
    case Variant::CPD_OC: return "cpd-oc";
    case Variant::CPD_OCD: return "cpd-ocd";
  }
  return "?";
}

inline Variant variant_parse(const std::string& s) {
  if (s == "oc") return Variant::OC;
  if (s == "ocd") return Variant::OCD;
  if (s == "cpd-oc") return Variant::CPD_OC;
  if (s == "cpd-ocd") return Variant::CPD_OCD;
  throw ConfigError("variant: unknown value '" + s + "' (expected oc|ocd|cpd-oc|cpd-ocd)");
}

inline bool variant_uses_cpd(Variant v) {
  return v == Variant::CPD_OC || v == Variant::CPD_OCD;
}
inline bool variant_deliberates(Variant v) {
  return v == Variant::OCD || v == Variant::CPD_OCD;
}

struct GoalSwitch {
  int episode = 0;  // first episode (1-based) played under the new goal
  int row = 0, col = 0;
};

// Knobs for the detector-to-agent coupling. Lambda weights gate each channel:
// a zero weight disables that channel entirely (no updates, no rng draws on
// the agent stream), which is what makes the zero-weight variant collapse onto
// the plain learner.
struct IntegrationConfig {
  int warmup_episodes = 200;   // episodes before inference-driven coupling starts
  int min_train_windows = 64;  // buffer fill required before detector updates
  double lambda_cpd = 1.0;     // > 0 enables detector training
  double lambda_beta = 0.5;    // termination supervision weight
  double beta_lr = 0.05;
  double tau = 0.5;            // target sharpening temperature
  int half_width = 2;          // boundary neighborhood radius for upweighting
  double alpha_w = 1.0;        // extra weight inside the neighborhood
  double lambda_div = 0.01;    // diversity bonus weight
  double div_lr = 0.05;
  int div_states = 64;         // states sampled per diversity step
  double lambda_bc = 1.0;      // > 0 enables one-time cloning pretraining
  int bc_epochs = 20;
  double bc_lr = 0.1;
  double alpha_bonus = 0.0;    // one-shot shaping bonus at subgoal reach
  double beta_boost = 2.0;     // termination logit boost near subgoals
  int refresh_period = 50;     // episodes between subgoal re-estimation
  double drift_threshold = 0.0;
  int history_episodes = 10;   // segment retention horizon
};

struct OutputConfig {
  std::string dir = "runs/out";
  int boundary_dump_every = 50;  // dump boundary probabilities every N episodes; <=0 disables
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string env_type = "fourrooms";  // fourrooms | pinball
  std::string env_config_path;
  Variant variant = Variant::OC;
  int options = 4;
  int episodes = 2000;
  int seeds = 20;       // number of seeds
  int base_seed = 1;    // actual seeds are base_seed + offset + i
  std::vector<GoalSwitch> goal_switches;
  AgentHyper agent;
  CPDHyper cpd;
  IntegrationConfig integration;
  OutputConfig output;
};

namespace detail {

template <class T>
T take(const nlohmann::json& j, const char* key, T fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + key + ": wrong type");
  }
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known,
                           const std::string& path, std::vector<std::string>& errors) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) { ok = true; break; }
    if (!ok) errors.push_back(path + it.key() + ": unknown field");
  }
}

}  // namespace detail

inline AgentHyper agent_from_json(const nlohmann::json& j, const std::string& path,
                                  std::vector<std::string>& errors) {
  AgentHyper h;
  detail::reject_unknown(j,
                         {"alpha_critic", "alpha_theta", "alpha_beta", "temperature", "eps_option",
                          "eps_action", "eps_action_decay", "gamma", "eta"},
                         path, errors);
  h.alpha_critic = detail::take(j, "alpha_critic", h.alpha_critic, path);
  h.alpha_theta = detail::take(j, "alpha_theta", h.alpha_theta, path);
  h.alpha_beta = detail::take(j, "alpha_beta", h.alpha_beta, path);
  h.temperature = detail::take(j, "temperature", h.temperature, path);
  h.eps_option = detail::take(j, "eps_option", h.eps_option, path);
  h.eps_action = detail::take(j, "eps_action", h.eps_action, path);
  h.eps_action_decay = detail::take(j, "eps_action_decay", h.eps_action_decay, path);
  h.gamma = detail::take(j, "gamma", h.gamma, path);
  h.eta = detail::take(j, "eta", h.eta, path);
  return h;
}

inline nlohmann::json agent_to_json(const AgentHyper& h) {
  return {{"alpha_critic", h.alpha_critic},
          {"alpha_theta", h.alpha_theta},
          {"alpha_beta", h.alpha_beta},
          {"temperature", h.temperature},
          {"eps_option", h.eps_option},
          {"eps_action", h.eps_action},
          {"eps_action_decay", h.eps_action_decay},
          {"gamma", h.gamma},
          {"eta", h.eta}};
}

inline CPDHyper cpd_from_json(const nlohmann::json& j, const std::string& path,
                              std::vector<std::string>& errors) {
  CPDHyper h;
  detail::reject_unknown(
      j,
      {"d_model", "n_layers", "n_heads", "d_ff", "window", "stride", "threshold",
       "buffer_capacity", "batch", "noise_sigma", "noise_prob", "label_eps", "delta", "spike_z",
       "lambda_sup", "lambda_aux", "lr", "weight_decay", "clip"},
      path, errors);
  h.d_model = detail::take(j, "d_model", h.d_model, path);
  h.n_layers = detail::take(j, "n_layers", h.n_layers, path);
  h.n_heads = detail::take(j, "n_heads", h.n_heads, path);
  h.d_ff = detail::take(j, "d_ff", h.d_ff, path);
  h.window = detail::take(j, "window", h.window, path);
  h.stride = detail::take(j, "stride", h.stride, path);
  h.threshold = detail::take(j, "threshold", h.threshold, path);
  h.buffer_capacity = detail::take(j, "buffer_capacity", h.buffer_capacity, path);
  h.batch = detail::take(j, "batch", h.batch, path);
  h.noise_sigma = detail::take(j, "noise_sigma", h.noise_sigma, path);
  h.noise_prob = detail::take(j, "noise_prob", h.noise_prob, path);
  h.label_eps = detail::take(j, "label_eps", h.label_eps, path);
  h.delta = detail::take(j, "delta", h.delta, path);
  h.spike_z = detail::take(j, "spike_z", h.spike_z, path);
  h.lambda_sup = detail::take(j, "lambda_sup", h.lambda_sup, path);
  h.lambda_aux = detail::take(j, "lambda_aux", h.lambda_aux, path);
  h.lr = detail::take(j, "lr", h.lr, path);
  h.weight_decay = detail::take(j, "weight_decay", h.weight_decay, path);
  h.clip = detail::take(j, "clip", h.clip, path);
  return h;
}

inline nlohmann::json cpd_to_json(const CPDHyper& h) {
  return {{"d_model", h.d_model},
          {"n_layers", h.n_layers},
          {"n_heads", h.n_heads},
          {"d_ff", h.d_ff},
          {"window", h.window},
          {"stride", h.stride},
          {"threshold", h.threshold},
          {"buffer_capacity", h.buffer_capacity},
          {"batch", h.batch},
          {"noise_sigma", h.noise_sigma},
          {"noise_prob", h.noise_prob},
          {"label_eps", h.label_eps},
          {"delta", h.delta},
          {"spike_z", h.spike_z},
          {"lambda_sup", h.lambda_sup},
          {"lambda_aux", h.lambda_aux},
          {"lr", h.lr},
          {"weight_decay", h.weight_decay},
          {"clip", h.clip}};
}

inline IntegrationConfig integration_from_json(const nlohmann::json& j, const std::string& path,
                                               std::vector<std::string>& errors) {
  IntegrationConfig c;
  detail::reject_unknown(
      j,
      {"warmup_episodes", "min_train_windows", "lambda_cpd", "lambda_beta", "beta_lr", "tau",
       "half_width", "alpha_w", "lambda_div", "div_lr", "div_states", "lambda_bc", "bc_epochs",
       "bc_lr", "alpha_bonus", "beta_boost", "refresh_period", "drift_threshold",
       "history_episodes"},
      path, errors);
  c.warmup_episodes = detail::take(j, "warmup_episodes", c.warmup_episodes, path);
  c.min_train_windows = detail::take(j, "min_train_windows", c.min_train_windows, path);
  c.lambda_cpd = detail::take(j, "lambda_cpd", c.lambda_cpd, path);
  c.lambda_beta = detail::take(j, "lambda_beta", c.lambda_beta, path);
  c.beta_lr = detail::take(j, "beta_lr", c.beta_lr, path);
  c.tau = detail::take(j, "tau", c.tau, path);
  c.half_width = detail::take(j, "half_width", c.half_width, path);
  c.alpha_w = detail::take(j, "alpha_w", c.alpha_w, path);
  c.lambda_div = detail::take(j, "lambda_div", c.lambda_div, path);
  c.div_lr = detail::take(j, "div_lr", c.div_lr, path);
  c.div_states = detail::take(j, "div_states", c.div_states, path);
  c.lambda_bc = detail::take(j, "lambda_bc", c.lambda_bc, path);
  c.bc_epochs = detail::take(j, "bc_epochs", c.bc_epochs, path);
  c.bc_lr = detail::take(j, "bc_lr", c.bc_lr, path);
  c.alpha_bonus = detail::take(j, "alpha_bonus", c.alpha_bonus, path);
  c.beta_boost = detail::take(j, "beta_boost", c.beta_boost, path);
  c.refresh_period = detail::take(j, "refresh_period", c.refresh_period, path);
  c.drift_threshold = detail::take(j, "drift_threshold", c.drift_threshold, path);
  c.history_episodes = detail::take(j, "history_episodes", c.history_episodes, path);
  return c;
}

inline nlohmann::json integration_to_json(const IntegrationConfig& c) {
  return {{"warmup_episodes", c.warmup_episodes},
          {"min_train_windows", c.min_train_windows},
          {"lambda_cpd", c.lambda_cpd},
          {"lambda_beta", c.lambda_beta},
          {"beta_lr", c.beta_lr},
          {"tau", c.tau},
          {"half_width", c.half_width},
          {"alpha_w", c.alpha_w},
          {"lambda_div", c.lambda_div},
          {"div_lr", c.div_lr},
          {"div_states", c.div_states},
          {"lambda_bc", c.lambda_bc},
          {"bc_epochs", c.bc_epochs},
          {"bc_lr", c.bc_lr},
          {"alpha_bonus", c.alpha_bonus},
          {"beta_boost", c.beta_boost},
          {"refresh_period", c.refresh_period},
          {"drift_threshold", c.drift_threshold},
          {"history_episodes", c.history_episodes}};
}

inline ExperimentConfig experiment_from_json(const nlohmann::json& j) {
  std::vector<std::string> errors;
  ExperimentConfig cfg;
  detail::reject_unknown(j,
                         {"name", "env", "variant", "options", "episodes", "seeds", "base_seed",
                          "goal_switches", "agent", "cpd", "integration", "output"},
                         "", errors);

  cfg.name = detail::take(j, "name", cfg.name, "");
  if (j.contains("env")) {
    const auto& e = j.at("env");
    detail::reject_unknown(e, {"type", "config_path"}, "env.", errors);
    cfg.env_type = detail::take(e, "type", cfg.env_type, "env.");
    cfg.env_config_path = detail::take(e, "config_path", cfg.env_config_path, "env.");
  } else {
    errors.push_back("env: required object missing");
  }
  if (j.contains("variant")) {
    try {
      cfg.variant = variant_parse(j.at("variant").get<std::string>());
    } catch (const ConfigError& e) {
      errors.push_back(e.what());
    } catch (const nlohmann::json::exception&) {
      errors.push_back("variant: wrong type");
    }
  }
  cfg.options = detail::take(j, "options", cfg.options, "");
  cfg.episodes = detail::take(j, "episodes", cfg.episodes, "");
  cfg.seeds = detail::take(j, "seeds", cfg.seeds, "");
  cfg.base_seed = detail::take(j, "base_seed", cfg.base_seed, "");
  if (j.contains("goal_switches")) {
    if (!j.at("goal_switches").is_array()) {
      errors.push_back("goal_switches: must be an array");
    } else {
      int idx = 0;
      for (const auto& g : j.at("goal_switches")) {
        const std::string p = "goal_switches[" + std::to_string(idx) + "].";
        detail::reject_unknown(g, {"episode", "row", "col"}, p, errors);
        GoalSwitch gs;
        gs.episode = detail::take(g, "episode", 0, p);
        gs.row = detail::take(g, "row", 0, p);
        gs.col = detail::take(g, "col", 0, p);
        cfg.goal_switches.push_back(gs);
        ++idx;
      }
    }
  }
  if (j.contains("agent")) cfg.agent = agent_from_json(j.at("agent"), "agent.", errors);
  if (j.contains("cpd")) cfg.cpd = cpd_from_json(j.at("cpd"), "cpd.", errors);
  if (j.contains("integration"))
    cfg.integration = integration_from_json(j.at("integration"), "integration.", errors);
  if (j.contains("output")) {
    const auto& o = j.at("output");
    detail::reject_unknown(o, {"dir", "boundary_dump_every"}, "output.", errors);
    cfg.output.dir = detail::take(o, "dir", cfg.output.dir, "output.");
    cfg.output.boundary_dump_every =
        detail::take(o, "boundary_dump_every", cfg.output.boundary_dump_every, "output.");
  }

  if (!errors.empty()) {
    std::string msg = "config errors:";
    for (const std::string& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

inline nlohmann::json experiment_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["name"] = cfg.name;
  j["env"] = {{"type", cfg.env_type}, {"config_path", cfg.env_config_path}};
  j["variant"] = variant_name(cfg.variant);
  j["options"] = cfg.options;
  j["episodes"] = cfg.episodes;
  j["seeds"] = cfg.seeds;
  j["base_seed"] = cfg.base_seed;
  nlohmann::json switches = nlohmann::json::array();
  for (const GoalSwitch& g : cfg.goal_switches)
    switches.push_back({{"episode", g.episode}, {"row", g.row}, {"col", g.col}});
  j["goal_switches"] = switches;
  j["agent"] = agent_to_json(cfg.agent);
  j["cpd"] = cpd_to_json(cfg.cpd);
  j["integration"] = integration_to_json(cfg.integration);
  j["output"] = {{"dir", cfg.output.dir},
                 {"boundary_dump_every", cfg.output.boundary_dump_every}};
  return j;
}

// Cross-field validation. Loads the environment config to check goal-switch
// targets against the actual grid. Collects every problem before throwing.
inline void experiment_validate(const ExperimentConfig& cfg) {
  std::vector<std::string> errors;
  auto require = [&errors](bool ok, const std::string& msg) {
    if (!ok) errors.push_back(msg);
  };

  require(cfg.env_type == "fourrooms" || cfg.env_type == "pinball",
          "env.type: expected fourrooms or pinball");
  require(!cfg.env_config_path.empty(), "env.config_path: required");
  require(cfg.options >= 1, "options: must be >= 1");
  require(cfg.episodes >= 1, "episodes: must be >= 1");
  require(cfg.seeds >= 1, "seeds: must be >= 1");

  require(cfg.agent.alpha_critic > 0.0, "agent.alpha_critic: must be positive");
  require(cfg.agent.alpha_theta >= 0.0, "agent.alpha_theta: must be non-negative");
  require(cfg.agent.alpha_beta >= 0.0, "agent.alpha_beta: must be non-negative");
  require(cfg.agent.temperature > 0.0, "agent.temperature: must be positive");
  require(cfg.agent.eps_option >= 0.0 && cfg.agent.eps_option <= 1.0,
          "agent.eps_option: must lie in [0,1]");
  require(cfg.agent.eps_action >= 0.0 && cfg.agent.eps_action <= 1.0,
          "agent.eps_action: must lie in [0,1]");
  require(cfg.agent.eps_action_decay > 0.0 && cfg.agent.eps_action_decay <= 1.0,
          "agent.eps_action_decay: must lie in (0,1]");
  require(cfg.agent.gamma > 0.0 && cfg.agent.gamma <= 1.0, "agent.gamma: must lie in (0,1]");
  require(cfg.agent.eta >= 0.0, "agent.eta: must be non-negative");
  if (variant_deliberates(cfg.variant))
    require(cfg.agent.eta > 0.0, "agent.eta: deliberation variants need a positive margin");
  else
    require(cfg.agent.eta == 0.0, "agent.eta: non-deliberation variants must keep eta at 0");

  if (variant_uses_cpd(cfg.variant)) {
    require(cfg.cpd.d_model >= 1, "cpd.d_model: must be >= 1");
    require(cfg.cpd.n_heads >= 1 && cfg.cpd.d_model % cfg.cpd.n_heads == 0,
            "cpd.n_heads: must divide d_model");
    require(cfg.cpd.n_layers >= 1, "cpd.n_layers: must be >= 1");
    require(cfg.cpd.d_ff >= 1, "cpd.d_ff: must be >= 1");
    require(cfg.cpd.window >= 2, "cpd.window: must be >= 2");
    require(cfg.cpd.stride >= 1 && cfg.cpd.stride <= cfg.cpd.window,
            "cpd.stride: must lie in [1, window]");
    require(cfg.cpd.threshold > 0.0 && cfg.cpd.threshold < 1.0,
            "cpd.threshold: must lie in (0,1)");
    require(cfg.cpd.buffer_capacity >= 1, "cpd.buffer_capacity: must be >= 1");
    require(cfg.cpd.batch >= 1, "cpd.batch: must be >= 1");
    require(cfg.cpd.label_eps >= 0.0 && cfg.cpd.label_eps < 1.0,
            "cpd.label_eps: must lie in [0,1)");
    require(cfg.cpd.delta >= 1, "cpd.delta: must be >= 1");
    require(cfg.cpd.lr > 0.0, "cpd.lr: must be positive");
    require(cfg.cpd.clip > 0.0, "cpd.clip: must be positive");

    const IntegrationConfig& ic = cfg.integration;
    require(ic.warmup_episodes >= 0, "integration.warmup_episodes: must be non-negative");
    require(ic.min_train_windows >= 1, "integration.min_train_windows: must be >= 1");
    require(ic.lambda_cpd >= 0.0, "integration.lambda_cpd: must be non-negative");
    require(ic.lambda_beta >= 0.0, "integration.lambda_beta: must be non-negative");
    require(ic.beta_lr >= 0.0, "integration.beta_lr: must be non-negative");
    require(ic.tau > 0.0, "integration.tau: must be positive");
    require(ic.half_width >= 0, "integration.half_width: must be non-negative");
    require(ic.alpha_w >= 0.0, "integration.alpha_w: must be non-negative");
    require(ic.lambda_div >= 0.0, "integration.lambda_div: must be non-negative");
    require(ic.div_lr >= 0.0, "integration.div_lr: must be non-negative");
    require(ic.div_states >= 1, "integration.div_states: must be >= 1");
    require(ic.lambda_bc >= 0.0, "integration.lambda_bc: must be non-negative");
    require(ic.bc_epochs >= 0, "integration.bc_epochs: must be non-negative");
    require(ic.bc_lr >= 0.0, "integration.bc_lr: must be non-negative");
    require(ic.beta_boost >= 0.0, "integration.beta_boost: must be non-negative");
    require(ic.history_episodes >= 1, "integration.history_episodes: must be >= 1");
  }

  for (std::size_t i = 0; i < cfg.goal_switches.size(); ++i) {
    const std::string p = "goal_switches[" + std::to_string(i) + "].";
    const GoalSwitch& g = cfg.goal_switches[i];
    require(g.episode >= 1 && g.episode <= cfg.episodes,
            p + "episode: must lie in [1, episodes]");
    if (i > 0)
      require(g.episode > cfg.goal_switches[i - 1].episode,
              p + "episode: switches must be strictly increasing");
  }
  if (!cfg.goal_switches.empty() && cfg.env_type != "fourrooms")
    errors.push_back("goal_switches: only supported for the gridworld");

  // Environment config cross-checks need the file itself.
  if (cfg.env_type == "fourrooms" && !cfg.env_config_path.empty()) {
    try {
      const FourRoomsConfig env = fourrooms_load(cfg.env_config_path);
      for (std::size_t i = 0; i < cfg.goal_switches.size(); ++i) {
        const GoalSwitch& g = cfg.goal_switches[i];
        if (env.wall(g.row, g.col))
          errors.push_back("goal_switches[" + std::to_string(i) + "]: target cell is a wall");
      }
    } catch (const std::exception& e) {
      errors.push_back(std::string("env.config_path: ") + e.what());
    }
  } else if (cfg.env_type == "pinball" && !cfg.env_config_path.empty()) {
    try {
      (void)pinball_load(cfg.env_config_path);
    } catch (const std::exception& e) {
      errors.push_back(std::string("env.config_path: ") + e.what());
    }
  }

  if (!errors.empty()) {
    std::string msg = "config errors:";
    for (const std::string& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
}

inline ExperimentConfig experiment_load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: parse failure: ") + e.what());
  }
  ExperimentConfig cfg = experiment_from_json(j);
  experiment_validate(cfg);
  return cfg;
}

}  // namespace cpdoc
