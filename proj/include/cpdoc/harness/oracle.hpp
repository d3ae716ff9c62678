#pragma once

// Independent yardsticks for the report and sanity checks: breadth-first
// shortest path for the gridworld, and the mean return of a uniform-random
// policy for Pinball (the floor any learner has to clear).

#include <fstream>
#include <string>

#include "cpdoc/core/error.hpp"
#include "cpdoc/core/rng.hpp"
#include "cpdoc/env/fourrooms.hpp"
#include "cpdoc/env/pinball.hpp"
#include "json.hpp"

namespace cpdoc {

struct RandomFloor {
  double mean_return = 0.0;
  int episodes = 0;
};

inline RandomFloor pinball_random_floor(const PinballConfig& cfg, int episodes = 50,
                                        std::uint64_t base_seed = 424242) {
  if (episodes < 1) throw UsageError("random floor: episodes must be >= 1");
  Pinball env(cfg);
  RandomFloor out;
  out.episodes = episodes;
  for (int e = 0; e < episodes; ++e) {
    Rng rng(Rng::derive_seed(base_seed, static_cast<std::uint64_t>(e)));
    PinballState s = env.reset();
    double ret = 0.0;
    for (;;) {
      const PinballStep step = env.step(s, rng.uniform_int(Pinball::kActions));
      ret += step.reward;
      s = step.next;
      if (step.done) break;
    }
    out.mean_return += ret;
  }
  out.mean_return /= episodes;
  return out;
}

// Inspect an environment config file and print its oracle value as JSON.
// Gridworld files carry a "grid"; Pinball files carry "obstacles".
inline nlohmann::json oracle_report(const std::string& env_path) {
  std::ifstream in(env_path);
  if (!in) throw ValidationError("oracle: cannot open " + env_path);
  nlohmann::json probe;
  try {
    in >> probe;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("oracle: parse failure: ") + e.what());
  }

  nlohmann::json out;
  if (probe.contains("grid")) {
    const FourRoomsConfig cfg = fourrooms_load(env_path);
    const FourRooms env(cfg);
    out["env"] = "fourrooms";
    out["optimal_steps"] = env.optimal_steps();
    out["start"] = {cfg.start_r, cfg.start_c};
    out["goal"] = {cfg.goal_r, cfg.goal_c};
  } else if (probe.contains("obstacles")) {
    const PinballConfig cfg = pinball_load(env_path);
    const RandomFloor floor = pinball_random_floor(cfg);
    out["env"] = "pinball";
    out["random_policy_mean_return"] = floor.mean_return;
    out["episodes"] = floor.episodes;
  } else {
    throw ValidationError("oracle: unrecognized environment config " + env_path);
  }
  return out;
}

}  // namespace cpdoc
