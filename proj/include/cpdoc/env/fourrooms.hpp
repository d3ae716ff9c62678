#pragma once

// Stochastic Four-Rooms gridworld: 13x13 occupancy grid, slip dynamics,
// scheduled goal switching handled by the caller via set_goal().

#include <array>
#include <cstdint>
#include <deque>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cpdoc/core/error.hpp"
#include "cpdoc/core/rng.hpp"

namespace cpdoc {

struct FourRoomsConfig {
  std::vector<std::string> grid;  // rows of '#' (wall) and '.' (free)
  int start_r = 0, start_c = 0;
  int goal_r = 0, goal_c = 0;
  double slip = 1.0 / 3.0;
  int step_cap = 500;
  double goal_reward = 1.0;

  int rows() const { return static_cast<int>(grid.size()); }
  int cols() const { return grid.empty() ? 0 : static_cast<int>(grid[0].size()); }
  bool wall(int r, int c) const {
    if (r < 0 || c < 0 || r >= rows() || c >= cols()) return true;
    return grid[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] == '#';
  }
};

struct GridStep {
  int next_state = 0;
  double reward = 0.0;
  bool done = false;
  bool goal = false;
};

// The classic layout: four rooms joined by four doorways, 104 walkable cells.
inline FourRoomsConfig fourrooms_classic() {
  FourRoomsConfig cfg;
  cfg.grid = {
      "#############",
      "#.....#.....#",
      "#.....#.....#",
      "#...........#",
      "#.....#.....#",
      "#.....#.....#",
      "##.####.....#",
      "#.....###.###",
      "#.....#.....#",
      "#.....#.....#",
      "#...........#",
      "#.....#.....#",
      "#############",
  };
  cfg.start_r = 10;
  cfg.start_c = 3;
  cfg.goal_r = 7;
  cfg.goal_c = 9;
  return cfg;
}

class FourRooms {
 public:
  // up, down, left, right
  static constexpr int kActions = 4;
  static constexpr std::array<int, 4> kDr = {-1, 1, 0, 0};
  static constexpr std::array<int, 4> kDc = {0, 0, -1, 1};

  explicit FourRooms(FourRoomsConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.grid.empty()) throw ConfigError("fourrooms: empty grid");
    for (const auto& row : cfg_.grid)
      if (static_cast<int>(row.size()) != cfg_.cols())
        throw ConfigError("fourrooms: ragged grid");
    if (cfg_.wall(cfg_.start_r, cfg_.start_c)) throw ConfigError("fourrooms: start is a wall");
    if (cfg_.wall(cfg_.goal_r, cfg_.goal_c)) throw ConfigError("fourrooms: goal is a wall");
    if (cfg_.slip < 0.0 || cfg_.slip > 1.0) throw ConfigError("fourrooms: slip outside [0,1]");
  }

  const FourRoomsConfig& config() const { return cfg_; }
  int n_states() const { return cfg_.rows() * cfg_.cols(); }
  int index(int r, int c) const { return r * cfg_.cols() + c; }
  int row_of(int s) const { return s / cfg_.cols(); }
  int col_of(int s) const { return s % cfg_.cols(); }

  int reset() {
    steps_ = 0;
    return index(cfg_.start_r, cfg_.start_c);
  }

  GridStep step(int state, int action, Rng& rng) {
    const int r = row_of(state), c = col_of(state);
    if (cfg_.wall(r, c)) throw CorruptedStateError("fourrooms: agent inside a wall");
    int dir = action;
    if (rng.uniform() < cfg_.slip) dir = static_cast<int>(rng.uniform_int(kActions));
    int nr = r + kDr[static_cast<std::size_t>(dir)];
    int nc = c + kDc[static_cast<std::size_t>(dir)];
    if (cfg_.wall(nr, nc)) {
      nr = r;
      nc = c;
    }
    ++steps_;
    GridStep out;
    out.next_state = index(nr, nc);
    out.goal = (nr == cfg_.goal_r && nc == cfg_.goal_c);
    out.reward = out.goal ? cfg_.goal_reward : 0.0;
    out.done = out.goal || steps_ >= cfg_.step_cap;
    return out;
  }

  void set_goal(int r, int c) {
    if (cfg_.wall(r, c)) throw ConfigError("fourrooms: new goal is a wall");
    cfg_.goal_r = r;
    cfg_.goal_c = c;
  }

  // Shortest deterministic path length from start to goal, ignoring slip.
  int optimal_steps() const { return shortest_path(cfg_.start_r, cfg_.start_c); }

  int shortest_path(int from_r, int from_c) const {
    std::vector<int> dist(static_cast<std::size_t>(n_states()), -1);
    std::deque<int> frontier;
    dist[static_cast<std::size_t>(index(from_r, from_c))] = 0;
    frontier.push_back(index(from_r, from_c));
    while (!frontier.empty()) {
      const int s = frontier.front();
      frontier.pop_front();
      const int r = row_of(s), c = col_of(s);
      if (r == cfg_.goal_r && c == cfg_.goal_c) return dist[static_cast<std::size_t>(s)];
      for (int a = 0; a < kActions; ++a) {
        const int nr = r + kDr[static_cast<std::size_t>(a)];
        const int nc = c + kDc[static_cast<std::size_t>(a)];
        if (cfg_.wall(nr, nc)) continue;
        const int ns = index(nr, nc);
        if (dist[static_cast<std::size_t>(ns)] >= 0) continue;
        dist[static_cast<std::size_t>(ns)] = dist[static_cast<std::size_t>(s)] + 1;
        frontier.push_back(ns);
      }
    }
    throw NoPathError("fourrooms: goal unreachable from start");
  }

  // A doorway is a free cell squeezed between walls on exactly one axis.
  bool is_doorway(int r, int c) const {
    if (cfg_.wall(r, c)) return false;
    const bool vertical_gap = cfg_.wall(r - 1, c) && cfg_.wall(r + 1, c) &&
                              !cfg_.wall(r, c - 1) && !cfg_.wall(r, c + 1);
    const bool horizontal_gap = cfg_.wall(r, c - 1) && cfg_.wall(r, c + 1) &&
                                !cfg_.wall(r - 1, c) && !cfg_.wall(r + 1, c);
    return vertical_gap || horizontal_gap;
  }

  std::vector<std::pair<int, int>> doorways() const {
    std::vector<std::pair<int, int>> out;
    for (int r = 0; r < cfg_.rows(); ++r)
      for (int c = 0; c < cfg_.cols(); ++c)
        if (is_doorway(r, c)) out.emplace_back(r, c);
    return out;
  }

 private:
  FourRoomsConfig cfg_;
  int steps_ = 0;
};

inline FourRoomsConfig fourrooms_from_json(const nlohmann::json& j) {
  FourRoomsConfig cfg;
  try {
    cfg.grid = j.at("grid").get<std::vector<std::string>>();
    cfg.start_r = j.at("start").at(0).get<int>();
    cfg.start_c = j.at("start").at(1).get<int>();
    cfg.goal_r = j.at("goal").at(0).get<int>();
    cfg.goal_c = j.at("goal").at(1).get<int>();
    cfg.slip = j.value("slip", cfg.slip);
    cfg.step_cap = j.value("step_cap", cfg.step_cap);
    cfg.goal_reward = j.value("goal_reward", cfg.goal_reward);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("fourrooms config: ") + e.what());
  }
  return cfg;
}

inline nlohmann::json fourrooms_to_json(const FourRoomsConfig& cfg) {
  nlohmann::json j;
  j["grid"] = cfg.grid;
  j["start"] = {cfg.start_r, cfg.start_c};
  j["goal"] = {cfg.goal_r, cfg.goal_c};
  j["slip"] = cfg.slip;
  j["step_cap"] = cfg.step_cap;
  j["goal_reward"] = cfg.goal_reward;
  return j;
}

// Full validation for configs loaded from disk: the classic four-room
// structure (13x13, closed border, exactly four doorways) plus basics.
inline FourRoomsConfig fourrooms_load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("fourrooms config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("fourrooms config: parse failure: ") + e.what());
  }
  FourRoomsConfig cfg = fourrooms_from_json(j);
  if (cfg.rows() != 13 || cfg.cols() != 13)
    throw ValidationError("grid: expected 13x13");
  for (int r = 0; r < 13; ++r)
    for (int c = 0; c < 13; ++c)
      if ((r == 0 || r == 12 || c == 0 || c == 12) && !cfg.wall(r, c))
        throw ValidationError("grid: border must be walls");
  if (cfg.wall(cfg.start_r, cfg.start_c)) throw ValidationError("start: inside a wall");
  if (cfg.wall(cfg.goal_r, cfg.goal_c)) throw ValidationError("goal: inside a wall");
  if (cfg.slip < 0.0 || cfg.slip > 1.0) throw ValidationError("slip: outside [0,1]");
  if (cfg.step_cap <= 0) throw ValidationError("step_cap: must be positive");
  FourRooms env(cfg);
  if (env.doorways().size() != 4)
    throw ValidationError("grid: expected exactly four doorway cells");
  return cfg;
}

}  // namespace cpdoc
