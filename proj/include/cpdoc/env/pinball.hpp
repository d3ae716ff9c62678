#pragma once

// Continuous Pinball domain: a ball steered by directional impulses through
// polygonal obstacles, with elastic collisions and per-step velocity drag.

#include <array>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cpdoc/core/error.hpp"

namespace cpdoc {

struct Vec2 {
  double x = 0.0, y = 0.0;
};

inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator*(double k, Vec2 a) { return {k * a.x, k * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::sqrt(dot(a, a)); }

struct PinballConfig {
  std::vector<std::vector<Vec2>> obstacles;
  Vec2 start{0.2, 0.9};
  Vec2 goal{0.9, 0.2};
  double goal_radius = 0.04;
  double ball_radius = 0.02;
  double drag = 0.995;
  double impulse = 0.02;
  int step_cap = 10000;
  double reward_goal = 10000.0;
  double reward_noop = -1.0;
  double reward_move = -5.0;
};

struct PinballState {
  double x = 0.0, y = 0.0, vx = 0.0, vy = 0.0;
};

struct PinballStep {
  PinballState next;
  double reward = 0.0;
  bool done = false;
  bool goal = false;
  bool collision = false;
};

namespace detail {

inline Vec2 closest_on_segment(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return a;
  double t = dot(p - a, ab) / len2;
  t = std::min(1.0, std::max(0.0, t));
  return a + t * ab;
}

inline bool point_in_polygon(Vec2 p, const std::vector<Vec2>& poly) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2 a = poly[i], b = poly[j];
    if ((a.y > p.y) != (b.y > p.y) &&
        p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x)
      inside = !inside;
  }
  return inside;
}

}  // namespace detail

class Pinball {
 public:
  // thrust +x, thrust -x, thrust +y, thrust -y, noop
  static constexpr int kActions = 5;
  static constexpr int kSubsteps = 20;
  static constexpr double kDt = 0.01;

  explicit Pinball(PinballConfig cfg) : cfg_(std::move(cfg)) {}

  const PinballConfig& config() const { return cfg_; }

  PinballState reset() {
    steps_ = 0;
    return {cfg_.start.x, cfg_.start.y, 0.0, 0.0};
  }

  PinballStep step(PinballState s, int action) {
    if (!std::isfinite(s.x) || !std::isfinite(s.y) || !std::isfinite(s.vx) ||
        !std::isfinite(s.vy))
      throw CorruptedStateError("pinball: non-finite state");

    Vec2 pos{s.x, s.y};
    Vec2 vel{s.vx, s.vy};
    switch (action) {
      case 0: vel.x += cfg_.impulse; break;
      case 1: vel.x -= cfg_.impulse; break;
      case 2: vel.y += cfg_.impulse; break;
      case 3: vel.y -= cfg_.impulse; break;
      case 4: break;
      default: throw UsageError("pinball: unknown action");
    }
    vel.x = std::min(1.0, std::max(-1.0, vel.x));
    vel.y = std::min(1.0, std::max(-1.0, vel.y));

    bool hit = false;
    for (int sub = 0; sub < kSubsteps; ++sub) {
      pos = pos + kDt * vel;
      hit |= resolve_walls(pos, vel);
      for (const auto& poly : cfg_.obstacles) hit |= resolve_polygon(poly, pos, vel);
    }
    vel = cfg_.drag * vel;

    ++steps_;
    PinballStep out;
    out.next = {pos.x, pos.y, vel.x, vel.y};
    out.collision = hit;
    out.reward = (action == 4) ? cfg_.reward_noop : cfg_.reward_move;
    out.goal = norm(pos - cfg_.goal) <= cfg_.goal_radius;
    if (out.goal) out.reward += cfg_.reward_goal;
    out.done = out.goal || steps_ >= cfg_.step_cap;
    return out;
  }

  // State scaled to [0,1]^4 for feature encoders.
  static std::array<double, 4> normalized(const PinballState& s) {
    return {s.x, s.y, (s.vx + 1.0) / 2.0, (s.vy + 1.0) / 2.0};
  }

 private:
  bool resolve_walls(Vec2& pos, Vec2& vel) const {
    const double r = cfg_.ball_radius;
    bool hit = false;
    if (pos.x < r) { pos.x = r; if (vel.x < 0) vel.x = -vel.x; hit = true; }
    if (pos.x > 1 - r) { pos.x = 1 - r; if (vel.x > 0) vel.x = -vel.x; hit = true; }
    if (pos.y < r) { pos.y = r; if (vel.y < 0) vel.y = -vel.y; hit = true; }
    if (pos.y > 1 - r) { pos.y = 1 - r; if (vel.y > 0) vel.y = -vel.y; hit = true; }
    return hit;
  }

  bool resolve_polygon(const std::vector<Vec2>& poly, Vec2& pos, Vec2& vel) const {
    Vec2 best{};
    double best_d2 = 1e300;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
      const Vec2 q = detail::closest_on_segment(pos, poly[j], poly[i]);
      const Vec2 d = pos - q;
      const double d2 = dot(d, d);
      if (d2 < best_d2) { best_d2 = d2; best = q; }
    }
    const double dist = std::sqrt(best_d2);
    const bool inside = detail::point_in_polygon(pos, poly);
    if (!inside && dist >= cfg_.ball_radius) return false;

    // outward normal: away from the surface, flipped if the center sank inside
    Vec2 n;
    if (dist > 1e-12) {
      n = (1.0 / dist) * (pos - best);
      if (inside) n = -1.0 * n;
    } else {
      n = {0.0, 1.0};
    }
    pos = best + cfg_.ball_radius * n;
    const double vn = dot(vel, n);
    if (vn < 0) vel = vel - 2.0 * vn * n;  // elastic: speed preserved
    return true;
  }

  PinballConfig cfg_;
  int steps_ = 0;
};

inline PinballConfig pinball_from_json(const nlohmann::json& j) {
  PinballConfig cfg;
  try {
    cfg.obstacles.clear();
    for (const auto& poly : j.at("obstacles")) {
      std::vector<Vec2> verts;
      for (const auto& v : poly) verts.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
      cfg.obstacles.push_back(std::move(verts));
    }
    cfg.start = {j.at("start").at(0).get<double>(), j.at("start").at(1).get<double>()};
    cfg.goal = {j.at("goal").at(0).get<double>(), j.at("goal").at(1).get<double>()};
    cfg.goal_radius = j.at("goal_radius").get<double>();
    cfg.ball_radius = j.at("ball_radius").get<double>();
    cfg.drag = j.at("drag").get<double>();
    cfg.impulse = j.value("impulse", cfg.impulse);
    cfg.step_cap = j.value("step_cap", cfg.step_cap);
    cfg.reward_goal = j.value("reward_goal", cfg.reward_goal);
    cfg.reward_noop = j.value("reward_noop", cfg.reward_noop);
    cfg.reward_move = j.value("reward_move", cfg.reward_move);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("pinball config: ") + e.what());
  }
  return cfg;
}

inline nlohmann::json pinball_to_json(const PinballConfig& cfg) {
  nlohmann::json j;
  j["obstacles"] = nlohmann::json::array();
  for (const auto& poly : cfg.obstacles) {
    nlohmann::json jp = nlohmann::json::array();
    for (const auto& v : poly) jp.push_back({v.x, v.y});
    j["obstacles"].push_back(jp);
  }
  j["start"] = {cfg.start.x, cfg.start.y};
  j["goal"] = {cfg.goal.x, cfg.goal.y};
  j["goal_radius"] = cfg.goal_radius;
  j["ball_radius"] = cfg.ball_radius;
  j["drag"] = cfg.drag;
  j["impulse"] = cfg.impulse;
  j["step_cap"] = cfg.step_cap;
  j["reward_goal"] = cfg.reward_goal;
  j["reward_noop"] = cfg.reward_noop;
  j["reward_move"] = cfg.reward_move;
  return j;
}

inline void pinball_validate(const PinballConfig& cfg) {
  auto in_unit = [](Vec2 p) { return p.x >= 0 && p.x <= 1 && p.y >= 0 && p.y <= 1; };
  for (std::size_t i = 0; i < cfg.obstacles.size(); ++i) {
    const auto& poly = cfg.obstacles[i];
    const std::string field = "obstacles[" + std::to_string(i) + "]";
    if (poly.size() < 3) throw ValidationError(field + ": polygon needs at least 3 vertices");
    for (const auto& v : poly)
      if (!in_unit(v)) throw ValidationError(field + ": vertex outside the unit square");
  }
  if (!in_unit(cfg.start)) throw ValidationError("start: outside the unit square");
  if (!in_unit(cfg.goal)) throw ValidationError("goal: outside the unit square");
  if (cfg.drag <= 0.0 || cfg.drag > 1.0) throw ValidationError("drag: outside (0,1]");
  if (cfg.goal_radius <= 0.0) throw ValidationError("goal_radius: must be positive");
  if (cfg.ball_radius <= 0.0) throw ValidationError("ball_radius: must be positive");
  if (cfg.step_cap <= 0) throw ValidationError("step_cap: must be positive");
  for (std::size_t i = 0; i < cfg.obstacles.size(); ++i) {
    const auto& poly = cfg.obstacles[i];
    double dist = 1e300;
    for (std::size_t a = 0, b = poly.size() - 1; a < poly.size(); b = a++)
      dist = std::min(dist, norm(cfg.start - detail::closest_on_segment(cfg.start, poly[b], poly[a])));
    if (detail::point_in_polygon(cfg.start, poly) || dist < cfg.ball_radius)
      throw ValidationError("start: inside obstacles[" + std::to_string(i) + "]");
  }
}

inline PinballConfig pinball_load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("pinball config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("pinball config: parse failure: ") + e.what());
  }
  PinballConfig cfg = pinball_from_json(j);
  pinball_validate(cfg);
  return cfg;
}

}  // namespace cpdoc
