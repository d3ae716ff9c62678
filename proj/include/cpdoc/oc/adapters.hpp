#pragma once

// Environment adapters exposing the feature/observation view the episode
// driver consumes: one-hot cell features for the gridworld, cosine features
// for Pinball.

#include <array>

#include "cpdoc/env/fourier.hpp"
#include "cpdoc/env/fourrooms.hpp"
#include "cpdoc/env/pinball.hpp"
#include "cpdoc/oc/episode.hpp"

namespace cpdoc {

class FourRoomsAdapter {
 public:
  explicit FourRoomsAdapter(FourRoomsConfig cfg) : env_(std::move(cfg)) {}

  FourRooms& env() { return env_; }
  int feature_dim() const { return env_.n_states(); }
  static constexpr int kActions = FourRooms::kActions;

  EnvView reset(Rng&) {
    state_ = env_.reset();
    return view(state_, 0.0, false);
  }

  EnvView step(int action, Rng& rng) {
    const GridStep out = env_.step(state_, action, rng);
    state_ = out.next_state;
    return view(state_, out.reward, out.done);
  }

 private:
  EnvView view(int s, double reward, bool done) const {
    EnvView v;
    v.f = FeatureVec::one_hot(env_.n_states(), s);
    v.state_id = s;
    const int r = env_.row_of(s), c = env_.col_of(s);
    v.obs = {static_cast<double>(r) / 12.0, static_cast<double>(c) / 12.0, 0.0, 0.0};
    v.reward = reward;
    v.done = done;
    v.at_doorway = env_.is_doorway(r, c);
    return v;
  }

  FourRooms env_;
  int state_ = 0;
};

class PinballAdapter {
 public:
  explicit PinballAdapter(PinballConfig cfg) : env_(std::move(cfg)) {}

  Pinball& env() { return env_; }
  int feature_dim() const { return kFourierDims; }
  static constexpr int kActions = Pinball::kActions;

  EnvView reset(Rng&) {
    state_ = env_.reset();
    return view(0.0, false);
  }

  EnvView step(int action, Rng&) {
    const PinballStep out = env_.step(state_, action);
    state_ = out.next;
    return view(out.reward, out.done);
  }

 private:
  EnvView view(double reward, bool done) const {
    EnvView v;
    const std::array<double, 4> s = Pinball::normalized(state_);
    v.f = FeatureVec::dense(fourier_features(s));
    v.state_id = -1;
    v.obs = s;
    v.reward = reward;
    v.done = done;
    return v;
  }

  Pinball env_;
  PinballState state_{};
};

}  // namespace cpdoc
