#pragma once

#include <cmath>
#include <vector>

#include "cpdoc/core/error.hpp"
#include "cpdoc/core/rng.hpp"
#include "cpdoc/tensor/tensor.hpp"

namespace cpdoc {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled: applied to parameters, not gradients
};

/// Adam with decoupled weight decay. Moment buffers are created on first use
/// and stay shape-congruent with their parameters.
class AdamState {
 public:
  explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  long step_count() const { return t_; }

  /// One update over the parameter list. Throws PoisonedUpdateError (before
  /// touching anything) if any gradient entry is non-finite.
  void step(std::vector<Tensor>& params) {
    for (auto& p : params)
      for (double g : p.grad())
        if (!std::isfinite(g)) throw PoisonedUpdateError("non-finite gradient; step aborted");
    if (m_.empty()) {
      for (auto& p : params) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
      }
    }
    if (m_.size() != params.size()) throw UsageError("adam: parameter list changed size");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      Tensor& p = params[k];
      if (m_[k].size() != p.size()) throw ShapeError("adam: moment/parameter shape mismatch");
      auto& g = p.grad();
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (cfg_.weight_decay != 0.0) p[i] -= cfg_.lr * cfg_.weight_decay * p[i];
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Scales all gradients by max_norm / ||g|| when the global L2 norm exceeds
/// max_norm. Returns the pre-clip norm.
inline double clip_gradients(std::vector<Tensor>& params, double max_norm) {
  if (max_norm <= 0.0) throw DomainError("clip_gradients: max_norm must be > 0");
  double sq = 0.0;
  for (auto& p : params)
    for (double g : p.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& p : params)
      for (double& g : p.grad()) g *= s;
  }
  return norm;
}

inline void zero_gradients(std::vector<Tensor>& params) {
  for (auto& p : params) p.zero_grad();
}

/// Xavier-uniform fill: U(-b, b) with b = sqrt(6 / (fan_in + fan_out)).
inline Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double b = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t = Tensor::zeros({fan_in, fan_out}, true);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-b, b);
  return t;
}

}  // namespace cpdoc
