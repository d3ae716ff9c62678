#pragma once

// Change-point training state: a FIFO window memory, label harvesting from
// episodes, and the supervised training step (BCE on smoothed pseudo-labels,
// optional next-token-delta forecast, clipped Adam).

#include <deque>
#include <utility>
#include <vector>

#include "cpdoc/core/rng.hpp"
#include "cpdoc/cpd/labels.hpp"
#include "cpdoc/cpd/model.hpp"
#include "cpdoc/cpd/tokens.hpp"
#include "cpdoc/tensor/adam.hpp"

namespace cpdoc {

struct CPDWindow {
  TokenSeq tokens;
  std::vector<double> targets;  // smoothed labels aligned with tokens
};

class CPDBuffer {
 public:
  explicit CPDBuffer(int capacity) : capacity_(capacity) {}

  void push(CPDWindow w) {
    if (static_cast<int>(items_.size()) == capacity_) items_.pop_front();
    items_.push_back(std::move(w));
  }

  int size() const { return static_cast<int>(items_.size()); }
  bool empty() const { return items_.empty(); }
  const CPDWindow& at(int i) const { return items_[static_cast<std::size_t>(i)]; }

 private:
  int capacity_;
  std::deque<CPDWindow> items_;
};

// Slice an episode into overlapping windows with per-position soft targets.
inline std::vector<CPDWindow> harvest_windows(const TokenSeq& seq, const CPDHyper& hyper) {
  std::vector<CPDWindow> out;
  const int T = seq.size();
  if (T < 2) return out;
  const std::vector<int> y = pseudo_labels(combined_signal(seq), hyper.delta, hyper.spike_z);
  const std::vector<double> targets = label_smooth(y, hyper.label_eps);
  for (int c = 0;; c += hyper.stride) {
    const int len = std::min(hyper.window, T - c);
    if (len < 2) break;
    CPDWindow w;
    w.tokens = token_slice(seq, c, len);
    w.targets.assign(targets.begin() + c, targets.begin() + c + len);
    out.push_back(std::move(w));
    if (c + len >= T) break;
  }
  return out;
}

struct CPDTrainState {
  CPDBuffer buffer;
  AdamState adam;
  long long steps_done = 0;

  CPDTrainState(const CPDHyper& hyper)
      : buffer(hyper.buffer_capacity),
        adam(AdamConfig{hyper.lr, 0.9, 0.999, 1e-8, hyper.weight_decay}) {}
};

struct CPDLoss {
  double total = 0.0;
  double supervised = 0.0;
  double auxiliary = 0.0;
  double grad_norm = 0.0;
  bool applied = false;
};

inline CPDLoss cpd_train_step(CPDTrainState& state, CPDModel& model, Rng& rng) {
  CPDLoss out;
  if (state.buffer.empty()) return out;  // nothing to learn from yet

  const CPDHyper& hy = model.hyper();
  Tape tape;
  Tensor total = Tensor::scalar(0.0);
  for (int b = 0; b < hy.batch; ++b) {
    const CPDWindow& w = state.buffer.at(rng.uniform_int(state.buffer.size()));
    const int L = w.tokens.size();

    Tensor noise;
    const Tensor* noise_ptr = nullptr;
    if (rng.uniform() < hy.noise_prob) {
      noise = Tensor::zeros({static_cast<std::size_t>(L), static_cast<std::size_t>(model.token_dim())});
      for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = hy.noise_sigma * rng.normal();
      noise_ptr = &noise;
    }

    CPDForward f = model.forward(tape, w.tokens, noise_ptr);
    Tensor y = Tensor::zeros({static_cast<std::size_t>(L), 1});
    for (int t = 0; t < L; ++t) y[static_cast<std::size_t>(t)] = w.targets[static_cast<std::size_t>(t)];
    Tensor sup = bce(tape, f.p, y, Reduction::Mean);
    out.supervised += sup.item();
    total = add(tape, total, scale(tape, sup, hy.lambda_sup / hy.batch));

    if (hy.lambda_aux > 0.0 && L >= 2) {
      // forecast the next token from each position; compare against the
      // detached token delta
      Tensor pred = model.aux_prediction(tape, f.hidden);
      Tensor delta = Tensor::zeros({static_cast<std::size_t>(L), static_cast<std::size_t>(model.token_dim())});
      for (int t = 0; t < L - 1; ++t)
        for (int j = 0; j < model.token_dim(); ++j) {
          const std::size_t here = static_cast<std::size_t>(t * model.token_dim() + j);
          const std::size_t next = static_cast<std::size_t>((t + 1) * model.token_dim() + j);
          delta[here] = f.token[next] - f.token[here];
        }
      Tensor err = sub(tape, pred, delta);
      Tensor aux = mean_all(tape, mul(tape, err, err));
      out.auxiliary += aux.item();
      total = add(tape, total, scale(tape, aux, hy.lambda_aux / hy.batch));
    }
  }

  if (!total.finite()) throw DivergenceError("cpd: non-finite loss");
  tape.backward(total);
  std::vector<Tensor> params = model.params();
  out.grad_norm = clip_gradients(params, hy.clip);
  state.adam.step(params);
  zero_gradients(params);
  out.total = total.item();
  out.applied = true;
  ++state.steps_done;
  return out;
}

}  // namespace cpdoc
