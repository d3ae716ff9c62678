#pragma once

// Causal Transformer boundary classifier: linear state encoder into 64 dims,
// token assembly, sinusoidal position encodings, four pre-norm attention
// blocks (four heads), and a sigmoid boundary head. Window-sized inputs keep
// every boundary probability a function of at most `window` trailing tokens.

#include <cmath>
#include <vector>

#include "cpdoc/core/error.hpp"
#include "cpdoc/core/rng.hpp"
#include "cpdoc/cpd/tokens.hpp"
#include "cpdoc/tensor/adam.hpp"
#include "cpdoc/tensor/tensor.hpp"

namespace cpdoc {

struct CPDHyper {
  int d_model = 64;
  int n_layers = 4;
  int n_heads = 4;
  int d_ff = 128;
  int window = 20;
  int stride = 10;
  double threshold = 0.6;
  int buffer_capacity = 1000;
  int batch = 2;
  double noise_sigma = 0.01;
  double noise_prob = 0.3;
  double label_eps = 0.1;
  int delta = 3;
  double spike_z = 2.0;
  double lambda_sup = 1.0;
  double lambda_aux = 0.0;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double clip = 1.0;
};

struct CPDForward {
  Tensor p;       // [L,1] boundary probabilities
  Tensor hidden;  // [L,d] final normalized hidden states
  Tensor token;   // [L,token_dim] assembled input tokens
};

class CPDModel {
 public:
  CPDModel(int state_dim, int n_actions, bool tabular, const CPDHyper& hyper, Rng& rng)
      : hyper_(hyper), state_dim_(state_dim), n_actions_(n_actions), tabular_(tabular) {
    const int d = hyper_.d_model;
    if (d % hyper_.n_heads != 0) throw ConfigError("cpd: d_model not divisible by heads");
    token_dim_ = d + n_actions_ + 3;  // encoded state, action one-hot, reward, 2 signals

    enc_w_ = xavier_uniform(state_dim_, d, rng);
    enc_b_ = Tensor::zeros({static_cast<std::size_t>(d)}, !tabular_);
    in_w_ = xavier_uniform(token_dim_, d, rng);
    in_b_ = Tensor::zeros({static_cast<std::size_t>(d)}, true);
    for (int l = 0; l < hyper_.n_layers; ++l) {
      Block b;
      b.ln1_g = Tensor::full({static_cast<std::size_t>(d)}, 1.0, true);
      b.ln1_b = Tensor::zeros({static_cast<std::size_t>(d)}, true);
      b.wq = xavier_uniform(d, d, rng);
      b.wk = xavier_uniform(d, d, rng);
      b.wv = xavier_uniform(d, d, rng);
      b.wo = xavier_uniform(d, d, rng);
      b.bq = Tensor::zeros({static_cast<std::size_t>(d)}, true);
      b.bk = Tensor::zeros({static_cast<std::size_t>(d)}, true);
      b.bv = Tensor::zeros({static_cast<std::size_t>(d)}, true);
      b.bo = Tensor::zeros({static_cast<std::size_t>(d)}, true);
      b.ln2_g = Tensor::full({static_cast<std::size_t>(d)}, 1.0, true);
      b.ln2_b = Tensor::zeros({static_cast<std::size_t>(d)}, true);
      b.w1 = xavier_uniform(d, hyper_.d_ff, rng);
      b.b1 = Tensor::zeros({static_cast<std::size_t>(hyper_.d_ff)}, true);
      b.w2 = xavier_uniform(hyper_.d_ff, d, rng);
      b.b2 = Tensor::zeros({static_cast<std::size_t>(d)}, true);
      blocks_.push_back(std::move(b));
    }
    lnf_g_ = Tensor::full({static_cast<std::size_t>(d)}, 1.0, true);
    lnf_b_ = Tensor::zeros({static_cast<std::size_t>(d)}, true);
    head_w_ = xavier_uniform(d, 1, rng);
    head_b_ = Tensor::zeros({1}, true);
    aux_w_ = xavier_uniform(d, token_dim_, rng);
    aux_b_ = Tensor::zeros({static_cast<std::size_t>(token_dim_)}, true);
  }

  const CPDHyper& hyper() const { return hyper_; }
  int token_dim() const { return token_dim_; }
  int n_actions() const { return n_actions_; }
  bool tabular() const { return tabular_; }

  std::vector<Tensor> params() {
    std::vector<Tensor> p = {enc_w_, in_w_, in_b_};
    if (!tabular_) p.push_back(enc_b_);
    for (auto& b : blocks_) {
      for (const Tensor& t : {b.ln1_g, b.ln1_b, b.wq, b.bq, b.wk, b.bk, b.wv, b.bv, b.wo, b.bo,
                              b.ln2_g, b.ln2_b, b.w1, b.b1, b.w2, b.b2})
        p.push_back(t);
    }
    p.push_back(lnf_g_);
    p.push_back(lnf_b_);
    p.push_back(head_w_);
    p.push_back(head_b_);
    if (hyper_.lambda_aux > 0.0) {
      p.push_back(aux_w_);
      p.push_back(aux_b_);
    }
    return p;
  }

  // Current state encoding as plain numbers (no tape) for segment pooling.
  std::vector<double> encode_state(int state_id, const std::array<double, 4>& obs) const {
    const int d = hyper_.d_model;
    std::vector<double> out(static_cast<std::size_t>(d), 0.0);
    if (tabular_) {
      if (state_id < 0 || state_id >= state_dim_) throw UsageError("encode_state: bad id");
      for (int j = 0; j < d; ++j)
        out[static_cast<std::size_t>(j)] =
            enc_w_[static_cast<std::size_t>(state_id * d + j)];
    } else {
      for (int i = 0; i < state_dim_; ++i)
        for (int j = 0; j < d; ++j)
          out[static_cast<std::size_t>(j)] +=
              obs[static_cast<std::size_t>(i)] * enc_w_[static_cast<std::size_t>(i * d + j)];
      for (int j = 0; j < d; ++j) out[static_cast<std::size_t>(j)] += enc_b_[static_cast<std::size_t>(j)];
    }
    return out;
  }

  CPDForward forward(Tape& tape, const TokenSeq& seq, const Tensor* noise = nullptr) {
    const int L = seq.size();
    if (L < 1) throw UsageError("cpd forward: empty window");
    if (L > hyper_.window) throw UsageError("cpd forward: window longer than the context limit");
    const int d = hyper_.d_model;

    Tensor state_emb;
    if (tabular_) {
      if (seq.state_ids.size() != static_cast<std::size_t>(L))
        throw UsageError("cpd forward: missing tabular states");
      state_emb = embed_rows(tape, enc_w_, seq.state_ids);
    } else {
      Tensor o = Tensor::zeros({static_cast<std::size_t>(L), static_cast<std::size_t>(state_dim_)});
      for (int t = 0; t < L; ++t)
        for (int i = 0; i < state_dim_; ++i)
          o[static_cast<std::size_t>(t * state_dim_ + i)] =
              seq.obs[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
      state_emb = add_rowvec(tape, matmul(tape, o, enc_w_), enc_b_);
    }

    Tensor rest = Tensor::zeros({static_cast<std::size_t>(L), static_cast<std::size_t>(n_actions_ + 3)});
    for (int t = 0; t < L; ++t) {
      const int base = t * (n_actions_ + 3);
      rest[static_cast<std::size_t>(base + seq.actions[static_cast<std::size_t>(t)])] = 1.0;
      rest[static_cast<std::size_t>(base + n_actions_)] = seq.rewards[static_cast<std::size_t>(t)];
      rest[static_cast<std::size_t>(base + n_actions_ + 1)] = seq.z[static_cast<std::size_t>(t)][0];
      rest[static_cast<std::size_t>(base + n_actions_ + 2)] = seq.z[static_cast<std::size_t>(t)][1];
    }

    Tensor token = concat_cols(tape, {state_emb, rest});
    if (noise) token = add(tape, token, *noise);

    Tensor x = add_rowvec(tape, matmul(tape, token, in_w_), in_b_);
    x = add(tape, x, position_encoding(seq.start, L, d));

    const Tensor mask = causal_mask(L);
    const int dh = d / hyper_.n_heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    for (auto& b : blocks_) {
      Tensor h = layer_norm(tape, x, b.ln1_g, b.ln1_b);
      Tensor q = add_rowvec(tape, matmul(tape, h, b.wq), b.bq);
      Tensor k = add_rowvec(tape, matmul(tape, h, b.wk), b.bk);
      Tensor v = add_rowvec(tape, matmul(tape, h, b.wv), b.bv);
      std::vector<Tensor> heads;
      for (int hd = 0; hd < hyper_.n_heads; ++hd) {
        const auto c0 = static_cast<std::size_t>(hd * dh), c1 = static_cast<std::size_t>((hd + 1) * dh);
        Tensor qh = slice_cols(tape, q, c0, c1);
        Tensor kh = slice_cols(tape, k, c0, c1);
        Tensor vh = slice_cols(tape, v, c0, c1);
        Tensor scores = add(tape, scale(tape, matmul_nt(tape, qh, kh), att_scale), mask);
        heads.push_back(matmul(tape, softmax(tape, scores), vh));
      }
      Tensor att = add_rowvec(tape, matmul(tape, concat_cols(tape, heads), b.wo), b.bo);
      x = add(tape, x, att);

      Tensor f = layer_norm(tape, x, b.ln2_g, b.ln2_b);
      f = gelu(tape, add_rowvec(tape, matmul(tape, f, b.w1), b.b1));
      f = add_rowvec(tape, matmul(tape, f, b.w2), b.b2);
      x = add(tape, x, f);
    }

    CPDForward out;
    out.hidden = layer_norm(tape, x, lnf_g_, lnf_b_);
    out.p = sigmoid(tape, add_rowvec(tape, matmul(tape, out.hidden, head_w_), head_b_));
    out.token = token;
    return out;
  }

  // Linear forecast of the next token delta from the hidden state (auxiliary).
  Tensor aux_prediction(Tape& tape, const Tensor& hidden) {
    return add_rowvec(tape, matmul(tape, hidden, aux_w_), aux_b_);
  }

  Tensor& head_weights() { return head_w_; }
  Tensor& head_bias() { return head_b_; }
  Tensor& encoder_weights() { return enc_w_; }

  static Tensor position_encoding(int start, int L, int d) {
    Tensor pe = Tensor::zeros({static_cast<std::size_t>(L), static_cast<std::size_t>(d)});
    for (int t = 0; t < L; ++t) {
      const double pos = static_cast<double>(start + t);
      for (int i = 0; i < d / 2; ++i) {
        const double freq = std::pow(10000.0, -2.0 * i / d);
        pe[static_cast<std::size_t>(t * d + 2 * i)] = std::sin(pos * freq);
        pe[static_cast<std::size_t>(t * d + 2 * i + 1)] = std::cos(pos * freq);
      }
    }
    return pe;
  }

  static Tensor causal_mask(int L) {
    Tensor m = Tensor::zeros({static_cast<std::size_t>(L), static_cast<std::size_t>(L)});
    for (int i = 0; i < L; ++i)
      for (int j = i + 1; j < L; ++j) m[static_cast<std::size_t>(i * L + j)] = -1e30;
    return m;
  }

 private:
  struct Block {
    Tensor ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln2_g, ln2_b, w1, b1, w2, b2;
  };

  CPDHyper hyper_;
  int state_dim_;
  int n_actions_;
  bool tabular_;
  int token_dim_;
  Tensor enc_w_, enc_b_, in_w_, in_b_;
  std::vector<Block> blocks_;
  Tensor lnf_g_, lnf_b_, head_w_, head_b_, aux_w_, aux_b_;
};

}  // namespace cpdoc
