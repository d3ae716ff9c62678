#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "cpdoc/core/error.hpp"

namespace cpdoc {

/// Shared payload of a Tensor. `node` is the index of the tape node that
/// produced this tensor (-1 for leaves and constants).
struct TensorData {
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily, always value.size() once present
  bool requires_grad = false;
  int node = -1;

  std::size_t size() const { return value.size(); }

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

/// Dense row-major tensor of doubles with value semantics on the handle
/// (copies share the payload).
class Tensor {
 public:
  Tensor() : d_(std::make_shared<TensorData>()) {}

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false) {
    Tensor t;
    t.d_->shape = std::move(shape);
    t.d_->value.assign(numel(t.d_->shape), 0.0);
    t.d_->requires_grad = requires_grad;
    if (requires_grad) t.d_->ensure_grad();
    return t;
  }

  static Tensor full(std::vector<std::size_t> shape, double v, bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.d_->value.begin(), t.d_->value.end(), v);
    return t;
  }

  static Tensor from(std::vector<std::size_t> shape, std::vector<double> data,
                     bool requires_grad = false) {
    if (numel(shape) != data.size())
      throw ShapeError("from(): " + std::to_string(data.size()) + " values for shape of " +
                       std::to_string(numel(shape)));
    Tensor t;
    t.d_->shape = std::move(shape);
    t.d_->value = std::move(data);
    t.d_->requires_grad = requires_grad;
    if (requires_grad) t.d_->ensure_grad();
    return t;
  }

  static Tensor scalar(double v) { return from({1}, {v}); }

  const std::vector<std::size_t>& shape() const { return d_->shape; }
  std::size_t size() const { return d_->size(); }
  std::size_t rows() const { return d_->shape.empty() ? 0 : d_->shape[0]; }
  std::size_t cols() const { return d_->shape.size() < 2 ? 1 : d_->shape[1]; }
  bool requires_grad() const { return d_->requires_grad; }
  bool on_tape() const { return d_->node >= 0; }

  double* data() { return d_->value.data(); }
  const double* data() const { return d_->value.data(); }
  double& operator[](std::size_t i) { return d_->value[i]; }
  double operator[](std::size_t i) const { return d_->value[i]; }
  double item() const {
    if (size() != 1) throw UsageError("item() on tensor of size " + std::to_string(size()));
    return d_->value[0];
  }

  std::vector<double>& grad() {
    d_->ensure_grad();
    return d_->grad;
  }
  const std::vector<double>& values() const { return d_->value; }

  void zero_grad() {
    if (!d_->grad.empty()) std::fill(d_->grad.begin(), d_->grad.end(), 0.0);
  }

  bool finite() const {
    for (double v : d_->value)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::shared_ptr<TensorData> payload() const { return d_; }

  static std::size_t numel(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  }

 private:
  std::shared_ptr<TensorData> d_;
};

/// Append-only record of forward operations. Nodes are recorded in execution
/// order, so one reverse sweep propagates gradients to every input.
class Tape {
 public:
  /// Records a node. `backward` reads the output's grad and accumulates into
  /// the inputs' grads. Returns the node id.
  int record(const Tensor& out, std::function<void()> backward) {
    out.payload()->node = static_cast<int>(nodes_.size());
    out.payload()->ensure_grad();
    nodes_.push_back(std::move(backward));
    outputs_.push_back(out.payload());
    return out.payload()->node;
  }

  /// Reverse sweep from a scalar loss. Seeds d(loss)/d(loss) = 1 and runs
  /// every node up to the loss in reverse order. Gradients accumulate across
  /// calls until explicitly zeroed.
  void backward(const Tensor& loss) {
    if (loss.size() != 1) throw UsageError("backward() needs a scalar loss");
    if (!loss.on_tape()) throw UsageError("backward() loss is not on the tape");
    loss.payload()->ensure_grad();
    loss.payload()->grad[0] += 1.0;
    for (int i = loss.payload()->node; i >= 0; --i) nodes_[i]();
  }

  /// Detaches every recorded output and drops the nodes. Leaf gradients are
  /// untouched.
  void clear() {
    for (auto& p : outputs_) p->node = -1;
    nodes_.clear();
    outputs_.clear();
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<std::function<void()>> nodes_;
  std::vector<std::shared_ptr<TensorData>> outputs_;
};

namespace detail {

inline bool participates(const Tensor& t) { return t.requires_grad() || t.on_tape(); }

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) throw ShapeError(std::string(op) + ": operand shapes differ");
}

inline std::pair<std::size_t, std::size_t> as_matrix(const Tensor& t) {
  if (t.shape().size() == 1) return {1, t.shape()[0]};
  if (t.shape().size() == 2) return {t.shape()[0], t.shape()[1]};
  throw ShapeError("expected rank 1 or 2 tensor");
}

// C[m x n] += A[m x k] * B[k x n], ikj order for contiguous inner loops.
inline void mm_accum(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                     std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[m x n] += A[m x k] * B[n x k]^T
inline void mm_nt_accum(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                        std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] += s;
    }
  }
}

// C[k x n] += A[m x k]^T * B[m x n]
inline void mm_tn_accum(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                        std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

}  // namespace detail

/// Standard matrix product a[m x k] * b[k x n].
inline Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  auto [m, k] = detail::as_matrix(a);
  auto [k2, n] = detail::as_matrix(b);
  if (k != k2)
    throw ShapeError("matmul: inner dimensions " + std::to_string(k) + " vs " + std::to_string(k2));
  Tensor out = Tensor::zeros({m, n});
  detail::mm_accum(a.data(), b.data(), out.data(), m, k, n);
  if (detail::participates(a) || detail::participates(b)) {
    const bool ga = detail::participates(a), gb = detail::participates(b);
    tape.record(out, [=]() mutable {
      const double* g = out.payload()->grad.data();
      if (ga) {
        a.payload()->ensure_grad();
        detail::mm_nt_accum(g, b.data(), a.payload()->grad.data(), m, n, k);
      }
      if (gb) {
        b.payload()->ensure_grad();
        detail::mm_tn_accum(a.data(), g, b.payload()->grad.data(), m, k, n);
      }
    });
  }
  return out;
}

/// a[m x k] * b[n x k]^T without materializing the transpose.
inline Tensor matmul_nt(Tape& tape, const Tensor& a, const Tensor& b) {
  auto [m, k] = detail::as_matrix(a);
  auto [n, k2] = detail::as_matrix(b);
  if (k != k2) throw ShapeError("matmul_nt: inner dimensions disagree");
  Tensor out = Tensor::zeros({m, n});
  detail::mm_nt_accum(a.data(), b.data(), out.data(), m, k, n);
  if (detail::participates(a) || detail::participates(b)) {
    const bool ga = detail::participates(a), gb = detail::participates(b);
    tape.record(out, [=]() mutable {
      const double* g = out.payload()->grad.data();  // [m x n]
      if (ga) {
        a.payload()->ensure_grad();
        detail::mm_accum(g, b.data(), a.payload()->grad.data(), m, n, k);
      }
      if (gb) {
        b.payload()->ensure_grad();
        detail::mm_tn_accum(g, a.data(), b.payload()->grad.data(), m, n, k);
      }
    });
  }
  return out;
}

inline Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  if (detail::participates(a) || detail::participates(b)) {
    const bool ga = detail::participates(a), gb = detail::participates(b);
    tape.record(out, [=]() mutable {
      const auto& g = out.payload()->grad;
      if (ga) {
        a.payload()->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) a.payload()->grad[i] += g[i];
      }
      if (gb) {
        b.payload()->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) b.payload()->grad[i] += g[i];
      }
    });
  }
  return out;
}

inline Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  if (detail::participates(a) || detail::participates(b)) {
    const bool ga = detail::participates(a), gb = detail::participates(b);
    tape.record(out, [=]() mutable {
      const auto& g = out.payload()->grad;
      if (ga) {
        a.payload()->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) a.payload()->grad[i] += g[i];
      }
      if (gb) {
        b.payload()->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) b.payload()->grad[i] -= g[i];
      }
    });
  }
  return out;
}

/// Broadcast-add a row vector b[n] to every row of a[m x n].
inline Tensor add_rowvec(Tape& tape, const Tensor& a, const Tensor& b) {
  auto [m, n] = detail::as_matrix(a);
  if (b.size() != n) throw ShapeError("add_rowvec: vector length mismatches columns");
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a[i * n + j] + b[j];
  if (detail::participates(a) || detail::participates(b)) {
    const bool ga = detail::participates(a), gb = detail::participates(b);
    tape.record(out, [=]() mutable {
      const auto& g = out.payload()->grad;
      if (ga) {
        a.payload()->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) a.payload()->grad[i] += g[i];
      }
      if (gb) {
        b.payload()->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) b.payload()->grad[j] += g[i * n + j];
      }
    });
  }
  return out;
}

inline Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  if (detail::participates(a) || detail::participates(b)) {
    const bool ga = detail::participates(a), gb = detail::participates(b);
    tape.record(out, [=]() mutable {
      const auto& g = out.payload()->grad;
      if (ga) {
        a.payload()->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) a.payload()->grad[i] += g[i] * b[i];
      }
      if (gb) {
        b.payload()->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) b.payload()->grad[i] += g[i] * a[i];
      }
    });
  }
  return out;
}

inline Tensor scale(Tape& tape, const Tensor& a, double c) {
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * c;
  if (detail::participates(a)) {
    tape.record(out, [=]() mutable {
      const auto& g = out.payload()->grad;
      a.payload()->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) a.payload()->grad[i] += g[i] * c;
    });
  }
  return out;
}

/// Row-wise softmax over the last axis, computed with max subtraction.
inline Tensor softmax(Tape& tape, const Tensor& a) {
  auto [m, n] = detail::as_matrix(a);
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < m; ++i) {
    const double* xi = a.data() + i * n;
    double* yi = out.data() + i * n;
    double mx = xi[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xi[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      yi[j] = std::exp(xi[j] - mx);
      s += yi[j];
    }
    for (std::size_t j = 0; j < n; ++j) yi[j] /= s;
  }
  if (detail::participates(a)) {
    tape.record(out, [=]() mutable {
      const auto& g = out.payload()->grad;
      a.payload()->ensure_grad();
      auto& ag = a.payload()->grad;
      for (std::size_t i = 0; i < m; ++i) {
        const double* yi = out.data() + i * n;
        const double* gi = g.data() + i * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += gi[j] * yi[j];
        for (std::size_t j = 0; j < n; ++j) ag[i * n + j] += yi[j] * (gi[j] - dot);
      }
    });
  }
  return out;
}

inline Tensor sigmoid(Tape& tape, const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-a[i]));
  if (detail::participates(a)) {
    tape.record(out, [=]() mutable {
      const auto& g = out.payload()->grad;
      a.payload()->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double y = out[i];
        a.payload()->grad[i] += g[i] * y * (1.0 - y);
      }
    });
  }
  return out;
}

/// Smooth GELU (tanh form).
inline Tensor gelu(Tape& tape, const Tensor& a) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kA = 0.044715;
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i];
    out[i] = 0.5 * x * (1.0 + std::tanh(kC * (x + kA * x * x * x)));
  }
  if (detail::participates(a)) {
    tape.record(out, [=]() mutable {
      const auto& g = out.payload()->grad;
      a.payload()->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = a[i];
        const double t = std::tanh(kC * (x + kA * x * x * x));
        const double d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kC * (1.0 + 3.0 * kA * x * x);
        a.payload()->grad[i] += g[i] * d;
      }
    });
  }
  return out;
}

/// Per-row normalization to zero mean / unit variance followed by an affine
/// map: out = gain * xhat + bias. Variance epsilon 1e-5.
inline Tensor layer_norm(Tape& tape, const Tensor& a, const Tensor& gain, const Tensor& bias,
                         double eps = 1e-5) {
  auto [m, n] = detail::as_matrix(a);
  if (n < 2) throw ShapeError("layer_norm: last axis must have length >= 2");
  if (gain.size() != n || bias.size() != n) throw ShapeError("layer_norm: affine size mismatch");
  Tensor out = Tensor::zeros(a.shape());
  std::vector<double> xhat(m * n), inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* xi = a.data() + i * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += xi[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (xi[j] - mean) * (xi[j] - mean);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (xi[j] - mean) * inv_std[i];
      out[i * n + j] = gain[j] * xhat[i * n + j] + bias[j];
    }
  }
  if (detail::participates(a) || detail::participates(gain) || detail::participates(bias)) {
    const bool ga = detail::participates(a), gg = detail::participates(gain),
               gb = detail::participates(bias);
    tape.record(out, [=, xhat = std::move(xhat), inv_std = std::move(inv_std)]() mutable {
      const auto& g = out.payload()->grad;
      if (gg) gain.payload()->ensure_grad();
      if (gb) bias.payload()->ensure_grad();
      if (ga) a.payload()->ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        const double* gi = g.data() + i * n;
        const double* xh = xhat.data() + i * n;
        if (gg)
          for (std::size_t j = 0; j < n; ++j) gain.payload()->grad[j] += gi[j] * xh[j];
        if (gb)
          for (std::size_t j = 0; j < n; ++j) bias.payload()->grad[j] += gi[j];
        if (ga) {
          double mg = 0.0, mgx = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const double gh = gi[j] * gain[j];
            mg += gh;
            mgx += gh * xh[j];
          }
          mg /= static_cast<double>(n);
          mgx /= static_cast<double>(n);
          for (std::size_t j = 0; j < n; ++j) {
            const double gh = gi[j] * gain[j];
            a.payload()->grad[i * n + j] += (gh - mg - xh[j] * mgx) * inv_std[i];
          }
        }
      }
    });
  }
  return out;
}

inline Tensor sum_all(Tape& tape, const Tensor& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
  Tensor out = Tensor::scalar(s);
  if (detail::participates(a)) {
    tape.record(out, [=]() mutable {
      const double g = out.payload()->grad[0];
      a.payload()->ensure_grad();
      for (std::size_t i = 0; i < a.size(); ++i) a.payload()->grad[i] += g;
    });
  }
  return out;
}

inline Tensor mean_all(Tape& tape, const Tensor& a) {
  return scale(tape, sum_all(tape, a), 1.0 / static_cast<double>(a.size()));
}

enum class Reduction { Mean, Sum };

/// Binary cross entropy between probabilities p and (possibly soft) targets y
/// in [0,1]. p is clamped to [1e-7, 1 - 1e-7] before the logs; gradients flow
/// into p only.
inline Tensor bce(Tape& tape, const Tensor& p, const Tensor& y,
                  Reduction reduction = Reduction::Mean) {
  detail::check_same_shape(p, y, "bce");
  constexpr double kEps = 1e-7;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || p[i] > 1.0)
      throw DomainError("bce: probability " + std::to_string(p[i]) + " outside [0,1]");
    if (y[i] < 0.0 || y[i] > 1.0)
      throw DomainError("bce: target " + std::to_string(y[i]) + " outside [0,1]");
  }
  const double norm =
      reduction == Reduction::Mean ? 1.0 / static_cast<double>(p.size()) : 1.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = std::min(1.0 - kEps, std::max(kEps, p[i]));
    loss += -(y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc));
  }
  Tensor out = Tensor::scalar(loss * norm);
  if (detail::participates(p)) {
    tape.record(out, [=]() mutable {
      const double g = out.payload()->grad[0] * norm;
      p.payload()->ensure_grad();
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double pc = std::min(1.0 - kEps, std::max(kEps, p[i]));
        p.payload()->grad[i] += g * (-y[i] / pc + (1.0 - y[i]) / (1.0 - pc));
      }
    });
  }
  return out;
}

/// Gathers rows of table[v x d] at the given indices (embedding lookup).
inline Tensor embed_rows(Tape& tape, const Tensor& table, const std::vector<int>& indices) {
  auto [v, d] = detail::as_matrix(table);
  Tensor out = Tensor::zeros({indices.size(), d});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int r = indices[i];
    if (r < 0 || static_cast<std::size_t>(r) >= v) throw ShapeError("embed_rows: index out of range");
    std::copy_n(table.data() + static_cast<std::size_t>(r) * d, d, out.data() + i * d);
  }
  if (detail::participates(table)) {
    tape.record(out, [=]() mutable {
      const auto& g = out.payload()->grad;
      table.payload()->ensure_grad();
      for (std::size_t i = 0; i < indices.size(); ++i) {
        double* trow = table.payload()->grad.data() + static_cast<std::size_t>(indices[i]) * d;
        const double* gi = g.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) trow[j] += gi[j];
      }
    });
  }
  return out;
}

inline Tensor slice_cols(Tape& tape, const Tensor& a, std::size_t c0, std::size_t c1) {
  auto [m, n] = detail::as_matrix(a);
  if (c0 >= c1 || c1 > n) throw ShapeError("slice_cols: bad column range");
  const std::size_t w = c1 - c0;
  Tensor out = Tensor::zeros({m, w});
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(a.data() + i * n + c0, w, out.data() + i * w);
  if (detail::participates(a)) {
    tape.record(out, [=]() mutable {
      const auto& g = out.payload()->grad;
      a.payload()->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) a.payload()->grad[i * n + c0 + j] += g[i * w + j];
    });
  }
  return out;
}

inline Tensor concat_cols(Tape& tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw UsageError("concat_cols: no tensors");
  const std::size_t m = detail::as_matrix(parts[0]).first;
  std::size_t total = 0;
  for (const auto& p : parts) {
    auto [pm, pn] = detail::as_matrix(p);
    if (pm != m) throw ShapeError("concat_cols: row counts differ");
    total += pn;
  }
  Tensor out = Tensor::zeros({m, total});
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t pn = detail::as_matrix(p).second;
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(p.data() + i * pn, pn, out.data() + i * total + off);
    off += pn;
  }
  bool any = false;
  for (const auto& p : parts) any = any || detail::participates(p);
  if (any) {
    tape.record(out, [=]() mutable {
      const auto& g = out.payload()->grad;
      std::size_t o = 0;
      for (const auto& p : parts) {
        const std::size_t pn = detail::as_matrix(p).second;
        if (detail::participates(p)) {
          p.payload()->ensure_grad();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < pn; ++j)
              p.payload()->grad[i * pn + j] += g[i * total + o + j];
        }
        o += pn;
      }
    });
  }
  return out;
}

}  // namespace cpdoc
