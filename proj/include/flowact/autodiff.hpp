#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_map>
#include <utility>
#include <vector>

#include "flowact/tensor.hpp"

namespace flowact {

// Reverse-mode tape over Tensor. One tape per loss evaluation; creation order
// is the topological order, so backward() is a single reverse sweep.
class Tape {
 public:
  struct Var {
    int idx = -1;
    bool tracked() const { return idx >= 0; }
  };

  Tape() { nodes_.reserve(512); }

  // Tracked leaf referencing external storage (parameters). The caller keeps
  // the tensor alive for the tape's lifetime. Repeated calls with the same
  // tensor return the same node, so gradients from every use accumulate in
  // one place.
  Var leaf(const Tensor& external) {
    auto it = leaf_index_.find(&external);
    if (it != leaf_index_.end()) return {it->second};
    Node n;
    n.ext = &external;
    n.track = true;
    nodes_.push_back(std::move(n));
    int idx = static_cast<int>(nodes_.size()) - 1;
    leaf_index_[&external] = idx;
    return {idx};
  }

  // Gradient w.r.t. an external leaf tensor, or nullptr when it never
  // entered this tape (or received no gradient).
  const Tensor* grad_for(const Tensor& external) const {
    auto it = leaf_index_.find(&external);
    if (it == leaf_index_.end()) return nullptr;
    const Node& n = nodes_[it->second];
    return n.grad.data.empty() ? nullptr : &n.grad;
  }

  // Untracked constant (inputs, targets, masks).
  Var constant(Tensor v) {
    Node n;
    n.value = std::move(v);
    n.track = false;
    nodes_.push_back(std::move(n));
    return {static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor& val(Var v) const {
    const Node& n = nodes_[v.idx];
    return n.ext ? *n.ext : n.value;
  }

  // Gradient of the most recent backward() w.r.t. v (zeros if untouched).
  const Tensor& grad(Var v) {
    Node& n = nodes_[v.idx];
    if (n.grad.data.empty()) {
      const Tensor& val = n.ext ? *n.ext : n.value;
      n.grad = Tensor::zeros(val.rows, val.cols);
    }
    return n.grad;
  }

  void backward(Var loss) {
    Node& top = nodes_[loss.idx];
    const Tensor& lv = top.ext ? *top.ext : top.value;
    top.grad = Tensor::full(lv.rows, lv.cols, 1.0);
    for (int i = loss.idx; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.backward && !n.grad.data.empty()) n.backward(*this, n.grad);
    }
  }

  std::size_t size() const { return nodes_.size(); }

  // ---- primitive ops -------------------------------------------------------

  Var matmul(Var a, Var b) {
    const Tensor &A = val(a), &B = val(b);
    Tensor C = Tensor::zeros(A.rows, B.cols);
    matmul_acc(A, B, C);
    return make(std::move(C), [this, a, b](Tape&, const Tensor& g) {
      if (tracked(a)) matmul_nt_acc(g, val(b), grad_mut(a));
      if (tracked(b)) matmul_tn_acc(val(a), g, grad_mut(b));
    }, tracked(a) || tracked(b));
  }

  // A (m x k) times B^T (B given as n x k).
  Var matmul_nt(Var a, Var b) {
    const Tensor &A = val(a), &B = val(b);
    Tensor C = Tensor::zeros(A.rows, B.rows);
    matmul_nt_acc(A, B, C);
    return make(std::move(C), [this, a, b](Tape&, const Tensor& g) {
      if (tracked(a)) matmul_acc(g, val(b), grad_mut(a));
      if (tracked(b)) matmul_tn_acc(g, val(a), grad_mut(b));
    }, tracked(a) || tracked(b));
  }

  Var add(Var a, Var b) {
    const Tensor &A = val(a), &B = val(b);
    Tensor C = A;
    C += B;
    return make(std::move(C), [this, a, b](Tape&, const Tensor& g) {
      if (tracked(a)) acc(grad_mut(a), g);
      if (tracked(b)) acc(grad_mut(b), g);
    }, tracked(a) || tracked(b));
  }

  Var sub(Var a, Var b) {
    const Tensor &A = val(a), &B = val(b);
    Tensor C = A;
    for (std::size_t i = 0; i < C.data.size(); ++i) C.data[i] -= B.data[i];
    return make(std::move(C), [this, a, b](Tape&, const Tensor& g) {
      if (tracked(a)) acc(grad_mut(a), g);
      if (tracked(b)) {
        Tensor& gb = grad_mut(b);
        for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] -= g.data[i];
      }
    }, tracked(a) || tracked(b));
  }

  // Broadcast a 1 x n row over the m rows of a.
  Var add_row(Var a, Var v) {
    const Tensor &A = val(a), &V = val(v);
    Tensor C = A;
    for (int i = 0; i < C.rows; ++i)
      for (int j = 0; j < C.cols; ++j) C.at(i, j) += V.at(0, j);
    return make(std::move(C), [this, a, v](Tape&, const Tensor& g) {
      if (tracked(a)) acc(grad_mut(a), g);
      if (tracked(v)) {
        Tensor& gv = grad_mut(v);
        for (int i = 0; i < g.rows; ++i)
          for (int j = 0; j < g.cols; ++j) gv.at(0, j) += g.at(i, j);
      }
    }, tracked(a) || tracked(v));
  }

  Var mul_row(Var a, Var v) {
    const Tensor &A = val(a), &V = val(v);
    Tensor C = A;
    for (int i = 0; i < C.rows; ++i)
      for (int j = 0; j < C.cols; ++j) C.at(i, j) *= V.at(0, j);
    return make(std::move(C), [this, a, v](Tape&, const Tensor& g) {
      const Tensor &A2 = val(a), &V2 = val(v);
      if (tracked(a)) {
        Tensor& ga = grad_mut(a);
        for (int i = 0; i < g.rows; ++i)
          for (int j = 0; j < g.cols; ++j) ga.at(i, j) += g.at(i, j) * V2.at(0, j);
      }
      if (tracked(v)) {
        Tensor& gv = grad_mut(v);
        for (int i = 0; i < g.rows; ++i)
          for (int j = 0; j < g.cols; ++j) gv.at(0, j) += g.at(i, j) * A2.at(i, j);
      }
    }, tracked(a) || tracked(v));
  }

  Var hadamard(Var a, Var b) {
    const Tensor &A = val(a), &B = val(b);
    Tensor C = A;
    for (std::size_t i = 0; i < C.data.size(); ++i) C.data[i] *= B.data[i];
    return make(std::move(C), [this, a, b](Tape&, const Tensor& g) {
      const Tensor &A2 = val(a), &B2 = val(b);
      if (tracked(a)) {
        Tensor& ga = grad_mut(a);
        for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * B2.data[i];
      }
      if (tracked(b)) {
        Tensor& gb = grad_mut(b);
        for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i] * A2.data[i];
      }
    }, tracked(a) || tracked(b));
  }

  Var scale(Var a, double s) {
    Tensor C = val(a);
    C *= s;
    return make(std::move(C), [this, a, s](Tape&, const Tensor& g) {
      if (tracked(a)) {
        Tensor& ga = grad_mut(a);
        for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += s * g.data[i];
      }
    }, tracked(a));
  }

  Var tanh_(Var a) {
    Tensor C = val(a);
    for (double& x : C.data) x = std::tanh(x);
    int idx = static_cast<int>(nodes_.size());
    return make(std::move(C), [this, a, idx](Tape&, const Tensor& g) {
      if (!tracked(a)) return;
      const Tensor& Y = nodes_[idx].value;
      Tensor& ga = grad_mut(a);
      for (std::size_t i = 0; i < g.data.size(); ++i)
        ga.data[i] += g.data[i] * (1.0 - Y.data[i] * Y.data[i]);
    }, tracked(a));
  }

  Var square(Var a) {
    Tensor C = val(a);
    for (double& x : C.data) x = x * x;
    return make(std::move(C), [this, a](Tape&, const Tensor& g) {
      if (!tracked(a)) return;
      const Tensor& A = val(a);
      Tensor& ga = grad_mut(a);
      for (std::size_t i = 0; i < g.data.size(); ++i)
        ga.data[i] += 2.0 * A.data[i] * g.data[i];
    }, tracked(a));
  }

  Var exp_(Var a) {
    Tensor C = val(a);
    for (double& x : C.data) x = std::exp(x);
    int idx = static_cast<int>(nodes_.size());
    return make(std::move(C), [this, a, idx](Tape&, const Tensor& g) {
      if (!tracked(a)) return;
      const Tensor& Y = nodes_[idx].value;
      Tensor& ga = grad_mut(a);
      for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * Y.data[i];
    }, tracked(a));
  }

  // Gradient is zero outside [lo, hi].
  Var clip(Var a, double lo, double hi) {
    const Tensor& A = val(a);
    Tensor C = A;
    for (double& x : C.data) x = std::min(hi, std::max(lo, x));
    return make(std::move(C), [this, a, lo, hi](Tape&, const Tensor& g) {
      if (!tracked(a)) return;
      const Tensor& A2 = val(a);
      Tensor& ga = grad_mut(a);
      for (std::size_t i = 0; i < g.data.size(); ++i)
        if (A2.data[i] > lo && A2.data[i] < hi) ga.data[i] += g.data[i];
    }, tracked(a));
  }

  // Elementwise min; gradient routes to the smaller input (ties to a).
  Var minimum(Var a, Var b) {
    const Tensor &A = val(a), &B = val(b);
    Tensor C = A;
    for (std::size_t i = 0; i < C.data.size(); ++i) C.data[i] = std::min(A.data[i], B.data[i]);
    return make(std::move(C), [this, a, b](Tape&, const Tensor& g) {
      const Tensor &A2 = val(a), &B2 = val(b);
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        if (A2.data[i] <= B2.data[i]) {
          if (tracked(a)) grad_mut(a).data[i] += g.data[i];
        } else if (tracked(b)) {
          grad_mut(b).data[i] += g.data[i];
        }
      }
    }, tracked(a) || tracked(b));
  }

  Var maximum(Var a, Var b) {
    const Tensor &A = val(a), &B = val(b);
    Tensor C = A;
    for (std::size_t i = 0; i < C.data.size(); ++i) C.data[i] = std::max(A.data[i], B.data[i]);
    return make(std::move(C), [this, a, b](Tape&, const Tensor& g) {
      const Tensor &A2 = val(a), &B2 = val(b);
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        if (A2.data[i] >= B2.data[i]) {
          if (tracked(a)) grad_mut(a).data[i] += g.data[i];
        } else if (tracked(b)) {
          grad_mut(b).data[i] += g.data[i];
        }
      }
    }, tracked(a) || tracked(b));
  }

  // Row-wise layer normalization with learned gain and bias (1 x n each).
  Var layernorm(Var a, Var gain, Var bias, double eps = 1e-6) {
    const Tensor& A = val(a);
    const Tensor& G = val(gain);
    const Tensor& B = val(bias);
    const int m = A.rows, n = A.cols;
    Tensor C(m, n);
    Tensor xhat(m, n);
    std::vector<double> inv_std(m);
    for (int i = 0; i < m; ++i) {
      double mean = 0.0;
      for (int j = 0; j < n; ++j) mean += A.at(i, j);
      mean /= n;
      double var = 0.0;
      for (int j = 0; j < n; ++j) {
        double d = A.at(i, j) - mean;
        var += d * d;
      }
      var /= n;
      double is = 1.0 / std::sqrt(var + eps);
      inv_std[i] = is;
      for (int j = 0; j < n; ++j) {
        double xh = (A.at(i, j) - mean) * is;
        xhat.at(i, j) = xh;
        C.at(i, j) = G.at(0, j) * xh + B.at(0, j);
      }
    }
    auto xh = std::make_shared<Tensor>(std::move(xhat));
    auto is = std::make_shared<std::vector<double>>(std::move(inv_std));
    return make(std::move(C), [this, a, gain, bias, xh, is](Tape&, const Tensor& g) {
      const Tensor& G2 = val(gain);
      const int m = g.rows, n = g.cols;
      if (tracked(gain)) {
        Tensor& gg = grad_mut(gain);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) gg.at(0, j) += g.at(i, j) * xh->at(i, j);
      }
      if (tracked(bias)) {
        Tensor& gb = grad_mut(bias);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) gb.at(0, j) += g.at(i, j);
      }
      if (tracked(a)) {
        Tensor& ga = grad_mut(a);
        for (int i = 0; i < m; ++i) {
          double sum_gy = 0.0, sum_gyx = 0.0;
          for (int j = 0; j < n; ++j) {
            double gy = g.at(i, j) * G2.at(0, j);
            sum_gy += gy;
            sum_gyx += gy * xh->at(i, j);
          }
          for (int j = 0; j < n; ++j) {
            double gy = g.at(i, j) * G2.at(0, j);
            ga.at(i, j) += (*is)[i] * (gy - sum_gy / n - xh->at(i, j) * sum_gyx / n);
          }
        }
      }
    }, tracked(a) || tracked(gain) || tracked(bias));
  }

  // Row-wise softmax of (a + additive_mask). Pass nullptr for no mask.
  Var softmax_rows(Var a, const Tensor* additive_mask = nullptr) {
    const Tensor& A = val(a);
    const int m = A.rows, n = A.cols;
    Tensor C(m, n);
    for (int i = 0; i < m; ++i) {
      double mx = -1e300;
      for (int j = 0; j < n; ++j) {
        double v = A.at(i, j) + (additive_mask ? additive_mask->at(i, j) : 0.0);
        C.at(i, j) = v;
        mx = std::max(mx, v);
      }
      double z = 0.0;
      for (int j = 0; j < n; ++j) {
        double e = std::exp(C.at(i, j) - mx);
        C.at(i, j) = e;
        z += e;
      }
      for (int j = 0; j < n; ++j) C.at(i, j) /= z;
    }
    int idx = static_cast<int>(nodes_.size());
    return make(std::move(C), [this, a, idx](Tape&, const Tensor& g) {
      if (!tracked(a)) return;
      const Tensor& Y = nodes_[idx].value;
      Tensor& ga = grad_mut(a);
      for (int i = 0; i < g.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < g.cols; ++j) s += g.at(i, j) * Y.at(i, j);
        for (int j = 0; j < g.cols; ++j)
          ga.at(i, j) += Y.at(i, j) * (g.at(i, j) - s);
      }
    }, tracked(a));
  }

  // Mean of -log softmax(logits)[i, target_i] over rows.
  Var cross_entropy_mean(Var logits, std::vector<int> targets) {
    const Tensor& L = val(logits);
    const int m = L.rows, n = L.cols;
    auto probs = std::make_shared<Tensor>(m, n);
    double loss = 0.0;
    for (int i = 0; i < m; ++i) {
      double mx = -1e300;
      for (int j = 0; j < n; ++j) mx = std::max(mx, L.at(i, j));
      double z = 0.0;
      for (int j = 0; j < n; ++j) z += std::exp(L.at(i, j) - mx);
      double logz = std::log(z) + mx;
      loss -= L.at(i, targets[i]) - logz;
      for (int j = 0; j < n; ++j) probs->at(i, j) = std::exp(L.at(i, j) - logz);
    }
    Tensor out(1, 1);
    out.at(0, 0) = loss / m;
    auto tg = std::make_shared<std::vector<int>>(std::move(targets));
    return make(std::move(out), [this, logits, probs, tg](Tape&, const Tensor& g) {
      if (!tracked(logits)) return;
      Tensor& gl = grad_mut(logits);
      const int m = gl.rows, n = gl.cols;
      const double s = g.at(0, 0) / m;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          gl.at(i, j) += s * (probs->at(i, j) - (j == (*tg)[i] ? 1.0 : 0.0));
    }, tracked(logits));
  }

  // Gather rows of an embedding table.
  Var embed(Var table, std::vector<int> ids) {
    const Tensor& T = val(table);
    Tensor C(static_cast<int>(ids.size()), T.cols);
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (int j = 0; j < T.cols; ++j) C.at(static_cast<int>(i), j) = T.at(ids[i], j);
    auto idp = std::make_shared<std::vector<int>>(std::move(ids));
    return make(std::move(C), [this, table, idp](Tape&, const Tensor& g) {
      if (!tracked(table)) return;
      Tensor& gt = grad_mut(table);
      for (int i = 0; i < g.rows; ++i)
        for (int j = 0; j < g.cols; ++j) gt.at((*idp)[i], j) += g.at(i, j);
    }, tracked(table));
  }

  Var slice_rows(Var a, int r0, int r1) {
    const Tensor& A = val(a);
    Tensor C(r1 - r0, A.cols);
    for (int i = r0; i < r1; ++i)
      for (int j = 0; j < A.cols; ++j) C.at(i - r0, j) = A.at(i, j);
    return make(std::move(C), [this, a, r0](Tape&, const Tensor& g) {
      if (!tracked(a)) return;
      Tensor& ga = grad_mut(a);
      for (int i = 0; i < g.rows; ++i)
        for (int j = 0; j < g.cols; ++j) ga.at(r0 + i, j) += g.at(i, j);
    }, tracked(a));
  }

  Var slice_cols(Var a, int c0, int c1) {
    const Tensor& A = val(a);
    Tensor C(A.rows, c1 - c0);
    for (int i = 0; i < A.rows; ++i)
      for (int j = c0; j < c1; ++j) C.at(i, j - c0) = A.at(i, j);
    return make(std::move(C), [this, a, c0](Tape&, const Tensor& g) {
      if (!tracked(a)) return;
      Tensor& ga = grad_mut(a);
      for (int i = 0; i < g.rows; ++i)
        for (int j = 0; j < g.cols; ++j) ga.at(i, c0 + j) += g.at(i, j);
    }, tracked(a));
  }

  Var concat_rows(const std::vector<Var>& parts) {
    int rows = 0, cols = val(parts[0]).cols;
    for (Var p : parts) rows += val(p).rows;
    Tensor C(rows, cols);
    int r = 0;
    for (Var p : parts) {
      const Tensor& P = val(p);
      for (int i = 0; i < P.rows; ++i)
        for (int j = 0; j < cols; ++j) C.at(r + i, j) = P.at(i, j);
      r += P.rows;
    }
    auto ps = std::make_shared<std::vector<Var>>(parts);
    bool any = false;
    for (Var p : parts) any = any || tracked(p);
    return make(std::move(C), [this, ps](Tape&, const Tensor& g) {
      int r = 0;
      for (Var p : *ps) {
        const Tensor& P = val(p);
        if (tracked(p)) {
          Tensor& gp = grad_mut(p);
          for (int i = 0; i < P.rows; ++i)
            for (int j = 0; j < g.cols; ++j) gp.at(i, j) += g.at(r + i, j);
        }
        r += P.rows;
      }
    }, any);
  }

  Var concat_cols(const std::vector<Var>& parts) {
    int cols = 0, rows = val(parts[0]).rows;
    for (Var p : parts) cols += val(p).cols;
    Tensor C(rows, cols);
    int c = 0;
    for (Var p : parts) {
      const Tensor& P = val(p);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < P.cols; ++j) C.at(i, c + j) = P.at(i, j);
      c += P.cols;
    }
    auto ps = std::make_shared<std::vector<Var>>(parts);
    bool any = false;
    for (Var p : parts) any = any || tracked(p);
    return make(std::move(C), [this, ps](Tape&, const Tensor& g) {
      int c = 0;
      for (Var p : *ps) {
        const Tensor& P = val(p);
        if (tracked(p)) {
          Tensor& gp = grad_mut(p);
          for (int i = 0; i < g.rows; ++i)
            for (int j = 0; j < P.cols; ++j) gp.at(i, j) += g.at(i, c + j);
        }
        c += P.cols;
      }
    }, any);
  }

  Var mean_pool_rows(Var a) {
    const Tensor& A = val(a);
    Tensor C(1, A.cols);
    for (int i = 0; i < A.rows; ++i)
      for (int j = 0; j < A.cols; ++j) C.at(0, j) += A.at(i, j) / A.rows;
    return make(std::move(C), [this, a](Tape&, const Tensor& g) {
      if (!tracked(a)) return;
      Tensor& ga = grad_mut(a);
      for (int i = 0; i < ga.rows; ++i)
        for (int j = 0; j < ga.cols; ++j) ga.at(i, j) += g.at(0, j) / ga.rows;
    }, tracked(a));
  }

  Var mean_all(Var a) {
    const Tensor& A = val(a);
    double s = 0.0;
    for (double x : A.data) s += x;
    Tensor C(1, 1);
    C.at(0, 0) = s / static_cast<double>(A.size());
    return make(std::move(C), [this, a](Tape&, const Tensor& g) {
      if (!tracked(a)) return;
      Tensor& ga = grad_mut(a);
      const double s = g.at(0, 0) / static_cast<double>(ga.size());
      for (double& x : ga.data) x += s;
    }, tracked(a));
  }

  Var sum_all(Var a) {
    const Tensor& A = val(a);
    double s = 0.0;
    for (double x : A.data) s += x;
    Tensor C(1, 1);
    C.at(0, 0) = s;
    return make(std::move(C), [this, a](Tape&, const Tensor& g) {
      if (!tracked(a)) return;
      Tensor& ga = grad_mut(a);
      for (double& x : ga.data) x += g.at(0, 0);
    }, tracked(a));
  }

  // Sum over mask=1 cells of log N(y; mu, sigma^2). Gradient flows to mu only.
  Var gaussian_logprob_masked(Var mu, Tensor y, double sigma, Tensor mask) {
    if (sigma <= 0.0)
      throw std::invalid_argument("gaussian_logprob_masked: sigma must be positive");
    const Tensor& M = val(mu);
    const double inv_var = 1.0 / (sigma * sigma);
    const double log_norm = -0.5 * std::log(2.0 * M_PI * sigma * sigma);
    double s = 0.0;
    for (std::size_t i = 0; i < M.data.size(); ++i) {
      if (mask.data[i] == 0.0) continue;
      double d = y.data[i] - M.data[i];
      s += log_norm - 0.5 * d * d * inv_var;
    }
    Tensor out(1, 1);
    out.at(0, 0) = s;
    auto yp = std::make_shared<Tensor>(std::move(y));
    auto mp = std::make_shared<Tensor>(std::move(mask));
    return make(std::move(out), [this, mu, yp, mp, inv_var](Tape&, const Tensor& g) {
      if (!tracked(mu)) return;
      const Tensor& M2 = val(mu);
      Tensor& gm = grad_mut(mu);
      const double s = g.at(0, 0);
      for (std::size_t i = 0; i < gm.data.size(); ++i) {
        if (mp->data[i] == 0.0) continue;
        gm.data[i] += s * (yp->data[i] - M2.data[i]) * inv_var;
      }
    }, tracked(mu));
  }

  // sum(W .* a .* a) as a single node; W is an untracked weight grid.
  Var weighted_sse(Var a, Tensor weights) {
    const Tensor& A = val(a);
    double s = 0.0;
    for (std::size_t i = 0; i < A.data.size(); ++i)
      s += weights.data[i] * A.data[i] * A.data[i];
    Tensor C(1, 1);
    C.at(0, 0) = s;
    auto W = std::make_shared<Tensor>(std::move(weights));
    return make(std::move(C), [this, a, W](Tape&, const Tensor& g) {
      if (!tracked(a)) return;
      const Tensor& A2 = val(a);
      Tensor& ga = grad_mut(a);
      const double s = g.at(0, 0);
      for (std::size_t i = 0; i < ga.data.size(); ++i)
        ga.data[i] += 2.0 * s * W->data[i] * A2.data[i];
    }, tracked(a));
  }

 private:
  struct Node {
    Tensor value;
    const Tensor* ext = nullptr;
    Tensor grad;
    bool track = false;
    std::function<void(Tape&, const Tensor&)> backward;
  };

  bool tracked(Var v) const { return nodes_[v.idx].track; }

  static void acc(Tensor& dst, const Tensor& src) { dst += src; }

  Tensor& grad_mut(Var v) {
    Node& n = nodes_[v.idx];
    if (n.grad.data.empty()) {
      const Tensor& val = n.ext ? *n.ext : n.value;
      n.grad = Tensor::zeros(val.rows, val.cols);
    }
    return n.grad;
  }

  Var make(Tensor value, std::function<void(Tape&, const Tensor&)> bw, bool track) {
    Node n;
    n.value = std::move(value);
    n.track = track;
    if (track) n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return {static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, int> leaf_index_;
};

using Var = Tape::Var;

}  // namespace flowact
