#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "flowact/common.hpp"
#include "flowact/rng.hpp"

namespace flowact {

// Dense row-major matrix of doubles. Rank is 1 or 2; a rank-1 tensor behaves
// as a single row.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  static Tensor zeros(int r, int c) { return Tensor(r, c); }

  static Tensor full(int r, int c, double v) {
    Tensor t(r, c);
    for (double& x : t.data) x = v;
    return t;
  }

  static Tensor row(std::vector<double> v) {
    Tensor t;
    t.rows = 1;
    t.cols = static_cast<int>(v.size());
    t.data = std::move(v);
    return t;
  }

  static Tensor randn(int r, int c, Rng& rng, double stddev = 1.0) {
    Tensor t(r, c);
    for (double& x : t.data) x = stddev * rng.normal();
    return t;
  }

  double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

  std::size_t size() const { return data.size(); }

  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  bool finite() const {
    for (double x : data)
      if (!std::isfinite(x)) return false;
    return true;
  }

  void fill(double v) {
    for (double& x : data) x = v;
  }

  Tensor& operator+=(const Tensor& o) {
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    return *this;
  }

  Tensor& operator*=(double s) {
    for (double& x : data) x *= s;
    return *this;
  }

  // Snap every entry onto the f32 grid (values stay in double storage).
  void round_to_f32() {
    for (double& x : data) x = to_f32(x);
  }
};

inline double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// C += A * B  (A: m x k, B: k x n). Accumulation order is fixed, so results
// are bit-identical run to run.
inline void matmul_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  const int m = a.rows, k = a.cols, n = b.cols;
  for (int i = 0; i < m; ++i) {
    const double* arow = &a.data[static_cast<std::size_t>(i) * k];
    double* crow = &c.data[static_cast<std::size_t>(i) * n];
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = &b.data[static_cast<std::size_t>(p) * n];
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C += A * B^T  (A: m x k, B: n x k).
inline void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  const int m = a.rows, k = a.cols, n = b.rows;
  for (int i = 0; i < m; ++i) {
    const double* arow = &a.data[static_cast<std::size_t>(i) * k];
    double* crow = &c.data[static_cast<std::size_t>(i) * n];
    for (int j = 0; j < n; ++j) crow[j] += dot(arow, &b.data[static_cast<std::size_t>(j) * k], k);
  }
}

// C += A^T * B  (A: k x m, B: k x n).
inline void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  const int k = a.rows, m = a.cols, n = b.cols;
  for (int p = 0; p < k; ++p) {
    const double* arow = &a.data[static_cast<std::size_t>(p) * m];
    const double* brow = &b.data[static_cast<std::size_t>(p) * n];
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = &c.data[static_cast<std::size_t>(i) * n];
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace flowact
