#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "flowact/common.hpp"
#include "flowact/rng.hpp"
#include "flowact/tensor.hpp"

namespace flowact {

inline constexpr int kHandPoseDim = 45;
inline constexpr int kEigengraspDim = 10;

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Eigenvectors come
// back as rows of V, unsorted.
inline void jacobi_eigen_symmetric(Tensor a, std::vector<double>& eigvals, Tensor& vectors) {
  const int n = a.rows;
  vectors = Tensor::zeros(n, n);
  for (int i = 0; i < n; ++i) vectors.at(i, i) = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
    if (off < 1e-24) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = a.at(p, q);
        if (std::abs(apq) < 1e-300) continue;
        double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (int k = 0; k < n; ++k) {
          double akp = a.at(k, p), akq = a.at(k, q);
          a.at(k, p) = c * akp - s * akq;
          a.at(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = a.at(p, k), aqk = a.at(q, k);
          a.at(p, k) = c * apk - s * aqk;
          a.at(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          double vpk = vectors.at(p, k), vqk = vectors.at(q, k);
          vectors.at(p, k) = c * vpk - s * vqk;
          vectors.at(q, k) = s * vpk + c * vqk;
        }
      }
    }
  }
  eigvals.resize(n);
  for (int i = 0; i < n; ++i) eigvals[i] = a.at(i, i);
}

// Top principal components of hand pose data: mean, 10 orthonormal rows,
// non-increasing explained variance.
struct EigengraspBasis {
  std::vector<double> mean;       // 45
  Tensor components;              // 10 x 45, orthonormal rows
  std::vector<double> explained;  // 10, non-increasing

  std::vector<double> encode(const std::vector<double>& pose) const {
    std::vector<double> coeff(components.rows, 0.0);
    for (int i = 0; i < components.rows; ++i)
      for (int j = 0; j < components.cols; ++j)
        coeff[i] += (pose[j] - mean[j]) * components.at(i, j);
    return coeff;
  }

  std::vector<double> decode(const std::vector<double>& coeff) const {
    std::vector<double> pose = mean;
    for (int i = 0; i < components.rows; ++i)
      for (int j = 0; j < components.cols; ++j) pose[j] += coeff[i] * components.at(i, j);
    return pose;
  }
};

inline EigengraspBasis fit_eigengrasps(const Tensor& poses, int k = kEigengraspDim) {
  const int n = poses.rows, d = poses.cols;
  if (n < d)
    raise(ErrorKind::insufficient_data,
          "fit_eigengrasps: need at least " + std::to_string(d) + " samples, got " +
              std::to_string(n));

  EigengraspBasis basis;
  basis.mean.assign(d, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) basis.mean[j] += poses.at(i, j) / n;

  Tensor cov(d, d);
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < d; ++a) {
      double da = poses.at(i, a) - basis.mean[a];
      for (int b = a; b < d; ++b)
        cov.at(a, b) += da * (poses.at(i, b) - basis.mean[b]);
    }
  }
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) {
      cov.at(a, b) /= (n - 1);
      cov.at(b, a) = cov.at(a, b);
    }

  std::vector<double> vals;
  Tensor vecs;
  jacobi_eigen_symmetric(cov, vals, vecs);
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return vals[a] > vals[b]; });

  basis.components = Tensor::zeros(k, d);
  basis.explained.resize(k);
  for (int i = 0; i < k; ++i) {
    basis.explained[i] = std::max(0.0, vals[order[i]]);
    for (int j = 0; j < d; ++j) basis.components.at(i, j) = vecs.at(order[i], j);
  }
  return basis;
}

// Synthetic hand poses from a known low-rank generative model; PCA on this
// data has a closed-form answer, which makes the fit verifiable.
inline Tensor synthesize_hand_poses(int n, int rank, double noise_std, std::uint64_t seed,
                                    int dim = kHandPoseDim) {
  Rng rng(seed);
  // random orthonormal basis rows via Gram-Schmidt
  Tensor basis = Tensor::randn(rank, dim, rng);
  for (int i = 0; i < rank; ++i) {
    for (int j = 0; j < i; ++j) {
      double dp = 0;
      for (int d = 0; d < dim; ++d) dp += basis.at(i, d) * basis.at(j, d);
      for (int d = 0; d < dim; ++d) basis.at(i, d) -= dp * basis.at(j, d);
    }
    double nrm = 0;
    for (int d = 0; d < dim; ++d) nrm += basis.at(i, d) * basis.at(i, d);
    nrm = std::sqrt(nrm);
    for (int d = 0; d < dim; ++d) basis.at(i, d) /= nrm;
  }
  std::vector<double> mean(dim);
  for (auto& m : mean) m = rng.normal(0.0, 0.5);

  Tensor out(n, dim);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < dim; ++d) out.at(i, d) = mean[d];
    for (int r = 0; r < rank; ++r) {
      double c = rng.normal(0.0, 2.0 / (1.0 + r));
      for (int d = 0; d < dim; ++d) out.at(i, d) += c * basis.at(r, d);
    }
    if (noise_std > 0)
      for (int d = 0; d < dim; ++d) out.at(i, d) += rng.normal(0.0, noise_std);
  }
  return out;
}

}  // namespace flowact
