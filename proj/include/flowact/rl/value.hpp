#pragma once

#include <cmath>

#include "flowact/tensor.hpp"

namespace flowact {

// Linear value head over mean-pooled condition features. The features are
// treated as constants (stop-gradient), so value-loss gradients can never
// reach the encoder or decoder parameters.
struct ValueHead {
  Tensor w;  // 1 x h
  double b = 0.0;

  static ValueHead init(int hidden) {
    ValueHead v;
    v.w = Tensor::zeros(1, hidden);
    return v;
  }

  static Tensor pool(const Tensor& feats) {
    Tensor p(1, feats.cols);
    for (int i = 0; i < feats.rows; ++i)
      for (int j = 0; j < feats.cols; ++j) p.at(0, j) += feats.at(i, j) / feats.rows;
    return p;
  }

  double forward(const Tensor& feats) const {
    Tensor p = pool(feats);
    double v = b;
    for (int j = 0; j < w.cols; ++j) v += w.at(0, j) * p.at(0, j);
    return v;
  }
};

// Adam on the two value-head tensors, separate from the policy optimizer.
class ValueOptimizer {
 public:
  ValueOptimizer(int hidden, double lr) : lr_(lr) {
    mw_ = Tensor::zeros(1, hidden);
    vw_ = Tensor::zeros(1, hidden);
  }

  void step(ValueHead& head, const Tensor& grad_w, double grad_b) {
    ++t_;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double bc1 = 1.0 - std::pow(b1, t_);
    const double bc2 = 1.0 - std::pow(b2, t_);
    for (int j = 0; j < head.w.cols; ++j) {
      mw_.at(0, j) = b1 * mw_.at(0, j) + (1 - b1) * grad_w.at(0, j);
      vw_.at(0, j) = b2 * vw_.at(0, j) + (1 - b2) * grad_w.at(0, j) * grad_w.at(0, j);
      head.w.at(0, j) = to_f32(head.w.at(0, j) -
                               lr_ * (mw_.at(0, j) / bc1) / (std::sqrt(vw_.at(0, j) / bc2) + eps));
      mw_.at(0, j) = to_f32(mw_.at(0, j));
      vw_.at(0, j) = to_f32(vw_.at(0, j));
    }
    mb_ = b1 * mb_ + (1 - b1) * grad_b;
    vb_ = b2 * vb_ + (1 - b2) * grad_b * grad_b;
    head.b = to_f32(head.b - lr_ * (mb_ / bc1) / (std::sqrt(vb_ / bc2) + eps));
  }

 private:
  double lr_;
  int t_ = 0;
  Tensor mw_, vw_;
  double mb_ = 0.0, vb_ = 0.0;
};

}  // namespace flowact
