#pragma once

#include <cmath>
#include <string>

#include "flowact/common.hpp"
#include "flowact/rng.hpp"

namespace flowact {

// Flow-matching timestep distribution over (0,1). Beta concentrates density
// toward the clean end (CPT/SFT); sigmoid-normal peaks at intermediate noise
// levels (T2A).
struct TimestepDist {
  enum class Kind { beta, sigmoid_normal };
  Kind kind = Kind::beta;
  double alpha = 1.0, beta = 1.5;
  double mean = 0.0, stddev = 1.0;

  static TimestepDist beta_dist(double a, double b) {
    TimestepDist d;
    d.kind = Kind::beta;
    d.alpha = a;
    d.beta = b;
    if (a <= 0 || b <= 0) raise(ErrorKind::invalid_argument, "beta parameters must be positive");
    return d;
  }
  static TimestepDist sigmoid_normal(double m, double s) {
    TimestepDist d;
    d.kind = Kind::sigmoid_normal;
    d.mean = m;
    d.stddev = s;
    if (s <= 0) raise(ErrorKind::invalid_argument, "sigmoid-normal stddev must be positive");
    return d;
  }
  static TimestepDist from_name(const std::string& s) {
    if (s == "beta") return beta_dist(1.0, 1.5);
    if (s == "sigmoid-normal") return sigmoid_normal(0.0, 1.0);
    raise(ErrorKind::config_error, "unknown timestep distribution: " + s);
  }
  const char* name() const { return kind == Kind::beta ? "beta" : "sigmoid-normal"; }

  // Analytic CDF, for distribution checks. Beta CDF is closed-form for the
  // (1, b) and (a, 1) shapes used here.
  double cdf(double x) const {
    if (x <= 0) return 0;
    if (x >= 1) return 1;
    if (kind == Kind::sigmoid_normal) {
      double z = (std::log(x / (1 - x)) - mean) / stddev;
      return 0.5 * (1 + std::erf(z / std::sqrt(2.0)));
    }
    if (alpha == 1.0) return 1.0 - std::pow(1.0 - x, beta);
    if (beta == 1.0) return std::pow(x, alpha);
    raise(ErrorKind::invalid_argument, "analytic beta CDF only for shape (1,b) or (a,1)");
  }
};

inline double sample_timestep(const TimestepDist& dist, Rng& rng) {
  double tau;
  if (dist.kind == TimestepDist::Kind::sigmoid_normal) {
    double z = rng.normal(dist.mean, dist.stddev);
    tau = 1.0 / (1.0 + std::exp(-z));
  } else {
    tau = rng.beta(dist.alpha, dist.beta);
  }
  return std::min(1.0 - 1e-12, std::max(1e-12, tau));
}

}  // namespace flowact
