#pragma once

// Regularization weight (inverse stepsize) policies for the model-based
// update, and a Monte-Carlo estimator for the clipped-ratio moments that
// control the reference-Lipschitz policy.

#include "wcopt/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>

namespace wcopt {

enum class PolicyKind { constant, growth, reference };

inline std::string_view to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::constant: return "constant";
    case PolicyKind::growth: return "growth";
    case PolicyKind::reference: return "reference";
  }
  return "?";
}

/// theory_sqrtK: offsets rho + kappa (+ tau) plus a sqrt(K) scale.
/// theory_kzeta: the same offsets with a k^zeta scale (anytime variant).
/// experiment:   theta * sqrt(K) scale without offsets.
/// convex:       convex-objective variant, alpha * sqrt(K) scale without offsets.
enum class HorizonMode { theory_sqrtK, theory_kzeta, experiment, convex };

inline std::string_view to_string(HorizonMode m) {
  switch (m) {
    case HorizonMode::theory_sqrtK: return "theory_sqrtK";
    case HorizonMode::theory_kzeta: return "theory_kzeta";
    case HorizonMode::experiment: return "experiment";
    case HorizonMode::convex: return "convex";
  }
  return "?";
}

struct StepsizeParams {
  double rho = 1.0;
  double kappa = 0.0;
  double tau = 0.0;
  double alpha = 1.0;
  double theta = 1.0;
  double zeta = 0.75;
  long long horizon = 1;  // K
  HorizonMode mode = HorizonMode::experiment;

  void validate() const {
    require(horizon >= 1, "horizon K must be positive");
    require(alpha > 0.0, "alpha must be positive");
    require(zeta > 0.5 && zeta < 1.0, "zeta must lie in (1/2, 1)");
    if (mode == HorizonMode::experiment) {
      require(theta > 0.0, "theta must be positive");
    } else if (mode != HorizonMode::convex) {
      require(kappa >= 0.0 && tau >= 0.0, "kappa and tau must be nonnegative");
      require(rho > kappa + tau, "rho must exceed kappa + tau");
    }
  }
};

/// gamma_k for the given policy. `growth_value` is G(||x^k||) and `lip_ref`
/// is Lip(x^k, xi') for a sample xi' drawn independently of the update
/// sample; both are supplied by the caller. Returns nullopt when an input or
/// the result is non-finite.
inline std::optional<double> gamma(PolicyKind policy, const StepsizeParams& p, long long k, double norm_x,
                                   double growth_value, double lip_ref) {
  (void)norm_x;
  if (!std::isfinite(growth_value) || !std::isfinite(lip_ref)) return std::nullopt;
  if (p.mode == HorizonMode::theory_sqrtK && k > p.horizon)
    throw ConfigError("iteration index exceeds the horizon K");
  if (k < 1) throw ConfigError("iteration index must be positive");

  const double sqrt_k = std::sqrt(static_cast<double>(p.horizon));
  const double clipped = std::max(lip_ref, p.alpha);
  double out = 0.0;
  switch (p.mode) {
    case HorizonMode::theory_sqrtK:
      switch (policy) {
        case PolicyKind::constant: out = p.rho + p.kappa + p.alpha * sqrt_k; break;
        case PolicyKind::growth: out = p.rho + p.kappa + p.tau + p.alpha * (growth_value + 1.0) * sqrt_k; break;
        case PolicyKind::reference: out = p.rho + p.tau + p.kappa + clipped * sqrt_k; break;
      }
      break;
    case HorizonMode::theory_kzeta: {
      const double kz = std::pow(static_cast<double>(k), p.zeta);
      switch (policy) {
        case PolicyKind::constant: out = p.rho + p.kappa + p.alpha * kz; break;
        case PolicyKind::growth: out = p.rho + p.kappa + (growth_value + 1.0) * kz; break;
        case PolicyKind::reference: out = p.rho + p.kappa + p.tau + clipped * kz; break;
      }
      break;
    }
    case HorizonMode::experiment:
      switch (policy) {
        case PolicyKind::constant: out = p.theta * sqrt_k; break;
        // G vanishes only where the r1 subgradient vanishes too; any positive
        // weight gives the same step there.
        case PolicyKind::growth:
          out = p.theta * std::max(growth_value, std::numeric_limits<double>::min()) * sqrt_k;
          break;
        case PolicyKind::reference: out = p.theta * clipped * sqrt_k; break;
      }
      break;
    case HorizonMode::convex:
      switch (policy) {
        case PolicyKind::constant: out = p.alpha * sqrt_k; break;
        case PolicyKind::growth: out = p.alpha * (growth_value + 1.0) * sqrt_k; break;
        case PolicyKind::reference: out = clipped * sqrt_k; break;
      }
      break;
  }
  if (!std::isfinite(out) || !(out > 0.0)) return std::nullopt;
  return out;
}

struct MomentEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Monte-Carlo estimates of E[X^2 / max(Y^2, a^2)], E[X / max(Y^2, a^2)] and
/// E[X / max(Y, a)] from paired samples, plus sigma_hat^2 = mean |X - Y|^2.
struct ClippedMoments {
  MomentEstimate m2;
  MomentEstimate m1a;
  MomentEstimate m1b;
  MomentEstimate sigma_sq;

  double sigma() const { return std::sqrt(sigma_sq.mean); }
};

inline ClippedMoments clipped_ratio_moments(std::span<const double> xs, std::span<const double> ys, double alpha) {
  require(!xs.empty(), "clipped_ratio_moments needs at least one sample");
  require(xs.size() == ys.size(), "clipped_ratio_moments needs paired samples");
  require(alpha > 0.0, "alpha must be positive");

  const auto n = static_cast<double>(xs.size());
  // Welford accumulators, one per statistic.
  struct Acc {
    double mean = 0.0, m2 = 0.0;
    long long count = 0;
    void push(double v) {
      ++count;
      const double d = v - mean;
      mean += d / static_cast<double>(count);
      m2 += d * (v - mean);
    }
    MomentEstimate finish(double n) const {
      const double var = count > 1 ? m2 / (n - 1.0) : 0.0;
      return {mean, std::sqrt(var / n)};
    }
  } a2, a1a, a1b, asig;

  const double alpha_sq = alpha * alpha;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double x = xs[i];
    const double y = ys[i];
    const double denom_sq = std::max(y * y, alpha_sq);
    a2.push(x * x / denom_sq);
    a1a.push(x / denom_sq);
    a1b.push(x / std::max(y, alpha));
    asig.push((x - y) * (x - y));
  }
  return {a2.finish(n), a1a.finish(n), a1b.finish(n), asig.finish(n)};
}

/// Upper bounds on the three clipped moments in terms of sigma and alpha.
struct ClippedMomentBounds {
  double m2, m1a, m1b;
};

inline ClippedMomentBounds clipped_moment_bounds(double sigma, double alpha) {
  const double r = (sigma + alpha) / alpha;
  return {r * r, sigma / (alpha * alpha) + 1.0 / alpha, sigma / alpha + 1.0};
}

}  // namespace wcopt
