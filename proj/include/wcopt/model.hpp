#pragma once

// Stochastic model oracles for f(x, xi) = |r(x, a) - b| and the closed-form
// solvers of the regularized model subproblem
//
//   argmin_y  f_x(y, xi) + omega(y) + (gamma / 2) ||y - x||^2.

#include "wcopt/core.hpp"

#include <algorithm>
#include <cmath>

namespace wcopt {

enum class ModelTag { subgradient, prox_linear, truncated };

inline std::string_view to_string(ModelTag t) {
  switch (t) {
    case ModelTag::subgradient: return "subgradient";
    case ModelTag::prox_linear: return "prox_linear";
    case ModelTag::truncated: return "truncated";
  }
  return "?";
}

struct ModelKind {
  ModelTag tag = ModelTag::subgradient;
  double lower_bound = 0.0;  // truncated model floor; the losses here are >= 0

  static ModelKind subgradient() { return {ModelTag::subgradient, 0.0}; }
  static ModelKind prox_linear() { return {ModelTag::prox_linear, 0.0}; }
  static ModelKind truncated(double ell = 0.0) { return {ModelTag::truncated, ell}; }
};

/// One stochastic model at an anchor x.
///
/// For subgradient/truncated kinds `c` is the loss f(x, xi) and `g` a
/// subgradient. For the prox-linear kind `c` is the inner residual
/// r(x, a) - b and `g` its gradient, so the model is |c + <g, y - x>|.
struct ModelEval {
  double value = 0.0;
  double c = 0.0;
  Vector g;
  double lip = 0.0;
  bool divergent = false;
};

enum class RegularizerKind { zero, l1 };

struct RegularizerSpec {
  RegularizerKind kind = RegularizerKind::zero;
  double mu = 0.0;
  double lip_omega = 0.0;

  static RegularizerSpec zero() { return {}; }
  static RegularizerSpec l1(double mu, Eigen::Index n) {
    return {RegularizerKind::l1, mu, mu * std::sqrt(static_cast<double>(n))};
  }

  double value(const Vector& x) const {
    return kind == RegularizerKind::l1 ? mu * x.lpNorm<1>() : 0.0;
  }
};

namespace detail {

struct Residual {
  double r = 0.0;   // r(x, a)
  double dr = 0.0;  // dr/dt at t = <a, x>
};

inline Residual residual(ProblemKind kind, double t) {
  switch (kind) {
    case ProblemKind::r1: return {t * t, 2.0 * t};
    case ProblemKind::r2: {
      const double t2 = t * t;
      const double t3 = t2 * t;
      return {t3 * t2 + t3 + 1.0, 5.0 * t2 * t2 + 3.0 * t2};
    }
    case ProblemKind::r3: {
      const double e = std::exp(t);
      return {e + 10.0, e};
    }
    case ProblemKind::lad:
    case ProblemKind::ls_convex: return {t, 1.0};
  }
  return {};
}

}  // namespace detail

/// Regression residual r(x, a).
inline double regression_value(ProblemKind kind, const Vector& x, const Sample& s) {
  return detail::residual(kind, s.row().dot(x)).r;
}

/// Per-sample loss. Squared for ls_convex, absolute otherwise. Overflow shows
/// up as a non-finite return value rather than an exception.
inline double evaluate_loss(ProblemKind kind, const Vector& x, const Sample& s) {
  if (static_cast<Eigen::Index>(s.a.size()) != x.size())
    throw ConfigError("sample dimension does not match iterate");
  const double diff = regression_value(kind, x, s) - s.b;
  return kind == ProblemKind::ls_convex ? diff * diff : std::abs(diff);
}

inline ModelEval model_eval(const ModelKind& model, ProblemKind kind, const Vector& x, const Sample& s) {
  if (static_cast<Eigen::Index>(s.a.size()) != x.size())
    throw ConfigError("sample dimension does not match iterate");
  const auto a = s.row();
  const double t = a.dot(x);
  const auto [r, dr] = detail::residual(kind, t);
  const double diff = r - s.b;

  ModelEval ev;
  if (model.tag == ModelTag::prox_linear) {
    if (kind == ProblemKind::ls_convex)
      throw ConfigError("prox-linear model requires an absolute-value loss");
    ev.value = std::abs(diff);
    ev.c = diff;
    ev.g = dr * a;
  } else if (kind == ProblemKind::ls_convex) {
    ev.value = diff * diff;
    ev.c = ev.value;
    ev.g = (2.0 * diff) * a;
  } else {
    ev.value = std::abs(diff);
    ev.c = ev.value;
    ev.g = (sign0(diff) * dr) * a;
  }
  ev.lip = ev.g.norm();
  ev.divergent = is_divergent(t) || is_divergent(r) || is_divergent(dr) || is_divergent(ev.value) ||
                 is_divergent(ev.lip);
  return ev;
}

/// Model value f_x(y, xi) for an evaluation anchored at x.
inline double model_value(const ModelKind& model, const ModelEval& ev, const Vector& x, const Vector& y) {
  const double lin = ev.g.dot(y - x);
  switch (model.tag) {
    case ModelTag::subgradient: return ev.c + lin;
    case ModelTag::prox_linear: return std::abs(ev.c + lin);
    case ModelTag::truncated: return std::max(ev.c + lin, model.lower_bound);
  }
  return 0.0;
}

/// Objective of the regularized model subproblem at y.
inline double subproblem_objective(const ModelKind& model, const ModelEval& ev, const Vector& x, const Vector& y,
                                   double gamma, const RegularizerSpec& omega) {
  return model_value(model, ev, x, y) + omega.value(y) + 0.5 * gamma * (y - x).squaredNorm();
}

inline Vector soft_threshold(const Vector& v, double t) {
  return v.unaryExpr([t](double z) { return sign0(z) * std::max(std::abs(z) - t, 0.0); });
}

/// Exact minimizer of the regularized model subproblem.
inline Vector prox_step(const ModelKind& model, const Vector& x, const ModelEval& ev, double gamma,
                        const RegularizerSpec& omega) {
  if (!(gamma > 0.0)) throw ConfigError("prox_step requires gamma > 0");
  if (omega.kind == RegularizerKind::l1 && model.tag != ModelTag::subgradient)
    throw ConfigError("l1 regularizer is only supported with the subgradient model");

  switch (model.tag) {
    case ModelTag::subgradient: {
      Vector y = x - ev.g / gamma;
      if (omega.kind == RegularizerKind::l1) y = soft_threshold(y, omega.mu / gamma);
      return y;
    }
    case ModelTag::prox_linear: {
      const double gg = ev.g.squaredNorm();
      if (gg == 0.0) return x;
      const double step = std::min(std::abs(ev.c), gg / gamma) * sign0(ev.c);
      return x - (step / gg) * ev.g;
    }
    case ModelTag::truncated: {
      const double gg = ev.g.squaredNorm();
      const double gap = ev.c - model.lower_bound;
      if (gg == 0.0 || gap <= 0.0) return x;
      const double lambda = std::clamp(gamma * gap / gg, 0.0, 1.0);
      return x - (lambda / gamma) * ev.g;
    }
  }
  return x;
}

}  // namespace wcopt
