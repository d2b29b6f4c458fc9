#pragma once

// Stochastic mirror descent with the radial kernel
//   u(x) = (1/q) ||x||^q + (1/2) ||x||^2,   grad u(x) = (||x||^{q-2} + 1) x.
// The inverse mirror map reduces to the scalar equation r^{q-1} + r = ||z||.

#include "wcopt/core.hpp"
#include "wcopt/model.hpp"
#include "wcopt/problems.hpp"
#include "wcopt/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wcopt {

struct KernelSpec {
  int q = 4;

  /// Default degrees: quartic for r1, degree 10 for r2.
  static KernelSpec for_problem(ProblemKind kind) { return {kind == ProblemKind::r2 ? 10 : 4}; }
};

inline Vector kernel_grad(const KernelSpec& kernel, const Vector& x) {
  require(kernel.q >= 2, "kernel degree q must be >= 2");
  const double nx = x.norm();
  return (std::pow(nx, kernel.q - 2) + 1.0) * x;
}

/// Root r >= 0 of r^{q-1} + r = s. Newton from an upper bound descends
/// monotonically (the map is convex and increasing); bisection guards
/// against round-off stalls.
inline double radial_root(int q, double s) {
  if (s <= 0.0) return 0.0;
  auto phi = [q](double r) { return std::pow(r, q - 1) + r; };
  if (q == 2) return 0.5 * s;
  double lo = 0.0;
  double hi = std::min(s, std::pow(s, 1.0 / (q - 1)));
  double r = hi;
  const double tol = 1e-12 * (1.0 + s);
  for (int it = 0; it < 200; ++it) {
    const double f = phi(r) - s;
    if (std::abs(f) <= tol) return r;
    if (f > 0.0) hi = r;
    else lo = r;
    const double df = (q - 1) * std::pow(r, q - 2) + 1.0;
    double next = r - f / df;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == r) break;
    r = next;
  }
  return r;
}

inline Vector kernel_grad_inverse(const KernelSpec& kernel, const Vector& z) {
  require(kernel.q >= 2, "kernel degree q must be >= 2");
  if (kernel.q == 2) return 0.5 * z;
  const double nz = z.norm();
  if (nz == 0.0) return Vector::Zero(z.size());
  return (radial_root(kernel.q, nz) / nz) * z;
}

struct MirrorConfig {
  KernelSpec kernel;
  double theta = 1.0;  // step eta = 1 / (theta sqrt(K))
  long long epochs = 400;
  double stop_factor = 1.2;
  std::uint64_t seed = 0;
  long long record_stride = 1;
  double divergence_cap = kDivergenceCap;
  std::optional<Vector> x0;
  bool halt_on_converge = true;
  bool allow_any_model = false;  // lifts the r1/r2 restriction (tests only)
};

/// Mirror descent x^{k+1} = (grad u)^{-1}(grad u(x^k) - eta g^k) with the
/// same sampling stream, stop rule and divergence handling as `run`.
template <class Observer = NoObserver>
RunRecord run_md(const ProblemInstance& problem, const MirrorConfig& cfg, Observer&& observer = {}) {
  require(cfg.allow_any_model || problem.model == ProblemKind::r1 || problem.model == ProblemKind::r2,
          "mirror descent kernels are defined for r1 and r2 only");
  require(cfg.kernel.q >= 2, "kernel degree q must be >= 2");
  require(cfg.theta > 0.0 && cfg.epochs >= 1 && cfg.record_stride >= 1, "invalid mirror descent configuration");
  require(cfg.stop_factor > 1.0, "stop_factor must exceed 1");

  const Eigen::Index m = problem.m();
  const long long K = cfg.epochs * m;
  const double eta = 1.0 / (cfg.theta * std::sqrt(static_cast<double>(K)));
  const double cap = cfg.divergence_cap;
  const double threshold = stop_threshold(problem.f_at_xhat, cfg.stop_factor);

  RunRecord rec;
  Vector x = cfg.x0 ? *cfg.x0 : initial_point(problem.model, problem.n(), cfg.seed);
  require(x.size() == problem.n(), "x0 dimension mismatch");
  double norm = x.norm();
  rec.max_iterate_norm = norm;

  auto mark_diverged = [&] {
    rec.diverged = true;
    rec.converged = false;
    rec.iters_to_converge.reset();
    rec.max_iterate_norm = std::numeric_limits<double>::infinity();
  };
  auto check_epoch = [&](long long k_done) {
    const double f = full_objective(problem, x);
    rec.objective_per_epoch.push_back(f);
    if (is_divergent(f, cap)) {
      mark_diverged();
      return false;
    }
    if (!rec.converged && f <= threshold) {
      rec.converged = true;
      rec.iters_to_converge = k_done;
    }
    return !(rec.converged && cfg.halt_on_converge);
  };

  const ModelKind sub = ModelKind::subgradient();
  bool running = check_epoch(0);
  for (long long k = 1; running && k <= K; ++k) {
    const ModelEval ev = model_eval(sub, problem.model, x, problem.sample(update_sample_index(cfg.seed, k, m)));
    if (ev.divergent) {
      mark_diverged();
      break;
    }
    if ((k - 1) % cfg.record_stride == 0) {
      rec.recorded_iterations.push_back(k);
      rec.gamma_series.push_back(1.0 / eta);
      rec.iterate_norm_series.push_back(norm);
    }
    const Vector z = kernel_grad(cfg.kernel, x) - eta * ev.g;
    if (!z.allFinite()) {
      mark_diverged();
      break;
    }
    x = kernel_grad_inverse(cfg.kernel, z);
    norm = x.norm();
    rec.iterations_run = k;
    if (is_divergent(norm, cap)) {
      mark_diverged();
      break;
    }
    rec.max_iterate_norm = std::max(rec.max_iterate_norm, norm);
    observer(k, x);
    if (k % m == 0) running = check_epoch(k);
  }
  rec.final_x = std::move(x);
  return rec;
}

}  // namespace wcopt
