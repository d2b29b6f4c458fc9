#pragma once

// Stochastic model-based driver: sample xi^k, choose gamma_k, solve the
// regularized model subproblem, repeat. Tracks the per-epoch objective,
// stops on the 1.2 f(x_hat) rule and flags divergence instead of throwing.

#include "wcopt/core.hpp"
#include "wcopt/model.hpp"
#include "wcopt/problems.hpp"
#include "wcopt/rng.hpp"
#include "wcopt/stepsize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace wcopt {

struct SolverConfig {
  ModelKind model = ModelKind::subgradient();
  PolicyKind policy = PolicyKind::constant;
  StepsizeParams params;
  RegularizerSpec regularizer = RegularizerSpec::zero();
  long long epochs = 400;  // ceil(K / m)
  double stop_factor = 1.2;
  std::uint64_t seed = 0;
  long long record_stride = 1;
  double divergence_cap = kDivergenceCap;
  std::optional<Vector> x0;      // defaults to initial_point(model, n, seed)
  bool halt_on_converge = true;  // false: keep iterating after the stop rule fires
  bool keep_iterates = false;    // store x^k at every record_stride step
};

struct RunRecord {
  long long iterations_run = 0;
  bool converged = false;
  bool diverged = false;
  std::optional<long long> iters_to_converge;
  std::vector<double> objective_per_epoch;  // index 0 is f(x^1)
  double max_iterate_norm = 0.0;
  std::vector<double> gamma_series;
  std::vector<double> iterate_norm_series;
  std::vector<long long> recorded_iterations;
  std::vector<Vector> iterates;  // filled when keep_iterates
  Vector final_x;

  // ||x^{k+1} - x^k|| <= 2 (Lip(x^k, xi^k) + L_omega) / gamma_k, checked on every step.
  long long step_bound_checks = 0;
  long long step_bound_violations = 0;
  double max_step_bound_excess = -std::numeric_limits<double>::infinity();
};

inline bool identical(const RunRecord& a, const RunRecord& b) {
  auto same_vecs = [](const std::vector<Vector>& u, const std::vector<Vector>& v) {
    if (u.size() != v.size()) return false;
    for (std::size_t i = 0; i < u.size(); ++i)
      if (u[i].size() != v[i].size() || !(u[i].array() == v[i].array()).all()) return false;
    return true;
  };
  return a.iterations_run == b.iterations_run && a.converged == b.converged && a.diverged == b.diverged &&
         a.iters_to_converge == b.iters_to_converge && a.objective_per_epoch == b.objective_per_epoch &&
         a.max_iterate_norm == b.max_iterate_norm && a.gamma_series == b.gamma_series &&
         a.iterate_norm_series == b.iterate_norm_series && a.recorded_iterations == b.recorded_iterations &&
         same_vecs(a.iterates, b.iterates) && a.final_x.size() == b.final_x.size() &&
         (a.final_x.array() == b.final_x.array()).all() && a.step_bound_violations == b.step_bound_violations;
}

// xi^k and xi' are drawn from distinct streams of the run seed, so the
// reference estimate never reuses the update draw.
static_assert(Stream::update_sample != Stream::reference_sample);

inline Eigen::Index update_sample_index(std::uint64_t seed, long long k, Eigen::Index m) {
  return static_cast<Eigen::Index>(
      draw_index(seed, Stream::update_sample, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(m)));
}

inline Eigen::Index reference_sample_index(std::uint64_t seed, long long k, Eigen::Index m) {
  return static_cast<Eigen::Index>(
      draw_index(seed, Stream::reference_sample, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(m)));
}

/// Objective threshold of the stop rule. When f(x_hat) = 0 the
/// multiplicative rule degenerates and an additive 1e-12 slack is used.
inline double stop_threshold(double f_at_xhat, double stop_factor) {
  return std::max(stop_factor * f_at_xhat, f_at_xhat + 1e-12);
}

inline void validate(const ProblemInstance& problem, const SolverConfig& cfg) {
  require(cfg.epochs >= 1, "epochs must be positive");
  require(cfg.record_stride >= 1, "record_stride must be positive");
  require(cfg.stop_factor > 1.0, "stop_factor must exceed 1");
  require(cfg.divergence_cap > 0.0, "divergence_cap must be positive");
  // The last epoch may be partial: (epochs - 1) m < K <= epochs m.
  require(cfg.params.horizon <= cfg.epochs * problem.m() && cfg.params.horizon > (cfg.epochs - 1) * problem.m(),
          "params.horizon must satisfy (epochs - 1) * m < K <= epochs * m");
  cfg.params.validate();
  if (cfg.regularizer.kind == RegularizerKind::l1) {
    require(cfg.model.tag == ModelTag::subgradient, "l1 regularizer is only supported with the subgradient model");
    require(cfg.regularizer.mu >= 0.0, "l1 weight must be nonnegative");
  }
  if (cfg.model.tag == ModelTag::prox_linear)
    require(problem.model != ProblemKind::ls_convex, "prox-linear model requires an absolute-value loss");
  if (cfg.x0) require(cfg.x0->size() == problem.n(), "x0 dimension mismatch");
}

struct NoObserver {
  void operator()(long long, const Vector&) const {}
};

namespace detail {

/// Shared iteration loop. `on_epoch(epoch, x)` runs after each full epoch and
/// may return false to halt. `on_step(k, x_next)` sees every new iterate.
template <class EpochHook, class StepHook>
RunRecord iterate(const ProblemInstance& problem, const SolverConfig& cfg, EpochHook&& on_epoch, StepHook&& on_step) {
  validate(problem, cfg);
  const Eigen::Index m = problem.m();
  const long long K = cfg.params.horizon;
  const double cap = cfg.divergence_cap;
  const double lip_omega = cfg.regularizer.lip_omega;

  RunRecord rec;
  Vector x = cfg.x0 ? *cfg.x0 : initial_point(problem.model, problem.n(), cfg.seed);
  double norm = x.norm();
  rec.max_iterate_norm = norm;

  auto mark_diverged = [&] {
    rec.diverged = true;
    rec.converged = false;
    rec.iters_to_converge.reset();
    rec.max_iterate_norm = std::numeric_limits<double>::infinity();
  };

  const double threshold = stop_threshold(problem.f_at_xhat, cfg.stop_factor);
  auto check_epoch = [&](long long epoch, long long k_done) -> bool {
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
    const bool keep_going = on_epoch(epoch, x);
    return keep_going && !(rec.converged && cfg.halt_on_converge);
  };

  bool running = check_epoch(0, 0);
  for (long long k = 1; running && k <= K; ++k) {
    const Sample s = problem.sample(update_sample_index(cfg.seed, k, m));
    const ModelEval ev = model_eval(cfg.model, problem.model, x, s);
    if (ev.divergent) {
      mark_diverged();
      break;
    }

    double growth_value = 0.0;
    double lip_ref = 0.0;
    if (cfg.policy == PolicyKind::growth) growth_value = growth_function(problem.model, norm);
    if (cfg.policy == PolicyKind::reference) {
      const Sample ref = problem.sample(reference_sample_index(cfg.seed, k, m));
      const ModelEval ref_ev = model_eval(cfg.model, problem.model, x, ref);
      if (ref_ev.divergent) {
        mark_diverged();
        break;
      }
      lip_ref = ref_ev.lip;
    }
    const auto g = gamma(cfg.policy, cfg.params, k, norm, growth_value, lip_ref);
    if (!g || is_divergent(*g, cap)) {
      mark_diverged();
      break;
    }

    if ((k - 1) % cfg.record_stride == 0) {
      rec.recorded_iterations.push_back(k);
      rec.gamma_series.push_back(*g);
      rec.iterate_norm_series.push_back(norm);
      if (cfg.keep_iterates) rec.iterates.push_back(x);
    }

    Vector next = prox_step(cfg.model, x, ev, *g, cfg.regularizer);
    const double step = (next - x).norm();
    const double bound = 2.0 * (ev.lip + lip_omega) / *g + 1e-10;
    ++rec.step_bound_checks;
    if (step > bound) ++rec.step_bound_violations;
    rec.max_step_bound_excess = std::max(rec.max_step_bound_excess, step - bound);

    x = std::move(next);
    norm = x.norm();
    rec.iterations_run = k;
    if (is_divergent(norm, cap)) {
      mark_diverged();
      break;
    }
    rec.max_iterate_norm = std::max(rec.max_iterate_norm, norm);
    on_step(k, x);

    if (k % m == 0 || k == K) running = check_epoch((k + m - 1) / m, k);
  }
  rec.final_x = std::move(x);
  return rec;
}

}  // namespace detail

/// Runs the stochastic model-based method on `problem`.
template <class Observer = NoObserver>
RunRecord run(const ProblemInstance& problem, const SolverConfig& cfg, Observer&& observer = {}) {
  return detail::iterate(
      problem, cfg, [](long long, const Vector&) { return true; }, observer);
}

/// Per-epoch min-so-far of psi(x^k) - psi(x_star) for convex instances,
/// over the full horizon (the stop rule only sets `record.converged`).
struct ConvexTrace {
  std::vector<double> gap;      // psi(x^k) - psi(x_star) per epoch, index 0: x^1
  std::vector<double> min_gap;  // running minimum of `gap`
  RunRecord record;
};

inline ConvexTrace convex_gap_trace(const ProblemInstance& problem, SolverConfig cfg,
                                    const std::optional<Vector>& x_star) {
  require(x_star.has_value(), "convex_gap_trace needs a known minimizer");
  require(x_star->size() == problem.n(), "x_star dimension mismatch");
  require(problem.model == ProblemKind::ls_convex || problem.model == ProblemKind::lad,
          "convex_gap_trace needs a convex instance");
  cfg.halt_on_converge = false;

  const double psi_star = full_objective(problem, *x_star) + cfg.regularizer.value(*x_star);
  ConvexTrace out;
  double best = std::numeric_limits<double>::infinity();
  out.record = detail::iterate(
      problem, cfg,
      [&](long long, const Vector& x) {
        const double gap = std::max(0.0, full_objective(problem, x) + cfg.regularizer.value(x) - psi_star);
        best = std::min(best, gap);
        out.gap.push_back(gap);
        out.min_gap.push_back(best);
        return true;
      },
      NoObserver{});
  return out;
}

}  // namespace wcopt
