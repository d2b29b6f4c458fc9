#pragma once

// Moreau envelope diagnostics for the full-batch objective psi:
//
//   psi_{1/rho}(x) = min_z psi(z) + (rho/2) ||z - x||^2,
//   grad psi_{1/rho}(x) = rho (x - prox_{psi/rho}(x)).
//
// For the absolute-value losses the inner problem is solved by a full-batch
// prox-linear method with an adaptive damping weight; each convex
// subproblem (sum of |affine| plus a quadratic) is solved exactly through
// its box-constrained dual by coordinate ascent. The squared loss reduces to
// one linear solve.

#include "wcopt/core.hpp"
#include "wcopt/problems.hpp"
#include "wcopt/solver.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace wcopt {

struct EnvelopeOptions {
  int inner_iters = 500;
  double inner_tol = 1e-9;
  int max_dual_sweeps = 2000;
};

struct EnvelopeReport {
  Vector prox_point;
  double envelope_value = 0.0;
  double grad_norm = 0.0;
  int inner_iters_used = 0;
  double inner_residual = 0.0;
  bool divergent = false;
};

/// psi(z) + (rho/2) ||z - x||^2
inline double envelope_objective(const ProblemInstance& problem, const Vector& x, const Vector& z, double rho) {
  return full_objective(problem, z) + 0.5 * rho * (z - x).squaredNorm();
}

namespace detail {

/// argmin_z (1/m) sum_i |c_i + <G_i, z - anchor>| + (mu/2) ||z - center||^2
/// through the dual  max_{u in [-1,1]^m} (1/m) <u, e> - ||G^T u||^2 / (2 mu m^2),
/// e_i = c_i + <G_i, center - anchor>, with primal z = center - G^T u / (m mu).
/// `u` carries the warm start in and the dual solution out.
inline Vector solve_abs_affine_prox(const RowMatrix& G, const Vector& c, const Vector& anchor, const Vector& center,
                                    double mu, std::vector<double>& u, int max_sweeps, double tol) {
  const Eigen::Index m = G.rows();
  const double md = static_cast<double>(m);
  const Vector e = c + G * (center - anchor);
  const Vector sq = G.rowwise().squaredNorm();

  Vector w = Vector::Zero(G.cols());
  for (Eigen::Index i = 0; i < m; ++i) w.noalias() += u[static_cast<std::size_t>(i)] * G.row(i).transpose();

  const double scale = 1.0 / (md * mu);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_move = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      double& ui = u[static_cast<std::size_t>(i)];
      double next;
      if (sq(i) == 0.0) {
        next = sign0(e(i));
      } else {
        next = std::clamp(ui + (mu * md * e(i) - G.row(i).dot(w)) / sq(i), -1.0, 1.0);
      }
      const double du = next - ui;
      if (du != 0.0) {
        w.noalias() += du * G.row(i).transpose();
        ui = next;
        max_move = std::max(max_move, std::abs(du) * std::sqrt(sq(i)) * scale);
      }
    }
    if (max_move <= tol) break;
  }
  return center - scale * w;
}

}  // namespace detail

/// prox_{psi/rho}(x) with the envelope value and stationarity measure.
/// `rho` must exceed the weak-convexity modulus of psi for the inner problem
/// to be strongly convex.
inline EnvelopeReport prox_point(const ProblemInstance& problem, const Vector& x, double rho,
                                 const EnvelopeOptions& opts = {}) {
  require(rho > 0.0, "prox_point requires rho > 0");
  require(x.size() == problem.n(), "prox_point: dimension mismatch");
  require(opts.inner_iters >= 1, "inner_iters must be positive");

  EnvelopeReport rep;
  const Eigen::Index m = problem.m();
  const Eigen::Index n = problem.n();

  if (problem.model == ProblemKind::ls_convex) {
    // (2/m) A^T A z + rho z = (2/m) A^T b + rho x
    const double w = 2.0 / static_cast<double>(m);
    Eigen::MatrixXd H = w * (problem.A.transpose() * problem.A);
    H.diagonal().array() += rho;
    rep.prox_point = H.ldlt().solve(w * (problem.A.transpose() * problem.b) + rho * x);
    rep.inner_iters_used = 1;
    rep.inner_residual = 0.0;
  } else {
    Vector z = x;
    double phi = envelope_objective(problem, x, z, rho);
    if (is_divergent(phi)) {
      rep.divergent = true;
      rep.prox_point = x;
      rep.envelope_value = phi;
      return rep;
    }

    RowMatrix G(m, n);
    Vector c(m);
    std::vector<double> u(static_cast<std::size_t>(m), 0.0);
    const bool linear = problem.model == ProblemKind::lad;
    double beta = linear ? 0.0 : 1e-3 * rho;
    const double dual_tol = 1e-3 * opts.inner_tol;

    rep.inner_residual = std::numeric_limits<double>::infinity();
    int used = 0;
    while (used < opts.inner_iters) {
      ++used;
      for (Eigen::Index i = 0; i < m; ++i) {
        const Sample s = problem.sample(i);
        const double t = s.row().dot(z);
        const auto res = detail::residual(problem.model, t);
        c(i) = res.r - s.b;
        G.row(i) = res.dr * s.row().transpose();
      }
      if (!c.allFinite() || !G.allFinite()) {
        rep.divergent = true;
        break;
      }

      // Damped step; grow the damping until psi + quadratic decreases.
      bool accepted = false;
      Vector z_new;
      double phi_new = phi;
      for (int tries = 0; tries < 60; ++tries) {
        const double mu = rho + beta;
        const Vector center = (rho * x + beta * z) / mu;
        std::vector<double> u_try = u;
        z_new = detail::solve_abs_affine_prox(G, c, z, center, mu, u_try, opts.max_dual_sweeps, dual_tol);
        phi_new = envelope_objective(problem, x, z_new, rho);
        if (phi_new <= phi + 1e-15 * std::abs(phi)) {
          u = std::move(u_try);
          accepted = true;
          break;
        }
        beta = std::max(4.0 * beta, 1e-3 * rho);
      }
      if (!accepted) {
        rep.inner_residual = 0.0;
        break;
      }
      rep.inner_residual = (z_new - z).norm();
      z = std::move(z_new);
      phi = phi_new;
      if (!linear) beta *= 0.5;
      if (rep.inner_residual <= opts.inner_tol) break;
    }
    rep.inner_iters_used = used;
    rep.prox_point = std::move(z);
  }

  rep.envelope_value = envelope_objective(problem, x, rep.prox_point, rho);
  rep.grad_norm = rho * (x - rep.prox_point).norm();
  rep.divergent = rep.divergent || is_divergent(rep.envelope_value);
  return rep;
}

/// Squared envelope gradient norm at every stored iterate of a run
/// (requires `keep_iterates`).
inline std::vector<double> envelope_trace(const ProblemInstance& problem, const RunRecord& record, double rho,
                                          const EnvelopeOptions& opts = {}) {
  std::vector<double> out;
  out.reserve(record.iterates.size());
  for (const Vector& x : record.iterates) {
    const EnvelopeReport rep = prox_point(problem, x, rho, opts);
    out.push_back(rep.divergent ? std::numeric_limits<double>::infinity() : rep.grad_norm * rep.grad_norm);
  }
  return out;
}

}  // namespace wcopt
