#pragma once

// Synthetic robust regression instances: A = Q D with Gaussian Q and a
// diagonal scaling d in [1/kappa, 1], Gaussian true signal, and a p_fail
// fraction of labels hit by additive N(0, 25) noise.

#include "wcopt/core.hpp"
#include "wcopt/model.hpp"
#include "wcopt/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace wcopt {

inline constexpr double kCorruptionVariance = 25.0;

struct ProblemInstance {
  ProblemKind model = ProblemKind::r1;
  RowMatrix A;          // m x n, rows a_i
  Vector b;             // labels
  Vector x_hat;         // true signal
  Vector scaling;       // d
  double cond_kappa = 1.0;
  double p_fail = 0.0;
  double noise_variance = kCorruptionVariance;
  std::vector<bool> corrupted_mask;
  double f_at_xhat = 0.0;
  std::uint64_t seed = 0;
  std::optional<Vector> x_star;  // known minimizer (ls_convex only)

  Eigen::Index m() const { return A.rows(); }
  Eigen::Index n() const { return A.cols(); }

  Sample sample(Eigen::Index i) const {
    return {std::span<const double>(A.row(i).data(), static_cast<std::size_t>(A.cols())), b(i)};
  }

  std::size_t corrupted_count() const {
    return static_cast<std::size_t>(std::count(corrupted_mask.begin(), corrupted_mask.end(), true));
  }
};

/// (1/m) sum_i loss(x, xi_i), accumulated with Neumaier compensation.
/// Non-finite on overflow.
inline double full_objective(const ProblemInstance& problem, const Vector& x) {
  require(x.size() == problem.n(), "full_objective: dimension mismatch");
  double sum = 0.0;
  double comp = 0.0;
  for (Eigen::Index i = 0; i < problem.m(); ++i) {
    const double v = evaluate_loss(problem.model, x, problem.sample(i));
    if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  return (sum + comp) / static_cast<double>(problem.m());
}

/// G(s) bounding how the per-sample Lipschitz constant scales with ||x||.
inline double growth_function(ProblemKind model, double s) {
  switch (model) {
    case ProblemKind::r1: return s;
    case ProblemKind::r2: {
      const double s2 = s * s;
      return 5.0 * (s2 * s2 + s2);
    }
    case ProblemKind::r3: return std::exp(3.0 * s);
    case ProblemKind::lad: return 1.0;
    case ProblemKind::ls_convex: return s;
  }
  return 0.0;
}

/// Norm of the prescribed starting point: 10 for r1, 1 otherwise.
inline double initial_radius(ProblemKind model) { return model == ProblemKind::r1 ? 10.0 : 1.0; }

/// x1 = radius * x' / ||x'|| with x' ~ N(0, I_n).
inline Vector initial_point(ProblemKind model, Eigen::Index n, std::uint64_t seed) {
  require(n >= 1, "initial_point needs n >= 1");
  StreamCursor rng(seed, Stream::initial_point);
  Vector x(n);
  do {
    for (Eigen::Index j = 0; j < n; ++j) x(j) = rng.normal();
  } while (x.norm() == 0.0);
  return x * (initial_radius(model) / x.norm());
}

/// Weak-convexity modulus bound for the full objective. Each loss is
/// |phi(<a_i, x>) - b_i| with phi'' bounded by c_i on the ball of radius
/// `radius`, so the mean is weakly convex with modulus at most
/// lambda_max((1/m) sum_i c_i a_i a_i^T). Exact for r1 (c_i = 2); r2 and r3
/// are local heuristics valid on the ball only.
inline double weak_convexity_estimate(const ProblemInstance& problem, std::optional<double> radius = std::nullopt) {
  if (problem.model == ProblemKind::lad || problem.model == ProblemKind::ls_convex) return 0.0;
  const double rad = radius.value_or(initial_radius(problem.model));
  Vector c(problem.m());
  for (Eigen::Index i = 0; i < problem.m(); ++i) {
    const double t = problem.A.row(i).norm() * rad;
    switch (problem.model) {
      case ProblemKind::r1: c(i) = 2.0; break;
      case ProblemKind::r2: c(i) = 20.0 * t * t * t + 6.0 * t; break;
      default: c(i) = std::exp(t); break;
    }
  }
  const Eigen::MatrixXd W = problem.A.transpose() * c.asDiagonal() * problem.A / static_cast<double>(problem.m());
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(W, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

/// Default envelope parameter: 2 * modulus + 1.
inline double default_envelope_rho(const ProblemInstance& problem) {
  return 2.0 * weak_convexity_estimate(problem) + 1.0;
}

namespace detail {

inline void finalize_instance(ProblemInstance& p) {
  p.f_at_xhat = full_objective(p, p.x_hat);
  if (p.model == ProblemKind::ls_convex) {
    p.x_star = p.A.colPivHouseholderQr().solve(p.b).eval();
  }
}

}  // namespace detail

/// Synthetic instance. `d` is uniform on [1/kappa, 1]; labels are exact for
/// uncorrupted rows; round(p_fail * m) rows chosen uniformly get additive
/// N(0, noise_variance) noise.
inline ProblemInstance generate(Eigen::Index m, Eigen::Index n, double cond_kappa, double p_fail, ProblemKind model,
                                std::uint64_t seed) {
  require(m >= 1 && n >= 1, "generate: m and n must be positive");
  require(cond_kappa >= 1.0, "generate: cond_kappa must be >= 1");
  require(p_fail >= 0.0 && p_fail < 1.0, "generate: p_fail must lie in [0, 1)");

  ProblemInstance p;
  p.model = model;
  p.cond_kappa = cond_kappa;
  p.p_fail = p_fail;
  p.seed = seed;

  StreamCursor scale_rng(seed, Stream::problem_scaling);
  p.scaling.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) p.scaling(j) = cond_kappa == 1.0 ? 1.0 : scale_rng.uniform(1.0 / cond_kappa, 1.0);

  StreamCursor q_rng(seed, Stream::problem_matrix);
  p.A.resize(m, n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) p.A(i, j) = q_rng.normal() * p.scaling(j);

  StreamCursor x_rng(seed, Stream::problem_signal);
  p.x_hat.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) p.x_hat(j) = x_rng.normal();

  p.b.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) p.b(i) = regression_value(model, p.x_hat, p.sample(i));

  const auto n_bad = static_cast<std::size_t>(std::llround(p_fail * static_cast<double>(m)));
  std::vector<std::size_t> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), std::size_t{0});
  StreamCursor pick_rng(seed, Stream::problem_corruption);
  for (std::size_t i = 0; i < n_bad; ++i) {
    const std::size_t j = i + pick_rng.index(order.size() - i);
    std::swap(order[i], order[j]);
  }
  p.corrupted_mask.assign(static_cast<std::size_t>(m), false);
  StreamCursor noise_rng(seed, Stream::problem_noise);
  const double sd = std::sqrt(p.noise_variance);
  for (std::size_t i = 0; i < n_bad; ++i) {
    p.corrupted_mask[order[i]] = true;
    p.b(static_cast<Eigen::Index>(order[i])) += sd * noise_rng.normal();
  }

  detail::finalize_instance(p);
  return p;
}

/// Instance from explicit data; no corruption metadata.
inline ProblemInstance make_instance(ProblemKind model, RowMatrix A, Vector b, Vector x_hat) {
  require(A.rows() == b.size() && A.cols() == x_hat.size(), "make_instance: inconsistent dimensions");
  ProblemInstance p;
  p.model = model;
  p.A = std::move(A);
  p.b = std::move(b);
  p.x_hat = std::move(x_hat);
  p.scaling = Vector::Ones(p.n());
  p.corrupted_mask.assign(static_cast<std::size_t>(p.m()), false);
  detail::finalize_instance(p);
  return p;
}

// ---------------------------------------------------------------------------
// Text serialization.
//
//   wcopt-instance 1
//   m <int>  n <int>  model <name>  cond_kappa <real>  p_fail <real>
//   noise_variance <real>  seed <uint>  f_at_xhat <real>      (one per line)
//   x_hat <n reals>
//   scaling <n reals>
//   rows
//   <b_i> <corrupted 0|1> <a_i1> ... <a_in>                   (m lines)
//
// Reals use 17 significant digits so a write/read cycle is exact.
// ---------------------------------------------------------------------------

namespace detail {

inline void write_real(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

inline void write_vector(std::ostream& os, const char* key, const Vector& v) {
  os << key;
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    os << ' ';
    write_real(os, v(j));
  }
  os << '\n';
}

}  // namespace detail

inline void write_instance(std::ostream& os, const ProblemInstance& p) {
  os << "wcopt-instance 1\n";
  os << "m " << p.m() << "\nn " << p.n() << "\nmodel " << to_string(p.model) << '\n';
  os << "cond_kappa ";
  detail::write_real(os, p.cond_kappa);
  os << "\np_fail ";
  detail::write_real(os, p.p_fail);
  os << "\nnoise_variance ";
  detail::write_real(os, p.noise_variance);
  os << "\nseed " << p.seed << "\nf_at_xhat ";
  detail::write_real(os, p.f_at_xhat);
  os << '\n';
  detail::write_vector(os, "x_hat", p.x_hat);
  detail::write_vector(os, "scaling", p.scaling);
  os << "rows\n";
  for (Eigen::Index i = 0; i < p.m(); ++i) {
    detail::write_real(os, p.b(i));
    os << ' ' << (p.corrupted_mask[static_cast<std::size_t>(i)] ? 1 : 0);
    for (Eigen::Index j = 0; j < p.n(); ++j) {
      os << ' ';
      detail::write_real(os, p.A(i, j));
    }
    os << '\n';
  }
}

inline ProblemInstance read_instance(std::istream& is) {
  std::string tag;
  int version = 0;
  if (!(is >> tag >> version) || tag != "wcopt-instance" || version != 1)
    throw ConfigError("not a wcopt-instance v1 stream");

  ProblemInstance p;
  Eigen::Index m = -1, n = -1;
  auto read_vec = [&](Vector& v) {
    require(n > 0, "instance: 'n' must precede vectors");
    v.resize(n);
    for (Eigen::Index j = 0; j < n; ++j)
      if (!(is >> v(j))) throw ConfigError("instance: truncated vector");
  };
  std::string key;
  while (is >> key) {
    if (key == "m") is >> m;
    else if (key == "n") is >> n;
    else if (key == "model") {
      std::string name;
      is >> name;
      p.model = parse_problem_kind(name);
    } else if (key == "cond_kappa") is >> p.cond_kappa;
    else if (key == "p_fail") is >> p.p_fail;
    else if (key == "noise_variance") is >> p.noise_variance;
    else if (key == "seed") is >> p.seed;
    else if (key == "f_at_xhat") is >> p.f_at_xhat;
    else if (key == "x_hat") read_vec(p.x_hat);
    else if (key == "scaling") read_vec(p.scaling);
    else if (key == "rows") break;
    else throw ConfigError("instance: unknown key '" + key + "'");
    if (!is) throw ConfigError("instance: malformed value for '" + key + "'");
  }
  require(key == "rows" && m > 0 && n > 0, "instance: missing header fields or rows");
  p.A.resize(m, n);
  p.b.resize(m);
  p.corrupted_mask.assign(static_cast<std::size_t>(m), false);
  for (Eigen::Index i = 0; i < m; ++i) {
    int flag = 0;
    if (!(is >> p.b(i) >> flag)) throw ConfigError("instance: truncated rows");
    p.corrupted_mask[static_cast<std::size_t>(i)] = flag != 0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (!(is >> p.A(i, j))) throw ConfigError("instance: truncated rows");
  }
  if (p.x_hat.size() != n) throw ConfigError("instance: missing x_hat");
  if (p.scaling.size() != n) p.scaling = Vector::Ones(n);
  detail::finalize_instance(p);
  return p;
}

}  // namespace wcopt
