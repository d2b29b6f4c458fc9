#include "wcopt/mirror.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace wcopt {
namespace {

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double e : v) x(i++) = e;
  return x;
}

TEST(KernelGrad, Examples) {
  EXPECT_TRUE(kernel_grad({4}, vec({1.0, 0.0})).isApprox(vec({2.0, 0.0})));
  for (int q : {2, 3, 4, 10}) EXPECT_EQ(kernel_grad({q}, Vector::Zero(3)).norm(), 0.0);
  const Vector x = vec({0.3, -1.7, 2.2});
  EXPECT_TRUE(kernel_grad({2}, x).isApprox(2.0 * x, 1e-15));
}

TEST(KernelGradInverse, Examples) {
  EXPECT_NEAR((kernel_grad_inverse({4}, vec({2.0, 0.0})) - vec({1.0, 0.0})).norm(), 0.0, 1e-12);
  EXPECT_EQ(kernel_grad_inverse({10}, Vector::Zero(4)).norm(), 0.0);
  EXPECT_THROW(kernel_grad_inverse({1}, vec({1.0})), ConfigError);
}

TEST(KernelGradInverse, RoundTrip) {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> S(-3.0, 2.0);
  for (int q : {4, 10}) {
    for (int t = 0; t < 100; ++t) {
      Vector x(5);
      for (Eigen::Index j = 0; j < 5; ++j) x(j) = N(gen);
      x *= std::pow(10.0, S(gen)) / x.norm();
      const Vector back = kernel_grad_inverse({q}, kernel_grad({q}, x));
      EXPECT_LE((back - x).norm(), 1e-10 * std::max(1.0, x.norm())) << "q=" << q;
    }
  }
}

TEST(RadialRoot, ResidualBoundAndMonotoneMap) {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> S(-8.0, 12.0);
  for (int q : {2, 3, 4, 6, 10}) {
    for (int t = 0; t < 500; ++t) {
      const double s = std::pow(10.0, S(gen));
      const double r = radial_root(q, s);
      EXPECT_GE(r, 0.0);
      EXPECT_LE(std::abs(std::pow(r, q - 1) + r - s), 1e-12 * (1.0 + s)) << "q=" << q << " s=" << s;
    }
    double prev = -1.0;
    for (int i = 0; i <= 2000; ++i) {
      const double r = 0.005 * i;
      const double v = std::pow(r, q - 1) + r;
      EXPECT_GT(v, prev);
      prev = v;
    }
  }
}

TEST(RunMd, ZeroSubgradientIsFixedPoint) {
  // All-zero measurement vectors make every r1 subgradient vanish.
  const RowMatrix A = RowMatrix::Zero(30, 6);
  const Vector b = Vector::Ones(30);
  const Vector xh = Vector::Zero(6);
  const auto p = make_instance(ProblemKind::r1, A, b, xh);
  for (int q : {2, 4, 10}) {
    MirrorConfig cfg;
    cfg.kernel.q = q;
    cfg.epochs = 3;
    cfg.halt_on_converge = false;
    const Vector x0 = initial_point(ProblemKind::r1, 6, 5);
    cfg.x0 = x0;
    std::vector<Vector> xs;
    run_md(p, cfg, [&](long long, const Vector& x) { xs.push_back(x); });
    ASSERT_EQ(xs.size(), 90u);
    for (const Vector& x : xs) EXPECT_LE((x - x0).norm(), 1e-10 * x0.norm()) << "q=" << q;
  }
}

// Power-of-two step sizes make both updates the same floating-point
// operations: md gives (2x - eta g) / 2, the solver x - g / gamma with
// gamma = 2 / eta.
TEST(RunMd, QuadraticKernelMatchesSubgradientSolver) {
  for (ProblemKind kind : {ProblemKind::r1, ProblemKind::lad}) {
    const auto p = generate(64, kind == ProblemKind::lad ? 1 : 10, 10.0, 0.2, kind, 3);
    MirrorConfig md;
    md.kernel.q = 2;
    md.theta = 4.0;
    md.epochs = 16;
    md.seed = 7;
    md.halt_on_converge = false;
    md.allow_any_model = true;
    std::vector<Vector> a, b;
    const auto ra = run_md(p, md, [&](long long, const Vector& x) { a.push_back(x); });

    SolverConfig sc;
    sc.params.mode = HorizonMode::experiment;
    sc.params.theta = 2.0 * md.theta;
    sc.params.horizon = md.epochs * p.m();
    sc.epochs = md.epochs;
    sc.seed = md.seed;
    sc.halt_on_converge = false;
    const auto rb = run(p, sc, [&](long long, const Vector& x) { b.push_back(x); });

    ASSERT_EQ(a.size(), b.size());
    ASSERT_GE(a.size(), 1000u);
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_LE((a[i] - b[i]).cwiseAbs().maxCoeff(), 1e-12) << i;
    EXPECT_EQ(ra.objective_per_epoch, rb.objective_per_epoch);
  }
}

TEST(RunMd, GenericStepMatchesClosely) {
  const auto p = generate(50, 10, 10.0, 0.2, ProblemKind::r1, 3);
  MirrorConfig md;
  md.kernel.q = 2;
  md.theta = 0.5;
  md.epochs = 20;
  md.halt_on_converge = false;
  std::vector<Vector> a, b;
  run_md(p, md, [&](long long, const Vector& x) { a.push_back(x); });
  SolverConfig sc;
  sc.params.theta = 1.0;
  sc.params.horizon = 1000;
  sc.epochs = 20;
  sc.halt_on_converge = false;
  run(p, sc, [&](long long, const Vector& x) { b.push_back(x); });
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LE((a[i] - b[i]).norm(), 1e-9 * (1.0 + b[i].norm()));
}

TEST(RunMd, RejectsUnsupportedModel) {
  const auto p = generate(10, 3, 1.0, 0.1, ProblemKind::r3, 1);
  EXPECT_THROW(run_md(p, MirrorConfig{}), ConfigError);
  MirrorConfig bad;
  bad.theta = 0.0;
  EXPECT_THROW(run_md(generate(10, 3, 1.0, 0.1, ProblemKind::r1, 1), bad), ConfigError);
}

TEST(RunMd, DefaultKernelsAndStability) {
  EXPECT_EQ(KernelSpec::for_problem(ProblemKind::r1).q, 4);
  EXPECT_EQ(KernelSpec::for_problem(ProblemKind::r2).q, 10);
  // On a desk-size r1 (1, 0.3) instance some theta of the grid converges.
  const auto p = generate(300, 20, 1.0, 0.3, ProblemKind::r1, 0);
  bool any = false;
  for (double theta : {0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0}) {
    MirrorConfig cfg;
    cfg.theta = theta;
    cfg.record_stride = p.m();
    const auto rec = run_md(p, cfg);
    EXPECT_FALSE(rec.converged && rec.diverged);
    any = any || rec.converged;
  }
  EXPECT_TRUE(any);
}

}  // namespace
}  // namespace wcopt
