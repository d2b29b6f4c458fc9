#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace wcopt {

using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised for inconsistent or unsupported configurations. Numerical blow-up
/// is never reported this way; it is carried as data (see `is_divergent`).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Magnitude above which an intermediate is treated as divergent.
inline constexpr double kDivergenceCap = 1e150;

inline bool is_divergent(double v, double cap = kDivergenceCap) {
  return !std::isfinite(v) || std::abs(v) > cap;
}

/// sign with sign(0) = 0.
inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// Regression model r(x, a) of a problem instance.
///   r1: <a,x>^2            r2: <a,x>^5 + <a,x>^3 + 1     r3: exp(<a,x>) + 10
///   lad: <a,x> (absolute loss)   ls_convex: <a,x> (squared loss)
enum class ProblemKind { r1, r2, r3, lad, ls_convex };

inline std::string_view to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::r1: return "r1";
    case ProblemKind::r2: return "r2";
    case ProblemKind::r3: return "r3";
    case ProblemKind::lad: return "lad";
    case ProblemKind::ls_convex: return "ls_convex";
  }
  return "?";
}

inline ProblemKind parse_problem_kind(std::string_view s) {
  if (s == "r1") return ProblemKind::r1;
  if (s == "r2") return ProblemKind::r2;
  if (s == "r3") return ProblemKind::r3;
  if (s == "lad") return ProblemKind::lad;
  if (s == "ls_convex") return ProblemKind::ls_convex;
  throw ConfigError("unknown problem model '" + std::string(s) + "'");
}

/// One data point xi = (a, b). Views into problem storage.
struct Sample {
  std::span<const double> a;
  double b = 0.0;

  Eigen::Map<const Vector> row() const {
    return {a.data(), static_cast<Eigen::Index>(a.size())};
  }
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ConfigError(what);
}

}  // namespace wcopt
