#pragma once

// Rate checks on convex least-squares instances. For each policy and
// horizon K the per-epoch gap is averaged over seeds and minimized over
// epochs, estimating min_k E[psi(x^k) - psi(x_star)]; the log-log slope of
// that estimate against K is the reported rate.

#include "wcopt/bench/sweep.hpp"
#include "wcopt/problems.hpp"
#include "wcopt/solver.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace wcopt::bench {

struct ConvexSuiteConfig {
  long long m = 50;
  long long n = 10;
  double cond_kappa = 1.0;
  double p_fail = 0.2;
  std::vector<std::uint64_t> seeds = [] {
    std::vector<std::uint64_t> s(20);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = i;
    return s;
  }();
  std::vector<long long> horizons = {100, 1000, 10000};
  std::vector<PolicyKind> policies = {PolicyKind::constant, PolicyKind::growth, PolicyKind::reference};
  double alpha = 5.0;
  bool start_at_optimum = false;
  std::string output_dir = "results";

  void validate() const {
    require(m >= 1 && n >= 1, "convex: m and n must be positive");
    require(!seeds.empty() && !horizons.empty() && !policies.empty(), "convex: seeds, horizons, policies required");
    require(alpha > 0.0, "convex: alpha must be positive");
    for (long long K : horizons) require(K >= m && K % m == 0, "convex: each horizon must be a multiple of m");
  }
};

inline PolicyKind parse_policy(std::string_view s) {
  if (s == "constant") return PolicyKind::constant;
  if (s == "growth") return PolicyKind::growth;
  if (s == "reference") return PolicyKind::reference;
  throw ConfigError("unknown policy '" + std::string(s) + "'");
}

inline ConvexSuiteConfig convex_config_from_json(const nlohmann::json& j) {
  ConvexSuiteConfig c;
  try {
    c.m = j.value("m", c.m);
    c.n = j.value("n", c.n);
    c.cond_kappa = j.value("cond_kappa", c.cond_kappa);
    c.p_fail = j.value("p_fail", c.p_fail);
    if (j.contains("seeds")) {
      if (j.at("seeds").is_number_integer()) {
        c.seeds.clear();
        for (std::uint64_t s = 0; s < j.at("seeds").get<std::uint64_t>(); ++s) c.seeds.push_back(s);
      } else {
        c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
      }
    }
    if (j.contains("horizons")) c.horizons = j.at("horizons").get<std::vector<long long>>();
    if (j.contains("policies")) {
      c.policies.clear();
      for (const auto& p : j.at("policies")) c.policies.push_back(parse_policy(p.get<std::string>()));
    }
    c.alpha = j.value("alpha", c.alpha);
    c.start_at_optimum = j.value("start_at_optimum", c.start_at_optimum);
    c.output_dir = j.value("output_dir", c.output_dir);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("convex config: ") + e.what());
  }
  c.validate();
  return c;
}

struct HorizonStat {
  long long horizon = 0;
  double min_mean_gap = 0.0;  // min over epochs of the seed-averaged gap
  double stderr_gap = 0.0;    // standard error at the minimizing epoch
  double mean_min_gap = 0.0;  // seed average of each run's min-so-far
  int converged = 0;
  int runs = 0;
};

struct PolicyRateReport {
  PolicyKind policy = PolicyKind::constant;
  std::vector<HorizonStat> stats;
  std::optional<double> slope;  // unset when a gap estimate is zero
  long long step_bound_checks = 0;
  long long step_bound_violations = 0;
};

/// Least-squares slope of log(y) on log(x); nullopt if any y <= 0.
inline std::optional<double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 2 || x.size() != y.size()) return std::nullopt;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(y[i] > 0.0) || !(x[i] > 0.0) || !std::isfinite(y[i])) return std::nullopt;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) return std::nullopt;
  return (n * sxy - sx * sy) / den;
}

inline SolverConfig convex_solver_config(const ConvexSuiteConfig& c, PolicyKind policy, long long K,
                                         std::uint64_t seed) {
  SolverConfig cfg;
  cfg.model = ModelKind::subgradient();
  cfg.policy = policy;
  cfg.params.mode = HorizonMode::convex;
  cfg.params.alpha = c.alpha;
  cfg.params.horizon = K;
  cfg.epochs = K / c.m;
  cfg.seed = seed;
  cfg.record_stride = c.m;
  return cfg;
}

inline std::vector<PolicyRateReport> run_convex_suite(const ConvexSuiteConfig& c) {
  c.validate();
  std::vector<ProblemInstance> instances;
  for (std::uint64_t s : c.seeds)
    instances.push_back(generate(c.m, c.n, c.cond_kappa, c.p_fail, ProblemKind::ls_convex, s));

  std::vector<PolicyRateReport> out;
  for (PolicyKind policy : c.policies) {
    PolicyRateReport rep;
    rep.policy = policy;
    std::vector<double> ks, means;
    for (long long K : c.horizons) {
      HorizonStat st;
      st.horizon = K;
      std::vector<std::vector<double>> traces;
      for (std::size_t i = 0; i < c.seeds.size(); ++i) {
        SolverConfig cfg = convex_solver_config(c, policy, K, c.seeds[i]);
        if (c.start_at_optimum) cfg.x0 = instances[i].x_star;
        ConvexTrace tr = convex_gap_trace(instances[i], cfg, instances[i].x_star);
        const std::size_t epochs = static_cast<std::size_t>(K / c.m) + 1;
        // A diverged run contributes an infinite gap from its last epoch on.
        tr.gap.resize(epochs, INFINITY);
        st.mean_min_gap += (tr.record.diverged ? INFINITY : tr.min_gap.back());
        st.converged += tr.record.converged ? 1 : 0;
        rep.step_bound_checks += tr.record.step_bound_checks;
        rep.step_bound_violations += tr.record.step_bound_violations;
        traces.push_back(std::move(tr.gap));
      }
      st.runs = static_cast<int>(traces.size());
      st.mean_min_gap /= st.runs;
      st.min_mean_gap = INFINITY;
      for (std::size_t e = 0; e < traces.front().size(); ++e) {
        double sum = 0.0;
        for (const auto& t : traces) sum += t[e];
        const double mean = sum / st.runs;
        if (!(mean < st.min_mean_gap)) continue;
        double var = 0.0;
        for (const auto& t : traces) var += (t[e] - mean) * (t[e] - mean);
        st.min_mean_gap = mean;
        st.stderr_gap = st.runs > 1 ? std::sqrt(var / (st.runs - 1) / st.runs) : 0.0;
      }
      ks.push_back(static_cast<double>(K));
      means.push_back(st.min_mean_gap);
      rep.stats.push_back(st);
    }
    rep.slope = loglog_slope(ks, means);
    out.push_back(std::move(rep));
  }
  return out;
}

inline nlohmann::json to_json(const ConvexSuiteConfig& c, const std::vector<PolicyRateReport>& reports) {
  nlohmann::json j;
  j["artifact_version"] = kArtifactVersion;
  j["config"] = {{"m", c.m},         {"n", c.n},         {"cond_kappa", c.cond_kappa},
                 {"p_fail", c.p_fail}, {"seeds", c.seeds}, {"horizons", c.horizons},
                 {"alpha", c.alpha}, {"start_at_optimum", c.start_at_optimum}};
  for (const auto& r : reports) {
    nlohmann::json pr;
    pr["policy"] = to_string(r.policy);
    for (const auto& s : r.stats)
      pr["horizons"].push_back({{"K", s.horizon},
                                {"min_mean_gap", s.min_mean_gap},
                                {"stderr_gap", s.stderr_gap},
                                {"mean_min_gap", s.mean_min_gap},
                                {"converged", s.converged},
                                {"runs", s.runs}});
    if (r.slope) pr["loglog_slope"] = *r.slope;
    else pr["loglog_slope"] = "undefined";
    pr["step_bound_violations"] = r.step_bound_violations;
    j["policies"].push_back(pr);
  }
  return j;
}

/// Runs the suite and writes convex_report.json to `c.output_dir`.
inline std::filesystem::path convex_suite(const ConvexSuiteConfig& c) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(c.output_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + c.output_dir + "'");
  const auto reports = run_convex_suite(c);
  const fs::path path = fs::path(c.output_dir) / "convex_report.json";
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << to_json(c, reports).dump(2) << '\n';
  return path;
}

}  // namespace wcopt::bench
