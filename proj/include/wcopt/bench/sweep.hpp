#pragma once

// theta-grid x seed x problem x method sweeps. Cells run on a small worker
// pool and are written back in canonical order.

#include "wcopt/bench/csv.hpp"
#include "wcopt/mirror.hpp"
#include "wcopt/problems.hpp"
#include "wcopt/solver.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace wcopt::bench {

inline constexpr const char* kArtifactVersion = "wcopt 1.0.0";

enum class Method { SGD, SGD_G, SGD_R, SPL, SPL_G, SPL_R, TRUNC, TRUNC_G, TRUNC_R, MD };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::SGD: return "SGD";
    case Method::SGD_G: return "SGD-G";
    case Method::SGD_R: return "SGD-R";
    case Method::SPL: return "SPL";
    case Method::SPL_G: return "SPL-G";
    case Method::SPL_R: return "SPL-R";
    case Method::TRUNC: return "TRUNC";
    case Method::TRUNC_G: return "TRUNC-G";
    case Method::TRUNC_R: return "TRUNC-R";
    case Method::MD: return "MD";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (Method m : {Method::SGD, Method::SGD_G, Method::SGD_R, Method::SPL, Method::SPL_G, Method::SPL_R,
                   Method::TRUNC, Method::TRUNC_G, Method::TRUNC_R, Method::MD})
    if (to_string(m) == s) return m;
  throw ConfigError("unknown method '" + std::string(s) + "'");
}

inline ModelKind method_model(Method m) {
  switch (m) {
    case Method::SPL:
    case Method::SPL_G:
    case Method::SPL_R: return ModelKind::prox_linear();
    case Method::TRUNC:
    case Method::TRUNC_G:
    case Method::TRUNC_R: return ModelKind::truncated(0.0);
    default: return ModelKind::subgradient();
  }
}

inline PolicyKind method_policy(Method m) {
  switch (m) {
    case Method::SGD_G:
    case Method::SPL_G:
    case Method::TRUNC_G: return PolicyKind::growth;
    case Method::SGD_R:
    case Method::SPL_R:
    case Method::TRUNC_R: return PolicyKind::reference;
    default: return PolicyKind::constant;
  }
}

struct ProblemSpec {
  ProblemKind model = ProblemKind::r1;
  long long m = 300;
  long long n = 100;
  double cond_kappa = 1.0;
  double p_fail = 0.2;
};

/// `points` log-spaced values covering [lo, hi].
inline std::vector<double> log_grid(double lo, double hi, int points) {
  require(lo > 0.0 && hi >= lo && points >= 1, "invalid log grid");
  std::vector<double> g;
  if (points == 1) return {lo};
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < points; ++i) g.push_back(std::pow(10.0, a + (b - a) * i / (points - 1)));
  return g;
}

/// 25 log-spaced points on [1e-2, 1e1].
inline std::vector<double> default_theta_grid() { return log_grid(1e-2, 1e1, 25); }

/// Default grid continued with decades up to 1e8.
inline std::vector<double> extended_theta_grid() {
  auto g = default_theta_grid();
  for (int e = 2; e <= 8; ++e) g.push_back(std::pow(10.0, e));
  return g;
}

struct SweepConfig {
  std::vector<ProblemSpec> problems;
  std::vector<Method> methods;
  std::vector<double> theta_grid = default_theta_grid();
  std::vector<std::uint64_t> seeds = {0};
  long long epochs = 400;
  double alpha = 1.0;
  double stop_factor = 1.2;
  std::map<ProblemKind, int> mirror_q = {{ProblemKind::r1, 4}, {ProblemKind::r2, 10}};
  std::string output_dir = "results";
  unsigned workers = 0;  // 0: environment / hardware default

  void validate() const {
    require(!problems.empty(), "sweep: at least one problem is required");
    require(!methods.empty(), "sweep: at least one method is required");
    require(!theta_grid.empty(), "sweep: theta_grid is empty");
    for (std::size_t i = 0; i < theta_grid.size(); ++i) {
      require(theta_grid[i] > 0.0, "sweep: theta values must be positive");
      if (i > 0) require(theta_grid[i] > theta_grid[i - 1], "sweep: theta_grid must be sorted ascending");
    }
    require(!seeds.empty(), "sweep: at least one seed is required");
    require(epochs >= 1, "sweep: epochs must be positive");
    require(alpha > 0.0, "sweep: alpha must be positive");
    require(stop_factor > 1.0, "sweep: stop_factor must exceed 1");
    for (const auto& p : problems) {
      require(p.m >= 1 && p.n >= 1, "sweep: problem dimensions must be positive");
      require(p.cond_kappa >= 1.0, "sweep: cond_kappa must be >= 1");
      require(p.p_fail >= 0.0 && p.p_fail < 1.0, "sweep: p_fail must lie in [0, 1)");
    }
  }
};

inline SweepConfig sweep_config_from_json(const nlohmann::json& j) {
  SweepConfig c;
  try {
    for (const auto& p : j.at("problems")) {
      ProblemSpec s;
      s.model = parse_problem_kind(p.at("model").get<std::string>());
      s.m = p.value("m", 300LL);
      s.n = p.value("n", 100LL);
      s.cond_kappa = p.value("cond_kappa", 1.0);
      s.p_fail = p.value("p_fail", 0.2);
      c.problems.push_back(s);
    }
    for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
    if (j.contains("theta_grid")) {
      const auto& g = j.at("theta_grid");
      if (g.is_array()) {
        c.theta_grid = g.get<std::vector<double>>();
      } else if (g.is_string() && g.get<std::string>() == "default") {
        c.theta_grid = default_theta_grid();
      } else if (g.is_string() && g.get<std::string>() == "extended") {
        c.theta_grid = extended_theta_grid();
      } else if (g.is_object()) {
        c.theta_grid = log_grid(g.at("min").get<double>(), g.at("max").get<double>(), g.at("points").get<int>());
      } else {
        throw ConfigError("sweep: theta_grid must be an array, an object or \"default\"/\"extended\"");
      }
    }
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.epochs = j.value("epochs", c.epochs);
    c.alpha = j.value("alpha", c.alpha);
    c.stop_factor = j.value("stop_factor", c.stop_factor);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.workers = j.value("workers", 0U);
    if (j.contains("mirror_q")) {
      for (auto it = j.at("mirror_q").begin(); it != j.at("mirror_q").end(); ++it)
        c.mirror_q[parse_problem_kind(it.key())] = it.value().get<int>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("sweep config: ") + e.what());
  }
  c.validate();
  return c;
}

inline nlohmann::json to_json(const SweepConfig& c) {
  nlohmann::json j;
  for (const auto& p : c.problems)
    j["problems"].push_back(
        {{"model", to_string(p.model)}, {"m", p.m}, {"n", p.n}, {"cond_kappa", p.cond_kappa}, {"p_fail", p.p_fail}});
  for (Method m : c.methods) j["methods"].push_back(to_string(m));
  j["theta_grid"] = c.theta_grid;
  j["seeds"] = c.seeds;
  j["epochs"] = c.epochs;
  j["alpha"] = c.alpha;
  j["stop_factor"] = c.stop_factor;
  for (const auto& [k, q] : c.mirror_q) j["mirror_q"][std::string(to_string(k))] = q;
  j["output_dir"] = c.output_dir;
  return j;
}

struct Cell {
  std::size_t problem = 0;
  Method method = Method::SGD;
  double theta = 1.0;
  std::uint64_t seed = 0;
};

/// Cells in canonical order: problem, method, theta, seed.
inline std::vector<Cell> enumerate_cells(const SweepConfig& c) {
  std::vector<Cell> cells;
  for (std::size_t p = 0; p < c.problems.size(); ++p)
    for (Method m : c.methods)
      for (double t : c.theta_grid)
        for (std::uint64_t s : c.seeds) cells.push_back({p, m, t, s});
  return cells;
}

/// Solver configuration used for one cell (experiment-mode stepsizes).
inline SolverConfig solver_config_for(const SweepConfig& c, const ProblemSpec& p, Method method, double theta,
                                      std::uint64_t seed) {
  SolverConfig cfg;
  cfg.model = method_model(method);
  cfg.policy = method_policy(method);
  cfg.params.mode = HorizonMode::experiment;
  cfg.params.theta = theta;
  cfg.params.alpha = c.alpha;
  cfg.params.horizon = c.epochs * p.m;
  cfg.epochs = c.epochs;
  cfg.stop_factor = c.stop_factor;
  cfg.seed = seed;
  cfg.record_stride = std::max<long long>(1, p.m);
  return cfg;
}

inline RunRecord run_cell(const SweepConfig& c, const ProblemSpec& p, const ProblemInstance& instance, Method method,
                          double theta, std::uint64_t seed) {
  if (method == Method::MD) {
    MirrorConfig md;
    const auto it = c.mirror_q.find(p.model);
    md.kernel.q = it != c.mirror_q.end() ? it->second : KernelSpec::for_problem(p.model).q;
    md.theta = theta;
    md.epochs = c.epochs;
    md.stop_factor = c.stop_factor;
    md.seed = seed;
    md.record_stride = std::max<long long>(1, p.m);
    return run_md(instance, md);
  }
  return run(instance, solver_config_for(c, p, method, theta, seed));
}

inline unsigned default_workers() {
  if (const char* env = std::getenv("WCOPT_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

/// Per-cell solver diagnostics that are not part of the CSV schema.
struct CellDiagnostics {
  long long step_bound_checks = 0;
  long long step_bound_violations = 0;
};

/// Runs every cell. `order`, when given, is a permutation of cell indices
/// controlling execution order only; rows always come back canonical.
/// `diagnostics`, when given, receives one entry per row.
inline std::vector<SweepResultRow> run_sweep(const SweepConfig& c, const std::vector<std::size_t>* order = nullptr,
                                             std::vector<CellDiagnostics>* diagnostics = nullptr) {
  c.validate();
  const auto cells = enumerate_cells(c);

  // Instances are shared read-only across methods and theta.
  std::map<std::pair<std::size_t, std::uint64_t>, ProblemInstance> instances;
  for (std::size_t p = 0; p < c.problems.size(); ++p)
    for (std::uint64_t s : c.seeds) {
      const auto& spec = c.problems[p];
      instances.emplace(std::make_pair(p, s), generate(spec.m, spec.n, spec.cond_kappa, spec.p_fail, spec.model, s));
    }

  std::vector<SweepResultRow> rows(cells.size());
  std::vector<CellDiagnostics> diag(cells.size());
  std::vector<std::size_t> exec(cells.size());
  if (order) {
    require(order->size() == cells.size(), "sweep: execution order has wrong length");
    exec = *order;
    std::vector<std::size_t> sorted = exec;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) require(sorted[i] == i, "sweep: execution order is not a permutation");
  } else {
    for (std::size_t i = 0; i < exec.size(); ++i) exec[i] = i;
  }

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (std::size_t slot = next++; slot < exec.size(); slot = next++) {
      try {
        const Cell& cell = cells[exec[slot]];
        const ProblemSpec& spec = c.problems[cell.problem];
        const ProblemInstance& inst = instances.at({cell.problem, cell.seed});
        const auto t0 = std::chrono::steady_clock::now();
        const RunRecord rec = run_cell(c, spec, inst, cell.method, cell.theta, cell.seed);
        const auto t1 = std::chrono::steady_clock::now();

        SweepResultRow& r = rows[exec[slot]];
        r.model = std::string(to_string(spec.model));
        r.method = std::string(to_string(cell.method));
        r.theta = cell.theta;
        r.seed = cell.seed;
        r.cond_kappa = spec.cond_kappa;
        r.p_fail = spec.p_fail;
        r.converged = rec.converged;
        r.diverged = rec.diverged;
        r.iters_to_converge = rec.iters_to_converge;
        r.final_objective = rec.objective_per_epoch.empty() ? INFINITY : rec.objective_per_epoch.back();
        if (rec.diverged) r.final_objective = INFINITY;
        r.max_iterate_norm = rec.max_iterate_norm;
        r.wall_time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        diag[exec[slot]] = {rec.step_bound_checks, rec.step_bound_violations};
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };

  const unsigned n_workers =
      std::min<unsigned>(c.workers ? c.workers : default_workers(), static_cast<unsigned>(cells.size()));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  if (diagnostics) *diagnostics = std::move(diag);
  return rows;
}

inline nlohmann::json make_manifest(const SweepConfig& c) {
  nlohmann::json j;
  j["artifact_version"] = kArtifactVersion;
  j["config"] = to_json(c);
  nlohmann::json horizons = nlohmann::json::array();
  for (const auto& p : c.problems) horizons.push_back(c.epochs * p.m);
  j["horizons"] = horizons;
  nlohmann::json cells = nlohmann::json::array();
  for (const Cell& cell : enumerate_cells(c)) {
    const auto& p = c.problems[cell.problem];
    cells.push_back({{"model", to_string(p.model)},
                     {"m", p.m},
                     {"n", p.n},
                     {"cond_kappa", p.cond_kappa},
                     {"p_fail", p.p_fail},
                     {"method", to_string(cell.method)},
                     {"theta", cell.theta},
                     {"seed", cell.seed},
                     {"horizon", c.epochs * p.m}});
  }
  j["cells"] = std::move(cells);
  return j;
}

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs the sweep and writes results.csv and manifest.json into
/// `c.output_dir`. Returns the CSV path.
inline std::filesystem::path sweep(const SweepConfig& c) {
  namespace fs = std::filesystem;
  const fs::path dir(c.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());

  const auto rows = run_sweep(c);
  const fs::path csv = dir / "results.csv";
  {
    std::ofstream os(csv, std::ios::binary);
    if (!os) throw IoError("cannot write " + csv.string());
    write_csv(os, rows);
    if (!os) throw IoError("write failed for " + csv.string());
  }
  {
    std::ofstream os(dir / "manifest.json", std::ios::binary);
    if (!os) throw IoError("cannot write manifest.json");
    os << make_manifest(c).dump(2) << '\n';
  }
  return csv;
}

inline std::filesystem::path sweep(const std::filesystem::path& config_path) {
  std::ifstream is(config_path);
  if (!is) throw IoError("cannot open config '" + config_path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return sweep(sweep_config_from_json(j));
}

}  // namespace wcopt::bench
