#include "wcopt/bench/convex_suite.hpp"
#include "wcopt/bench/plot.hpp"
#include "wcopt/bench/sweep.hpp"

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>

namespace wcopt::bench {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(::testing::TempDir()) / ("wcopt_bench_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::string without_wall_time(const std::string& csv) {
  std::istringstream is(csv);
  std::ostringstream os;
  for (std::string line; std::getline(is, line);) os << line.substr(0, line.rfind(',')) << '\n';
  return os.str();
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + needle.size())) ++n;
  return n;
}

SweepConfig small_config(const fs::path& dir) {
  SweepConfig c;
  c.problems = {{ProblemKind::r1, 30, 5, 10.0, 0.2}};
  c.methods = {Method::SGD, Method::SGD_R, Method::SPL_G, Method::MD};
  c.theta_grid = {0.1, 1.0, 10.0};
  c.seeds = {0, 1};
  c.epochs = 20;
  c.output_dir = dir.string();
  c.workers = 2;
  return c;
}

std::vector<SweepResultRow> strip_time(std::vector<SweepResultRow> rows) {
  for (auto& r : rows) r.wall_time_ms = 0.0;
  return rows;
}

bool same_rows(const std::vector<SweepResultRow>& a, const std::vector<SweepResultRow>& b) {
  std::ostringstream sa, sb;
  write_csv(sa, strip_time(a));
  write_csv(sb, strip_time(b));
  return sa.str() == sb.str();
}

TEST(Sweep, OneCellPerSeed) {
  const auto dir = scratch("count");
  SweepConfig c;
  c.problems = {{ProblemKind::r1, 20, 4, 1.0, 0.1}};
  c.methods = {Method::SGD};
  c.theta_grid = {1.0};
  c.seeds = {3, 4};
  c.epochs = 5;
  c.output_dir = dir.string();
  const fs::path csv = sweep(c);
  std::ifstream is(csv);
  const auto rows = read_csv(is);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].seed, 3u);
  EXPECT_EQ(rows[1].seed, 4u);
  for (const auto& r : rows) EXPECT_EQ(r.iters_to_converge.has_value(), r.converged);
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
}

TEST(Sweep, RerunIsByteIdenticalWithoutWallTime) {
  const auto d1 = scratch("rerun1"), d2 = scratch("rerun2");
  auto c = small_config(d1);
  const auto a = slurp(sweep(c));
  c.output_dir = d2.string();
  c.workers = 1;
  const auto b = slurp(sweep(c));
  EXPECT_EQ(without_wall_time(a), without_wall_time(b));
  EXPECT_EQ(count(a, "\n"), 1u + 4 * 3 * 2);
  EXPECT_EQ(a.find('\r'), std::string::npos);
}

TEST(Sweep, PermutedExecutionOrderGivesSameRows) {
  const auto c = small_config(scratch("perm"));
  const auto base = run_sweep(c);
  std::vector<std::size_t> order(base.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 gen(17);
  for (int t = 0; t < 3; ++t) {
    std::shuffle(order.begin(), order.end(), gen);
    EXPECT_TRUE(same_rows(base, run_sweep(c, &order)));
  }
  std::vector<std::size_t> bad = {0, 0};
  EXPECT_THROW(run_sweep(c, &bad), ConfigError);
}

TEST(Sweep, ManifestCoversEveryRow) {
  const auto dir = scratch("manifest");
  const auto c = small_config(dir);
  std::ifstream is(sweep(c));
  const auto rows = read_csv(is);
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest.at("artifact_version").get<std::string>(), kArtifactVersion);
  std::set<std::tuple<std::string, double, std::uint64_t>> cells;
  for (const auto& cell : manifest.at("cells"))
    cells.emplace(cell.at("method").get<std::string>(), cell.at("theta").get<double>(),
                  cell.at("seed").get<std::uint64_t>());
  EXPECT_EQ(cells.size(), rows.size());
  for (const auto& r : rows) EXPECT_TRUE(cells.count({r.method, r.theta, r.seed})) << r.method << ' ' << r.theta;
}

TEST(Sweep, ConfigErrors) {
  auto c = small_config(scratch("errors"));
  c.theta_grid = {1.0, 0.5};
  EXPECT_THROW(c.validate(), ConfigError);
  c.theta_grid = {-1.0};
  EXPECT_THROW(c.validate(), ConfigError);
  c.theta_grid = {1.0};
  c.methods.clear();
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(sweep_config_from_json(nlohmann::json::parse(R"({"problems":[{"model":"r1"}],"methods":["XYZ"]})")),
               ConfigError);
  EXPECT_THROW(sweep_config_from_json(nlohmann::json::parse(R"({"methods":["SGD"]})")), ConfigError);
  EXPECT_THROW(sweep(fs::path("/nonexistent/config.json")), IoError);
}

TEST(Sweep, JsonConfigRoundTrip) {
  const auto c = small_config(scratch("json"));
  const auto back = sweep_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  const auto grid = sweep_config_from_json(
      nlohmann::json::parse(R"({"problems":[{"model":"r2"}],"methods":["SGD"],"theta_grid":"extended"})"));
  EXPECT_EQ(grid.theta_grid.back(), 1e8);
  EXPECT_EQ(default_theta_grid().size(), 25u);
  EXPECT_DOUBLE_EQ(default_theta_grid().front(), 1e-2);
  EXPECT_DOUBLE_EQ(default_theta_grid().back(), 1e1);
}

TEST(Csv, HeaderAndRoundTrip) {
  EXPECT_STREQ(kCsvHeader,
               "model,method,theta,seed,cond_kappa,p_fail,converged,diverged,iters_to_converge,final_objective,"
               "max_iterate_norm,wall_time_ms");
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> U(-5.0, 5.0);
  std::vector<SweepResultRow> rows;
  for (int i = 0; i < 50; ++i) {
    SweepResultRow r;
    r.model = i % 2 ? "r1" : "r3";
    r.method = to_string(static_cast<Method>(i % 10));
    r.theta = std::pow(10.0, U(gen));
    r.seed = static_cast<std::uint64_t>(i) * 7919u;
    r.cond_kappa = i % 3 ? 1.0 : 10.0;
    r.p_fail = 0.3;
    r.diverged = i % 5 == 0;
    r.converged = !r.diverged && i % 2 == 0;
    if (r.converged) r.iters_to_converge = 100 * i;
    r.final_objective = r.diverged ? INFINITY : std::pow(10.0, U(gen));
    r.max_iterate_norm = std::pow(10.0, U(gen));
    r.wall_time_ms = 1.5;
    rows.push_back(r);
  }
  std::stringstream ss;
  write_csv(ss, rows);
  const std::string text = ss.str();
  const auto back = read_csv(ss);
  std::ostringstream again;
  write_csv(again, back);
  EXPECT_EQ(again.str(), text);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].theta, rows[i].theta);
    EXPECT_EQ(back[i].iters_to_converge, rows[i].iters_to_converge);
  }
}

TEST(Csv, MalformedInputIsRejected) {
  std::istringstream bad_header("a,b,c\n");
  EXPECT_THROW(read_csv(bad_header), ConfigError);
  std::istringstream short_row(std::string(kCsvHeader) + "\nr1,SGD,1\n");
  EXPECT_THROW(read_csv(short_row), ConfigError);
  std::istringstream bad_number(std::string(kCsvHeader) + "\nr1,SGD,x,0,1,0.2,0,0,,1,1,0.1\n");
  EXPECT_THROW(read_csv(bad_number), ConfigError);
  std::istringstream empty("");
  EXPECT_THROW(read_csv(empty), ConfigError);
}

TEST(Plot, HeaderOnlyCsvGivesNoSvg) {
  const auto dir = scratch("plot_empty");
  std::ofstream(dir / "results.csv") << kCsvHeader << '\n';
  EXPECT_TRUE(emit_plots(dir / "results.csv", dir / "svg").empty());
}

TEST(Plot, SingleCellHasOneMarker) {
  const auto dir = scratch("plot_one");
  SweepConfig c;
  c.problems = {{ProblemKind::r1, 20, 4, 10.0, 0.2}};
  c.methods = {Method::SGD_R};
  c.theta_grid = {1.0};
  c.epochs = 10;
  c.output_dir = dir.string();
  const auto files = emit_plots(sweep(c), dir / "svg");
  ASSERT_EQ(files.size(), 1u);
  const auto svg = slurp(files[0]);
  EXPECT_EQ(count(svg, "class=\"marker"), 1u);
  EXPECT_EQ(count(svg, "<polyline"), 1u);
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Plot, MalformedCsvThrows) {
  const auto dir = scratch("plot_bad");
  std::ofstream(dir / "results.csv") << "not,a,results,file\n";
  EXPECT_THROW(emit_plots(dir / "results.csv", dir / "svg"), ConfigError);
  EXPECT_THROW(emit_plots(dir / "missing.csv", dir / "svg"), IoError);
}

// r1 at (kappa, p_fail) = (10, 0.2), full default grid: SGD-R never diverges,
// and the figure has one series per method under the figure naming.
TEST(FullSweep, ClippedStepNeverDivergesOnR1) {
  const auto dir = scratch("full_r1");
  SweepConfig c;
  c.problems = {{ProblemKind::r1, 300, 100, 10.0, 0.2}};
  c.methods = {Method::SGD, Method::SGD_G, Method::SGD_R};
  c.output_dir = dir.string();
  const fs::path csv = sweep(c);
  std::ifstream is(csv);
  const auto rows = read_csv(is);
  ASSERT_EQ(rows.size(), 75u);
  for (const auto& r : rows) {
    if (r.method == "SGD-R") {
      EXPECT_FALSE(r.diverged) << "theta " << r.theta;
    }
  }

  const auto files = emit_plots(csv, dir / "svg");
  ASSERT_EQ(files.size(), 1u);
  const auto svg = slurp(files[0]);
  EXPECT_EQ(count(svg, "<polyline"), 3u);
  for (const char* m : {"SGD", "SGD-G", "SGD-R"})
    EXPECT_NE(svg.find(std::string("data-method=\"") + m + "\""), std::string::npos) << m;
  EXPECT_EQ(count(svg, "class=\"legend\""), 3u);
}

TEST(ConvexSuite, ConstantPolicySlopeAndGrowthConvergence) {
  ConvexSuiteConfig c;
  c.output_dir = scratch("convex").string();
  const auto reports = run_convex_suite(c);
  ASSERT_EQ(reports.size(), 3u);
  for (const auto& r : reports) {
    ASSERT_EQ(r.stats.size(), 3u);
    EXPECT_EQ(r.step_bound_violations, 0);
    if (r.policy == PolicyKind::constant) {
      ASSERT_TRUE(r.slope.has_value());
      EXPECT_GE(*r.slope, -0.8);
      EXPECT_LE(*r.slope, -0.3);
    }
    if (r.policy == PolicyKind::growth) {
      EXPECT_EQ(r.stats.back().converged, r.stats.back().runs);
    }
  }
  const auto path = convex_suite(c);
  const auto j = nlohmann::json::parse(slurp(path));
  EXPECT_TRUE(j.at("policies")[0].at("loglog_slope").is_number());
}

TEST(ConvexSuite, ZeroNoiseAtOptimumHasUndefinedSlope) {
  ConvexSuiteConfig c;
  c.p_fail = 0.0;
  c.start_at_optimum = true;
  c.seeds = {0, 1, 2};
  c.horizons = {100, 1000};
  c.output_dir = scratch("convex_zero").string();
  const auto reports = run_convex_suite(c);
  for (const auto& r : reports) {
    EXPECT_FALSE(r.slope.has_value());
    for (const auto& s : r.stats) {
      EXPECT_EQ(s.min_mean_gap, 0.0);
      EXPECT_EQ(s.stderr_gap, 0.0);
    }
  }
  const auto j = to_json(c, reports);
  EXPECT_EQ(j.at("policies")[0].at("loglog_slope"), "undefined");
}

#ifdef WCOPT_BENCH_EXE
int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + WCOPT_BENCH_EXE + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  const std::string out = (dir / "out").string();
  EXPECT_EQ(run_cli("generate --model r2 --m 10 --n 3 -o " + (dir / "inst.txt").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "inst.txt"));
  EXPECT_EQ(run_cli("sweep --model r1 --m 20 --n 4 --methods SGD,SGD-R --theta-grid 0.5,2 --seeds 0 --epochs 5 "
                    "--output-dir " + out),
            0);
  EXPECT_TRUE(fs::exists(dir / "out" / "results.csv"));
  EXPECT_EQ(run_cli("plot " + (dir / "out" / "results.csv").string() + " --output-dir " + (dir / "svg").string()), 0);
  EXPECT_EQ(run_cli("envelope-trace --instance " + (dir / "inst.txt").string() + " --epochs 2 --points 3"), 0);

  EXPECT_EQ(run_cli("sweep --methods NOPE --output-dir " + out), 1);
  EXPECT_EQ(run_cli("sweep --theta-grid 2,1 --output-dir " + out), 1);
  EXPECT_EQ(run_cli("frobnicate"), 1);
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_EQ(run_cli("sweep --config " + (dir / "bad.json").string()), 1);
  std::ofstream(dir / "bad.csv") << "x,y\n";
  EXPECT_EQ(run_cli("plot " + (dir / "bad.csv").string()), 1);

  EXPECT_EQ(run_cli("plot " + (dir / "missing.csv").string()), 2);
  EXPECT_EQ(run_cli("sweep --config " + (dir / "missing.json").string()), 2);
  std::ofstream(dir / "file") << "x";
  EXPECT_EQ(run_cli("sweep --m 10 --n 2 --epochs 1 --theta-grid 1 --output-dir " + (dir / "file" / "sub").string()),
            2);
}
#endif

}  // namespace
}  // namespace wcopt::bench
