#pragma once

// Plain-text SVG 1.1 figures: iterations-to-converge against theta (log x),
// one polyline per method, non-converged medians pinned at the K cap.

#include "wcopt/bench/csv.hpp"
#include "wcopt/bench/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace wcopt::bench {

struct PlotGroupKey {
  std::string model;
  double cond_kappa = 1.0;
  double p_fail = 0.0;

  auto tie() const { return std::tie(model, cond_kappa, p_fail); }
  bool operator<(const PlotGroupKey& o) const { return tie() < o.tie(); }
};

inline std::string plot_file_name(const PlotGroupKey& key) {
  std::ostringstream os;
  os << key.model << "_kappa" << format_real(key.cond_kappa) << "_pfail" << format_real(key.p_fail) << ".svg";
  return os.str();
}

/// Median over seeds with non-converged cells counted at `cap`.
inline double median_iterations(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline const char* method_color(const std::string& method) {
  static const std::map<std::string, const char*> colors = {
      {"SGD", "#1f77b4"},   {"SGD-G", "#ff7f0e"}, {"SGD-R", "#2ca02c"},   {"SPL", "#d62728"},
      {"SPL-G", "#9467bd"}, {"SPL-R", "#8c564b"}, {"TRUNC", "#e377c2"},   {"TRUNC-G", "#7f7f7f"},
      {"TRUNC-R", "#bcbd22"}, {"MD", "#17becf"}};
  const auto it = colors.find(method);
  return it == colors.end() ? "#000000" : it->second;
}

inline std::string render_svg(const PlotGroupKey& key, const std::vector<SweepResultRow>& rows, double cap) {
  constexpr double W = 640, H = 420, L = 70, R = 130, T = 40, B = 50;
  const double pw = W - L - R;
  const double ph = H - T - B;

  // method -> theta -> iteration counts over seeds
  std::map<std::string, std::map<double, std::vector<double>>> by_method;
  std::vector<std::string> method_order;
  double tmin = INFINITY, tmax = -INFINITY;
  for (const auto& r : rows) {
    if (!by_method.count(r.method)) method_order.push_back(r.method);
    by_method[r.method][r.theta].push_back(r.converged ? static_cast<double>(*r.iters_to_converge) : cap);
    tmin = std::min(tmin, r.theta);
    tmax = std::max(tmax, r.theta);
  }
  double lx0 = std::log10(tmin), lx1 = std::log10(tmax);
  if (lx1 - lx0 < 1e-12) {
    lx0 -= 0.5;
    lx1 += 0.5;
  }
  const double ymax = cap > 0 ? cap * 1.05 : 1.0;
  auto px = [&](double theta) { return L + pw * (std::log10(theta) - lx0) / (lx1 - lx0); };
  auto py = [&](double iters) { return T + ph * (1.0 - iters / ymax); };

  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << W << "\" height=\"" << H << "\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">Problem " << key.model
     << " (kappa=" << format_real(key.cond_kappa) << ", p_fail=" << format_real(key.p_fail) << ")</text>\n"
     << "<rect class=\"frame\" x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int e = static_cast<int>(std::ceil(lx0 - 1e-9)); e <= static_cast<int>(std::floor(lx1 + 1e-9)); ++e) {
    const double x = px(std::pow(10.0, e));
    os << "<line x1=\"" << x << "\" y1=\"" << T + ph << "\" x2=\"" << x << "\" y2=\"" << T + ph + 5
       << "\" stroke=\"black\"/>\n"
       << "<text x=\"" << x << "\" y=\"" << T + ph + 18 << "\" text-anchor=\"middle\" font-size=\"11\">1e" << e
       << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double v = cap * i / 4.0;
    const double y = py(v);
    os << "<line x1=\"" << L - 5 << "\" y1=\"" << y << "\" x2=\"" << L << "\" y2=\"" << y << "\" stroke=\"black\"/>\n"
       << "<text x=\"" << L - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
       << static_cast<long long>(std::llround(v)) << "</text>\n";
  }
  os << "<line class=\"cap\" x1=\"" << L << "\" y1=\"" << py(cap) << "\" x2=\"" << L + pw << "\" y2=\"" << py(cap)
     << "\" stroke=\"#999999\" stroke-dasharray=\"4,3\"/>\n"
     << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">theta</text>\n"
     << "<text x=\"16\" y=\"" << T + ph / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
     << T + ph / 2 << ")\">iterations</text>\n";

  int legend_row = 0;
  for (const auto& method : method_order) {
    const char* color = method_color(method);
    std::ostringstream pts;
    pts.setf(std::ios::fixed);
    pts.precision(2);
    std::ostringstream marks;
    marks.setf(std::ios::fixed);
    marks.precision(2);
    for (const auto& [theta, vals] : by_method[method]) {
      const double med = median_iterations(vals);
      const double x = px(theta);
      const double y = py(std::min(med, cap));
      pts << x << ',' << y << ' ';
      if (med >= cap) {
        marks << "<path class=\"marker cap-marker\" d=\"M" << x - 4 << ',' << y - 4 << " L" << x + 4 << ',' << y + 4
              << " M" << x - 4 << ',' << y + 4 << " L" << x + 4 << ',' << y - 4 << "\" stroke=\"" << color
              << "\" stroke-width=\"2\" fill=\"none\"/>\n";
      } else {
        marks << "<circle class=\"marker\" cx=\"" << x << "\" cy=\"" << y << "\" r=\"3\" fill=\"" << color
              << "\"/>\n";
      }
    }
    os << "<polyline class=\"series\" data-method=\"" << method << "\" points=\"" << pts.str()
       << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n"
       << marks.str();
    const double ly = T + 10 + 18 * legend_row++;
    os << "<line x1=\"" << L + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << L + pw + 32 << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
       << "<text class=\"legend\" x=\"" << L + pw + 38 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">" << method
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// Writes one SVG per (model, kappa, p_fail) group found in `rows`.
inline std::vector<std::filesystem::path> emit_plots(const std::vector<SweepResultRow>& rows,
                                                     const std::filesystem::path& output_dir, double cap) {
  namespace fs = std::filesystem;
  std::map<PlotGroupKey, std::vector<SweepResultRow>> groups;
  for (const auto& r : rows) groups[{r.model, r.cond_kappa, r.p_fail}].push_back(r);

  std::vector<fs::path> out;
  if (groups.empty()) return out;
  std::error_code ec;
  fs::create_directories(output_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + output_dir.string() + "'");
  for (const auto& [key, group] : groups) {
    const fs::path path = output_dir / plot_file_name(key);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    os << render_svg(key, group, cap);
    out.push_back(path);
  }
  return out;
}

/// Iteration cap for the plots: taken from manifest.json beside the CSV when
/// present, otherwise the largest observed count.
inline double infer_cap(const std::filesystem::path& results_csv, const std::vector<SweepResultRow>& rows) {
  const auto manifest = results_csv.parent_path() / "manifest.json";
  std::ifstream is(manifest);
  if (is) {
    try {
      const auto j = nlohmann::json::parse(is);
      double cap = 0.0;
      for (const auto& h : j.at("horizons")) cap = std::max(cap, h.get<double>());
      if (cap > 0.0) return cap;
    } catch (const nlohmann::json::exception&) {
    }
  }
  double cap = 1.0;
  for (const auto& r : rows)
    if (r.iters_to_converge) cap = std::max(cap, static_cast<double>(*r.iters_to_converge));
  return cap;
}

inline std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& results_csv,
                                                     const std::filesystem::path& output_dir) {
  std::ifstream is(results_csv);
  if (!is) throw IoError("cannot open " + results_csv.string());
  const auto rows = read_csv(is);
  return emit_plots(rows, output_dir, infer_cap(results_csv, rows));
}

}  // namespace wcopt::bench
