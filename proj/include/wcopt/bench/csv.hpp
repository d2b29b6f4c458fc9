#pragma once

// Sweep result rows and their CSV encoding (comma separated, '.' decimal,
// LF line endings, RFC 4180 quoting on read).

#include "wcopt/core.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace wcopt::bench {

inline constexpr const char* kCsvHeader =
    "model,method,theta,seed,cond_kappa,p_fail,converged,diverged,iters_to_converge,final_objective,"
    "max_iterate_norm,wall_time_ms";

struct SweepResultRow {
  std::string model;
  std::string method;
  double theta = 0.0;
  std::uint64_t seed = 0;
  double cond_kappa = 1.0;
  double p_fail = 0.0;
  bool converged = false;
  bool diverged = false;
  std::optional<long long> iters_to_converge;
  double final_objective = 0.0;
  double max_iterate_norm = 0.0;
  double wall_time_ms = 0.0;
};

inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  // Shortest representation that parses back to the same double.
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_real(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("csv: bad number '" + s + "'");
  }
  if (used != s.size()) throw ConfigError("csv: bad number '" + s + "'");
  return v;
}

inline void write_row(std::ostream& os, const SweepResultRow& r) {
  char wall[32];
  std::snprintf(wall, sizeof wall, "%.3f", r.wall_time_ms);
  os << r.model << ',' << r.method << ',' << format_real(r.theta) << ',' << r.seed << ','
     << format_real(r.cond_kappa) << ',' << format_real(r.p_fail) << ',' << (r.converged ? 1 : 0) << ','
     << (r.diverged ? 1 : 0) << ',';
  if (r.iters_to_converge) os << *r.iters_to_converge;
  os << ',' << format_real(r.final_objective) << ',' << format_real(r.max_iterate_norm) << ',' << wall << '\n';
}

inline void write_csv(std::ostream& os, const std::vector<SweepResultRow>& rows) {
  os << kCsvHeader << '\n';
  for (const auto& r : rows) write_row(os, r);
}

/// Splits one CSV record; handles double-quoted fields with "" escapes.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  if (quoted) throw ConfigError("csv: unterminated quote");
  out.push_back(std::move(cur));
  return out;
}

inline std::vector<SweepResultRow> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw ConfigError("csv: unexpected header");

  std::vector<SweepResultRow> rows;
  long long lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 12) throw ConfigError("csv: line " + std::to_string(lineno) + " has wrong field count");
    SweepResultRow r;
    r.model = f[0];
    r.method = f[1];
    r.theta = parse_real(f[2]);
    try {
      r.seed = std::stoull(f[3]);
    } catch (const std::exception&) {
      throw ConfigError("csv: bad seed on line " + std::to_string(lineno));
    }
    r.cond_kappa = parse_real(f[4]);
    r.p_fail = parse_real(f[5]);
    if ((f[6] != "0" && f[6] != "1") || (f[7] != "0" && f[7] != "1"))
      throw ConfigError("csv: bad flag on line " + std::to_string(lineno));
    r.converged = f[6] == "1";
    r.diverged = f[7] == "1";
    if (!f[8].empty()) r.iters_to_converge = static_cast<long long>(parse_real(f[8]));
    if (r.converged != r.iters_to_converge.has_value())
      throw ConfigError("csv: iters_to_converge inconsistent with converged on line " + std::to_string(lineno));
    r.final_objective = parse_real(f[9]);
    r.max_iterate_norm = parse_real(f[10]);
    r.wall_time_ms = parse_real(f[11]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace wcopt::bench
