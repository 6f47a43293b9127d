#pragma once

// Deterministic text output (CSV rows, shortest round-trip doubles) and the
// CSV loaders for sampled fields and kernel tables.

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kirchwave/kernel.hpp"
#include "kirchwave/spatial.hpp"

namespace kw {

/// Round-trip exact, locale-independent double formatting.
inline std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

/// One emitted diagnostics row. Cells that are not defined at that step
/// (centered d/dt residual and the finite-difference G'' at the first and
/// last emitted steps) stay empty in the CSV.
struct DiagnosticsRow {
  long index = 0;
  double t = 0.0;
  double E = 0.0;
  double I = 0.0;
  double L2_sq = 0.0;
  double grad_sq = 0.0;
  double Linf = 0.0;
  double g_circ = 0.0;
  std::optional<double> dE_residual;
  double G = 0.0;
  double Gp = 0.0;
  std::optional<double> Gpp;
  std::optional<double> concavity_residual;
};

inline const char* diagnostics_csv_header() {
  return "t,E,I,L2_sq,grad_sq,Linf,g_circ,dE_residual,G,Gp,Gpp,concavity_residual";
}

inline std::string diagnostics_csv_row(const DiagnosticsRow& r) {
  auto opt = [](const std::optional<double>& v) { return v ? fmt_double(*v) : std::string(); };
  std::string s;
  s.reserve(220);
  s += fmt_double(r.t);
  s += ',';
  s += fmt_double(r.E);
  s += ',';
  s += fmt_double(r.I);
  s += ',';
  s += fmt_double(r.L2_sq);
  s += ',';
  s += fmt_double(r.grad_sq);
  s += ',';
  s += fmt_double(r.Linf);
  s += ',';
  s += fmt_double(r.g_circ);
  s += ',';
  s += opt(r.dE_residual);
  s += ',';
  s += fmt_double(r.G);
  s += ',';
  s += fmt_double(r.Gp);
  s += ',';
  s += opt(r.Gpp);
  s += ',';
  s += opt(r.concavity_residual);
  return s;
}

/// Two numeric columns; '#' comments, blank lines and a non-numeric header
/// line are skipped. Separator is comma and/or whitespace.
inline std::vector<std::pair<double, double>> load_two_column_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file '" + path + "'");
  std::vector<std::pair<double, double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    for (char& c : line)
      if (c == ',' || c == ';' || c == '\t') c = ' ';
    std::istringstream ss(line);
    double a, b;
    if (ss >> a >> b) {
      rows.emplace_back(a, b);
    } else {
      // tolerate one header / textual line, otherwise complain
      std::string word;
      std::istringstream probe(line);
      if (probe >> word && rows.empty()) continue;
      if (!word.empty())
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected two numbers");
    }
  }
  return rows;
}

/// Piecewise-linear interpolation of (x, value) samples onto the interior
/// nodes; outside the sampled range the nearest sample value is used.
inline Field field_from_samples(const Grid1D& g,
                                const std::vector<std::pair<double, double>>& samples) {
  if (samples.size() < 2) throw std::invalid_argument("field_from_samples: need >= 2 samples");
  std::vector<std::pair<double, double>> s = samples;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (!(s[i].first > s[i - 1].first))
      throw std::invalid_argument("field_from_samples: x values must strictly increase");
  Field f = Field::zeros(g);
  for (int i = 0; i < g.n_interior; ++i) {
    const double x = g.x(i);
    if (x <= s.front().first) {
      f[i] = s.front().second;
    } else if (x >= s.back().first) {
      f[i] = s.back().second;
    } else {
      std::size_t j = 1;
      while (s[j].first < x) ++j;
      const double w = (x - s[j - 1].first) / (s[j].first - s[j - 1].first);
      f[i] = (1.0 - w) * s[j - 1].second + w * s[j].second;
    }
  }
  return f;
}

inline Field load_field_csv(const std::string& path, const Grid1D& g) {
  return field_from_samples(g, load_two_column_csv(path));
}

inline Kernel load_kernel_table_csv(const std::string& path) {
  const auto rows = load_two_column_csv(path);
  std::vector<double> t, v;
  t.reserve(rows.size());
  v.reserve(rows.size());
  for (const auto& [ti, gi] : rows) {
    t.push_back(ti);
    v.push_back(gi);
  }
  return Kernel::tabulated(std::move(t), std::move(v));
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("failed while writing '" + path + "'");
}

}  // namespace kw
