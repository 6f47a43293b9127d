#pragma once

// 1D Dirichlet spatial discretization: uniform grid, grid functions,
// second-order Laplacian, discrete norms and the Poincare constant.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace kw {

/// Uniform 1D grid on (0, L) with homogeneous Dirichlet boundaries.
/// Interior nodes are x_i = (i+1)*h for i = 0..n_interior-1, h = L/(n_interior+1).
/// Boundary values are identically zero and are never stored.
struct Grid1D {
  double length = 1.0;
  int n_interior = 2;
  double h = 1.0 / 3.0;

  Grid1D() = default;
  Grid1D(double L, int n) {
    if (!(L > 0.0)) throw std::invalid_argument("Grid1D: length must be positive");
    if (n < 2) throw std::invalid_argument("Grid1D: n_interior must be >= 2");
    length = L;
    n_interior = n;
    h = L / static_cast<double>(n + 1);
  }

  double x(int i) const { return static_cast<double>(i + 1) * h; }
  bool operator==(const Grid1D& o) const {
    return length == o.length && n_interior == o.n_interior;
  }
};

/// Real-valued grid function on the interior nodes of a Grid1D.
struct Field {
  std::vector<double> v;

  Field() = default;
  explicit Field(std::size_t n, double fill = 0.0) : v(n, fill) {}
  explicit Field(std::vector<double> values) : v(std::move(values)) {}

  static Field zeros(const Grid1D& g) { return Field(static_cast<std::size_t>(g.n_interior)); }

  std::size_t size() const { return v.size(); }
  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }
};

/// Forward-difference (edge) values d_j = (f_{j+1} - f_j)/h, j = 0..n_interior,
/// with the Dirichlet zeros at both ends folded in.
struct EdgeField {
  std::vector<double> v;

  EdgeField() = default;
  explicit EdgeField(std::size_t n, double fill = 0.0) : v(n, fill) {}
  explicit EdgeField(std::vector<double> values) : v(std::move(values)) {}

  std::size_t size() const { return v.size(); }
  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }
};

inline void require_size(const Grid1D& g, const Field& f, const char* who) {
  if (f.size() != static_cast<std::size_t>(g.n_interior))
    throw std::invalid_argument(std::string(who) + ": field/grid size mismatch");
}

inline bool all_finite(const Field& f) {
  for (double x : f.v)
    if (!std::isfinite(x)) return false;
  return true;
}

/// Second-order central-difference Laplacian with zero Dirichlet ghosts.
inline Field laplacian(const Grid1D& g, const Field& f) {
  require_size(g, f, "laplacian");
  const int n = g.n_interior;
  const double ih2 = 1.0 / (g.h * g.h);
  Field out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double left = (i > 0) ? f[i - 1] : 0.0;
    const double right = (i < n - 1) ? f[i + 1] : 0.0;
    out[i] = (left - 2.0 * f[i] + right) * ih2;
  }
  return out;
}

/// Discrete squared L2 norm, h * sum f_i^2.
inline double norm_l2_sq(const Grid1D& g, const Field& f) {
  require_size(g, f, "norm_l2_sq");
  double s = 0.0;
  for (double x : f.v) s += x * x;
  return g.h * s;
}

/// Discrete L2 inner product, h * sum f_i g_i.
inline double inner_l2(const Grid1D& g, const Field& a, const Field& b) {
  require_size(g, a, "inner_l2");
  require_size(g, b, "inner_l2");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return g.h * s;
}

inline double norm_linf(const Field& f) {
  double m = 0.0;
  for (double x : f.v) m = std::max(m, std::abs(x));
  return m;
}

/// Forward differences including the two boundary edges.
inline EdgeField edge_gradient(const Grid1D& g, const Field& f) {
  require_size(g, f, "edge_gradient");
  const int n = g.n_interior;
  EdgeField d(static_cast<std::size_t>(n + 1));
  const double ih = 1.0 / g.h;
  d[0] = f[0] * ih;
  for (int j = 1; j < n; ++j) d[j] = (f[j] - f[j - 1]) * ih;
  d[n] = -f[n - 1] * ih;
  return d;
}

inline double edge_inner(const Grid1D& g, const EdgeField& a, const EdgeField& b) {
  if (a.size() != b.size()) throw std::invalid_argument("edge_inner: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return g.h * s;
}

inline double edge_norm_sq(const Grid1D& g, const EdgeField& a) { return edge_inner(g, a, a); }

/// Discrete Dirichlet energy, h * sum over edges of ((f_{i+1}-f_i)/h)^2.
/// Summation-by-parts compatible: h * sum f_i (lap f)_i == -grad_norm_sq(f).
inline double grad_norm_sq(const Grid1D& g, const Field& f) {
  require_size(g, f, "grad_norm_sq");
  const int n = g.n_interior;
  const double ih = 1.0 / g.h;
  double s = f[0] * ih * f[0] * ih;
  for (int j = 1; j < n; ++j) {
    const double d = (f[j] - f[j - 1]) * ih;
    s += d * d;
  }
  s += f[n - 1] * ih * f[n - 1] * ih;
  return g.h * s;
}

/// Discrete (p+1)-norm to the power p+1, h * sum |f_i|^{p+1}. Requires p > 1.
inline double norm_lp1(const Grid1D& g, const Field& f, double p) {
  require_size(g, f, "norm_lp1");
  if (!(p > 1.0)) throw std::invalid_argument("norm_lp1: p must exceed 1");
  double s = 0.0;
  for (double x : f.v) s += std::pow(std::abs(x), p + 1.0);
  return g.h * s;
}

enum class PoincareMode { continuum, discrete };

/// Smallest constant with ||u||_2^2 <= C_p ||grad u||_2^2.
/// Continuum: (L/pi)^2. Discrete: reciprocal of the smallest eigenvalue
/// (2/h^2)(1 - cos(pi h / L)) of the central-difference Dirichlet Laplacian.
inline double poincare_constant(const Grid1D& g, PoincareMode mode) {
  constexpr double pi = 3.14159265358979323846;
  if (mode == PoincareMode::continuum) {
    const double r = g.length / pi;
    return r * r;
  }
  const double lambda1 = 2.0 / (g.h * g.h) * (1.0 - std::cos(pi * g.h / g.length));
  return 1.0 / lambda1;
}

// Small arithmetic helpers used throughout the stepping code.

inline Field operator*(double c, const Field& f) {
  Field out = f;
  for (double& x : out.v) x *= c;
  return out;
}

inline Field& operator+=(Field& a, const Field& b) {
  if (a.size() != b.size()) throw std::invalid_argument("Field +=: size mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

inline Field& operator-=(Field& a, const Field& b) {
  if (a.size() != b.size()) throw std::invalid_argument("Field -=: size mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

}  // namespace kw
