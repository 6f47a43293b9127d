#pragma once

// Model parameters, the Kirchhoff modulus, and the scalar observables of a
// trajectory: energy (with its split into parts), the instability functional,
// and the dissipation-rate formula.

#include <cmath>
#include <stdexcept>
#include <string>

#include "kirchwave/kernel.hpp"
#include "kirchwave/spatial.hpp"

namespace kw {

/// Coefficients of the wave model
///   u_tt - M(||grad u||^2) lap u + int_0^t g(t-s) lap u(s) ds + u_t = |u|^{p-1} u
/// with M(s) = a + b s^gamma, a,b >= 0, a + b > 0, gamma >= 1, p > 1.
struct ModelParams {
  double a = 1.0;
  double b = 0.0;
  double gamma = 1.0;
  double p = 3.0;

  void validate() const {
    if (!(a >= 0.0)) throw std::invalid_argument("ModelParams: a must be nonnegative");
    if (!(b >= 0.0)) throw std::invalid_argument("ModelParams: b must be nonnegative");
    if (!(a + b > 0.0)) throw std::invalid_argument("ModelParams: a + b must be positive");
    if (!(gamma >= 1.0)) throw std::invalid_argument("ModelParams: gamma must be >= 1");
    if (!(p > 1.0)) throw std::invalid_argument("ModelParams: p must exceed 1");
  }
};

/// M(s) = a + b s^gamma on s >= 0.
inline double kirchhoff_modulus(const ModelParams& mp, double s) {
  if (!(s >= 0.0)) throw std::domain_error("kirchhoff_modulus: negative argument");
  return mp.a + mp.b * std::pow(s, mp.gamma);
}

/// Mbar(s) = int_0^s M(z) dz = a s + b s^{gamma+1} / (gamma+1).
inline double kirchhoff_modulus_bar(const ModelParams& mp, double s) {
  if (!(s >= 0.0)) throw std::domain_error("kirchhoff_modulus_bar: negative argument");
  return mp.a * s + mp.b * std::pow(s, mp.gamma + 1.0) / (mp.gamma + 1.0);
}

/// Additive decomposition of the energy at one time instant.
///   total = 1/2 ||u_t||^2 + 1/2 Mbar(||grad u||^2)
///           - 1/2 (int_0^t g) ||grad u||^2 + 1/2 (g o grad u)(t)
///           - ||u||_{p+1}^{p+1} / (p+1)
struct EnergyParts {
  double kinetic = 0.0;
  double kirchhoff = 0.0;
  double memory_mass = 0.0;  // already carries its minus sign
  double memory_circ = 0.0;
  double source = 0.0;       // already carries its minus sign
  double total = 0.0;
};

/// Energy from precomputed memory ingredients: `mass_to_t` = int_0^t g and
/// `g_circ` = (g o grad u)(t). Pass zeros for a memoryless model.
inline EnergyParts energy_parts(const Grid1D& g, const Field& u, const Field& ut,
                                const ModelParams& mp, double mass_to_t, double g_circ) {
  mp.validate();
  const double grad_sq = grad_norm_sq(g, u);
  EnergyParts e;
  e.kinetic = 0.5 * norm_l2_sq(g, ut);
  e.kirchhoff = 0.5 * kirchhoff_modulus_bar(mp, grad_sq);
  e.memory_mass = -0.5 * mass_to_t * grad_sq;
  e.memory_circ = 0.5 * g_circ;
  e.source = -norm_lp1(g, u, mp.p) / (mp.p + 1.0);
  e.total = e.kinetic + e.kirchhoff + e.memory_mass + e.memory_circ + e.source;
  return e;
}

inline double energy(const Grid1D& g, const Field& u, const Field& ut, const ModelParams& mp,
                     double mass_to_t = 0.0, double g_circ = 0.0) {
  return energy_parts(g, u, ut, mp, mass_to_t, g_circ).total;
}

/// Instability functional I(u) = a ||grad u||^2 + b ||grad u||^{2(gamma+1)}
///                               - ||u||_{p+1}^{p+1}.
/// Negative values mark source-dominated states.
inline double instability_functional(const Grid1D& g, const Field& u, const ModelParams& mp) {
  mp.validate();
  const double s = grad_norm_sq(g, u);
  return mp.a * s + mp.b * std::pow(s, mp.gamma + 1.0) - norm_lp1(g, u, mp.p);
}

/// Right-hand side of the dissipation identity,
///   dE/dt = -||u_t||^2 - 1/2 g(t) ||grad u||^2 + 1/2 (g' o grad u)(t),
/// which is nonpositive for admissible kernels.
inline double dissipation_rate(double ut_l2_sq, double g_at_t, double grad_sq,
                               double gprime_circ) {
  return -ut_l2_sq - 0.5 * g_at_t * grad_sq + 0.5 * gprime_circ;
}

}  // namespace kw
