#pragma once

// Relaxation (memory) kernels and their discrete convolution machinery.
//
// Supported forms:
//   * zero        -- no memory at all,
//   * exp_sum     -- g(t) = sum_i g0_i * exp(-kappa_i t), g0_i > 0, kappa_i > 0,
//   * tabulated   -- sampled (t, g) pairs, linear interpolation, fitted
//                    exponential tail beyond the last sample.
//
// Admissibility checks:
//   * check_mass        -- total mass below 1 so that l = 1 - integral(g) > 0;
//   * check_positive_type -- sampled test that exp(t/2) g(t) acts as a kernel of
//     positive type, with a certified fast path for exponential sums whose
//     rates are all >= 1/2 (then exp(t/2) g(t) is completely monotone, which
//     is sufficient).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace kw {

enum class KernelForm { zero, exp_sum, tabulated };

struct ExpTerm {
  double weight = 0.0;  // g0_i
  double rate = 0.0;    // kappa_i
};

class Kernel {
 public:
  Kernel() = default;

  static Kernel zero() { return Kernel(); }

  static Kernel exp_sum(std::vector<ExpTerm> terms) {
    Kernel k;
    k.form_ = KernelForm::exp_sum;
    for (const auto& t : terms) {
      if (!(t.weight > 0.0)) throw std::invalid_argument("Kernel: term weights must be positive");
      if (!(t.rate > 0.0)) throw std::invalid_argument("Kernel: term rates must be positive");
    }
    if (terms.empty()) throw std::invalid_argument("Kernel: exp_sum needs at least one term");
    k.terms_ = std::move(terms);
    return k;
  }

  /// Tabulated kernel. Times must start at 0 and strictly increase; values must
  /// be nonnegative and non-increasing. Beyond the last sample the kernel
  /// continues as g_last * exp(-tail_rate (t - t_last)) with tail_rate fitted
  /// from the last two samples (zero tail if g_last == 0).
  static Kernel tabulated(std::vector<double> t, std::vector<double> g) {
    Kernel k;
    k.form_ = KernelForm::tabulated;
    if (t.size() != g.size() || t.size() < 2)
      throw std::invalid_argument("Kernel: table needs >= 2 matching samples");
    if (t.front() != 0.0) throw std::invalid_argument("Kernel: table must start at t = 0");
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (i > 0 && !(t[i] > t[i - 1]))
        throw std::invalid_argument("Kernel: table times must strictly increase");
      if (!(g[i] >= 0.0)) throw std::invalid_argument("Kernel: table values must be nonnegative");
      if (i > 0 && g[i] > g[i - 1])
        throw std::invalid_argument("Kernel: table values must be non-increasing");
    }
    k.tab_t_ = std::move(t);
    k.tab_g_ = std::move(g);
    const std::size_t n = k.tab_t_.size();
    const double gl = k.tab_g_[n - 1], gp = k.tab_g_[n - 2];
    if (gl > 0.0 && gp > gl)
      k.tail_rate_ = std::log(gp / gl) / (k.tab_t_[n - 1] - k.tab_t_[n - 2]);
    else
      k.tail_rate_ = 0.0;  // flat (or zero) tail
    return k;
  }

  KernelForm form() const { return form_; }
  bool is_zero() const { return form_ == KernelForm::zero; }
  bool is_exp_sum() const { return form_ == KernelForm::exp_sum; }
  const std::vector<ExpTerm>& terms() const { return terms_; }

  /// g(t) for t >= 0.
  double eval(double t) const {
    if (!(t >= 0.0)) throw std::domain_error("Kernel::eval: negative time");
    switch (form_) {
      case KernelForm::zero:
        return 0.0;
      case KernelForm::exp_sum: {
        double s = 0.0;
        for (const auto& tm : terms_) s += tm.weight * std::exp(-tm.rate * t);
        return s;
      }
      case KernelForm::tabulated:
        return eval_table(t);
    }
    return 0.0;
  }

  /// dg/dt; finite in the interior of table intervals (interval slope there).
  double deriv(double t) const {
    if (!(t >= 0.0)) throw std::domain_error("Kernel::deriv: negative time");
    switch (form_) {
      case KernelForm::zero:
        return 0.0;
      case KernelForm::exp_sum: {
        double s = 0.0;
        for (const auto& tm : terms_) s += -tm.rate * tm.weight * std::exp(-tm.rate * t);
        return s;
      }
      case KernelForm::tabulated: {
        if (t >= tab_t_.back()) return -tail_rate_ * eval_table(t);
        const std::size_t j = table_interval(t);
        return (tab_g_[j + 1] - tab_g_[j]) / (tab_t_[j + 1] - tab_t_[j]);
      }
    }
    return 0.0;
  }

  /// Integral of g over [0, infinity). May be +inf for flat positive tails.
  double mass() const {
    switch (form_) {
      case KernelForm::zero:
        return 0.0;
      case KernelForm::exp_sum: {
        double s = 0.0;
        for (const auto& tm : terms_) s += tm.weight / tm.rate;
        return s;
      }
      case KernelForm::tabulated: {
        double s = table_mass_to(tab_t_.back());
        const double gl = tab_g_.back();
        if (gl > 0.0) {
          if (tail_rate_ > 0.0)
            s += gl / tail_rate_;
          else
            return std::numeric_limits<double>::infinity();
        }
        return s;
      }
    }
    return 0.0;
  }

  /// Integral of g over [0, t].
  double mass_to(double t) const {
    if (!(t >= 0.0)) throw std::domain_error("Kernel::mass_to: negative time");
    switch (form_) {
      case KernelForm::zero:
        return 0.0;
      case KernelForm::exp_sum: {
        double s = 0.0;
        for (const auto& tm : terms_) s += tm.weight * (1.0 - std::exp(-tm.rate * t)) / tm.rate;
        return s;
      }
      case KernelForm::tabulated: {
        if (t <= tab_t_.back()) return table_mass_to(t);
        double s = table_mass_to(tab_t_.back());
        const double gl = tab_g_.back();
        const double dt = t - tab_t_.back();
        if (tail_rate_ > 0.0)
          s += gl * (1.0 - std::exp(-tail_rate_ * dt)) / tail_rate_;
        else
          s += gl * dt;
        return s;
      }
    }
    return 0.0;
  }

 private:
  double eval_table(double t) const {
    if (t >= tab_t_.back()) {
      const double gl = tab_g_.back();
      if (gl == 0.0) return 0.0;
      return gl * std::exp(-tail_rate_ * (t - tab_t_.back()));
    }
    const std::size_t j = table_interval(t);
    const double w = (t - tab_t_[j]) / (tab_t_[j + 1] - tab_t_[j]);
    return (1.0 - w) * tab_g_[j] + w * tab_g_[j + 1];
  }

  std::size_t table_interval(double t) const {
    auto it = std::upper_bound(tab_t_.begin(), tab_t_.end(), t);
    std::size_t j = static_cast<std::size_t>(it - tab_t_.begin());
    if (j == 0) return 0;
    if (j >= tab_t_.size()) return tab_t_.size() - 2;
    return j - 1;
  }

  // Trapezoid over the sampled part, with partial last interval.
  double table_mass_to(double t) const {
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < tab_t_.size(); ++j) {
      if (t >= tab_t_[j + 1]) {
        s += 0.5 * (tab_g_[j] + tab_g_[j + 1]) * (tab_t_[j + 1] - tab_t_[j]);
      } else if (t > tab_t_[j]) {
        const double gm = eval_table(t);
        s += 0.5 * (tab_g_[j] + gm) * (t - tab_t_[j]);
        break;
      } else {
        break;
      }
    }
    return s;
  }

  KernelForm form_ = KernelForm::zero;
  std::vector<ExpTerm> terms_;
  std::vector<double> tab_t_, tab_g_;
  double tail_rate_ = 0.0;
};

// ---------------------------------------------------------------------------
// Admissibility checks
// ---------------------------------------------------------------------------

struct KernelMassReport {
  double total_mass = 0.0;
  double remaining = 1.0;  // l = 1 - total_mass
  bool ok = false;
  std::string reason;
};

/// Requires integral(g) < 1 so that l = 1 - integral(g) stays positive.
inline KernelMassReport check_mass(const Kernel& k) {
  KernelMassReport r;
  r.total_mass = k.mass();
  r.remaining = 1.0 - r.total_mass;
  if (!std::isfinite(r.total_mass)) {
    r.ok = false;
    r.reason = "kernel mass is not finite";
  } else if (!(r.total_mass < 1.0)) {
    r.ok = false;
    r.reason = "kernel mass must be below 1";
  } else {
    r.ok = true;
  }
  return r;
}

enum class PositiveTypeVerdict { passed_samples, failed, certified_sufficient };

struct PositiveTypeReport {
  PositiveTypeVerdict verdict = PositiveTypeVerdict::passed_samples;
  int tested_functions = 0;
  double min_quadratic_form = 0.0;
  double tolerance = 0.0;
  std::string witness;  // label of the minimizing test function
};

/// Q(v) = int_0^T v(s) int_0^s K(s-z) v(z) dz ds with K(tau) = exp(tau/2) g(tau),
/// both integrals by the composite trapezoid rule on n+1 uniform points.
inline double positive_type_quadratic_form(const Kernel& k,
                                           const std::function<double(double)>& v, double horizon,
                                           int n) {
  if (!(horizon > 0.0)) throw std::invalid_argument("positive_type_quadratic_form: bad horizon");
  if (n < 2) throw std::invalid_argument("positive_type_quadratic_form: need n >= 2");
  const double ds = horizon / n;
  std::vector<double> vv(static_cast<std::size_t>(n) + 1), kk(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) {
    const double s = i * ds;
    vv[i] = v(s);
    kk[i] = std::exp(0.5 * s) * k.eval(s);
  }
  double outer = 0.0;
  for (int i = 0; i <= n; ++i) {
    double inner = 0.0;
    for (int j = 0; j <= i; ++j) {
      const double wj = (j == 0 || j == i) ? 0.5 : 1.0;
      inner += wj * kk[i - j] * vv[j];
    }
    inner *= ds;
    const double wi = (i == 0 || i == n) ? 0.5 : 1.0;
    outer += wi * vv[i] * inner;
  }
  return outer * ds;
}

namespace detail {

struct TestFunction {
  std::string label;
  std::function<double(double)> f;
};

/// Battery on [0, horizon]: sine and cosine modes, low-order shifted Legendre
/// polynomials, and a few seeded random piecewise-linear profiles.
inline std::vector<TestFunction> positive_type_battery(double horizon, int modes,
                                                       std::uint64_t seed) {
  constexpr double pi = 3.14159265358979323846;
  std::vector<TestFunction> out;
  for (int m = 1; m <= modes; ++m) {
    out.push_back({"sin_" + std::to_string(m),
                   [=](double s) { return std::sin(m * pi * s / horizon); }});
    out.push_back({"cos_" + std::to_string(m),
                   [=](double s) { return std::cos(m * pi * s / horizon); }});
  }
  auto legendre = [](int deg, double x) {
    switch (deg) {
      case 0: return 1.0;
      case 1: return x;
      case 2: return 0.5 * (3.0 * x * x - 1.0);
      case 3: return 0.5 * (5.0 * x * x * x - 3.0 * x);
      default: return 0.125 * (35.0 * x * x * x * x - 30.0 * x * x + 3.0);
    }
  };
  for (int deg = 0; deg <= 4; ++deg) {
    out.push_back({"legendre_" + std::to_string(deg), [=](double s) {
                     return legendre(deg, 2.0 * s / horizon - 1.0);
                   }});
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const int knots = 9;
  for (int r = 0; r < 5; ++r) {
    std::vector<double> y(static_cast<std::size_t>(knots));
    for (double& yi : y) yi = unif(rng);
    out.push_back({"random_" + std::to_string(r), [=](double s) {
                     const double u = std::clamp(s / horizon, 0.0, 1.0) * (knots - 1);
                     const int j = std::min(static_cast<int>(u), knots - 2);
                     const double w = u - j;
                     return (1.0 - w) * y[j] + w * y[j + 1];
                   }});
  }
  return out;
}

}  // namespace detail

/// Sampled positive-type check for exp(t/2) g(t).
///
/// Exponential sums whose rates are all >= 1/2 make exp(t/2) g(t) completely
/// monotone, which is sufficient; that fast path reports certified_sufficient
/// and skips quadrature unless force_quadrature is set. Otherwise a battery of
/// test functions is evaluated; any quadratic form below -tolerance falsifies
/// the property (verdict failed), and a clean battery only reports
/// passed_samples -- it is not a proof.
inline PositiveTypeReport check_positive_type(const Kernel& k, double horizon = 5.0,
                                              int modes = 8, bool force_quadrature = false,
                                              std::uint64_t seed = 20240901u) {
  PositiveTypeReport rep;
  if (k.is_zero()) {
    rep.verdict = PositiveTypeVerdict::certified_sufficient;
    rep.witness = "zero kernel";
    return rep;
  }
  if (!force_quadrature && k.is_exp_sum()) {
    bool all_fast = true;
    for (const auto& t : k.terms())
      if (t.rate < 0.5) all_fast = false;
    if (all_fast) {
      rep.verdict = PositiveTypeVerdict::certified_sufficient;
      rep.witness = "all rates >= 1/2";
      return rep;
    }
  }
  const int n = std::max(256, 64 * modes);
  const auto battery = detail::positive_type_battery(horizon, modes, seed);
  double min_q = std::numeric_limits<double>::infinity();
  double max_abs = 0.0;
  std::string min_label;
  for (const auto& tf : battery) {
    const double q = positive_type_quadratic_form(k, tf.f, horizon, n);
    if (q < min_q) {
      min_q = q;
      min_label = tf.label;
    }
    max_abs = std::max(max_abs, std::abs(q));
  }
  rep.tested_functions = static_cast<int>(battery.size());
  rep.min_quadratic_form = min_q;
  rep.tolerance = 1e-10 * std::max(1.0, max_abs);
  rep.witness = min_label;
  rep.verdict = (min_q < -rep.tolerance) ? PositiveTypeVerdict::failed
                                         : PositiveTypeVerdict::passed_samples;
  return rep;
}

// ---------------------------------------------------------------------------
// Histories and convolutions
// ---------------------------------------------------------------------------

/// Time-stamped payload history (payloads are plain vectors so the same store
/// serves interior fields, edge fields and scalars).
class FieldHistory {
 public:
  void append(double t, std::vector<double> payload) {
    if (!times_.empty()) {
      if (!(t > times_.back()))
        throw std::invalid_argument("FieldHistory: timestamps must strictly increase");
      if (payload.size() != data_.back().size())
        throw std::invalid_argument("FieldHistory: payload size changed");
    }
    times_.push_back(t);
    data_.push_back(std::move(payload));
  }

  std::size_t size() const { return times_.size(); }
  double time(std::size_t i) const { return times_[i]; }
  const std::vector<double>& payload(std::size_t i) const { return data_[i]; }
  const std::vector<double>& times() const { return times_; }

  /// Keep the newest entries intact but drop every second entry from the
  /// older half until at most `budget` entries remain. The (nonuniform)
  /// trapezoid convolution below stays valid, just coarser in the far past.
  void thin_to(std::size_t budget) {
    if (budget < 4 || size() <= budget) return;
    while (size() > budget) {
      const std::size_t half = size() / 2;
      std::vector<double> nt;
      std::vector<std::vector<double>> nd;
      nt.reserve(size());
      nd.reserve(size());
      for (std::size_t i = 0; i < half; ++i) {
        if (i % 2 == 0) {
          nt.push_back(times_[i]);
          nd.push_back(std::move(data_[i]));
        }
      }
      // always retain the element right before the recent half for a sane
      // first trapezoid panel
      if ((half - 1) % 2 != 0) {
        nt.push_back(times_[half - 1]);
        nd.push_back(std::move(data_[half - 1]));
      }
      for (std::size_t i = half; i < size(); ++i) {
        nt.push_back(times_[i]);
        nd.push_back(std::move(data_[i]));
      }
      times_ = std::move(nt);
      data_ = std::move(nd);
    }
  }

 private:
  std::vector<double> times_;
  std::vector<std::vector<double>> data_;
};

/// Direct trapezoid evaluation of int_0^t g(t-s) w(s) ds over the stored
/// (possibly nonuniform) history. The history must reach exactly t.
inline std::vector<double> convolve_direct(const Kernel& k, const FieldHistory& h, double t) {
  if (h.size() == 0) return {};  // nothing accumulated yet: zero contribution
  const std::size_t m = h.size();
  std::vector<double> acc(h.payload(0).size(), 0.0);
  if (k.is_zero() || m == 1) return acc;
  for (std::size_t j = 0; j + 1 < m; ++j) {
    const double t0 = h.time(j), t1 = h.time(j + 1);
    const double w0 = k.eval(t - t0), w1 = k.eval(t - t1);
    const double half_dt = 0.5 * (t1 - t0);
    const auto& p0 = h.payload(j);
    const auto& p1 = h.payload(j + 1);
    for (std::size_t i = 0; i < acc.size(); ++i)
      acc[i] += half_dt * (w0 * p0[i] + w1 * p1[i]);
  }
  return acc;
}

/// (g o w)(t) = int_0^t g(t-s) || w(t) - w(s) ||^2 ds by the same trapezoid
/// rule; `weight` is the quadrature weight of the discrete norm (grid h).
inline double memory_circ_direct(const Kernel& k, const FieldHistory& h,
                                 const std::vector<double>& w_now, double t, double weight) {
  if (k.is_zero() || h.size() < 2) return 0.0;
  const std::size_t m = h.size();
  auto diff_sq = [&](const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double d = w_now[i] - p[i];
      s += d * d;
    }
    return weight * s;
  };
  double acc = 0.0;
  for (std::size_t j = 0; j + 1 < m; ++j) {
    const double t0 = h.time(j), t1 = h.time(j + 1);
    acc += 0.5 * (t1 - t0) * (k.eval(t - t0) * diff_sq(h.payload(j)) +
                              k.eval(t - t1) * diff_sq(h.payload(j + 1)));
  }
  return acc;
}

/// Streaming evaluation of int_0^t g(t-s) w(s) ds for exponential-sum kernels.
///
/// Per mode i the state F_i(t) = g0_i int_0^t exp(-kappa_i (t-s)) w(s) ds obeys
///   F_i(t + dt) = exp(-kappa_i dt) F_i(t) + g0_i * (dt/2) *
///                 [exp(-kappa_i dt) w(t) + w(t + dt)],
/// i.e. the panel increment is the trapezoid rule applied to the *product*
/// exp(-kappa_i (t+dt-s)) w(s). Summed over panels this reproduces, exactly in
/// real arithmetic, the composite-trapezoid direct convolution above.
class ExpConvolution {
 public:
  ExpConvolution() = default;
  ExpConvolution(const Kernel& k, std::size_t payload_len) {
    if (!k.is_exp_sum() && !k.is_zero())
      throw std::invalid_argument("ExpConvolution: kernel must be an exponential sum");
    terms_ = k.terms();
    state_.assign(terms_.size(), std::vector<double>(payload_len, 0.0));
    len_ = payload_len;
  }

  std::size_t payload_len() const { return len_; }
  std::size_t modes() const { return terms_.size(); }
  const std::vector<double>& mode(std::size_t i) const { return state_[i]; }
  double mode_rate(std::size_t i) const { return terms_[i].rate; }

  void step(double dt, const std::vector<double>& w_old, const std::vector<double>& w_new) {
    if (!(dt > 0.0)) throw std::invalid_argument("ExpConvolution::step: dt must be positive");
    if (w_old.size() != len_ || w_new.size() != len_)
      throw std::invalid_argument("ExpConvolution::step: payload size mismatch");
    for (std::size_t m = 0; m < terms_.size(); ++m) {
      const double decay = std::exp(-terms_[m].rate * dt);
      const double c_old = terms_[m].weight * 0.5 * dt * decay;
      const double c_new = terms_[m].weight * 0.5 * dt;
      auto& f = state_[m];
      for (std::size_t i = 0; i < len_; ++i)
        f[i] = decay * f[i] + c_old * w_old[i] + c_new * w_new[i];
    }
  }

  /// Sum of all modes.
  std::vector<double> total() const {
    std::vector<double> out(len_, 0.0);
    for (const auto& f : state_)
      for (std::size_t i = 0; i < len_; ++i) out[i] += f[i];
    return out;
  }

 private:
  std::vector<ExpTerm> terms_;
  std::vector<std::vector<double>> state_;
  std::size_t len_ = 0;
};

}  // namespace kw
