#pragma once

// Time integration of
//   u_tt - M(||grad u||^2) lap u + int_0^t g(t-s) lap u(s) ds + u_t = |u|^{p-1} u + f
// on a Grid1D with an explicit damped two-step scheme.
//
// Scheme (uniform steps; the code uses the nonuniform generalization):
//   (u+ - 2u + u-)/dt^2 + (u+ - u-)/(2 dt) = M(.) lap u - Conv(t) + |u|^{p-1} u + f,
// started by a second-order Taylor step. The memory convolution is either
// streamed through exponential-sum recurrences or evaluated directly over the
// stored history (required for tabulated kernels); a cross-check mode runs
// both and records their maximum relative deviation.
//
// Each accepted step finalizes one fully-centered snapshot: velocities are
// three-point (nonuniform-aware) centered differences, so observers see rows
// at t_0..t_{N-1} but never at the final state.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kirchwave/functionals.hpp"
#include "kirchwave/kernel.hpp"
#include "kirchwave/spatial.hpp"

namespace kw {

enum class ConvolutionMode { recurrence, direct, crosscheck };

enum class SimStatus { running, completed, blown_up, faulted };

inline const char* to_string(SimStatus s) {
  switch (s) {
    case SimStatus::running: return "running";
    case SimStatus::completed: return "completed";
    case SimStatus::blown_up: return "blown-up";
    case SimStatus::faulted: return "faulted";
  }
  return "unknown";
}

struct StepperConfig {
  double dt_init = 1e-3;
  double dt_min = 1e-10;
  double dt_max = 1e-2;
  double cfl_safety = 0.9;
  double growth_tol = 0.1;        // relative Linf growth per step
  double blowup_threshold = 1e8;  // Linf level that terminates as blow-up
  double t_max = 1.0;
  std::size_t history_budget = 0;  // 0 = keep everything
  ConvolutionMode convolution = ConvolutionMode::recurrence;
  std::function<double(double, double)> forcing;  // f(x, t); empty = none

  void validate() const {
    if (!(dt_min > 0.0)) throw std::invalid_argument("StepperConfig: dt_min must be positive");
    if (!(dt_init >= dt_min)) throw std::invalid_argument("StepperConfig: dt_init below dt_min");
    if (!(dt_max >= dt_min)) throw std::invalid_argument("StepperConfig: dt_max below dt_min");
    if (!(cfl_safety > 0.0) || !(cfl_safety <= 1.0))
      throw std::invalid_argument("StepperConfig: cfl_safety must lie in (0, 1]");
    if (!(growth_tol > 0.0)) throw std::invalid_argument("StepperConfig: growth_tol must be positive");
    if (!(blowup_threshold > 0.0))
      throw std::invalid_argument("StepperConfig: blowup_threshold must be positive");
    if (!(t_max > 0.0)) throw std::invalid_argument("StepperConfig: t_max must be positive");
  }
};

/// One finalized (centered) snapshot handed to observers.
struct StepData {
  long index = 0;
  double t = 0.0;
  double l2_sq = 0.0;
  double grad_sq = 0.0;
  double lp1 = 0.0;   // ||u||_{p+1}^{p+1}
  double linf = 0.0;
  double ip_u_ut = 0.0;
  double ut_l2_sq = 0.0;
  double kernel_at_t = 0.0;
  double mass_to_t = 0.0;
  double g_circ = 0.0;
  double gprime_circ = 0.0;
  double mem_cross = 0.0;  // int_0^t g(t-s) <grad u(s), grad u(t)> ds
  double energy = 0.0;
  double i_func = 0.0;
  const Field* u = nullptr;   // valid only during the callback
  const Field* ut = nullptr;  // valid only during the callback
};

struct BlowupEstimate {
  bool blown = false;
  std::optional<double> t_estimate;
  double fit_residual = 0.0;
  int fit_points = 0;
  std::string reason;
};

/// Fit t -> ||u||_inf^{-(p-1)/2} (which vanishes linearly at the blow-up time
/// for the power singularity) with least squares over the samples whose Linf
/// exceeds 1e-2 * threshold, and return the extrapolated root.
inline BlowupEstimate detect_blowup(const std::vector<std::pair<double, double>>& series,
                                    double p, double threshold) {
  BlowupEstimate est;
  if (!(p > 1.0)) throw std::invalid_argument("detect_blowup: p must exceed 1");
  std::vector<double> ts, ys;
  const double cutoff = 1e-2 * threshold;
  for (const auto& [t, linf] : series) {
    if (linf >= cutoff && linf > 0.0) {
      ts.push_back(t);
      ys.push_back(std::pow(linf, -0.5 * (p - 1.0)));
    }
  }
  est.fit_points = static_cast<int>(ts.size());
  if (ts.size() < 3) {
    est.reason = "not enough samples near the singular regime";
    return est;
  }
  double st = 0, sy = 0, stt = 0, sty = 0;
  const double n = static_cast<double>(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    st += ts[i];
    sy += ys[i];
    stt += ts[i] * ts[i];
    sty += ts[i] * ys[i];
  }
  const double det = n * stt - st * st;
  if (!(std::abs(det) > 0.0)) {
    est.reason = "degenerate time samples";
    return est;
  }
  const double c1 = (n * sty - st * sy) / det;
  const double c0 = (sy * stt - st * sty) / det;
  if (!(c1 < 0.0)) {
    est.reason = "singular envelope not decreasing";
    return est;
  }
  double ss = 0, sa = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double r = ys[i] - (c0 + c1 * ts[i]);
    ss += r * r;
    sa += std::abs(ys[i]);
  }
  est.blown = true;
  est.t_estimate = -c0 / c1;
  est.fit_residual = std::sqrt(ss / n) / std::max(sa / n, 1e-300);
  return est;
}

namespace detail {

inline double memory_circ_direct_deriv(const Kernel& k, const FieldHistory& h,
                                       const std::vector<double>& w_now, double t,
                                       double weight) {
  if (k.is_zero() || h.size() < 2) return 0.0;
  auto diff_sq = [&](const std::vector<double>& pl) {
    double s = 0.0;
    for (std::size_t i = 0; i < pl.size(); ++i) {
      const double d = w_now[i] - pl[i];
      s += d * d;
    }
    return weight * s;
  };
  double acc = 0.0;
  for (std::size_t j = 0; j + 1 < h.size(); ++j) {
    const double t0 = h.time(j), t1 = h.time(j + 1);
    acc += 0.5 * (t1 - t0) * (k.deriv(t - t0) * diff_sq(h.payload(j)) +
                              k.deriv(t - t1) * diff_sq(h.payload(j + 1)));
  }
  return acc;
}

}  // namespace detail

class Simulation {
 public:
  using Observer = std::function<void(const StepData&)>;

  Simulation(Grid1D grid, ModelParams mp, Kernel kernel, StepperConfig cfg)
      : grid_(grid), mp_(mp), kernel_(std::move(kernel)), cfg_(cfg) {
    mp_.validate();
    cfg_.validate();
    if (kernel_.form() == KernelForm::tabulated && cfg_.convolution != ConvolutionMode::direct)
      throw std::invalid_argument("Simulation: tabulated kernels require direct convolution");
    if (!kernel_.is_zero() && kernel_.is_exp_sum()) {
      const std::size_t n = static_cast<std::size_t>(grid_.n_interior);
      if (cfg_.convolution != ConvolutionMode::direct) {
        conv_bank_ = ExpConvolution(kernel_, n);
        gs_bank_ = ExpConvolution(kernel_, 1);
        gv_bank_ = ExpConvolution(kernel_, n + 1);
        gm_bank_ = ExpConvolution(kernel_, 1);
      }
    }
    keep_lap_history_ = !kernel_.is_zero() && cfg_.convolution != ConvolutionMode::recurrence;
    keep_grad_history_ = !kernel_.is_zero() && cfg_.convolution == ConvolutionMode::direct;
  }

  void add_observer(Observer obs) { observers_.push_back(std::move(obs)); }

  void set_initial(Field u0, Field u1) {
    require_size(grid_, u0, "set_initial");
    require_size(grid_, u1, "set_initial");
    if (!all_finite(u0) || !all_finite(u1))
      throw std::invalid_argument("set_initial: data must be finite");
    u_cur_ = std::move(u0);
    u1_ = std::move(u1);
    u_prev_ = Field::zeros(grid_);  // placeholder until the Taylor step
    t_cur_ = 0.0;
    t_prev_ = 0.0;
    steps_ = 0;
    status_ = SimStatus::running;
    dt_growth_ = std::min(cfg_.dt_init, cfg_.dt_max);
    quiet_streak_ = 0;
    lap_cur_ = laplacian(grid_, u_cur_);
    grad_cur_ = edge_gradient(grid_, u_cur_);
    if (keep_lap_history_) lap_hist_.append(0.0, lap_cur_.v);
    if (keep_grad_history_) grad_hist_.append(0.0, grad_cur_.v);
    pending_ = make_ingredients(0.0, u_cur_, lap_cur_, grad_cur_);
    record_tail(0.0, pending_.linf);
    initialized_ = true;
    row0_emitted_ = false;
  }

  SimStatus status() const { return status_; }
  const std::string& fault_message() const { return fault_message_; }
  double t() const { return t_cur_; }
  long steps() const { return steps_; }
  double last_dt() const { return t_cur_ - t_prev_; }
  const Field& state() const { return u_cur_; }
  const Grid1D& grid() const { return grid_; }
  const ModelParams& model() const { return mp_; }
  const Kernel& kernel() const { return kernel_; }
  double crosscheck_max_rel() const { return crosscheck_max_rel_; }
  const std::vector<std::pair<double, double>>& linf_tail() const { return tail_; }

  /// Tail fit plus the terminal verdict: `blown` reflects how the run ended,
  /// `t_estimate` is present only when the envelope fit succeeded.
  BlowupEstimate blowup_estimate() const {
    BlowupEstimate est = detect_blowup(tail_, mp_.p, cfg_.blowup_threshold);
    est.blown = (status_ == SimStatus::blown_up);
    if (est.blown && !est.t_estimate && est.reason.empty())
      est.reason = "terminated as blow-up without a usable tail fit";
    return est;
  }

  /// Advance one accepted step. Returns the (possibly terminal) status.
  SimStatus step_once() {
    if (!initialized_) throw std::logic_error("Simulation: set_initial first");
    if (status_ != SimStatus::running) return status_;
    if (steps_ > max_steps_) {
      status_ = SimStatus::faulted;
      fault_message_ = "step budget exhausted";
      return status_;
    }
    if (!row0_emitted_) {
      emit_snapshot(0, pending_, u_cur_, u1_);
      row0_emitted_ = true;
    }

    // -- step size control -------------------------------------------------
    const double cfl = cfg_.cfl_safety * grid_.h /
                       std::sqrt(std::max(1.0, kirchhoff_modulus(mp_, pending_.grad_sq)));
    double dt = std::min({cfg_.dt_max, cfl, dt_growth_});
    if (dt < cfg_.dt_min) {
      status_ = SimStatus::blown_up;  // dt collapse counts as (numerical) blow-up
      fault_message_ = "time step collapsed below dt_min";
      return status_;
    }
    bool lands = false;
    if (t_cur_ + dt >= cfg_.t_max - 1e-12 * cfg_.t_max) {
      dt = cfg_.t_max - t_cur_;
      lands = true;
      if (!(dt > 0.0)) {  // already at t_max (can happen for t_max below dt_min)
        status_ = SimStatus::completed;
        return status_;
      }
    }
    const double t_next = lands ? cfg_.t_max : t_cur_ + dt;

    // -- assemble the acceleration right-hand side at t_cur ----------------
    const int n = grid_.n_interior;
    Field rhs(static_cast<std::size_t>(n));
    const double big_m = kirchhoff_modulus(mp_, pending_.grad_sq);
    for (int i = 0; i < n; ++i) {
      const double ui = u_cur_[i];
      rhs[i] = big_m * lap_cur_[i] - pending_.conv[i] +
               std::pow(std::abs(ui), mp_.p - 1.0) * ui;
    }
    if (cfg_.forcing)
      for (int i = 0; i < n; ++i) rhs[i] += cfg_.forcing(grid_.x(i), t_cur_);

    // -- update ------------------------------------------------------------
    Field u_next(static_cast<std::size_t>(n));
    if (steps_ == 0) {
      // Taylor start; the acceleration includes the -u_t damping term.
      for (int i = 0; i < n; ++i)
        u_next[i] = u_cur_[i] + dt * u1_[i] + 0.5 * dt * dt * (rhs[i] - u1_[i]);
    } else {
      const double dt0 = t_cur_ - t_prev_;
      const double dt1 = dt;
      const double big_a = 2.0 / (dt0 + dt1);
      const double cp = dt0 / (dt1 * (dt0 + dt1));
      const double c0 = (dt1 - dt0) / (dt0 * dt1);
      const double cm = -dt1 / (dt0 * (dt0 + dt1));
      const double denom = big_a / dt1 + cp;
      const double coef_cur = big_a * (1.0 / dt1 + 1.0 / dt0) - c0;
      const double coef_prev = big_a / dt0 + cm;
      for (int i = 0; i < n; ++i)
        u_next[i] = (rhs[i] + coef_cur * u_cur_[i] - coef_prev * u_prev_[i]) / denom;
    }

    if (!all_finite(u_next)) {
      status_ = SimStatus::faulted;
      fault_message_ = "non-finite state at t = " + std::to_string(t_next);
      return status_;
    }

    // -- acceptance: advance memory structures to t_next -------------------
    Field lap_next = laplacian(grid_, u_next);
    EdgeField grad_next = edge_gradient(grid_, u_next);
    if (conv_bank_.modes() > 0) {
      conv_bank_.step(dt, lap_cur_.v, lap_next.v);
      gs_bank_.step(dt, std::vector<double>{pending_.grad_sq},
                    std::vector<double>{edge_norm_sq(grid_, grad_next)});
      gv_bank_.step(dt, grad_cur_.v, grad_next.v);
      gm_bank_.step(dt, ones1_, ones1_);
    }
    if (keep_lap_history_) {
      lap_hist_.append(t_next, lap_next.v);
      if (cfg_.history_budget > 0) lap_hist_.thin_to(cfg_.history_budget);
    }
    if (keep_grad_history_) {
      grad_hist_.append(t_next, grad_next.v);
      if (cfg_.history_budget > 0) grad_hist_.thin_to(cfg_.history_budget);
    }
    Ingredients next_ing = make_ingredients(t_next, u_next, lap_next, grad_next);

    // -- finalize the centered snapshot at t_cur ---------------------------
    if (steps_ >= 1) {
      const double dt0 = t_cur_ - t_prev_;
      const double dt1 = dt;
      const double cp = dt0 / (dt1 * (dt0 + dt1));
      const double c0 = (dt1 - dt0) / (dt0 * dt1);
      const double cm = -dt1 / (dt0 * (dt0 + dt1));
      ut_scratch_.v.resize(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i)
        ut_scratch_[i] = cp * u_next[i] + c0 * u_cur_[i] + cm * u_prev_[i];
      emit_snapshot(steps_, pending_, u_cur_, ut_scratch_);
    }

    // -- growth control bookkeeping ---------------------------------------
    const double growth =
        (next_ing.linf - pending_.linf) / std::max(pending_.linf, 1e-2);
    if (growth > cfg_.growth_tol) {
      dt_growth_ = std::max(0.5 * dt_growth_, 0.25 * cfg_.dt_min);
      quiet_streak_ = 0;
    } else if (++quiet_streak_ >= 10) {
      dt_growth_ = std::min(2.0 * dt_growth_, cfg_.dt_max);
      quiet_streak_ = 0;
    }

    // -- shuffle -----------------------------------------------------------
    u_prev_ = std::move(u_cur_);
    u_cur_ = std::move(u_next);
    lap_cur_ = std::move(lap_next);
    grad_cur_ = std::move(grad_next);
    t_prev_ = t_cur_;
    t_cur_ = t_next;
    pending_ = std::move(next_ing);
    ++steps_;
    record_tail(t_cur_, pending_.linf);

    if (pending_.linf > cfg_.blowup_threshold) {
      status_ = SimStatus::blown_up;
    } else if (lands) {
      status_ = SimStatus::completed;
    }
    return status_;
  }

  /// Step until the run terminates; returns the terminal status.
  SimStatus run() {
    while (status_ == SimStatus::running) step_once();
    return status_;
  }

 private:
  struct Ingredients {
    double t = 0.0;
    double l2_sq = 0.0, grad_sq = 0.0, lp1 = 0.0, linf = 0.0;
    double kernel_at_t = 0.0, mass_to_t = 0.0;
    double g_circ = 0.0, gprime_circ = 0.0, cross = 0.0;
    std::vector<double> conv;  // int_0^t g(t-s) lap u(s) ds
  };

  Ingredients make_ingredients(double t, const Field& u, const Field& lap,
                               const EdgeField& grad) {
    (void)lap;
    Ingredients ing;
    ing.t = t;
    ing.l2_sq = norm_l2_sq(grid_, u);
    ing.grad_sq = edge_norm_sq(grid_, grad);
    ing.lp1 = norm_lp1(grid_, u, mp_.p);
    ing.linf = norm_linf(u);
    ing.conv.assign(static_cast<std::size_t>(grid_.n_interior), 0.0);
    if (kernel_.is_zero()) return ing;
    ing.kernel_at_t = kernel_.eval(t);
    ing.mass_to_t = kernel_.mass_to(t);
    const double h = grid_.h;
    if (conv_bank_.modes() > 0) {
      ing.conv = conv_bank_.total();
      double g_circ = 0.0, gp_circ = 0.0, cross = 0.0;
      for (std::size_t m = 0; m < gv_bank_.modes(); ++m) {
        double ip = 0.0;
        const auto& gv = gv_bank_.mode(m);
        for (std::size_t j = 0; j < gv.size(); ++j) ip += grad[j] * gv[j];
        ip *= h;
        const double qm = gs_bank_.mode(m)[0] - 2.0 * ip + gm_bank_.mode(m)[0] * ing.grad_sq;
        g_circ += qm;
        gp_circ += -gv_bank_.mode_rate(m) * qm;
        cross += ip;
      }
      ing.g_circ = std::max(0.0, g_circ);
      ing.gprime_circ = gp_circ;
      ing.cross = cross;
      if (cfg_.convolution == ConvolutionMode::crosscheck) {
        const auto direct = convolve_direct(kernel_, lap_hist_, t);
        double dmax = 0.0, smax = 0.0;
        for (std::size_t i = 0; i < direct.size(); ++i) {
          dmax = std::max(dmax, std::abs(direct[i] - ing.conv[i]));
          smax = std::max(smax, std::abs(direct[i]));
        }
        crosscheck_max_rel_ = std::max(crosscheck_max_rel_, dmax / (1.0 + smax));
      }
    } else {
      ing.conv = convolve_direct(kernel_, lap_hist_, t);
      ing.g_circ = std::max(0.0, memory_circ_direct(kernel_, grad_hist_, grad.v, t, h));
      ing.gprime_circ = detail::memory_circ_direct_deriv(kernel_, grad_hist_, grad.v, t, h);
      const auto conv_grad = convolve_direct(kernel_, grad_hist_, t);
      double ip = 0.0;
      for (std::size_t j = 0; j < conv_grad.size(); ++j) ip += grad[j] * conv_grad[j];
      ing.cross = h * ip;
    }
    return ing;
  }

  void emit_snapshot(long index, const Ingredients& ing, const Field& u, const Field& ut) {
    if (observers_.empty()) return;
    StepData d;
    d.index = index;
    d.t = ing.t;
    d.l2_sq = ing.l2_sq;
    d.grad_sq = ing.grad_sq;
    d.lp1 = ing.lp1;
    d.linf = ing.linf;
    d.ip_u_ut = inner_l2(grid_, u, ut);
    d.ut_l2_sq = norm_l2_sq(grid_, ut);
    d.kernel_at_t = ing.kernel_at_t;
    d.mass_to_t = ing.mass_to_t;
    d.g_circ = ing.g_circ;
    d.gprime_circ = ing.gprime_circ;
    d.mem_cross = ing.cross;
    d.energy = 0.5 * d.ut_l2_sq + 0.5 * kirchhoff_modulus_bar(mp_, ing.grad_sq) -
               0.5 * ing.mass_to_t * ing.grad_sq + 0.5 * ing.g_circ -
               ing.lp1 / (mp_.p + 1.0);
    d.i_func = mp_.a * ing.grad_sq + mp_.b * std::pow(ing.grad_sq, mp_.gamma + 1.0) - ing.lp1;
    d.u = &u;
    d.ut = &ut;
    for (const auto& obs : observers_) obs(d);
  }

  void record_tail(double t, double linf) {
    if (linf >= 1e-2 * cfg_.blowup_threshold) {
      tail_.emplace_back(t, linf);
      if (tail_.size() > 4096) tail_.erase(tail_.begin(), tail_.begin() + 2048);
    }
  }

  Grid1D grid_;
  ModelParams mp_;
  Kernel kernel_;
  StepperConfig cfg_;

  bool initialized_ = false;
  bool row0_emitted_ = false;
  SimStatus status_ = SimStatus::running;
  std::string fault_message_;

  Field u_prev_, u_cur_, u1_;
  Field lap_cur_;
  EdgeField grad_cur_;
  Field ut_scratch_;
  double t_prev_ = 0.0, t_cur_ = 0.0;
  long steps_ = 0;
  static constexpr long max_steps_ = 200'000'000;

  double dt_growth_ = 1e-3;
  int quiet_streak_ = 0;

  Ingredients pending_;

  ExpConvolution conv_bank_, gs_bank_, gv_bank_, gm_bank_;
  bool keep_lap_history_ = false, keep_grad_history_ = false;
  FieldHistory lap_hist_, grad_hist_;
  double crosscheck_max_rel_ = 0.0;
  const std::vector<double> ones1_{1.0};

  std::vector<std::pair<double, double>> tail_;
  std::vector<Observer> observers_;
};

}  // namespace kw
