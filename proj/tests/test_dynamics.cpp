// Unit tests for the time integrator: configuration contracts, manufactured
// accuracy, dissipation, termination classification and blow-up estimation.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "kirchwave/dynamics.hpp"
#include "testutil.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const kw::ModelParams kCubic{1.0, 0.0, 1.0, 3.0};

kw::StepperConfig fixed_dt_config(double dt, double t_max) {
  kw::StepperConfig c;
  c.dt_init = dt;
  c.dt_max = dt;
  c.dt_min = 1e-12;
  c.growth_tol = 1e9;  // disable growth-based adaptivity
  c.cfl_safety = 1.0;
  c.t_max = t_max;
  return c;
}

/// Forcing that makes w(x,t) = e^{-t} sin(pi x) solve the cubic model with
/// unit stiffness and no memory: f = pi^2 w - w^3 (the w_tt + w_t pair cancels).
double manufactured_forcing(double x, double t) {
  const double s = std::sin(tu::kPi * x);
  return tu::kPi * tu::kPi * std::exp(-t) * s - std::exp(-3.0 * t) * s * s * s;
}

double manufactured_exact(double x, double t) { return std::exp(-t) * std::sin(tu::kPi * x); }

struct RowLog {
  std::vector<kw::StepData> rows;
  void attach(kw::Simulation& sim) {
    sim.add_observer([this](const kw::StepData& d) {
      kw::StepData copy = d;
      copy.u = nullptr;  // field pointers are callback-scoped
      copy.ut = nullptr;
      rows.push_back(copy);
    });
  }
};

}  // namespace

TEST_CASE("stepper configuration validation") {
  kw::StepperConfig ok;
  CHECK_NOTHROW(ok.validate());

  auto expect_throw = [](auto mutate) {
    kw::StepperConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  };
  expect_throw([](kw::StepperConfig& c) { c.dt_min = 0.0; });
  expect_throw([](kw::StepperConfig& c) { c.dt_init = 1e-11; });  // below dt_min
  expect_throw([](kw::StepperConfig& c) { c.dt_max = 1e-11; });
  expect_throw([](kw::StepperConfig& c) { c.cfl_safety = 0.0; });
  expect_throw([](kw::StepperConfig& c) { c.cfl_safety = 1.5; });
  expect_throw([](kw::StepperConfig& c) { c.growth_tol = 0.0; });
  expect_throw([](kw::StepperConfig& c) { c.blowup_threshold = 0.0; });
  expect_throw([](kw::StepperConfig& c) { c.t_max = 0.0; });
}

TEST_CASE("initial-data contracts") {
  const kw::Grid1D g(1.0, 16);
  kw::Simulation sim(g, kCubic, kw::Kernel::zero(), fixed_dt_config(1e-3, 0.1));

  CHECK_THROWS_AS(sim.step_once(), std::logic_error);  // set_initial first
  CHECK_THROWS_AS(sim.set_initial(kw::Field(3), kw::Field::zeros(g)), std::invalid_argument);

  kw::Field bad = kw::Field::zeros(g);
  bad[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(sim.set_initial(bad, kw::Field::zeros(g)), std::invalid_argument);

  kw::Simulation sim2(g, kCubic, kw::Kernel::zero(), fixed_dt_config(1e-3, 0.1));
  sim2.set_initial(kw::Field::zeros(g), kw::Field::zeros(g));
  CHECK(sim2.run() == kw::SimStatus::completed);
  CHECK(kw::norm_linf(sim2.state()) == 0.0);
}

TEST_CASE("tabulated kernels require the direct convolution path") {
  const kw::Grid1D g(1.0, 16);
  const kw::Kernel tab = kw::Kernel::tabulated({0.0, 1.0, 2.0}, {0.1, 0.05, 0.0});
  kw::StepperConfig cfg = fixed_dt_config(1e-3, 0.05);
  CHECK_THROWS_AS(kw::Simulation(g, kCubic, tab, cfg), std::invalid_argument);

  cfg.convolution = kw::ConvolutionMode::direct;
  kw::Simulation sim(g, kCubic, tab, cfg);
  sim.set_initial(tu::sine_field(g, 1, 0.1), kw::Field::zeros(g));
  CHECK(sim.run() == kw::SimStatus::completed);
}

TEST_CASE("manufactured solution: accuracy and joint second-order convergence") {
  std::vector<double> errors;
  std::vector<double> hs;
  for (int n : {50, 100, 200}) {
    const kw::Grid1D g(1.0, n);
    const double target = 0.4 * g.h;
    const int steps = static_cast<int>(std::round(0.5 / target));
    kw::StepperConfig cfg = fixed_dt_config(0.5 / steps, 0.5);
    cfg.forcing = manufactured_forcing;
    kw::Simulation sim(g, kCubic, kw::Kernel::zero(), cfg);
    kw::Field u0 = kw::Field::zeros(g), u1 = kw::Field::zeros(g);
    for (int i = 0; i < n; ++i) {
      u0[i] = manufactured_exact(g.x(i), 0.0);
      u1[i] = -manufactured_exact(g.x(i), 0.0);
    }
    sim.set_initial(u0, u1);
    REQUIRE(sim.run() == kw::SimStatus::completed);
    CHECK(sim.t() == 0.5);  // exact landing on t_max
    double err = 0.0;
    for (int i = 0; i < n; ++i)
      err = std::max(err, std::abs(sim.state()[i] - manufactured_exact(g.x(i), 0.5)));
    errors.push_back(err);
    hs.push_back(g.h);
  }
  CHECK(errors[0] < 3e-4);
  const double order12 = std::log(errors[0] / errors[1]) / std::log(hs[0] / hs[1]);
  const double order23 = std::log(errors[1] / errors[2]) / std::log(hs[1] / hs[2]);
  CHECK(order12 > 1.9);
  CHECK(order23 > 1.9);
}

TEST_CASE("snapshot stream: indexing, timing and self-consistent observables") {
  const kw::Grid1D g(1.0, 60);
  kw::StepperConfig cfg = fixed_dt_config(1e-3, 0.2);
  const kw::Kernel k = kw::Kernel::exp_sum({{0.1, 1.0}});
  kw::Simulation sim(g, kCubic, k, cfg);
  RowLog log;
  log.attach(sim);

  const kw::Field u0 = tu::sine_field(g, 1, 0.4);
  const kw::Field u1 = tu::sine_field(g, 2, 0.2);
  sim.set_initial(u0, u1);
  REQUIRE(sim.run() == kw::SimStatus::completed);

  REQUIRE(!log.rows.empty());
  CHECK(log.rows.size() == static_cast<std::size_t>(sim.steps()));

  // First row reports the exact initial data.
  CHECK(log.rows[0].t == 0.0);
  CHECK_THAT(log.rows[0].ip_u_ut, WithinRel(kw::inner_l2(g, u0, u1), 1e-14));
  CHECK_THAT(log.rows[0].ut_l2_sq, WithinRel(kw::norm_l2_sq(g, u1), 1e-14));

  double prev_t = -1.0;
  long expect_index = 0;
  for (const auto& row : log.rows) {
    CHECK(row.index == expect_index++);
    CHECK(row.t > prev_t);
    prev_t = row.t;
    CHECK(row.t < cfg.t_max);  // centered rows never reach the final state
    CHECK(row.g_circ >= 0.0);
    CHECK_THAT(row.kernel_at_t, WithinRel(k.eval(row.t), 1e-13));
    CHECK_THAT(row.mass_to_t, WithinRel(k.mass_to(row.t), 1e-13));
    // Energy column recomputes from the row's own ingredients.
    const double e = 0.5 * row.ut_l2_sq + 0.5 * kw::kirchhoff_modulus_bar(kCubic, row.grad_sq) -
                     0.5 * row.mass_to_t * row.grad_sq + 0.5 * row.g_circ - row.lp1 / 4.0;
    CHECK_THAT(row.energy, WithinAbs(e, 1e-13));
    const double i_func = kCubic.a * row.grad_sq - row.lp1;
    CHECK_THAT(row.i_func, WithinAbs(i_func, 1e-13));
  }
}

TEST_CASE("small-amplitude runs dissipate energy row over row") {
  struct Case {
    kw::ModelParams mp;
    kw::Kernel kernel;
    double amplitude;
  };
  const Case cases[] = {
      {{1.0, 0.0, 1.0, 3.0}, kw::Kernel::zero(), 0.3},
      {{1.0, 0.0, 1.0, 3.0}, kw::Kernel::exp_sum({{0.1, 1.0}}), 0.3},
      {{0.0, 1.0, 1.0, 5.0}, kw::Kernel::zero(), 0.8},
      {{0.0, 1.0, 1.0, 5.0}, kw::Kernel::exp_sum({{0.1, 1.0}}), 0.8},
  };
  for (const auto& c : cases) {
    const kw::Grid1D g(1.0, 100);
    kw::StepperConfig cfg;
    cfg.t_max = 1.5;
    kw::Simulation sim(g, c.mp, c.kernel, cfg);
    RowLog log;
    log.attach(sim);
    sim.set_initial(tu::sine_field(g, 1, c.amplitude), kw::Field::zeros(g));
    REQUIRE(sim.run() == kw::SimStatus::completed);
    REQUIRE(log.rows.size() > 10);
    const double slack = 1e-9 * (1.0 + std::abs(log.rows[0].energy));
    for (std::size_t i = 1; i < log.rows.size(); ++i)
      CHECK(log.rows[i].energy <= log.rows[i - 1].energy + slack);
    // The damping term really drains the state.
    CHECK(log.rows.back().linf < log.rows[2].linf);
  }
}

TEST_CASE("streaming and direct convolution produce the same trajectory") {
  const kw::Grid1D g(1.0, 40);
  const kw::Kernel k = kw::Kernel::exp_sum({{0.05, 2.0}, {0.05, 1.0}});

  auto run_mode = [&](kw::ConvolutionMode mode) {
    kw::StepperConfig cfg = fixed_dt_config(2e-3, 0.5);
    cfg.convolution = mode;
    kw::Simulation sim(g, kCubic, k, cfg);
    sim.set_initial(tu::sine_field(g, 1, 0.5), tu::sine_field(g, 2, 0.1));
    REQUIRE(sim.run() == kw::SimStatus::completed);
    return sim;
  };

  const kw::Simulation rec = run_mode(kw::ConvolutionMode::recurrence);
  const kw::Simulation dir = run_mode(kw::ConvolutionMode::direct);
  for (int i = 0; i < g.n_interior; ++i)
    CHECK_THAT(rec.state()[i], WithinAbs(dir.state()[i], 1e-10));
}

TEST_CASE("cross-check mode certifies the recurrence against quadrature") {
  const kw::Grid1D g(1.0, 60);
  const kw::Kernel k = kw::Kernel::exp_sum({{0.1, 1.0}});
  kw::StepperConfig cfg = fixed_dt_config(1e-3, 0.6);
  cfg.convolution = kw::ConvolutionMode::crosscheck;
  kw::Simulation sim(g, kCubic, k, cfg);
  sim.set_initial(tu::sine_field(g, 1, 0.5), kw::Field::zeros(g));
  REQUIRE(sim.run() == kw::SimStatus::completed);
  CHECK(sim.crosscheck_max_rel() <= 1e-10);  // identical up to rounding
}

TEST_CASE("capped history still completes and stays accurate") {
  const kw::Grid1D g(1.0, 40);
  const kw::Kernel k = kw::Kernel::exp_sum({{0.1, 1.0}});

  auto final_state = [&](std::size_t budget) {
    kw::StepperConfig cfg = fixed_dt_config(1e-3, 0.5);
    cfg.convolution = kw::ConvolutionMode::direct;
    cfg.history_budget = budget;
    kw::Simulation sim(g, kCubic, k, cfg);
    sim.set_initial(tu::sine_field(g, 1, 0.5), kw::Field::zeros(g));
    REQUIRE(sim.run() == kw::SimStatus::completed);
    return sim.state();
  };

  const kw::Field full = final_state(0);
  const kw::Field capped = final_state(64);
  // Thinning coarsens the far past, so the capped trajectory is approximate
  // but must stay close to the uncapped reference.
  for (int i = 0; i < g.n_interior; ++i) CHECK_THAT(capped[i], WithinAbs(full[i], 5e-4));
}

TEST_CASE("source-dominated data terminates as blow-up with a stable estimate") {
  const kw::Grid1D g(1.0, 100);
  kw::StepperConfig cfg;
  cfg.t_max = 10.0;
  kw::Simulation sim(g, kCubic, kw::Kernel::zero(), cfg);
  RowLog log;
  log.attach(sim);
  sim.set_initial(tu::sine_field(g, 1, 6.0), kw::Field::zeros(g));

  REQUIRE(sim.run() == kw::SimStatus::blown_up);
  CHECK(sim.t() < 10.0);

  const kw::BlowupEstimate est = sim.blowup_estimate();
  CHECK(est.blown);
  REQUIRE(est.t_estimate.has_value());
  CHECK(*est.t_estimate > sim.t() * 0.5);
  CHECK(*est.t_estimate < 10.0);
  CHECK(est.fit_points >= 3);
  CHECK(est.fit_residual < 0.05);

  // The growing envelope is visible in the snapshot stream.
  CHECK(log.rows.back().linf > log.rows.front().linf * 100.0);
}

TEST_CASE("time-step collapse near the singularity is classified as blow-up") {
  const kw::Grid1D g(1.0, 100);
  kw::StepperConfig cfg;
  cfg.t_max = 10.0;
  cfg.dt_min = 1e-4;
  cfg.blowup_threshold = 1e30;  // unreachable: force the dt path to decide
  kw::Simulation sim(g, kCubic, kw::Kernel::zero(), cfg);
  sim.set_initial(tu::sine_field(g, 1, 6.0), kw::Field::zeros(g));
  REQUIRE(sim.run() == kw::SimStatus::blown_up);
  CHECK(sim.fault_message().find("collapsed") != std::string::npos);
}

TEST_CASE("non-finite states fault the run") {
  const kw::Grid1D g(1.0, 20);
  kw::StepperConfig cfg = fixed_dt_config(1e-3, 1.0);
  cfg.forcing = [](double, double t) {
    return t > 0.5 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
  };
  kw::Simulation sim(g, kCubic, kw::Kernel::zero(), cfg);
  sim.set_initial(tu::sine_field(g, 1, 0.1), kw::Field::zeros(g));
  REQUIRE(sim.run() == kw::SimStatus::faulted);
  CHECK(sim.fault_message().find("non-finite") != std::string::npos);
}

TEST_CASE("blow-up extrapolation on synthetic power-law envelopes") {
  // linf(t) = 1/(T - t) with p = 3 gives y = linf^{-1} = T - t, exactly linear.
  std::vector<std::pair<double, double>> series;
  const double T = 2.0;
  for (int i = 0; i <= 99; ++i) {
    const double t = 1.0 + 0.01 * i;
    series.emplace_back(t, 1.0 / (T - t));
  }
  const auto est = kw::detect_blowup(series, 3.0, 1e3);
  REQUIRE(est.t_estimate.has_value());
  CHECK_THAT(*est.t_estimate, WithinAbs(T, 1e-9));
  CHECK(est.fit_residual < 1e-9);
  CHECK(est.fit_points >= 3);

  // Too few singular samples.
  std::vector<std::pair<double, double>> few{{0.0, 20.0}, {0.1, 30.0}};
  const auto est2 = kw::detect_blowup(few, 3.0, 1e3);
  CHECK_FALSE(est2.t_estimate.has_value());
  CHECK(est2.reason.find("not enough") != std::string::npos);

  // A decaying envelope has no forward root.
  std::vector<std::pair<double, double>> decay;
  for (int i = 0; i <= 20; ++i) decay.emplace_back(0.1 * i, 100.0 / (1.0 + i));
  const auto est3 = kw::detect_blowup(decay, 3.0, 1e3);
  CHECK_FALSE(est3.t_estimate.has_value());
  CHECK(est3.reason.find("not decreasing") != std::string::npos);

  CHECK_THROWS_AS(kw::detect_blowup(series, 1.0, 1e3), std::invalid_argument);
}
