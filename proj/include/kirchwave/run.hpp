#pragma once

// Orchestration: materialize a RunConfig into a simulation with certificate
// and monitors attached, collect the diagnostics table, and produce the
// deterministic CSV / JSON artifacts and exit codes. Also hosts the check,
// sweep, search and kernel-test drivers used by the command-line tool.
//
// Exit codes: 0 success, 10 blow-up detected, 20 certificate or kernel
// admissibility failure (only when demanded), 1 fault. Wall-clock time is
// reported to the caller but never serialized, so repeated runs are
// byte-identical.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kirchwave/config.hpp"
#include "kirchwave/dynamics.hpp"
#include "kirchwave/functionals.hpp"
#include "kirchwave/io.hpp"
#include "kirchwave/kernel.hpp"
#include "kirchwave/spatial.hpp"
#include "kirchwave/theorem.hpp"

namespace kw {

inline constexpr const char* project_version = "0.1.0";

inline constexpr int exit_ok = 0;
inline constexpr int exit_fault = 1;
inline constexpr int exit_blowup = 10;
inline constexpr int exit_not_admissible = 20;

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Materialization helpers
// ---------------------------------------------------------------------------

inline Kernel make_kernel(const RunConfig& rc) {
  switch (rc.kernel_form) {
    case KernelSpecForm::zero:
      return Kernel::zero();
    case KernelSpecForm::exp_sum:
      return Kernel::exp_sum(rc.kernel_terms);
    case KernelSpecForm::tabulated: {
      Kernel k = load_kernel_table_csv(rc.kernel_table);
      const KernelMassReport mr = check_mass(k);
      if (!mr.ok) throw ConfigError({"kernel table '" + rc.kernel_table + "': " + mr.reason});
      return k;
    }
  }
  return Kernel::zero();
}

inline std::pair<Field, Field> make_initial_data(const RunConfig& rc, const Grid1D& grid) {
  if (rc.family == InitialFamily::sine_sum) {
    SineSumSpec spec{rc.modes, rc.lambda, rc.mu};
    return initial_data_from_spec(grid, spec);
  }
  Field u0 = load_field_csv(rc.u0_csv, grid);
  Field u1 = Field::zeros(grid);
  if (!rc.u1_csv.empty()) {
    u1 = load_field_csv(rc.u1_csv, grid);
  } else {
    u1 = rc.lambda * u0;
    if (rc.mu != 0.0) {
      Field mode1 = sine_sum_field(grid, {1.0});
      for (std::size_t i = 0; i < u1.size(); ++i) u1[i] += rc.mu * mode1[i];
    }
  }
  return {std::move(u0), std::move(u1)};
}

/// Manufactured forcing for the exact solution u*(x,t) = exp(-t) sin(pi x / L):
///   f = M(z(t)) (pi/L)^2 u* - (pi/L)^2 sin(pi x/L) sum_i g0_i q_i(t)
///       - exp(-p t) sin(pi x/L)^p,
/// where z(t) = exp(-2t) pi^2 / (2L) is ||grad u*||^2 and
/// q_i(t) = int_0^t exp(-kappa_i (t-s)) exp(-s) ds. Pair it with initial data
/// u0 = sin(pi x / L), u1 = -u0 (family sine_sum, c = [1], lambda = -1).
inline std::function<double(double, double)> make_mms_forcing(const ModelParams& mp,
                                                              const Kernel& kernel, double L) {
  if (kernel.form() == KernelForm::tabulated)
    throw std::invalid_argument("make_mms_forcing: zero or expsum kernel required");
  constexpr double pi = 3.14159265358979323846;
  const double w = pi / L;
  const double z0 = 0.5 * pi * pi / L;  // ||grad u*||^2 at t = 0
  const std::vector<ExpTerm> terms = kernel.terms();
  const ModelParams mpc = mp;
  return [=](double x, double t) {
    const double S = std::sin(w * x);
    const double decay = std::exp(-t);
    double conv = 0.0;
    for (const auto& tm : terms) {
      double q;
      if (std::abs(tm.rate - 1.0) < 1e-12)
        q = t * decay;
      else
        q = (decay - std::exp(-tm.rate * t)) / (tm.rate - 1.0);
      conv += tm.weight * q;
    }
    const double z = z0 * decay * decay;
    return kirchhoff_modulus(mpc, z) * w * w * decay * S - w * w * S * conv -
           std::exp(-mpc.p * t) * std::pow(S, mpc.p);
  };
}

inline double mms_exact(double x, double t, double L) {
  constexpr double pi = 3.14159265358979323846;
  return std::exp(-t) * std::sin(pi * x / L);
}

// ---------------------------------------------------------------------------
// Run driver
// ---------------------------------------------------------------------------

struct RunResult {
  SimStatus status = SimStatus::running;
  std::string fault_message;
  long steps = 0;
  double final_t = 0.0;
  BlowupEstimate blowup;
  double crosscheck_max_rel = 0.0;
  std::optional<Certificate> certificate;
  std::string certificate_error;
  MonitorContext monitor_context;
  bool monitor_fallback = true;
  double max_cs_gap_norm = 0.0;
  std::optional<double> min_concavity_residual_norm;
  bool flags_all_hold = false;
  std::vector<DiagnosticsRow> rows;       // every finalized step
  std::vector<GMonitor::Sample> monitor;  // parallel to rows
  std::string csv_text;                   // thinned by emit_every
  json summary;
  int exit_code = exit_ok;
  double wall_seconds = 0.0;  // console-only, never serialized
};

namespace detail {

inline json hypothesis_json(const HypothesisCheck& h) {
  return json{{"lhs", h.lhs}, {"rhs", h.rhs}, {"ok", h.ok}};
}

inline json certificate_json(const Certificate& c) {
  json j;
  j["branch"] = to_string(c.constants.branch);
  j["m1"] = c.constants.m1;
  j["alpha"] = c.constants.alpha;
  j["kernel_mass"] = c.constants.kernel_mass;
  if (std::isfinite(c.constants.mass_bound))
    j["mass_bound"] = c.constants.mass_bound;
  else
    j["mass_bound"] = nullptr;
  j["poincare"] = c.constants.poincare;
  j["s_valid_min"] = c.constants.s_valid_min;
  j["E0"] = c.E0;
  j["l2_u0"] = c.l2_u0;
  j["ip_u0u1"] = c.ip_u0u1;
  j["hypotheses"] = json{{"initial_energy_positive", hypothesis_json(c.energy_positive)},
                         {"i_functional_negative", hypothesis_json(c.unstable_start)},
                         {"velocity_alignment_positive", hypothesis_json(c.alignment_positive)},
                         {"l2_above_critical", hypothesis_json(c.mass_gap)},
                         {"admissible", c.admissible()}};
  j["params"] = json{{"beta", c.params.beta},
                     {"t2", c.params.t2},
                     {"T0", c.params.T0},
                     {"theta", c.params.theta},
                     {"G0", c.params.G0},
                     {"Gp0", c.params.Gp0},
                     {"tstar_bound", std::isfinite(c.params.tstar_bound)
                                         ? json(c.params.tstar_bound)
                                         : json(nullptr)},
                     {"feasible", c.params.feasible},
                     {"reason", c.params.reason}};
  j["certified"] = c.certified();
  return j;
}

inline json config_echo(const RunConfig& rc) {
  json j;
  j["grid"] = {{"L", rc.L}, {"n_interior", rc.n_interior}};
  j["model"] = {{"a", rc.model.a}, {"b", rc.model.b}, {"gamma", rc.model.gamma}, {"p", rc.model.p}};
  json terms = json::array();
  for (const auto& t : rc.kernel_terms) terms.push_back(json::array({t.weight, t.rate}));
  j["kernel"] = {{"form", rc.kernel_form == KernelSpecForm::zero
                              ? "zero"
                              : (rc.kernel_form == KernelSpecForm::exp_sum ? "expsum" : "table")},
                 {"terms", terms},
                 {"table", rc.kernel_table}};
  const char* conv = rc.stepper.convolution == ConvolutionMode::recurrence
                         ? "recurrence"
                         : (rc.stepper.convolution == ConvolutionMode::direct ? "direct"
                                                                              : "crosscheck");
  j["stepper"] = {{"dt_init", rc.stepper.dt_init},
                  {"dt_min", rc.stepper.dt_min},
                  {"dt_max", rc.stepper.dt_max},
                  {"cfl_safety", rc.stepper.cfl_safety},
                  {"growth_tol", rc.stepper.growth_tol},
                  {"blowup_threshold", rc.stepper.blowup_threshold},
                  {"t_max", rc.stepper.t_max},
                  {"history_budget", rc.stepper.history_budget},
                  {"convolution", conv},
                  {"forcing", rc.forcing == ForcingKind::none ? "none" : "mms_decay_sine"}};
  j["initial"] = {{"family", rc.family == InitialFamily::sine_sum ? "sine_sum" : "csv"},
                  {"c", rc.modes},
                  {"lambda", rc.lambda},
                  {"mu", rc.mu},
                  {"u0_csv", rc.u0_csv},
                  {"u1_csv", rc.u1_csv}};
  json cert = {{"enabled", rc.cert_enabled},
               {"required", rc.cert_required},
               {"poincare",
                rc.cert_options.poincare == PoincareMode::discrete ? "discrete" : "continuum"}};
  auto put_opt = [&cert](const char* key, const std::optional<double>& v) {
    if (v) cert[key] = *v;
  };
  put_opt("m1", rc.cert_options.m1);
  put_opt("alpha", rc.cert_options.alpha);
  put_opt("beta", rc.cert_options.beta);
  put_opt("t2", rc.cert_options.t2);
  put_opt("T0", rc.cert_options.T0);
  j["certificate"] = cert;
  j["output"] = {{"csv", rc.csv_path}, {"json", rc.json_path}, {"emit_every", rc.emit_every}};
  j["search"] = {{"budget", rc.budget},
                 {"n_modes", rc.search.n_modes},
                 {"c_min", rc.search.c_min},
                 {"c_max", rc.search.c_max},
                 {"lambda_min", rc.search.lambda_min},
                 {"lambda_max", rc.search.lambda_max},
                 {"mu_min", rc.search.mu_min},
                 {"mu_max", rc.search.mu_max}};
  j["seed"] = rc.seed;
  return j;
}

struct Recorder {
  std::vector<double> t, E, I, l2, grad, linf, gcirc, ke, kat, gpcirc;
  void on_step(const StepData& d) {
    t.push_back(d.t);
    E.push_back(d.energy);
    I.push_back(d.i_func);
    l2.push_back(d.l2_sq);
    grad.push_back(d.grad_sq);
    linf.push_back(d.linf);
    gcirc.push_back(d.g_circ);
    ke.push_back(d.ut_l2_sq);
    kat.push_back(d.kernel_at_t);
    gpcirc.push_back(d.gprime_circ);
  }
  std::size_t size() const { return t.size(); }
};

inline void add_extrema(json& extrema, const char* name, const std::vector<double>& v) {
  if (v.empty()) return;
  double lo = v.front(), hi = v.front();
  for (double x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  extrema[name] = {{"min", lo}, {"max", hi}};
}

}  // namespace detail

/// Execute one configured run. Throws ConfigError for materialization
/// problems; simulation faults are reported through status / exit_code.
inline RunResult execute_run(const RunConfig& rc) {
  const auto t_begin = std::chrono::steady_clock::now();
  RunResult res;

  const Grid1D grid(rc.L, rc.n_interior);
  const Kernel kernel = make_kernel(rc);
  auto [u0, u1] = make_initial_data(rc, grid);

  StepperConfig st = rc.stepper;
  if (rc.forcing == ForcingKind::mms_decay_sine)
    st.forcing = make_mms_forcing(rc.model, kernel, rc.L);

  // Certificate (optional) and the monitor context.
  if (rc.cert_enabled) {
    try {
      res.certificate = build_certificate(grid, u0, u1, rc.model, kernel, rc.cert_options);
    } catch (const NoCertificateError& e) {
      res.certificate_error = e.what();
    }
  }
  const double l2_u0 = norm_l2_sq(grid, u0);
  if (res.certificate && res.certificate->certified()) {
    res.monitor_context = monitor_context(*res.certificate, rc.model);
    res.monitor_fallback = false;
  } else {
    res.monitor_context = monitor_context_fallback(rc.model, l2_u0, st.t_max);
    res.monitor_fallback = true;
  }

  Simulation sim(grid, rc.model, kernel, st);
  GMonitor monitor(res.monitor_context);
  detail::Recorder rec;
  sim.add_observer([&](const StepData& d) {
    rec.on_step(d);
    monitor.on_step(d);
  });
  sim.set_initial(std::move(u0), std::move(u1));
  res.status = sim.run();
  res.fault_message = sim.fault_message();
  res.steps = sim.steps();
  res.final_t = sim.t();
  res.blowup = sim.blowup_estimate();
  res.crosscheck_max_rel = sim.crosscheck_max_rel();

  monitor.finalize();
  res.monitor = monitor.samples();
  res.max_cs_gap_norm = monitor.max_cs_gap_norm();
  const double mc = monitor.min_concavity_residual_norm();
  if (std::isfinite(mc)) res.min_concavity_residual_norm = mc;
  res.flags_all_hold = monitor.all_flags_hold();

  // Assemble rows; the centered d/dt residual of the dissipation identity
  // needs both neighbors, so first and last rows leave it empty.
  const std::size_t n = rec.size();
  res.rows.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    DiagnosticsRow& r = res.rows[k];
    r.index = static_cast<long>(k);
    r.t = rec.t[k];
    r.E = rec.E[k];
    r.I = rec.I[k];
    r.L2_sq = rec.l2[k];
    r.grad_sq = rec.grad[k];
    r.Linf = rec.linf[k];
    r.g_circ = rec.gcirc[k];
    const GMonitor::Sample& s = res.monitor[k];
    r.G = s.G;
    r.Gp = s.Gp;
    r.Gpp = s.Gpp_fd;
    r.concavity_residual = s.concavity_residual;
    if (k > 0 && k + 1 < n) {
      const double dt0 = rec.t[k] - rec.t[k - 1];
      const double dt1 = rec.t[k + 1] - rec.t[k];
      const double cp = dt0 / (dt1 * (dt0 + dt1));
      const double c0 = (dt1 - dt0) / (dt0 * dt1);
      const double cm = -dt1 / (dt0 * (dt0 + dt1));
      const double dE = cp * rec.E[k + 1] + c0 * rec.E[k] + cm * rec.E[k - 1];
      r.dE_residual = dE - dissipation_rate(rec.ke[k], rec.kat[k], rec.grad[k], rec.gpcirc[k]);
    }
  }

  // CSV (thinned by emit_every; the final finalized row is always kept).
  std::string csv = diagnostics_csv_header();
  csv += '\n';
  long emitted = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k % static_cast<std::size_t>(rc.emit_every) != 0 && k + 1 != n) continue;
    csv += diagnostics_csv_row(res.rows[k]);
    csv += '\n';
    ++emitted;
  }
  res.csv_text = std::move(csv);

  // Exit code: fault > missing-required-certificate > blow-up > ok.
  if (res.status == SimStatus::faulted) {
    res.exit_code = exit_fault;
  } else if (rc.cert_required &&
             !(res.certificate && res.certificate->certified())) {
    res.exit_code = exit_not_admissible;
  } else if (res.status == SimStatus::blown_up) {
    res.exit_code = exit_blowup;
  } else {
    res.exit_code = exit_ok;
  }

  // Summary JSON (keys are sorted by the json object, deterministically).
  json extrema;
  detail::add_extrema(extrema, "E", rec.E);
  detail::add_extrema(extrema, "I", rec.I);
  detail::add_extrema(extrema, "L2_sq", rec.l2);
  detail::add_extrema(extrema, "grad_sq", rec.grad);
  detail::add_extrema(extrema, "Linf", rec.linf);
  detail::add_extrema(extrema, "g_circ", rec.gcirc);
  {
    std::vector<double> gs, gps;
    gs.reserve(n);
    gps.reserve(n);
    for (const auto& s : res.monitor) {
      gs.push_back(s.G);
      gps.push_back(s.Gp);
    }
    detail::add_extrema(extrema, "G", gs);
    detail::add_extrema(extrema, "Gp", gps);
  }

  json j;
  j["version"] = project_version;
  j["status"] = to_string(res.status);
  j["exit_code"] = res.exit_code;
  j["fault_message"] = res.fault_message.empty() ? json(nullptr) : json(res.fault_message);
  j["steps"] = res.steps;
  j["final_t"] = res.final_t;
  j["rows_emitted"] = emitted;
  j["blowup"] = {{"blown", res.blowup.blown},
                 {"t_estimate",
                  res.blowup.t_estimate ? json(*res.blowup.t_estimate) : json(nullptr)},
                 {"fit_residual", res.blowup.fit_residual},
                 {"fit_points", res.blowup.fit_points},
                 {"reason", res.blowup.reason}};
  j["crosscheck_max_rel"] = rc.stepper.convolution == ConvolutionMode::crosscheck
                                ? json(res.crosscheck_max_rel)
                                : json(nullptr);
  if (res.certificate)
    j["certificate"] = detail::certificate_json(*res.certificate);
  else if (!res.certificate_error.empty())
    j["certificate"] = json{{"error", res.certificate_error}, {"certified", false}};
  else
    j["certificate"] = nullptr;
  j["monitor"] = {{"fallback", res.monitor_fallback},
                  {"beta", res.monitor_context.beta},
                  {"t2", res.monitor_context.t2},
                  {"T0", res.monitor_context.T0},
                  {"theta", res.monitor_context.theta},
                  {"max_cs_gap_norm", res.max_cs_gap_norm},
                  {"min_concavity_residual_norm", res.min_concavity_residual_norm
                                                      ? json(*res.min_concavity_residual_norm)
                                                      : json(nullptr)},
                  {"flags_all_hold", res.flags_all_hold}};
  j["extrema"] = extrema;
  j["config"] = detail::config_echo(rc);
  res.summary = std::move(j);

  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
  return res;
}

/// Execute and also write the configured output files.
inline RunResult execute_run_with_outputs(const RunConfig& rc) {
  RunResult res = execute_run(rc);
  if (!rc.csv_path.empty()) write_text_file(rc.csv_path, res.csv_text);
  if (!rc.json_path.empty()) write_text_file(rc.json_path, res.summary.dump(2) + "\n");
  return res;
}

// ---------------------------------------------------------------------------
// check / kernel-test / search / sweep drivers
// ---------------------------------------------------------------------------

struct CheckResult {
  json report;
  int exit_code = exit_ok;
};

/// Static admissibility check: kernel tests plus the certificate pipeline,
/// without time stepping. Exit 0 only when the kernel passes and the initial
/// data carry a full certificate.
inline CheckResult run_check(const RunConfig& rc) {
  CheckResult out;
  const Grid1D grid(rc.L, rc.n_interior);
  const Kernel kernel = make_kernel(rc);
  auto [u0, u1] = make_initial_data(rc, grid);

  const KernelMassReport mass = check_mass(kernel);
  const PositiveTypeReport pt = check_positive_type(kernel);
  const char* verdict = pt.verdict == PositiveTypeVerdict::certified_sufficient
                            ? "certified-sufficient"
                            : (pt.verdict == PositiveTypeVerdict::failed ? "failed"
                                                                         : "passed-samples");
  out.report["kernel"] = {{"mass", mass.total_mass},
                          {"remaining", mass.remaining},
                          {"mass_ok", mass.ok},
                          {"mass_reason", mass.reason},
                          {"positive_type", json{{"verdict", verdict},
                                                 {"tested_functions", pt.tested_functions},
                                                 {"min_quadratic_form", pt.min_quadratic_form},
                                                 {"tolerance", pt.tolerance},
                                                 {"witness", pt.witness}}}};
  bool certified = false;
  try {
    const Certificate cert = build_certificate(grid, u0, u1, rc.model, kernel, rc.cert_options);
    out.report["certificate"] = detail::certificate_json(cert);
    certified = cert.certified();
  } catch (const NoCertificateError& e) {
    out.report["certificate"] = json{{"error", e.what()}, {"certified", false}};
  }
  out.report["version"] = project_version;
  const bool kernel_ok = mass.ok && pt.verdict != PositiveTypeVerdict::failed;
  out.report["admissible"] = kernel_ok && certified;
  out.exit_code = (kernel_ok && certified) ? exit_ok : exit_not_admissible;
  return out;
}

struct KernelTestResult {
  json report;
  int exit_code = exit_ok;
};

inline KernelTestResult run_kernel_test(const RunConfig& rc, double horizon = 5.0, int modes = 8,
                                        bool force_quadrature = false) {
  KernelTestResult out;
  const Kernel kernel = make_kernel(rc);
  const KernelMassReport mass = check_mass(kernel);
  const PositiveTypeReport pt = check_positive_type(kernel, horizon, modes, force_quadrature);
  const char* verdict = pt.verdict == PositiveTypeVerdict::certified_sufficient
                            ? "certified-sufficient"
                            : (pt.verdict == PositiveTypeVerdict::failed ? "failed"
                                                                         : "passed-samples");
  out.report = {{"version", project_version},
                {"mass", mass.total_mass},
                {"remaining", mass.remaining},
                {"mass_ok", mass.ok},
                {"mass_reason", mass.reason},
                {"positive_type", json{{"verdict", verdict},
                                       {"horizon", horizon},
                                       {"modes", modes},
                                       {"tested_functions", pt.tested_functions},
                                       {"min_quadratic_form", pt.min_quadratic_form},
                                       {"tolerance", pt.tolerance},
                                       {"witness", pt.witness}}}};
  const bool ok = mass.ok && pt.verdict != PositiveTypeVerdict::failed;
  out.report["admissible"] = ok;
  out.exit_code = ok ? exit_ok : exit_not_admissible;
  return out;
}

struct SearchResult {
  std::string jsonl;  // one JSON object per hit
  json summary;
  int exit_code = exit_ok;
};

inline SearchResult run_search(const RunConfig& rc, int budget_override = -1) {
  SearchResult out;
  const Grid1D grid(rc.L, rc.n_interior);
  const Kernel kernel = make_kernel(rc);
  const int budget = budget_override > 0 ? budget_override : rc.budget;
  const auto hits = search_admissible_data(grid, rc.model, kernel, rc.search, budget, rc.seed,
                                           rc.cert_options.poincare);
  for (const auto& hit : hits) {
    json j;
    j["draw"] = hit.draw;
    j["c"] = hit.spec.c;
    j["lambda"] = hit.spec.lambda;
    j["mu"] = hit.spec.mu;
    j["E0"] = hit.cert.E0;
    j["l2_u0"] = hit.cert.l2_u0;
    j["m1"] = hit.cert.constants.m1;
    j["alpha"] = hit.cert.constants.alpha;
    j["beta"] = hit.cert.params.beta;
    j["t2"] = hit.cert.params.t2;
    j["T0"] = hit.cert.params.T0;
    j["tstar_bound"] = hit.cert.params.tstar_bound;
    out.jsonl += j.dump();
    out.jsonl += '\n';
  }
  out.summary = {{"version", project_version},
                 {"budget", budget},
                 {"seed", rc.seed},
                 {"hits", hits.size()}};
  out.exit_code = hits.empty() ? exit_not_admissible : exit_ok;
  return out;
}

struct SweepAxis {
  std::string key;
  std::vector<std::string> values;  // raw literals, parsed per cell
};

/// "key=v1,v2,..." with bracket-aware splitting so list literals work.
inline SweepAxis parse_sweep_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("sweep axis must look like key=v1,v2,...");
  SweepAxis axis;
  axis.key = cfg::detail::trim(spec.substr(0, eq));
  if (!cfg::detail::valid_key(axis.key))
    throw std::invalid_argument("sweep axis: bad key '" + axis.key + "'");
  for (const auto& part : cfg::detail::split_list(spec.substr(eq + 1))) {
    const std::string v = cfg::detail::trim(part);
    if (v.empty()) throw std::invalid_argument("sweep axis '" + axis.key + "': empty value");
    axis.values.push_back(v);
  }
  if (axis.values.empty())
    throw std::invalid_argument("sweep axis '" + axis.key + "': no values");
  return axis;
}

inline int sweep_worker_count(int cells) {
  int workers = 0;
  if (const char* env = std::getenv("KIRCHWAVE_WORKERS")) {
    workers = std::atoi(env);
    if (workers < 1) workers = 1;
  } else {
    workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
  }
  return std::min(workers, std::max(1, cells));
}

struct SweepResult {
  std::string csv;
  json summary;
  int cells = 0;
  int workers = 0;
  int exit_code = exit_ok;
};

/// Cartesian sweep over axis overrides applied to the base config text.
/// Cells run concurrently (KIRCHWAVE_WORKERS workers, default hardware
/// concurrency) but the aggregation order is the deterministic odometer
/// order, last axis fastest.
inline SweepResult run_sweep(const std::string& base_text, const std::vector<SweepAxis>& axes) {
  SweepResult out;
  const cfg::RawMap base = cfg::parse_raw(base_text);
  long cells = 1;
  for (const auto& a : axes) cells *= static_cast<long>(a.values.size());
  if (axes.empty() || cells < 1) throw std::invalid_argument("sweep needs at least one axis value");
  out.cells = static_cast<int>(cells);

  struct Cell {
    std::vector<std::string> literals;
    std::string status = "config-error";
    int exit_code = exit_fault;
    long steps = 0;
    double final_t = 0.0;
    std::optional<double> t_estimate;
    bool certified = false;
    std::string error;
  };
  std::vector<Cell> results(static_cast<std::size_t>(cells));

  auto run_cell = [&](long idx) {
    Cell& cell = results[static_cast<std::size_t>(idx)];
    // decode odometer (last axis fastest)
    std::vector<std::size_t> pick(axes.size(), 0);
    long rem = idx;
    for (std::size_t a = axes.size(); a-- > 0;) {
      pick[a] = static_cast<std::size_t>(rem % static_cast<long>(axes[a].values.size()));
      rem /= static_cast<long>(axes[a].values.size());
    }
    cfg::RawMap raw = base;
    cell.literals.resize(axes.size());
    try {
      for (std::size_t a = 0; a < axes.size(); ++a) {
        const std::string& lit = axes[a].values[pick[a]];
        cell.literals[a] = lit;
        const cfg::RawMap one = cfg::parse_raw(axes[a].key + " = " + lit);
        raw[axes[a].key] = one.at(axes[a].key);
      }
      RunConfig rc = config_from_raw(std::move(raw));
      rc.csv_path.clear();  // sweep cells do not write individual files
      rc.json_path.clear();
      const RunResult rr = execute_run(rc);
      cell.status = to_string(rr.status);
      cell.exit_code = rr.exit_code;
      cell.steps = rr.steps;
      cell.final_t = rr.final_t;
      cell.t_estimate = rr.blowup.t_estimate;
      cell.certified = rr.certificate && rr.certificate->certified();
      cell.error.clear();
    } catch (const std::exception& e) {
      cell.status = "config-error";
      cell.exit_code = exit_fault;
      cell.error = e.what();
    }
  };

  out.workers = sweep_worker_count(out.cells);
  if (out.workers <= 1) {
    for (long i = 0; i < cells; ++i) run_cell(i);
  } else {
    std::atomic<long> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(out.workers));
    for (int w = 0; w < out.workers; ++w)
      pool.emplace_back([&] {
        for (long i = next.fetch_add(1); i < cells; i = next.fetch_add(1)) run_cell(i);
      });
    for (auto& th : pool) th.join();
  }

  std::string csv;
  for (const auto& a : axes) {
    csv += a.key;
    csv += ',';
  }
  csv += "status,exit_code,steps,final_t,blowup_t_estimate,certified\n";
  int worst = exit_ok;
  for (const auto& cell : results) {
    for (const auto& lit : cell.literals) {
      std::string quoted = lit;
      if (quoted.find(',') != std::string::npos) quoted = "\"" + quoted + "\"";
      csv += quoted;
      csv += ',';
    }
    csv += cell.status;
    csv += ',';
    csv += std::to_string(cell.exit_code);
    csv += ',';
    csv += std::to_string(cell.steps);
    csv += ',';
    csv += fmt_double(cell.final_t);
    csv += ',';
    csv += cell.t_estimate ? fmt_double(*cell.t_estimate) : std::string();
    csv += ',';
    csv += cell.certified ? "1" : "0";
    csv += '\n';
    worst = std::max(worst, cell.exit_code == exit_fault ? exit_fault : exit_ok);
  }
  out.csv = std::move(csv);
  json jaxes = json::array();
  for (const auto& a : axes) jaxes.push_back({{"key", a.key}, {"values", a.values}});
  out.summary = {{"version", project_version},
                 {"cells", out.cells},
                 {"workers", out.workers},
                 {"axes", jaxes}};
  out.exit_code = exit_ok;  // per-cell codes live in the table
  return out;
}

}  // namespace kw
