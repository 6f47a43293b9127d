// Command-line front end: check, run, sweep, search, kernel-test.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kirchwave/run.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-time blow-up simulator and certificate checker for a "
               "viscoelastic Kirchhoff-type wave model"};
  app.require_subcommand(1);

  std::string config_path;
  std::string csv_out, json_out, jsonl_out;
  std::vector<std::string> axis_specs;
  int budget = -1;
  double horizon = 5.0;
  int modes = 8;
  bool force_quadrature = false;

  auto* c_check = app.add_subcommand("check", "Evaluate kernel admissibility and the blow-up "
                                              "certificate for the configured initial data");
  c_check->add_option("config", config_path, "config file")->required();
  c_check->add_option("--json", json_out, "write the report to this file as well");

  auto* c_run = app.add_subcommand("run", "Integrate the model and emit diagnostics");
  c_run->add_option("config", config_path, "config file")->required();
  c_run->add_option("--csv", csv_out, "override output.csv");
  c_run->add_option("--json", json_out, "override output.json");

  auto* c_sweep = app.add_subcommand("sweep", "Run a Cartesian parameter sweep");
  c_sweep->add_option("config", config_path, "base config file")->required();
  c_sweep->add_option("--axis", axis_specs, "axis spec key=v1,v2,... (repeatable)")
      ->required()
      ->take_all();
  c_sweep->add_option("--csv", csv_out, "write the aggregated table to this file");
  c_sweep->add_option("--json", json_out, "write the sweep summary to this file");

  auto* c_search = app.add_subcommand("search", "Random search for certified initial data");
  c_search->add_option("config", config_path, "config file")->required();
  c_search->add_option("--budget", budget, "number of draws (overrides search.budget)");
  c_search->add_option("--out", jsonl_out, "write hits as JSON lines to this file");

  auto* c_ktest = app.add_subcommand("kernel-test", "Run the kernel admissibility battery");
  c_ktest->add_option("config", config_path, "config file")->required();
  c_ktest->add_option("--horizon", horizon, "positive-type test horizon (default 5)");
  c_ktest->add_option("--modes", modes, "trig modes in the battery (default 8)");
  c_ktest->add_flag("--force-quadrature", force_quadrature,
                    "skip the certified fast path and always run quadrature");
  c_ktest->add_option("--json", json_out, "write the report to this file as well");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_check->parsed()) {
      const kw::RunConfig rc = kw::load_config_file(config_path);
      const kw::CheckResult res = kw::run_check(rc);
      const std::string text = res.report.dump(2) + "\n";
      std::cout << text;
      if (!json_out.empty()) kw::write_text_file(json_out, text);
      return res.exit_code;
    }
    if (c_run->parsed()) {
      kw::RunConfig rc = kw::load_config_file(config_path);
      if (!csv_out.empty()) rc.csv_path = csv_out;
      if (!json_out.empty()) rc.json_path = json_out;
      const kw::RunResult res = kw::execute_run_with_outputs(rc);
      std::cout << res.summary.dump(2) << "\n";
      std::cerr << "wall_seconds " << res.wall_seconds << "\n";
      return res.exit_code;
    }
    if (c_sweep->parsed()) {
      std::vector<kw::SweepAxis> axes;
      for (const auto& spec : axis_specs) axes.push_back(kw::parse_sweep_axis(spec));
      const kw::SweepResult res = kw::run_sweep(slurp(config_path), axes);
      std::cout << res.csv;
      std::cerr << res.summary.dump(2) << "\n";
      if (!csv_out.empty()) kw::write_text_file(csv_out, res.csv);
      if (!json_out.empty()) kw::write_text_file(json_out, res.summary.dump(2) + "\n");
      return res.exit_code;
    }
    if (c_search->parsed()) {
      const kw::RunConfig rc = kw::load_config_file(config_path);
      const kw::SearchResult res = kw::run_search(rc, budget);
      std::cout << res.jsonl;
      std::cerr << res.summary.dump(2) << "\n";
      if (!jsonl_out.empty()) kw::write_text_file(jsonl_out, res.jsonl);
      return res.exit_code;
    }
    if (c_ktest->parsed()) {
      const kw::RunConfig rc = kw::load_config_file(config_path);
      const kw::KernelTestResult res = kw::run_kernel_test(rc, horizon, modes, force_quadrature);
      const std::string text = res.report.dump(2) + "\n";
      std::cout << text;
      if (!json_out.empty()) kw::write_text_file(json_out, text);
      return res.exit_code;
    }
  } catch (const kw::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kw::exit_fault;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kw::exit_fault;
  }
  return kw::exit_fault;
}
