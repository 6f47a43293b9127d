#pragma once

// Run configuration: a small sectioned key = value format and its validation
// into a RunConfig.
//
//   # comment
//   [grid]
//   L = 1.0
//   n_interior = 200
//   [kernel]
//   form = "expsum"
//   terms = [[0.1, 1.0], [0.05, 2.0]]
//
// Plain keys pick up the enclosing [section] prefix; keys that already
// contain a dot are absolute. Values are numbers, true/false, quoted strings,
// flat lists of numbers, or lists of number lists. Unknown keys are errors.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kirchwave/dynamics.hpp"
#include "kirchwave/functionals.hpp"
#include "kirchwave/theorem.hpp"

namespace kw {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors)
      : std::runtime_error(join(errors)), errors_(std::move(errors)) {}
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& es) {
    std::string s = "invalid configuration:";
    for (const auto& e : es) s += "\n  - " + e;
    return s;
  }
  std::vector<std::string> errors_;
};

namespace cfg {

struct Value {
  enum class Kind { number, boolean, text, list, nested };
  Kind kind = Kind::number;
  double num = 0.0;
  bool flag = false;
  std::string text;
  std::vector<double> list;
  std::vector<std::vector<double>> nested;
  int line = 0;

  std::string describe() const {
    switch (kind) {
      case Kind::number: return "number";
      case Kind::boolean: return "boolean";
      case Kind::text: return "string";
      case Kind::list: return "list";
      case Kind::nested: return "nested list";
    }
    return "?";
  }
};

using RawMap = std::map<std::string, Value>;

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline bool parse_number(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size();
}

/// Split a bracketed list body on top-level commas.
inline std::vector<std::string> split_list(const std::string& body) {
  std::vector<std::string> parts;
  int depth = 0;
  std::string cur;
  for (char c : body) {
    if (c == '[') ++depth;
    if (c == ']') --depth;
    if (c == ',' && depth == 0) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty() || !parts.empty()) parts.push_back(cur);
  return parts;
}

inline Value parse_value(const std::string& raw, int line, std::vector<std::string>& errors) {
  Value v;
  v.line = line;
  const std::string s = trim(raw);
  if (s.empty()) {
    errors.push_back("line " + std::to_string(line) + ": empty value");
    return v;
  }
  if (s == "true" || s == "false") {
    v.kind = Value::Kind::boolean;
    v.flag = (s == "true");
    return v;
  }
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') {
      errors.push_back("line " + std::to_string(line) + ": unterminated string");
      return v;
    }
    v.kind = Value::Kind::text;
    v.text = s.substr(1, s.size() - 2);
    return v;
  }
  if (s.front() == '[') {
    if (s.back() != ']') {
      errors.push_back("line " + std::to_string(line) + ": unterminated list");
      return v;
    }
    const auto parts = split_list(s.substr(1, s.size() - 2));
    bool any_nested = false, any_number = false;
    std::vector<double> flat;
    std::vector<std::vector<double>> nested;
    for (const auto& part : parts) {
      const std::string q = trim(part);
      if (q.empty()) {
        errors.push_back("line " + std::to_string(line) + ": empty list element");
        continue;
      }
      if (q.front() == '[') {
        any_nested = true;
        if (q.back() != ']') {
          errors.push_back("line " + std::to_string(line) + ": unterminated inner list");
          continue;
        }
        std::vector<double> inner;
        for (const auto& ip : split_list(q.substr(1, q.size() - 2))) {
          double x;
          if (!parse_number(ip, x)) {
            errors.push_back("line " + std::to_string(line) + ": bad number '" + trim(ip) + "'");
            continue;
          }
          inner.push_back(x);
        }
        nested.push_back(std::move(inner));
      } else {
        any_number = true;
        double x;
        if (!parse_number(q, x)) {
          errors.push_back("line " + std::to_string(line) + ": bad number '" + q + "'");
          continue;
        }
        flat.push_back(x);
      }
    }
    if (any_nested && any_number) {
      errors.push_back("line " + std::to_string(line) + ": mixed list element types");
      return v;
    }
    if (any_nested) {
      v.kind = Value::Kind::nested;
      v.nested = std::move(nested);
    } else {
      v.kind = Value::Kind::list;
      v.list = std::move(flat);
    }
    return v;
  }
  double x;
  if (!parse_number(s, x)) {
    errors.push_back("line " + std::to_string(line) + ": cannot parse value '" + s + "'");
    return v;
  }
  v.kind = Value::Kind::number;
  v.num = x;
  return v;
}

inline bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return false;
  return true;
}

}  // namespace detail

/// Parse the text into a flat dotted-key map; throws ConfigError on syntax.
inline RawMap parse_raw(const std::string& text) {
  RawMap map;
  std::vector<std::string> errors;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // strip comments (quotes are respected)
    bool in_quote = false;
    std::string stripped;
    for (char c : line) {
      if (c == '"') in_quote = !in_quote;
      if (c == '#' && !in_quote) break;
      stripped += c;
    }
    const std::string t = detail::trim(stripped);
    if (t.empty()) continue;
    if (t.front() == '[' && t.back() == ']' && t.find('=') == std::string::npos &&
        t.find(',') == std::string::npos) {
      section = detail::trim(t.substr(1, t.size() - 2));
      if (!detail::valid_key(section) || section.find('.') != std::string::npos) {
        errors.push_back("line " + std::to_string(lineno) + ": bad section name '" + section + "'");
        section.clear();
      }
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    std::string key = detail::trim(t.substr(0, eq));
    if (!detail::valid_key(key)) {
      errors.push_back("line " + std::to_string(lineno) + ": bad key '" + key + "'");
      continue;
    }
    if (key.find('.') == std::string::npos && !section.empty()) key = section + "." + key;
    if (map.count(key)) {
      errors.push_back("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
      continue;
    }
    map[key] = detail::parse_value(t.substr(eq + 1), lineno, errors);
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return map;
}

}  // namespace cfg

enum class KernelSpecForm { zero, exp_sum, tabulated };
enum class ForcingKind { none, mms_decay_sine };
enum class InitialFamily { sine_sum, csv };

/// Fully validated run description. The kernel itself and any CSV-backed
/// initial data are materialized later (they may touch the filesystem).
struct RunConfig {
  // grid
  double L = 1.0;
  int n_interior = 100;
  // model
  ModelParams model;
  // kernel spec
  KernelSpecForm kernel_form = KernelSpecForm::zero;
  std::vector<ExpTerm> kernel_terms;
  std::string kernel_table;
  // stepper
  StepperConfig stepper;  // forcing left empty here
  ForcingKind forcing = ForcingKind::none;
  // initial data
  InitialFamily family = InitialFamily::sine_sum;
  std::vector<double> modes{1.0};
  double lambda = 0.0;
  double mu = 0.0;
  std::string u0_csv, u1_csv;
  // certificate
  bool cert_enabled = false;
  bool cert_required = false;
  CertificateOptions cert_options;
  // output
  std::string csv_path, json_path;
  int emit_every = 1;
  // search
  SearchSpace search;
  int budget = 1000;
  // misc
  std::uint64_t seed = 12345;
};

namespace cfg::detail {

class Extractor {
 public:
  Extractor(RawMap map, std::vector<std::string>& errors)
      : map_(std::move(map)), errors_(errors) {}

  std::optional<Value> take(const std::string& key) {
    auto it = map_.find(key);
    if (it == map_.end()) return std::nullopt;
    Value v = std::move(it->second);
    map_.erase(it);
    return v;
  }

  double number(const std::string& key, double fallback) {
    auto v = take(key);
    if (!v) return fallback;
    if (v->kind != Value::Kind::number) {
      type_error(key, *v, "number");
      return fallback;
    }
    return v->num;
  }

  long integer(const std::string& key, long fallback) {
    auto v = take(key);
    if (!v) return fallback;
    if (v->kind != Value::Kind::number || std::abs(v->num - std::round(v->num)) > 1e-9) {
      type_error(key, *v, "integer");
      return fallback;
    }
    return static_cast<long>(std::llround(v->num));
  }

  bool boolean(const std::string& key, bool fallback) {
    auto v = take(key);
    if (!v) return fallback;
    if (v->kind != Value::Kind::boolean) {
      type_error(key, *v, "boolean");
      return fallback;
    }
    return v->flag;
  }

  std::string text(const std::string& key, const std::string& fallback) {
    auto v = take(key);
    if (!v) return fallback;
    if (v->kind != Value::Kind::text) {
      type_error(key, *v, "string");
      return fallback;
    }
    return v->text;
  }

  std::optional<double> opt_number(const std::string& key) {
    auto v = take(key);
    if (!v) return std::nullopt;
    if (v->kind != Value::Kind::number) {
      type_error(key, *v, "number");
      return std::nullopt;
    }
    return v->num;
  }

  std::optional<std::vector<double>> list(const std::string& key) {
    auto v = take(key);
    if (!v) return std::nullopt;
    if (v->kind != Value::Kind::list) {
      type_error(key, *v, "list of numbers");
      return std::nullopt;
    }
    return std::move(v->list);
  }

  std::optional<std::vector<std::vector<double>>> nested(const std::string& key) {
    auto v = take(key);
    if (!v) return std::nullopt;
    if (v->kind == Value::Kind::list && v->list.empty()) return std::vector<std::vector<double>>{};
    if (v->kind != Value::Kind::nested) {
      type_error(key, *v, "list of [weight, rate] pairs");
      return std::nullopt;
    }
    return std::move(v->nested);
  }

  void error(const std::string& msg) { errors_.push_back(msg); }

  void finish_unknown() {
    for (const auto& [k, v] : map_)
      errors_.push_back("unknown key '" + k + "' (line " + std::to_string(v.line) + ")");
  }

 private:
  void type_error(const std::string& key, const Value& v, const char* want) {
    errors_.push_back("key '" + key + "' (line " + std::to_string(v.line) + "): expected " +
                      want + ", got " + v.describe());
  }

  RawMap map_;
  std::vector<std::string>& errors_;
};

}  // namespace cfg::detail

/// Build and validate a RunConfig from a parsed raw map.
inline RunConfig config_from_raw(cfg::RawMap raw) {
  std::vector<std::string> errors;
  cfg::detail::Extractor ex(std::move(raw), errors);
  RunConfig rc;

  rc.L = ex.number("grid.L", rc.L);
  rc.n_interior = static_cast<int>(ex.integer("grid.n_interior", rc.n_interior));
  if (!(rc.L > 0.0)) ex.error("grid.L must be positive");
  if (rc.n_interior < 2) ex.error("grid.n_interior must be at least 2");

  rc.model.a = ex.number("model.a", rc.model.a);
  rc.model.b = ex.number("model.b", rc.model.b);
  rc.model.gamma = ex.number("model.gamma", rc.model.gamma);
  rc.model.p = ex.number("model.p", rc.model.p);
  try {
    rc.model.validate();
  } catch (const std::exception& e) {
    ex.error(std::string("model: ") + e.what());
  }

  const std::string form = ex.text("kernel.form", "zero");
  auto terms = ex.nested("kernel.terms");
  rc.kernel_table = ex.text("kernel.table", "");
  if (form == "zero") {
    rc.kernel_form = KernelSpecForm::zero;
    if (terms && !terms->empty()) ex.error("kernel.terms given for a zero kernel");
    if (!rc.kernel_table.empty()) ex.error("kernel.table given for a zero kernel");
  } else if (form == "expsum") {
    rc.kernel_form = KernelSpecForm::exp_sum;
    if (!terms || terms->empty()) {
      ex.error("kernel.form = \"expsum\" needs kernel.terms = [[weight, rate], ...]");
    } else {
      double mass = 0.0;
      for (const auto& pair : *terms) {
        if (pair.size() != 2) {
          ex.error("kernel.terms entries must be [weight, rate] pairs");
          continue;
        }
        if (!(pair[0] > 0.0) || !(pair[1] > 0.0)) {
          ex.error("kernel.terms weights and rates must be positive");
          continue;
        }
        rc.kernel_terms.push_back({pair[0], pair[1]});
        mass += pair[0] / pair[1];
      }
      if (!(mass < 1.0)) ex.error("kernel mass (sum of weight/rate) must stay below 1");
    }
    if (!rc.kernel_table.empty()) ex.error("kernel.table given for an expsum kernel");
  } else if (form == "table") {
    rc.kernel_form = KernelSpecForm::tabulated;
    if (rc.kernel_table.empty()) ex.error("kernel.form = \"table\" needs kernel.table = \"path\"");
    if (terms && !terms->empty()) ex.error("kernel.terms given for a tabulated kernel");
  } else {
    ex.error("kernel.form must be \"zero\", \"expsum\" or \"table\"");
  }

  StepperConfig& st = rc.stepper;
  st.dt_init = ex.number("stepper.dt_init", st.dt_init);
  st.dt_min = ex.number("stepper.dt_min", st.dt_min);
  st.dt_max = ex.number("stepper.dt_max", st.dt_max);
  st.cfl_safety = ex.number("stepper.cfl_safety", st.cfl_safety);
  st.growth_tol = ex.number("stepper.growth_tol", st.growth_tol);
  st.blowup_threshold = ex.number("stepper.blowup_threshold", st.blowup_threshold);
  st.t_max = ex.number("stepper.t_max", st.t_max);
  const long budget = ex.integer("stepper.history_budget", 0);
  if (budget < 0)
    ex.error("stepper.history_budget must be nonnegative");
  else
    st.history_budget = static_cast<std::size_t>(budget);
  const std::string conv = ex.text("stepper.convolution", "recurrence");
  if (conv == "recurrence")
    st.convolution = ConvolutionMode::recurrence;
  else if (conv == "direct")
    st.convolution = ConvolutionMode::direct;
  else if (conv == "crosscheck")
    st.convolution = ConvolutionMode::crosscheck;
  else
    ex.error("stepper.convolution must be \"recurrence\", \"direct\" or \"crosscheck\"");
  if (rc.kernel_form == KernelSpecForm::tabulated && st.convolution != ConvolutionMode::direct)
    ex.error("tabulated kernels require stepper.convolution = \"direct\"");
  try {
    st.validate();
  } catch (const std::exception& e) {
    ex.error(std::string("stepper: ") + e.what());
  }
  const std::string forcing = ex.text("stepper.forcing", "none");
  if (forcing == "none")
    rc.forcing = ForcingKind::none;
  else if (forcing == "mms_decay_sine")
    rc.forcing = ForcingKind::mms_decay_sine;
  else
    ex.error("stepper.forcing must be \"none\" or \"mms_decay_sine\"");
  if (rc.forcing == ForcingKind::mms_decay_sine && rc.kernel_form == KernelSpecForm::tabulated)
    ex.error("stepper.forcing = \"mms_decay_sine\" needs a zero or expsum kernel");

  const std::string family = ex.text("initial.family", "sine_sum");
  if (family == "sine_sum")
    rc.family = InitialFamily::sine_sum;
  else if (family == "csv")
    rc.family = InitialFamily::csv;
  else
    ex.error("initial.family must be \"sine_sum\" or \"csv\"");
  if (auto c = ex.list("initial.c")) rc.modes = std::move(*c);
  rc.lambda = ex.number("initial.lambda", rc.lambda);
  rc.mu = ex.number("initial.mu", rc.mu);
  rc.u0_csv = ex.text("initial.u0_csv", "");
  rc.u1_csv = ex.text("initial.u1_csv", "");
  if (rc.family == InitialFamily::sine_sum && rc.modes.empty())
    ex.error("initial.c must hold at least one mode amplitude");
  if (rc.family == InitialFamily::csv && rc.u0_csv.empty())
    ex.error("initial.family = \"csv\" needs initial.u0_csv");

  rc.cert_enabled = ex.boolean("certificate.enabled", false);
  rc.cert_required = ex.boolean("certificate.required", false);
  if (rc.cert_required) rc.cert_enabled = true;
  rc.cert_options.m1 = ex.opt_number("certificate.m1");
  rc.cert_options.alpha = ex.opt_number("certificate.alpha");
  rc.cert_options.beta = ex.opt_number("certificate.beta");
  rc.cert_options.t2 = ex.opt_number("certificate.t2");
  rc.cert_options.T0 = ex.opt_number("certificate.T0");
  if (rc.cert_options.m1.has_value() != rc.cert_options.alpha.has_value())
    ex.error("certificate.m1 and certificate.alpha must be given together");
  const std::string pmode = ex.text("certificate.poincare", "discrete");
  if (pmode == "discrete")
    rc.cert_options.poincare = PoincareMode::discrete;
  else if (pmode == "continuum")
    rc.cert_options.poincare = PoincareMode::continuum;
  else
    ex.error("certificate.poincare must be \"discrete\" or \"continuum\"");

  rc.csv_path = ex.text("output.csv", "");
  rc.json_path = ex.text("output.json", "");
  rc.emit_every = static_cast<int>(ex.integer("output.emit_every", 1));
  if (rc.emit_every < 1) ex.error("output.emit_every must be at least 1");

  rc.budget = static_cast<int>(ex.integer("search.budget", rc.budget));
  rc.search.n_modes = static_cast<int>(ex.integer("search.n_modes", rc.search.n_modes));
  rc.search.c_min = ex.number("search.c_min", rc.search.c_min);
  rc.search.c_max = ex.number("search.c_max", rc.search.c_max);
  rc.search.lambda_min = ex.number("search.lambda_min", rc.search.lambda_min);
  rc.search.lambda_max = ex.number("search.lambda_max", rc.search.lambda_max);
  rc.search.mu_min = ex.number("search.mu_min", rc.search.mu_min);
  rc.search.mu_max = ex.number("search.mu_max", rc.search.mu_max);
  if (rc.budget < 1) ex.error("search.budget must be at least 1");
  if (rc.search.n_modes < 1) ex.error("search.n_modes must be at least 1");
  if (!(rc.search.c_max >= rc.search.c_min)) ex.error("search.c_max must be >= search.c_min");

  const long seed = ex.integer("seed", static_cast<long>(rc.seed));
  if (seed < 0)
    ex.error("seed must be nonnegative");
  else
    rc.seed = static_cast<std::uint64_t>(seed);

  ex.finish_unknown();
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return rc;
}

inline RunConfig parse_config_text(const std::string& text) {
  return config_from_raw(cfg::parse_raw(text));
}

inline RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file '" + path + "'"});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace kw
