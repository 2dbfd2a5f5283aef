#include "coagflux/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "coagflux/errors.hpp"
#include "coagflux/grid.hpp"

namespace coagflux {

namespace {

using nlohmann::json;

class Collector {
public:
  void add(const std::string& msg) { errors_.push_back(msg); }
  void check_keys(const json& j, const std::string& prefix,
                  const std::set<std::string>& allowed) {
    if (!j.is_object()) {
      add(prefix + ": expected an object");
      return;
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!allowed.count(it.key()))
        add(prefix + ": unknown key '" + it.key() + "'");
    }
  }
  double num(const json& j, const std::string& key, double fallback,
             const std::string& prefix) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) {
      add(prefix + "." + key + ": expected a number");
      return fallback;
    }
    return j[key].get<double>();
  }
  long integer(const json& j, const std::string& key, long fallback,
               const std::string& prefix) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer()) {
      add(prefix + "." + key + ": expected an integer");
      return fallback;
    }
    return j[key].get<long>();
  }
  bool boolean(const json& j, const std::string& key, bool fallback,
               const std::string& prefix) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_boolean()) {
      add(prefix + "." + key + ": expected a boolean");
      return fallback;
    }
    return j[key].get<bool>();
  }
  std::string str(const json& j, const std::string& key,
                  const std::string& fallback, const std::string& prefix) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_string()) {
      add(prefix + "." + key + ": expected a string");
      return fallback;
    }
    return j[key].get<std::string>();
  }
  std::vector<double> num_array(const json& j, const std::string& key,
                                const std::string& prefix) {
    std::vector<double> out;
    if (!j.contains(key)) return out;
    if (!j[key].is_array()) {
      add(prefix + "." + key + ": expected an array of numbers");
      return out;
    }
    for (const auto& v : j[key]) {
      if (!v.is_number()) {
        add(prefix + "." + key + ": expected numeric entries");
        return out;
      }
      out.push_back(v.get<double>());
    }
    return out;
  }
  bool empty() const { return errors_.empty(); }
  std::string message() const {
    std::ostringstream msg;
    msg << "invalid configuration (" << errors_.size() << " violation"
        << (errors_.size() == 1 ? "" : "s") << "):";
    for (const std::string& e : errors_) msg << "\n  - " << e;
    return msg.str();
  }

private:
  std::vector<std::string> errors_;
};

} // namespace

std::string command_name(Command c) {
  switch (c) {
    case Command::evolve: return "evolve";
    case Command::steady: return "steady";
    case Command::cascade: return "cascade";
    case Command::picard: return "picard";
    case Command::diagnose: return "diagnose";
    case Command::verify_characteristics: return "verify-characteristics";
  }
  return "?";
}

KernelSpec make_kernel(const KernelConfig& kc) {
  if (kc.family == "constant") return KernelSpec::constant_kernel();
  if (kc.family == "product") return KernelSpec::product(kc.a_exp, kc.b_exp);
  if (kc.family == "brownian") return KernelSpec::brownian();
  if (kc.family == "free_molecular") return KernelSpec::free_molecular();
  if (kc.family == "custom") return KernelSpec::custom(kc.gamma, kc.lambda);
  throw ConfigError("unknown kernel family " + kc.family);
}

RunConfig parse_config(const json& doc) {
  Collector errs;
  RunConfig cfg;
  cfg.echo = doc;

  errs.check_keys(doc, "config",
                  {"command", "seed", "workers", "out_dir", "kernel", "grid",
                   "truncation", "cascade", "steady", "picard", "evolve",
                   "diagnostics", "diagnose"});

  const std::string cmd = errs.str(doc, "command", "steady", "config");
  if (cmd == "evolve") cfg.command = Command::evolve;
  else if (cmd == "steady") cfg.command = Command::steady;
  else if (cmd == "cascade") cfg.command = Command::cascade;
  else if (cmd == "picard") cfg.command = Command::picard;
  else if (cmd == "diagnose") cfg.command = Command::diagnose;
  else if (cmd == "verify-characteristics")
    cfg.command = Command::verify_characteristics;
  else errs.add("config.command: unknown command '" + cmd + "'");

  cfg.seed = static_cast<unsigned long>(errs.integer(doc, "seed", 0, "config"));
  cfg.workers = static_cast<int>(errs.integer(doc, "workers", 1, "config"));
  if (cfg.workers < 1) errs.add("config.workers: must be >= 1");
  cfg.out_dir = errs.str(doc, "out_dir", "out", "config");

  if (doc.contains("kernel")) {
    const json& k = doc["kernel"];
    errs.check_keys(k, "kernel",
                    {"family", "a_exp", "b_exp", "gamma", "lambda", "trunc"});
    cfg.kernel.family = errs.str(k, "family", "constant", "kernel");
    cfg.kernel.a_exp = errs.num(k, "a_exp", 0.25, "kernel");
    cfg.kernel.b_exp = errs.num(k, "b_exp", 0.25, "kernel");
    cfg.kernel.gamma = errs.num(k, "gamma", 0.0, "kernel");
    cfg.kernel.lambda = errs.num(k, "lambda", 0.0, "kernel");
    if (k.contains("trunc")) {
      const json& t = k["trunc"];
      errs.check_keys(t, "kernel.trunc", {"a", "A", "sigma", "band"});
      cfg.kernel.trunc_a = errs.num(t, "a", 1e3, "kernel.trunc");
      cfg.kernel.trunc_A = errs.num(t, "A", -1.0, "kernel.trunc");
      cfg.kernel.trunc_sigma = errs.num(t, "sigma", -1.0, "kernel.trunc");
      cfg.kernel.trunc_band = errs.num(t, "band", 0.1, "kernel.trunc");
    }
  }

  if (doc.contains("grid")) {
    const json& g = doc["grid"];
    errs.check_keys(g, "grid", {"x_min", "x_max", "n_cells"});
    cfg.grid.x_min = errs.num(g, "x_min", cfg.grid.x_min, "grid");
    cfg.grid.x_max = errs.num(g, "x_max", cfg.grid.x_max, "grid");
    cfg.grid.n_cells = static_cast<int>(
        errs.integer(g, "n_cells", cfg.grid.n_cells, "grid"));
  }

  if (doc.contains("truncation")) {
    const json& t = doc["truncation"];
    errs.check_keys(t, "truncation", {"epsilon", "a", "R"});
    cfg.truncation.epsilon = errs.num(t, "epsilon", cfg.truncation.epsilon,
                                      "truncation");
    cfg.truncation.a = errs.num(t, "a", -1.0, "truncation");
    cfg.truncation.R = errs.num(t, "R", cfg.truncation.R, "truncation");
  }

  if (doc.contains("cascade")) {
    const json& c = doc["cascade"];
    errs.check_keys(c, "cascade", {"epsilon", "a", "R", "stage_tol"});
    cfg.cascade.epsilon = errs.num_array(c, "epsilon", "cascade");
    cfg.cascade.a = errs.num_array(c, "a", "cascade");
    cfg.cascade.R = errs.num_array(c, "R", "cascade");
    cfg.cascade.stage_tol = errs.num_array(c, "stage_tol", "cascade");
  }

  if (doc.contains("steady")) {
    const json& s = doc["steady"];
    errs.check_keys(s, "steady", {"tol", "max_iters"});
    cfg.steady.tol = errs.num(s, "tol", cfg.steady.tol, "steady");
    cfg.steady.max_iters =
        errs.integer(s, "max_iters", cfg.steady.max_iters, "steady");
  }

  if (doc.contains("picard")) {
    const json& p = doc["picard"];
    errs.check_keys(p, "picard", {"damping", "tol", "max_iters"});
    cfg.picard.damping = errs.num(p, "damping", cfg.picard.damping, "picard");
    cfg.picard.tol = errs.num(p, "tol", cfg.picard.tol, "picard");
    cfg.picard.max_iters =
        errs.integer(p, "max_iters", cfg.picard.max_iters, "picard");
  }

  if (doc.contains("evolve")) {
    const json& e = doc["evolve"];
    errs.check_keys(e, "evolve",
                    {"mode", "t_end", "checkpoints", "epsilon", "safety", "dt_max"});
    cfg.evolve.mode = errs.str(e, "mode", cfg.evolve.mode, "evolve");
    cfg.evolve.t_end = errs.num(e, "t_end", cfg.evolve.t_end, "evolve");
    cfg.evolve.checkpoints = static_cast<int>(
        errs.integer(e, "checkpoints", cfg.evolve.checkpoints, "evolve"));
    cfg.evolve.epsilon = errs.num(e, "epsilon", cfg.evolve.epsilon, "evolve");
    cfg.evolve.safety = errs.num(e, "safety", cfg.evolve.safety, "evolve");
    cfg.evolve.dt_max = errs.num(e, "dt_max", cfg.evolve.dt_max, "evolve");
  }

  if (doc.contains("diagnostics")) {
    const json& d = doc["diagnostics"];
    errs.check_keys(d, "diagnostics",
                    {"enabled", "smallz_lo", "smallz_hi", "plateau_lo",
                     "plateau_hi", "plateau_band", "run_weak", "weak_T",
                     "strong_lo", "strong_hi"});
    cfg.diagnostics.enabled =
        errs.boolean(d, "enabled", cfg.diagnostics.enabled, "diagnostics");
    cfg.diagnostics.smallz_lo =
        errs.num(d, "smallz_lo", cfg.diagnostics.smallz_lo, "diagnostics");
    cfg.diagnostics.smallz_hi =
        errs.num(d, "smallz_hi", cfg.diagnostics.smallz_hi, "diagnostics");
    cfg.diagnostics.plateau_lo =
        errs.num(d, "plateau_lo", cfg.diagnostics.plateau_lo, "diagnostics");
    cfg.diagnostics.plateau_hi =
        errs.num(d, "plateau_hi", cfg.diagnostics.plateau_hi, "diagnostics");
    cfg.diagnostics.plateau_band =
        errs.num(d, "plateau_band", cfg.diagnostics.plateau_band, "diagnostics");
    cfg.diagnostics.run_weak =
        errs.boolean(d, "run_weak", cfg.diagnostics.run_weak, "diagnostics");
    cfg.diagnostics.weak_T =
        errs.num(d, "weak_T", cfg.diagnostics.weak_T, "diagnostics");
    cfg.diagnostics.strong_lo =
        errs.num(d, "strong_lo", cfg.diagnostics.strong_lo, "diagnostics");
    cfg.diagnostics.strong_hi =
        errs.num(d, "strong_hi", cfg.diagnostics.strong_hi, "diagnostics");
  }

  if (doc.contains("diagnose")) {
    const json& d = doc["diagnose"];
    errs.check_keys(d, "diagnose", {"profile_csv"});
    cfg.diagnose_profile = errs.str(d, "profile_csv", "", "diagnose");
  }

  // Cross-field validation: fail with the complete list, never fail-fast.
  const std::set<std::string> families = {"constant", "product", "brownian",
                                          "free_molecular", "custom"};
  double gamma = 0.0, lambda = 0.0;
  bool kernel_known = families.count(cfg.kernel.family) > 0;
  if (!kernel_known) {
    errs.add("kernel.family: unknown family '" + cfg.kernel.family + "'");
  } else {
    KernelSpec probe = make_kernel(cfg.kernel);
    gamma = probe.gamma();
    lambda = probe.lambda();
    if (gamma >= 1.0)
      errs.add("kernel: gelling regime (gamma = " + std::to_string(gamma) +
               " >= 1) is not supported");
    const bool needs_profile = cfg.command == Command::steady ||
                               cfg.command == Command::cascade ||
                               cfg.command == Command::picard ||
                               (cfg.command == Command::evolve &&
                                cfg.evolve.mode == "selfsimilar");
    if (needs_profile && !(std::abs(gamma + 2.0 * lambda) < 1.0))
      errs.add("kernel: |gamma + 2*lambda| = " +
               std::to_string(std::abs(gamma + 2.0 * lambda)) +
               " >= 1: no constant-flux steady state exists, profile "
               "computation refused");
    if (kernel_known && gamma < 1.0) {
      try {
        truncate_kernel(probe, cfg.kernel.trunc_a > 1.0 ? cfg.kernel.trunc_a : 2.0,
                        cfg.kernel.trunc_A, cfg.kernel.trunc_sigma,
                        cfg.kernel.trunc_band);
      } catch (const ConfigError& e) {
        errs.add(std::string("kernel.trunc: ") + e.what());
      }
    }
  }

  if (!(cfg.grid.x_min > 0.0) || !(cfg.grid.x_max > cfg.grid.x_min))
    errs.add("grid: requires 0 < x_min < x_max");
  if (cfg.grid.n_cells < 8) errs.add("grid.n_cells: must be >= 8");

  auto check_stage = [&](double eps, double a, double R, const std::string& where) {
    if (!(eps > 0.0)) errs.add(where + ": epsilon must be positive");
    if (!(a > 1.0)) errs.add(where + ": kernel bound a must exceed 1");
    if (!(R > 2.0 * eps)) errs.add(where + ": requires 2*epsilon < R");
    if (eps < cfg.grid.x_min || 2.0 * R > cfg.grid.x_max)
      errs.add(where + ": grid must cover [epsilon, 2R]");
    // source bump resolution
    if (eps >= cfg.grid.x_min && 2.0 * eps <= cfg.grid.x_max &&
        cfg.grid.x_max > cfg.grid.x_min && cfg.grid.n_cells >= 1) {
      const double per_decade =
          cfg.grid.n_cells / std::log10(cfg.grid.x_max / cfg.grid.x_min);
      if (per_decade * std::log10(2.0) < 4.0)
        errs.add(where + ": source support [epsilon, 2*epsilon] resolved by "
                         "fewer than 4 cells");
    }
  };

  const double default_a = cfg.kernel.trunc_a;
  if (cfg.command == Command::steady ||
      (cfg.command == Command::evolve && cfg.evolve.mode == "selfsimilar")) {
    const double a = cfg.truncation.a > 0.0 ? cfg.truncation.a : default_a;
    check_stage(cfg.truncation.epsilon, a, cfg.truncation.R, "truncation");
  }

  if (cfg.command == Command::cascade) {
    const size_t n = cfg.cascade.epsilon.size();
    if (n == 0) errs.add("cascade: schedule is empty");
    if (cfg.cascade.a.size() != n || cfg.cascade.R.size() != n)
      errs.add("cascade: epsilon[], a[], R[] must have equal length");
    if (!cfg.cascade.stage_tol.empty() && cfg.cascade.stage_tol.size() != n)
      errs.add("cascade.stage_tol: length mismatch");
    for (size_t i = 0; i + 1 < n && i + 1 < cfg.cascade.a.size() &&
                       i + 1 < cfg.cascade.R.size();
         ++i) {
      if (cfg.cascade.epsilon[i + 1] > cfg.cascade.epsilon[i])
        errs.add("cascade.epsilon: must be non-increasing");
      if (cfg.cascade.a[i + 1] < cfg.cascade.a[i])
        errs.add("cascade.a: must be non-decreasing");
      if (cfg.cascade.R[i + 1] < cfg.cascade.R[i])
        errs.add("cascade.R: must be non-decreasing");
    }
    for (size_t i = 0; i < n && i < cfg.cascade.a.size() && i < cfg.cascade.R.size();
         ++i)
      check_stage(cfg.cascade.epsilon[i], cfg.cascade.a[i], cfg.cascade.R[i],
                  "cascade stage " + std::to_string(i));
  }

  if (cfg.command == Command::picard) {
    if (!(cfg.picard.damping > 0.0) || cfg.picard.damping > 1.0)
      errs.add("picard.damping: must lie in (0, 1]");
    if (cfg.picard.max_iters < 1) errs.add("picard.max_iters: must be >= 1");
  }

  if (cfg.command == Command::evolve) {
    if (cfg.evolve.mode != "physical" && cfg.evolve.mode != "selfsimilar")
      errs.add("evolve.mode: must be 'physical' or 'selfsimilar'");
    if (!(cfg.evolve.t_end > 0.0)) errs.add("evolve.t_end: must be positive");
    if (cfg.evolve.checkpoints < 1) errs.add("evolve.checkpoints: must be >= 1");
    if (cfg.evolve.mode == "physical")
      check_stage(cfg.evolve.epsilon, 2.0, cfg.grid.x_max / 2.0, "evolve");
    if (!(cfg.evolve.safety > 0.0) || cfg.evolve.safety > 1.0)
      errs.add("evolve.safety: must lie in (0, 1]");
  }

  if (cfg.command == Command::diagnose && cfg.diagnose_profile.empty())
    errs.add("diagnose.profile_csv: required for the diagnose command");

  if (!errs.empty()) throw ConfigError(errs.message());
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

} // namespace coagflux
