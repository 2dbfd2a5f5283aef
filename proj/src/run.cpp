#include "coagflux/run.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "coagflux/characteristics.hpp"
#include "coagflux/diagnostics.hpp"
#include "coagflux/errors.hpp"
#include "coagflux/io.hpp"
#include "coagflux/quadrature.hpp"
#include "coagflux/steady.hpp"

namespace coagflux {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// NaN/Inf are forbidden in result files; non-finite values become a status.
void put_num(json& j, const std::string& key, double v) {
  if (std::isfinite(v))
    j[key] = v;
  else
    j[key + "_status"] = std::isnan(v) ? "nan" : "inf";
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

json stage_history_json(const SteadyReport& rep) {
  json arr = json::array();
  for (const StageRecord& rec : rep.stage_history) {
    json s;
    put_num(s, "epsilon", rec.params.epsilon);
    put_num(s, "a", rec.params.a);
    put_num(s, "R", rec.params.R);
    put_num(s, "residual", rec.residual);
    put_num(s, "mass", rec.mass);
    s["iterations"] = rec.iterations;
    put_num(s, "drift_from_previous", rec.drift_from_previous);
    s["converged"] = rec.converged;
    arr.push_back(s);
  }
  return arr;
}

json diagnostics_json(const DiagnosticsReport& d) {
  json j;
  put_num(j, "smallz_slope", d.smallz_slope);
  put_num(j, "smallz_stderr", d.smallz_stderr);
  put_num(j, "smallz_intercept", d.smallz_intercept);
  put_num(j, "smallz_z_lo", d.smallz_z_lo);
  put_num(j, "smallz_z_hi", d.smallz_z_hi);
  put_num(j, "plateau_mean", d.plateau_mean);
  put_num(j, "plateau_dev", d.plateau_dev);
  put_num(j, "tail_L", d.tail_L);
  put_num(j, "tail_c", d.tail_c);
  put_num(j, "tail_rho_bound", d.tail_rho_bound);
  put_num(j, "tail_fit_r2", d.tail_fit_r2);
  put_num(j, "c0", d.c0);
  if (d.has_weak) put_num(j, "weak_residual", d.weak_residual);
  put_num(j, "strong_residual", d.strong_residual);
  if (d.has_collapse) put_num(j, "collapse_distance", d.collapse_distance);
  put_num(j, "overflow_fraction", d.overflow_fraction);
  put_num(j, "mass", d.mass);
  return j;
}

json steady_report_json(const SteadyReport& rep) {
  json j;
  put_num(j, "mass", rep.mass);
  put_num(j, "residual_norm", rep.residual_norm);
  j["iterations"] = rep.iterations;
  put_num(j, "max_mass_seen", rep.max_mass_seen);
  put_num(j, "overflow_mass", rep.overflow_mass);
  put_num(j, "gain_deficit", rep.gain_deficit);
  put_num(j, "transport_outflow", rep.transport_outflow);
  if (std::isfinite(rep.identity_defect))
    put_num(j, "identity_defect", rep.identity_defect);
  j["normalized"] = rep.normalized;
  j["stage_history"] = stage_history_json(rep);
  return j;
}

void write_plot_csv(const fs::path& path, const SteadyReport& rep,
                    const KernelSpec& spec, const DiagnosticsReport& d) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  out << "z,phi,J,window_average,powerlaw_fit,tail_fit\n";
  const SizeGrid& g = *rep.profile.grid;
  const double b = 8.0 / 9.0;
  for (int i = 0; i < g.n_cells; ++i) {
    const double z = g.centers[i];
    const double j_mid = 0.5 * (rep.flux.values[i] + rep.flux.values[i + 1]);
    double wavg = 0.0;
    if (b * z > g.x_min && z < g.x_max) wavg = window_average(rep.profile, z, b);
    const double powerlaw =
        (z >= d.smallz_z_lo && z <= d.smallz_z_hi)
            ? std::exp(d.smallz_intercept + d.smallz_slope * std::log(z))
            : 0.0;
    const double tail =
        d.tail_L > 0.0 ? d.tail_c * std::exp(-d.tail_L * z) *
                             std::pow(z, -spec.gamma())
                       : 0.0;
    out << format_double(z) << ',' << format_double(rep.profile.values[i]) << ','
        << format_double(j_mid) << ',' << format_double(wavg) << ','
        << format_double(powerlaw) << ',' << format_double(tail) << '\n';
  }
}

DiagnosticsOptions diag_options(const RunConfig& cfg, double epsilon) {
  DiagnosticsOptions opt;
  opt.smallz_z_lo = cfg.diagnostics.smallz_lo;
  opt.smallz_z_hi = cfg.diagnostics.smallz_hi;
  opt.plateau_z_lo = cfg.diagnostics.plateau_lo;
  opt.plateau_z_hi = cfg.diagnostics.plateau_hi;
  opt.plateau_band = cfg.diagnostics.plateau_band;
  opt.run_weak = cfg.diagnostics.run_weak;
  opt.weak_T = cfg.diagnostics.weak_T;
  opt.strong_z_lo = cfg.diagnostics.strong_lo;
  opt.strong_z_hi = cfg.diagnostics.strong_hi;
  opt.epsilon = epsilon;
  return opt;
}

SteadySolveOptions steady_options(const RunConfig& cfg) {
  SteadySolveOptions opt;
  opt.tol = cfg.steady.tol;
  opt.max_iters = cfg.steady.max_iters;
  opt.workers = cfg.workers;
  return opt;
}

int finish_profile_command(const RunConfig& cfg, const fs::path& out_dir,
                           const KernelSpec& spec, const SteadyReport& rep,
                           double epsilon, json& report) {
  write_profile_csv(out_dir / "profile.csv", rep.profile);
  write_flux_csv(out_dir / "flux.csv", rep.flux);
  int code = 0;
  if (cfg.diagnostics.enabled) {
    const DiagnosticsReport d =
        run_profile_diagnostics(rep, spec, diag_options(cfg, epsilon));
    report["diagnostics"] = diagnostics_json(d);
    write_plot_csv(out_dir / "diagnostics.csv", rep, spec, d);
    const double expected_slope = spec.scaling_exponents().small_size_exponent;
    const bool plateau_ok =
        std::abs(d.plateau_mean - 1.0) <= cfg.diagnostics.plateau_band;
    const bool slope_ok = std::abs(d.smallz_slope - expected_slope) <= 0.15;
    report["checks"] = {{"plateau_ok", plateau_ok}, {"slope_ok", slope_ok}};
    if (!plateau_ok || !slope_ok) code = 4;
  }
  write_json(out_dir / "report.json", report);
  return code;
}

int run_steady(const RunConfig& cfg, const fs::path& out_dir) {
  const KernelSpec spec = make_kernel(cfg.kernel);
  auto grid = make_grid(cfg.grid.x_min, cfg.grid.x_max, cfg.grid.n_cells);
  TruncationParams params;
  params.epsilon = cfg.truncation.epsilon;
  params.a = cfg.truncation.a > 0.0 ? cfg.truncation.a : cfg.kernel.trunc_a;
  params.R = cfg.truncation.R;
  params.level_A = cfg.kernel.trunc_A;
  params.sigma = cfg.kernel.trunc_sigma;
  params.taper_band = cfg.kernel.trunc_band;
  const SteadyReport rep = find_truncated_steady(spec, grid, params,
                                                 zero_density(grid),
                                                 steady_options(cfg));
  json report = steady_report_json(rep);
  return finish_profile_command(cfg, out_dir, spec, rep, params.epsilon, report);
}

int run_cascade_cmd(const RunConfig& cfg, const fs::path& out_dir) {
  const KernelSpec spec = make_kernel(cfg.kernel);
  auto grid = make_grid(cfg.grid.x_min, cfg.grid.x_max, cfg.grid.n_cells);
  CascadeSchedule schedule;
  for (size_t i = 0; i < cfg.cascade.epsilon.size(); ++i) {
    TruncationParams p;
    p.epsilon = cfg.cascade.epsilon[i];
    p.a = cfg.cascade.a[i];
    p.R = cfg.cascade.R[i];
    p.level_A = cfg.kernel.trunc_A;
    p.sigma = cfg.kernel.trunc_sigma;
    p.taper_band = cfg.kernel.trunc_band;
    schedule.stages.push_back(p);
  }
  schedule.stage_tol = cfg.cascade.stage_tol;
  SteadySolveOptions opts = steady_options(cfg);
  const SteadyReport rep = run_cascade(spec, grid, schedule, opts);
  CoagTable table(grid, [&spec](double x, double y) { return spec.eval(x, y); });
  for (size_t k = 0; k < rep.stage_profiles.size(); ++k) {
    char name[64];
    std::snprintf(name, sizeof(name), "profile_stage%02zu.csv", k);
    write_profile_csv(out_dir / name, rep.stage_profiles[k]);
    std::snprintf(name, sizeof(name), "flux_stage%02zu.csv", k);
    write_flux_csv(out_dir / name, table.flux(rep.stage_profiles[k]));
  }
  json report = steady_report_json(rep);
  return finish_profile_command(cfg, out_dir, spec, rep,
                                schedule.stages.back().epsilon, report);
}

int run_picard(const RunConfig& cfg, const fs::path& out_dir) {
  const KernelSpec spec = make_kernel(cfg.kernel);
  auto grid = make_grid(cfg.grid.x_min, cfg.grid.x_max, cfg.grid.n_cells);
  PicardOptions opts;
  opts.damping = cfg.picard.damping;
  opts.tol = cfg.picard.tol;
  opts.max_iters = cfg.picard.max_iters;
  opts.workers = cfg.workers;
  const GridDensity init = powerlaw_seed(grid, compute_c0(spec), spec.gamma());
  const SteadyReport rep = profile_picard(spec, grid, opts, init);
  json report = steady_report_json(rep);
  // The picard identity builds the unit flux in; epsilon-based windows fall
  // back to the grid floor.
  const double pseudo_eps = cfg.grid.x_min;
  return finish_profile_command(cfg, out_dir, spec, rep, pseudo_eps, report);
}

int run_evolve(const RunConfig& cfg, const fs::path& out_dir) {
  const KernelSpec spec = make_kernel(cfg.kernel);
  auto grid = make_grid(cfg.grid.x_min, cfg.grid.x_max, cfg.grid.n_cells);
  StepControl control;
  control.safety = cfg.evolve.safety;
  control.dt_max = cfg.evolve.dt_max;

  Trajectory traj;
  if (cfg.evolve.mode == "physical") {
    PhysicalSystem sys(spec, grid, cfg.evolve.epsilon, cfg.workers);
    EvolutionState st;
    st.density = zero_density(grid);
    traj = evolve(sys, st, cfg.evolve.t_end, control,
                  geometric_checkpoints(cfg.evolve.t_end / 64.0, cfg.evolve.t_end,
                                        cfg.evolve.checkpoints));
  } else {
    TruncationParams params;
    params.epsilon = cfg.truncation.epsilon;
    params.a = cfg.truncation.a > 0.0 ? cfg.truncation.a : cfg.kernel.trunc_a;
    params.R = cfg.truncation.R;
    params.level_A = cfg.kernel.trunc_A;
    params.sigma = cfg.kernel.trunc_sigma;
    params.taper_band = cfg.kernel.trunc_band;
    SelfSimilarSystem sys(spec, grid, params, cfg.workers);
    EvolutionState st;
    st.density = zero_density(grid);
    traj = evolve(sys, st, cfg.evolve.t_end, control,
                  geometric_checkpoints(cfg.evolve.t_end / 64.0, cfg.evolve.t_end,
                                        cfg.evolve.checkpoints));
  }

  json manifest;
  manifest["mode"] = cfg.evolve.mode;
  json arr = json::array();
  for (size_t k = 0; k < traj.checkpoints.size(); ++k) {
    const EvolutionState& st = traj.checkpoints[k];
    char name[64];
    std::snprintf(name, sizeof(name), "checkpoint_%02zu.csv", k);
    write_profile_csv(out_dir / name, st.density);
    json c;
    c["file"] = name;
    put_num(c, "time", st.time);
    put_num(c, "moment0", moment(st.density, 0.0));
    put_num(c, "moment1", moment(st.density, 1.0));
    put_num(c, "overflow_mass", st.overflow_mass);
    put_num(c, "clipped_mass", st.clipped_mass);
    put_num(c, "transport_outflow", st.transport_outflow);
    put_num(c, "gain_deficit", st.gain_deficit);
    arr.push_back(c);
  }
  manifest["checkpoints"] = arr;
  json stats;
  stats["steps"] = traj.stats.steps;
  put_num(stats, "dt_min", traj.stats.dt_min_used);
  put_num(stats, "dt_max", traj.stats.dt_max_used);
  put_num(stats, "dt_last", traj.stats.dt_last);
  manifest["dt_stats"] = stats;
  write_json(out_dir / "checkpoints.json", manifest);
  return 0;
}

int run_diagnose(const RunConfig& cfg, const fs::path& out_dir) {
  const fs::path profile_path = cfg.diagnose_profile;
  if (!fs::exists(profile_path))
    throw ConfigError("profile file not found: " + profile_path.string());
  const KernelSpec spec = make_kernel(cfg.kernel);
  SteadyReport rep;
  rep.profile = read_profile_csv(profile_path);
  rep.mass = moment(rep.profile, 1.0);
  CoagTable table(rep.profile.grid,
                  [&spec](double x, double y) { return spec.eval(x, y); });
  rep.flux = table.flux(rep.profile);
  json report;
  put_num(report, "mass", rep.mass);
  const double eps_guess = rep.profile.grid->x_min;
  return finish_profile_command(cfg, out_dir, spec, rep, eps_guess, report);
}

int run_verify_characteristics(const RunConfig& cfg, const fs::path& out_dir) {
  const KernelSpec spec = make_kernel(cfg.kernel);
  const double eps = cfg.truncation.epsilon;
  const FlowContext ctx(spec.gamma(), eps);
  const double beta = ctx.beta;

  // Semigroup and closed-form checks on a deterministic sample set.
  double semigroup_err = 0.0, closed_form_err = 0.0, merge_err = 0.0;
  const double taus[3] = {0.2, 0.7, 1.5};
  for (int i = 1; i <= 12; ++i) {
    const double x = eps * std::pow(10.0, 0.4 * i);
    for (double tau : taus) {
      const double x_two = flow_position(ctx, tau, flow_position(ctx, tau, x));
      const double x_sum = flow_position(ctx, 2.0 * tau, x);
      semigroup_err =
          std::max(semigroup_err, std::abs(x_two - x_sum) / std::abs(x_sum));
      if (x * std::exp(-beta * tau) >= 2.0 * eps) {
        const double exact = x * std::exp(-beta * tau);
        closed_form_err = std::max(
            closed_form_err, std::abs(flow_position(ctx, tau, x) - exact) / exact);
      }
      const double y = 1.7 * x;
      const double l = merge_coordinate(ctx, tau, x, y);
      const double resid = std::abs(flow_position(ctx, tau, l) -
                                    flow_position(ctx, tau, x) -
                                    flow_position(ctx, tau, y));
      merge_err = std::max(
          merge_err, resid / (flow_position(ctx, tau, x) +
                              flow_position(ctx, tau, y)));
    }
  }

  // Change-of-variables identity for the pulled-back source.
  auto grid = make_grid(eps / 4.0, 64.0 * eps, 64);
  const SourceProfile src = build_source(eps, grid);
  auto phi = [eps](double x) { return std::cos(x / (3.0 * eps)) + 1.5; };
  // source magnitudes scale like 1/eps; keep the quadrature tolerance relative
  const double lhs = adaptive_simpson(
      [&](double x) { return phi(x) * src.density_at(x); }, eps, 2.0 * eps,
      1e-10 / eps, 30);
  double cov_err = 0.0;
  for (double tau : {0.3, 1.0}) {
    const double t = std::exp(tau);
    const double hi = 2.0 * eps * std::exp(beta * tau) * 1.05;
    const double rhs = adaptive_simpson(
        [&](double x) {
          return phi(flow_position(ctx, tau, x)) *
                 std::exp(flow_damping(ctx, tau, x)) *
                 transformed_source(ctx, src, t, x);
        },
        eps, hi, 1e-8 * std::abs(lhs), 30);
    cov_err = std::max(cov_err, std::abs(rhs - lhs) / std::abs(lhs));
  }

  json report;
  put_num(report, "semigroup_error", semigroup_err);
  put_num(report, "closed_form_error", closed_form_err);
  put_num(report, "merge_identity_error", merge_err);
  put_num(report, "change_of_variables_error", cov_err);
  const bool pass = semigroup_err <= 1e-9 && closed_form_err <= 1e-12 &&
                    merge_err <= 1e-10 && cov_err <= 1e-6;
  report["pass"] = pass;
  write_json(out_dir / "characteristics.json", report);
  return pass ? 0 : 4;
}

} // namespace

int run(const RunConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const auto t_start = std::chrono::steady_clock::now();

  json manifest;
  manifest["tool"] = "coagflux";
  manifest["version"] = kVersion;
  manifest["command"] = command_name(cfg.command);
  manifest["seed"] = cfg.seed;
  manifest["workers"] = cfg.workers;
  manifest["config"] = cfg.echo;

  int code = 0;
  switch (cfg.command) {
    case Command::steady: code = run_steady(cfg, out_dir); break;
    case Command::cascade: code = run_cascade_cmd(cfg, out_dir); break;
    case Command::picard: code = run_picard(cfg, out_dir); break;
    case Command::evolve: code = run_evolve(cfg, out_dir); break;
    case Command::diagnose: code = run_diagnose(cfg, out_dir); break;
    case Command::verify_characteristics:
      code = run_verify_characteristics(cfg, out_dir);
      break;
  }

  const auto t_end = std::chrono::steady_clock::now();
  manifest["elapsed_seconds"] =
      std::chrono::duration<double>(t_end - t_start).count();
  write_json(out_dir / "manifest.json", manifest);
  return code;
}

} // namespace coagflux
