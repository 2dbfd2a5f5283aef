#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "coagflux/kernels.hpp"

namespace coagflux {

enum class Command { evolve, steady, cascade, picard, diagnose, verify_characteristics };

std::string command_name(Command c);

struct KernelConfig {
  std::string family = "constant";
  double a_exp = 0.25;
  double b_exp = 0.25;
  double gamma = 0.0;   // custom family
  double lambda = 0.0;  // custom family
  double trunc_a = 1e3;
  double trunc_A = -1.0;      // -1 = kernel default
  double trunc_sigma = -1.0;  // -1 = kernel default
  double trunc_band = 0.1;
};

struct GridConfig {
  double x_min = 1e-4;
  double x_max = 1e3;
  int n_cells = 192;
};

struct TruncationConfig {
  double epsilon = 1e-3;
  double a = -1.0;  // -1 = kernel.trunc.a
  double R = 100.0;
};

struct CascadeConfig {
  std::vector<double> epsilon;
  std::vector<double> a;
  std::vector<double> R;
  std::vector<double> stage_tol;
};

struct SteadyConfig {
  double tol = 1e-8;
  long max_iters = 400000;
};

struct PicardConfig {
  double damping = 0.3;
  double tol = 1e-10;
  long max_iters = 20000;
};

struct EvolveConfig {
  std::string mode = "physical";  // or "selfsimilar"
  double t_end = 10.0;
  int checkpoints = 8;
  double epsilon = 1e-2;  // physical-mode source scale
  double safety = 0.8;
  double dt_max = 1e30;
};

struct DiagnosticsConfig {
  bool enabled = true;
  double smallz_lo = 0.0;  // 0 = 10*epsilon
  double smallz_hi = 0.1;
  double plateau_lo = 0.0;  // 0 = 10*epsilon
  double plateau_hi = 0.1;
  double plateau_band = 0.15;
  bool run_weak = true;
  double weak_T = 2.0;
  double strong_lo = 0.05;
  double strong_hi = 2.0;
};

struct RunConfig {
  Command command = Command::steady;
  unsigned long seed = 0;
  int workers = 1;
  std::string out_dir = "out";
  KernelConfig kernel;
  GridConfig grid;
  TruncationConfig truncation;
  CascadeConfig cascade;
  SteadyConfig steady;
  PicardConfig picard;
  EvolveConfig evolve;
  DiagnosticsConfig diagnostics;
  std::string diagnose_profile;
  nlohmann::json echo;  // raw document, echoed into the manifest
};

/// Parses and fully validates a config document. Collects every violation
/// (unknown keys are errors) and throws a single ConfigError listing them.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// Builds the kernel described by the config (already validated).
KernelSpec make_kernel(const KernelConfig& kc);

} // namespace coagflux
