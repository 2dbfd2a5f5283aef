#pragma once

#include <functional>
#include <string>
#include <vector>

#include "coagflux/evolution.hpp"
#include "coagflux/steady.hpp"

namespace coagflux {

struct PowerLawFit {
  double slope = 0.0;
  double stderr_slope = 0.0;
  double intercept = 0.0;
  double z_lo = 0.0;
  double z_hi = 0.0;
  int n_points = 0;
};

/// Least-squares slope of ln(window_average(z, b)) against ln z over
/// [z_lo, z_hi]. Throws DomainError when the window holds no usable points.
PowerLawFit fit_smallz_powerlaw(const GridDensity& profile, double z_lo,
                                double z_hi, double b = 8.0 / 9.0);

struct TailFit {
  double L = 0.0;   // decay rate
  double c = 0.0;   // prefactor of c e^{-L xi} xi^{-gamma}
  double r2 = 0.0;
  double xi_lo = 0.0;
  double xi_hi = 0.0;
  int n_points = 0;
  bool exponential_like = false;  // r2 above 0.98 on the selected window
};

/// Linear fit of ln(phi * xi^gamma) against xi on an auto-selected tail
/// window: the suffix above 1e-12 * max(phi) with the best r^2 among windows
/// spanning at least min_span in xi. Throws DomainError when no positive
/// window of the required span exists.
TailFit fit_exponential_tail(const GridDensity& profile, const KernelSpec& spec,
                             double min_span = 3.0);

/// Consistency bound for the pointwise decay: the smallest local log-slope
/// -d ln(phi)/d xi over the fitted tail window.
double tail_decay_bound(const GridDensity& profile, const TailFit& fit);

/// c0 = (int_0^1 dy y^{-(gamma+1)/2} int_1^inf dz z^{-(gamma+3)/2} K(y,z))^{-1/2}.
/// Throws DomainError for kernels without a constant-flux steady state.
double compute_c0(const KernelSpec& spec);
/// Same quadrature for an arbitrary evaluator with the stated exponents.
double compute_c0(const KernelFn& kernel, double gamma, double lambda);

/// Reference prefactor of the far-tail ansatz c e^{-L xi} xi^{-gamma}:
///   c_ref = 2 L / ((1-gamma) * int_0^1 K(y,1-y) (y(1-y))^{-gamma} dy).
double tail_prefactor_reference(const KernelSpec& spec, double L);

/// Test function phi(s, xi), C^1 in time, C^1 compactly supported in size.
struct TestFunction {
  std::function<double(double, double)> value;    // phi(s, xi)
  std::function<double(double, double)> dt;       // d phi / ds
  double support_lo = 0.0;
  double support_hi = 0.0;
  std::string name;
};

/// Five smooth (1+cos)^2-style bumps with compact support in (0, inf),
/// time-modulated by low-order polynomials on [0, T].
std::vector<TestFunction> standard_test_functions(double T);

struct WeakResidualReport {
  double max_residual = 0.0;
  std::vector<double> per_function;
  std::vector<std::string> names;
};

/// Residual of the constant-flux weak form for F(s, xi) = s^-alpha
/// phi(xi s^-beta): both sides are evaluated by tensor quadrature for each
/// test function at checkpoints in (0, T]; residuals are normalized by the
/// largest term of the identity.
WeakResidualReport weak_residual_constant_flux(const GridDensity& profile,
                                               const KernelSpec& spec,
                                               const std::vector<TestFunction>& fns,
                                               double T);

struct StrongResidualReport {
  double weighted_l1 = 0.0;  // mass-weighted L1 over the window
  std::vector<double> z;
  std::vector<double> pointwise;
};

/// Pointwise residual of the smooth-profile equation on [z_lo, z_hi]:
/// gain/loss split at y = x/2 plus the transport terms, with phi' by centered
/// differences.
StrongResidualReport strong_residual(const GridDensity& profile,
                                     const KernelSpec& spec, double z_lo,
                                     double z_hi);
/// Evaluator form, for degenerate kernels in tests and studies.
StrongResidualReport strong_residual(const GridDensity& profile,
                                     const KernelFn& kernel, double gamma,
                                     double z_lo, double z_hi);

struct CollapseReport {
  double distance = 0.0;  // max over time pairs and probes
  double xi_lo = 0.0;
  double xi_hi = 0.0;
  int n_probes = 0;
};

/// Rescales checkpoints of a physical-mode trajectory and measures the sup
/// relative distance of window averages over a common mid window.
CollapseReport collapse_test(const std::vector<EvolutionState>& checkpoints,
                             const KernelSpec& spec,
                             const std::vector<double>& times, double xi_lo,
                             double xi_hi, int n_probes = 25);

/// Everything the artifact asserts about a computed profile, JSON-ready.
struct DiagnosticsReport {
  double smallz_slope = 0.0;
  double smallz_stderr = 0.0;
  double smallz_intercept = 0.0;
  double smallz_z_lo = 0.0;
  double smallz_z_hi = 0.0;
  double plateau_mean = 0.0;
  double plateau_dev = 0.0;
  double tail_L = 0.0;
  double tail_c = 0.0;
  double tail_rho_bound = 0.0;
  double tail_fit_r2 = 0.0;
  double c0 = 0.0;
  double weak_residual = 0.0;
  double strong_residual = 0.0;
  double collapse_distance = 0.0;
  double overflow_fraction = 0.0;
  double mass = 0.0;
  bool has_collapse = false;
  bool has_weak = false;
};

struct DiagnosticsOptions {
  double smallz_z_lo = 0.0;  // 0 selects 10 * epsilon
  double smallz_z_hi = 0.1;
  double plateau_z_lo = 0.0;  // 0 selects 10 * epsilon
  double plateau_z_hi = 0.1;
  double plateau_band = 0.15;
  double weak_T = 2.0;
  bool run_weak = true;
  double strong_z_lo = 0.05;
  double strong_z_hi = 2.0;
  double epsilon = 0.0;  // source scale used for the default windows
};

DiagnosticsReport run_profile_diagnostics(const SteadyReport& report,
                                          const KernelSpec& spec,
                                          const DiagnosticsOptions& options);

} // namespace coagflux
