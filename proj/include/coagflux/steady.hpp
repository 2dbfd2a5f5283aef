#pragma once

#include <limits>
#include <memory>
#include <vector>

#include "coagflux/evolution.hpp"

namespace coagflux {

struct StageRecord {
  TruncationParams params;
  double residual = 0.0;
  double mass = 0.0;
  long iterations = 0;
  /// Max relative change of the window average against the previous stage on
  /// the drift probe window; NaN for the first stage.
  double drift_from_previous = 0.0;
  bool converged = false;
};

/// Truncation removal schedule: epsilon non-increasing, a and R non-decreasing.
struct CascadeSchedule {
  std::vector<TruncationParams> stages;
  std::vector<double> stage_tol;
};

struct SteadyReport {
  GridDensity profile;
  double residual_norm = 0.0;
  /// First moment of the final-stage profile before any normalization.
  double mass = 0.0;
  FluxProfile flux;
  long iterations = 0;
  std::vector<StageRecord> stage_history;
  /// Invariant-region monitor: max of the first moment along pseudo-time.
  double max_mass_seen = 0.0;
  /// Raw per-stage profiles (cascade only), in schedule order.
  std::vector<GridDensity> stage_profiles;
  double overflow_mass = 0.0;
  double gain_deficit = 0.0;
  double transport_outflow = 0.0;
  bool normalized = false;
  /// Normalized center-convention defect of the flux identity (picard only).
  double identity_defect = std::numeric_limits<double>::quiet_NaN();
};

struct SteadySolveOptions {
  double tol = 1e-8;        // mass-weighted L1 norm of the rate
  long max_iters = 400000;  // relaxation sweep budget
  int workers = 1;
  double drift_z_lo = 0.1;  // probe window for cascade stage drift
  double drift_z_hi = 1.0;
  bool normalize = true;    // rescale the final cascade profile to unit mass
};

/// Pseudo-time relaxation of the truncated self-similar equation until the
/// mass-weighted L1 norm of the rate drops below tol. Requires a
/// flux-admissible kernel and a grid covering [epsilon, 2R]. Throws
/// NumericError with a residual trace on non-convergence.
SteadyReport find_truncated_steady(const KernelSpec& spec,
                                   std::shared_ptr<const SizeGrid> grid,
                                   const TruncationParams& params,
                                   const GridDensity& init,
                                   const SteadySolveOptions& options);

/// Warm-started sequence of truncated solves along the schedule. The final
/// profile is rescaled to unit mass (scaling invariance) when
/// options.normalize is set; report.mass keeps the raw final-stage moment.
SteadyReport run_cascade(const KernelSpec& spec,
                         std::shared_ptr<const SizeGrid> grid,
                         const CascadeSchedule& schedule,
                         const SteadySolveOptions& options);

struct PicardOptions {
  double damping = 0.3;  // scales the pseudo-time step of the damped sweep
  double tol = 1e-9;     // mass-weighted L1 norm of the sweep update rate
  long max_iters = 200000;
  int oscillation_window = 30;
  int workers = 1;
};

/// Solves the profile flux identity directly: the untruncated kernel with a
/// unit mass flux injected at the grid floor (x_min plays the role of the
/// vanishing small-size scale), relaxed by damped loss-implicit sweeps. The
/// converged state satisfies, cell by cell,
///   J_phi(z) = 1 - int_0^z x phi dx + (1-gamma)/... * z^2 phi(z)
/// up to the upwind quadrature convention; the report carries the normalized
/// defect of that identity. The textbook pointwise rearrangement of the
/// identity is repulsive (the quadratic flux gives the amplitude mode a gain
/// of two, and small cells amplify flux offsets by z^-2), hence the relaxed
/// sweep form. Used as a cross-check oracle for the truncation cascade.
SteadyReport profile_picard(const KernelSpec& spec,
                            std::shared_ptr<const SizeGrid> grid,
                            const PicardOptions& options, const GridDensity& init);

struct PlateauStats {
  double mean = 0.0;
  double dev = 0.0;
  double z_lo = 0.0;
  double z_hi = 0.0;
  int n_edges = 0;
  double band = 0.0;
  bool pass = false;
};

/// Mean and deviation of J over [z_lo, z_hi]; passes iff |mean - 1| <= band.
PlateauStats check_flux_boundary(const SteadyReport& report, double z_lo,
                                 double z_hi, double band);

/// Rescale a profile so its first moment is 1, using the scaling invariance
/// of the profile equation (size rescale by m^(1/(1-gamma))).
GridDensity normalize_profile(const GridDensity& f, double gamma);

/// Picard starting guess: the critical power law c0 z^(-(3+gamma)/2) with a
/// unit-scale exponential rolloff, so the seed carries mass of order one.
GridDensity powerlaw_seed(std::shared_ptr<const SizeGrid> grid, double c0,
                          double gamma);

} // namespace coagflux
