#pragma once

#include <limits>
#include <memory>
#include <vector>

#include "coagflux/coagulation.hpp"
#include "coagflux/grid.hpp"
#include "coagflux/kernels.hpp"

namespace coagflux {

enum class EvolutionMode { physical, selfsimilar_truncated };

/// Edge reconstruction for the conservative transport term. First-order
/// upwinding is robust for explicit trajectories; the geometric-mean edge
/// value is second order in log size and keeps exponential tails sharp, used
/// by the steady-state relaxation.
enum class TransportScheme { upwind, geometric_edge };

/// Truncation triple (epsilon, a, R) plus the bounded-kernel knobs (A, sigma).
/// Negative level_A / sigma pick the kernel-dependent defaults.
struct TruncationParams {
  double epsilon = 0.0;
  double a = 0.0;
  double R = 0.0;
  double level_A = -1.0;
  double sigma = -1.0;
  double taper_band = 0.1;
};

struct StepControl {
  double dt_max = std::numeric_limits<double>::infinity();
  double safety = 0.8;  // max fraction of a cell's content lost per step
  /// Mass (absolute) the positivity clip may add per step before the step is
  /// rejected and retried with half the step size.
  double tol_positivity = 1e-12;
  double dt_min = 1e-13;
  long max_steps = 200000000;
};

struct EvolutionState {
  double time = 0.0;  // t (physical) or tau (self-similar)
  GridDensity density;
  EvolutionMode mode = EvolutionMode::physical;
  double overflow_mass = 0.0;       // cumulative mass lost past x_max
  double clipped_mass = 0.0;        // cumulative mass added by positivity clips
  double transport_outflow = 0.0;   // cumulative mass advected below x_min
  double gain_deficit = 0.0;        // cumulative mass removed by the gain cutoff
};

struct RhsResult {
  GridDensity rate;
  double overflow_mass = 0.0;
  double overflow_number = 0.0;
  double gain_deficit = 0.0;
  double transport_outflow = 0.0;
};

/// d/dt f = K[f] + eta on a fixed grid.
class PhysicalSystem {
public:
  PhysicalSystem(const KernelSpec& spec, std::shared_ptr<const SizeGrid> grid,
                 double source_epsilon, int workers = 1);
  /// Assembled from explicit parts (degenerate kernels or sources allowed).
  PhysicalSystem(std::shared_ptr<const SizeGrid> grid, const KernelFn& kernel,
                 GridDensity source, int workers = 1);

  RhsResult rhs(const GridDensity& f) const;

  const GridDensity& source() const { return source_; }
  const std::shared_ptr<const SizeGrid>& grid() const { return grid_; }
  EvolutionMode mode() const { return EvolutionMode::physical; }

private:
  std::shared_ptr<const SizeGrid> grid_;
  GridDensity source_;
  CoagTable table_;
  int workers_;
};

/// d/dtau phi = -phi + beta (1/xi) d_xi(xi^2 Xi_eps phi) + K_{a,R}[phi] + eta,
/// with the transport divergence in conservative upwind form (drift toward
/// small sizes).
class SelfSimilarSystem {
public:
  SelfSimilarSystem(const KernelSpec& spec, std::shared_ptr<const SizeGrid> grid,
                    const TruncationParams& params, int workers = 1,
                    TransportScheme scheme = TransportScheme::upwind);
  /// Assembled from explicit parts. xi_epsilon <= 0 disables the small-size
  /// cutoff (transport active on the whole grid); xi_epsilon >= x_max freezes
  /// transport entirely.
  SelfSimilarSystem(std::shared_ptr<const SizeGrid> grid, double gamma,
                    const KernelFn& kernel, const GainCutoff& zeta,
                    double xi_epsilon, GridDensity source, int workers = 1,
                    TransportScheme scheme = TransportScheme::upwind);

  RhsResult rhs(const GridDensity& phi) const;

  /// Production/sink split of the same right-hand side:
  /// rate_i = production_i - sink_i * phi_i with both parts nonnegative.
  struct SplitRhs {
    std::vector<double> production;
    std::vector<double> sink;
    double overflow_mass = 0.0;
    double gain_deficit = 0.0;
    double transport_outflow = 0.0;
  };
  SplitRhs rhs_split(const GridDensity& phi) const;

  const GridDensity& source() const { return source_; }
  const std::shared_ptr<const SizeGrid>& grid() const { return grid_; }
  const CoagTable& table() const { return table_; }
  double beta() const { return beta_; }
  EvolutionMode mode() const { return EvolutionMode::selfsimilar_truncated; }

private:
  void init_transport(double xi_epsilon);
  double edge_value(const GridDensity& phi, int e) const;

  std::shared_ptr<const SizeGrid> grid_;
  double beta_ = 0.0;
  GridDensity source_;
  CoagTable table_;
  std::vector<double> edge_coeff_;  // beta * e^2 * Xi_eps(e) per edge
  TransportScheme scheme_ = TransportScheme::upwind;
  int workers_;
};

RhsResult rhs_physical(const PhysicalSystem& sys, const GridDensity& f);
RhsResult rhs_selfsimilar(const SelfSimilarSystem& sys, const GridDensity& phi);

struct StepStats {
  long steps = 0;
  double dt_min_used = std::numeric_limits<double>::infinity();
  double dt_max_used = 0.0;
  double dt_last = 0.0;
};

struct Trajectory {
  std::vector<EvolutionState> checkpoints;
  StepStats stats;
};

/// Explicit Heun with positivity clipping and an adaptive step chosen so no
/// cell loses more than safety x its content per step. Checkpoint times must
/// be increasing and end at or before t_end; the state at t_end is always the
/// last checkpoint. Throws NumericError on step-size collapse.
template <class System>
Trajectory evolve(const System& sys, EvolutionState state, double t_end,
                  const StepControl& control,
                  std::vector<double> checkpoint_times = {});

/// phi_hat(xi) = t^alpha f(xi t^beta), carried exactly on the rescaled grid.
GridDensity rescale_physical(const GridDensity& f, double t, const KernelSpec& spec);

std::vector<double> geometric_checkpoints(double t0, double t1, int count);

} // namespace coagflux
