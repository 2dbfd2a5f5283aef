#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "coagflux/grid.hpp"

namespace coagflux {

/// Smooth monotone ramp vanishing below epsilon and equal to 1 above 2*epsilon.
struct TransportCutoff {
  double epsilon = 0.0;
  double operator()(double x) const;
};

/// Smooth monotone ramp equal to 1 below R and vanishing above 2R.
struct GainCutoff {
  double R = 0.0;
  double operator()(double x) const;
};

/// Source bump supported on [epsilon, 2*epsilon] with unit first moment,
/// carried both as an analytic evaluator and as a grid projection whose
/// discrete first moment is renormalized to exactly 1.
struct SourceProfile {
  double epsilon = 0.0;
  GridDensity values;
  double first_moment = 0.0;  // grid first moment after normalization (== 1)

  /// Analytic bump, normalized in closed form so that the exact first moment
  /// is 1. Used by the characteristics verification.
  double density_at(double x) const;
};

/// Throws ConfigError when [epsilon, 2*epsilon] is not inside the grid or is
/// resolved by fewer than 4 cells.
SourceProfile build_source(double epsilon, std::shared_ptr<const SizeGrid> grid);

double cutoff_xi(double epsilon, double x);
double cutoff_zeta(double R, double x);

using KernelFn = std::function<double(double, double)>;

/// Rate of change of a density under coagulation, plus the mass bookkeeping
/// that the grid cannot represent.
struct CoagRate {
  GridDensity rate;            // d f / dt
  double overflow_mass = 0.0;  // mass rate deposited beyond x_max
  double overflow_number = 0.0;
  double gain_deficit = 0.0;   // mass rate suppressed by the gain cutoff
};

/// Pairwise gain/loss sum over cell counts N_i = f_i w_i. Each coalescence
/// event deposits its mass in the cell containing x_i + x_j with a count of
/// (x_i + x_j)/x_m, so mass is conserved exactly and the per-event number
/// defect is O(h^2). Throws DomainError on negative input.
CoagRate apply_coagulation(const KernelFn& kernel, const GridDensity& f,
                           int workers = 1);

/// Same pair sum with the gain multiplied by zeta(x_i + x_j) at deposit time;
/// the loss term is untruncated.
CoagRate apply_truncated_coagulation(const KernelFn& kernel, const GainCutoff& zeta,
                                     const GridDensity& f, int workers = 1);

/// Coagulation mass flux across each grid edge:
///   J(z) = sum over pairs with x_i <= z < x_i + x_j of K(x_i,x_j) x_i N_i N_j.
struct FluxProfile {
  std::shared_ptr<const SizeGrid> grid;
  std::vector<double> values;  // one per edge
};

FluxProfile compute_flux(const KernelFn& kernel, const GridDensity& f);

/// Flux through an arbitrary level z (same pair criterion).
double flux_at(const KernelFn& kernel, const GridDensity& f, double z);

/// Precomputed kernel table and deposit targets for one (grid, kernel) pair.
/// Evaluation is then a pure multiply-add sweep; this is what the evolution
/// and steady-state solvers use.
class CoagTable {
public:
  CoagTable(std::shared_ptr<const SizeGrid> grid, const KernelFn& kernel);
  CoagTable(std::shared_ptr<const SizeGrid> grid, const KernelFn& kernel,
            const GainCutoff& zeta);

  CoagRate apply(const GridDensity& f, int workers = 1) const;

  /// Gain/loss split of the same pair sum: rate_i = gain_count_i / w_i -
  /// loss_per_particle_i * f_i. Used by the loss-implicit steady solver.
  struct SplitRate {
    std::vector<double> gain_count;         // deposits per cell, per time
    std::vector<double> loss_per_particle;  // sum_j K_ij N_j
    double overflow_mass = 0.0;
    double overflow_number = 0.0;
    double gain_deficit = 0.0;
  };
  SplitRate apply_split(const GridDensity& f) const;

  FluxProfile flux(const GridDensity& f) const;
  double flux_at(const GridDensity& f, double z) const;
  /// Flux evaluated at every cell center in one sweep.
  std::vector<double> flux_at_centers(const GridDensity& f) const;

  const std::shared_ptr<const SizeGrid>& grid() const { return grid_; }
  double kernel_value(int i, int j) const { return k_[i * n_ + j]; }

private:
  void build(const KernelFn& kernel, const GainCutoff* zeta);
  void accumulate(const std::vector<double>& counts, int row_begin, int row_end,
                  std::vector<double>& gain, std::vector<double>& loss,
                  double& overflow_mass, double& overflow_number,
                  double& gain_deficit) const;

  std::shared_ptr<const SizeGrid> grid_;
  int n_ = 0;
  std::vector<double> k_;        // n x n kernel values at center pairs
  std::vector<int> deposit_;     // per pair (i<=j): target cell, -1 = overflow
  std::vector<double> factor_;   // per pair: count factor (x_i+x_j)/x_m
  std::vector<double> zeta_s_;   // per pair: gain cutoff at x_i+x_j (1 if none)
  bool has_zeta_ = false;
};

} // namespace coagflux
