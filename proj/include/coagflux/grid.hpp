#pragma once

#include <memory>
#include <string>
#include <vector>

#include "coagflux/kernels.hpp"

namespace coagflux {

/// Geometric size mesh on [x_min, x_max]. Cell centers are geometric means of
/// the adjacent edges; densities live at centers and are read as cell averages.
struct SizeGrid {
  double x_min = 0.0;
  double x_max = 0.0;
  int n_cells = 0;
  double ratio = 1.0;           // edges[i+1]/edges[i]
  std::vector<double> edges;    // n_cells + 1, strictly increasing
  std::vector<double> centers;  // n_cells
  std::vector<double> widths;   // n_cells

  /// Index of the cell containing x; -1 below the grid, n_cells at/above x_max.
  int cell_of(double x) const;
};

/// Throws ConfigError on inverted bounds or n_cells < 1.
SizeGrid build_grid(double x_min, double x_max, int n_cells);
std::shared_ptr<const SizeGrid> make_grid(double x_min, double x_max, int n_cells);

/// Nonnegative cell-averaged number density on a SizeGrid. Value semantics;
/// the grid is shared immutable state.
struct GridDensity {
  std::shared_ptr<const SizeGrid> grid;
  std::vector<double> values;

  int size() const { return static_cast<int>(values.size()); }
  double operator[](int i) const { return values[i]; }
  double& operator[](int i) { return values[i]; }

  /// Piecewise log-log interpolation between cell centers (linear fallback
  /// around zeros); 0 outside the grid.
  double value_at(double x) const;
};

GridDensity zero_density(std::shared_ptr<const SizeGrid> grid);

/// Midpoint-rule moment over the grid support: sum x_i^mu f_i w_i.
double moment(const GridDensity& f, double mu);

/// Integral of f over [lo, hi] with midpoint weights and exact partial-cell
/// width splitting at the window endpoints.
double integrate_window(const GridDensity& f, double lo, double hi);

/// Mass below z: integral of x f(x) over (0, z] with partial-cell splitting.
double partial_mass(const GridDensity& f, double z);

/// (1/z) * integral of f over [b z, z]. Throws DomainError when the window
/// misses the grid entirely.
double window_average(const GridDensity& f, double z, double b);

struct MomentExponents {
  double q;  // min{1+gamma+lambda, 1-lambda, 1}
  double p;  // max{gamma+lambda, -lambda}
};
MomentExponents moment_exponents(const KernelSpec& spec);

struct MomentReport {
  std::vector<double> orders;
  std::vector<double> values;
  double q = 0.0;
  double p = 0.0;
};
MomentReport moment_report(const GridDensity& f, const std::vector<double>& orders,
                           const KernelSpec& spec);

/// Log-log resample onto a target grid; zero outside the source support.
GridDensity resample(const GridDensity& f, std::shared_ptr<const SizeGrid> target);

} // namespace coagflux
