#include "coagflux/grid.hpp"

#include <algorithm>
#include <cmath>

#include "coagflux/errors.hpp"

namespace coagflux {

int SizeGrid::cell_of(double x) const {
  if (x < x_min) return -1;
  if (x >= x_max) return n_cells;
  int idx = static_cast<int>(std::upper_bound(edges.begin(), edges.end(), x) -
                             edges.begin()) -
            1;
  return std::clamp(idx, 0, n_cells - 1);
}

SizeGrid build_grid(double x_min, double x_max, int n_cells) {
  if (!(x_min > 0.0) || !(x_max > x_min))
    throw ConfigError("grid requires 0 < x_min < x_max");
  if (n_cells < 1) throw ConfigError("grid requires at least one cell");
  SizeGrid g;
  g.x_min = x_min;
  g.x_max = x_max;
  g.n_cells = n_cells;
  g.edges.resize(n_cells + 1);
  const double log_lo = std::log(x_min), log_hi = std::log(x_max);
  for (int i = 0; i <= n_cells; ++i)
    g.edges[i] = std::exp(log_lo + (log_hi - log_lo) * i / n_cells);
  g.edges.front() = x_min;
  g.edges.back() = x_max;
  g.ratio = std::exp((log_hi - log_lo) / n_cells);
  g.centers.resize(n_cells);
  g.widths.resize(n_cells);
  for (int i = 0; i < n_cells; ++i) {
    g.centers[i] = std::sqrt(g.edges[i] * g.edges[i + 1]);
    g.widths[i] = g.edges[i + 1] - g.edges[i];
  }
  return g;
}

std::shared_ptr<const SizeGrid> make_grid(double x_min, double x_max, int n_cells) {
  return std::make_shared<const SizeGrid>(build_grid(x_min, x_max, n_cells));
}

GridDensity zero_density(std::shared_ptr<const SizeGrid> grid) {
  GridDensity f;
  f.values.assign(grid->n_cells, 0.0);
  f.grid = std::move(grid);
  return f;
}

double GridDensity::value_at(double x) const {
  const SizeGrid& g = *grid;
  if (x < g.x_min || x >= g.x_max) return 0.0;
  const int i = g.cell_of(x);
  // locate neighbour center pair around x
  int lo = i, hi = i;
  if (x >= g.centers[i]) {
    hi = std::min(i + 1, g.n_cells - 1);
  } else {
    lo = std::max(i - 1, 0);
  }
  if (lo == hi) return values[lo];
  const double fl = values[lo], fh = values[hi];
  const double t = (std::log(x) - std::log(g.centers[lo])) /
                   (std::log(g.centers[hi]) - std::log(g.centers[lo]));
  if (fl > 0.0 && fh > 0.0)
    return std::exp((1.0 - t) * std::log(fl) + t * std::log(fh));
  return (1.0 - t) * fl + t * fh;
}

double moment(const GridDensity& f, double mu) {
  const SizeGrid& g = *f.grid;
  double sum = 0.0;
  for (int i = 0; i < g.n_cells; ++i)
    sum += std::pow(g.centers[i], mu) * f.values[i] * g.widths[i];
  return sum;
}

double integrate_window(const GridDensity& f, double lo, double hi) {
  const SizeGrid& g = *f.grid;
  lo = std::max(lo, g.x_min);
  hi = std::min(hi, g.x_max);
  if (!(hi > lo)) return 0.0;
  double sum = 0.0;
  const int i0 = g.cell_of(lo);
  const int i1 = g.cell_of(std::nextafter(hi, lo));
  for (int i = std::max(i0, 0); i <= std::min(i1, g.n_cells - 1); ++i) {
    const double a = std::max(lo, g.edges[i]);
    const double b = std::min(hi, g.edges[i + 1]);
    if (b > a) sum += f.values[i] * (b - a);
  }
  return sum;
}

double partial_mass(const GridDensity& f, double z) {
  const SizeGrid& g = *f.grid;
  if (z <= g.x_min) return 0.0;
  double sum = 0.0;
  for (int i = 0; i < g.n_cells; ++i) {
    if (g.edges[i + 1] <= z) {
      sum += g.centers[i] * f.values[i] * g.widths[i];
    } else {
      if (z > g.edges[i]) sum += g.centers[i] * f.values[i] * (z - g.edges[i]);
      break;
    }
  }
  return sum;
}

double window_average(const GridDensity& f, double z, double b) {
  if (!(b > 0.0) || !(b < 1.0)) throw DomainError("window ratio b must lie in (0,1)");
  if (!(z > 0.0)) throw DomainError("window endpoint must be positive");
  const SizeGrid& g = *f.grid;
  if (z <= g.x_min || b * z >= g.x_max)
    throw DomainError("window [bz, z] does not intersect the grid");
  return integrate_window(f, b * z, z) / z;
}

MomentExponents moment_exponents(const KernelSpec& spec) {
  MomentExponents me;
  const double gamma = spec.gamma(), lambda = spec.lambda();
  me.q = std::min({1.0 + gamma + lambda, 1.0 - lambda, 1.0});
  me.p = std::max(gamma + lambda, -lambda);
  return me;
}

MomentReport moment_report(const GridDensity& f, const std::vector<double>& orders,
                           const KernelSpec& spec) {
  MomentReport rep;
  rep.orders = orders;
  rep.values.reserve(orders.size());
  for (double mu : orders) rep.values.push_back(moment(f, mu));
  const MomentExponents me = moment_exponents(spec);
  rep.q = me.q;
  rep.p = me.p;
  return rep;
}

GridDensity resample(const GridDensity& f, std::shared_ptr<const SizeGrid> target) {
  GridDensity out = zero_density(std::move(target));
  for (int i = 0; i < out.size(); ++i)
    out.values[i] = f.value_at(out.grid->centers[i]);
  return out;
}

} // namespace coagflux
