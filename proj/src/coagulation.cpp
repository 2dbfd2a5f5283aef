#include "coagflux/coagulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include "coagflux/errors.hpp"

namespace coagflux {

namespace {
constexpr double kPi = std::numbers::pi;

void require_nonnegative(const GridDensity& f) {
  for (double v : f.values)
    if (v < 0.0) throw DomainError("coagulation requires a nonnegative density");
}

std::vector<double> cell_counts(const GridDensity& f) {
  const SizeGrid& g = *f.grid;
  std::vector<double> counts(g.n_cells);
  for (int i = 0; i < g.n_cells; ++i) counts[i] = f.values[i] * g.widths[i];
  return counts;
}

} // namespace

double TransportCutoff::operator()(double x) const {
  if (x <= epsilon) return 0.0;
  if (x >= 2.0 * epsilon) return 1.0;
  return 0.5 * (1.0 - std::cos(kPi * (x - epsilon) / epsilon));
}

double GainCutoff::operator()(double x) const {
  if (x <= R) return 1.0;
  if (x >= 2.0 * R) return 0.0;
  return 0.5 * (1.0 + std::cos(kPi * (x - R) / R));
}

double cutoff_xi(double epsilon, double x) { return TransportCutoff{epsilon}(x); }
double cutoff_zeta(double R, double x) { return GainCutoff{R}(x); }

double SourceProfile::density_at(double x) const {
  if (x <= epsilon || x >= 2.0 * epsilon) return 0.0;
  const double u = std::sin(kPi * (x - epsilon) / epsilon);
  return 4.0 / (3.0 * epsilon * epsilon) * u * u;
}

SourceProfile build_source(double epsilon, std::shared_ptr<const SizeGrid> grid) {
  if (!(epsilon > 0.0)) throw ConfigError("source epsilon must be positive");
  const SizeGrid& g = *grid;
  if (epsilon < g.x_min || 2.0 * epsilon > g.x_max)
    throw ConfigError("source support [eps, 2eps] must lie inside the grid");
  int covering = 0;
  for (int i = 0; i < g.n_cells; ++i)
    if (g.edges[i + 1] > epsilon && g.edges[i] < 2.0 * epsilon) ++covering;
  if (covering < 4)
    throw ConfigError("source support must be resolved by at least 4 cells");

  SourceProfile src;
  src.epsilon = epsilon;
  src.values = zero_density(grid);
  // Exact cell averages of the bump: antiderivative of sin^2(pi (x-eps)/eps).
  auto bump_integral = [epsilon](double x) {
    const double u = std::clamp(x, epsilon, 2.0 * epsilon) - epsilon;
    return 0.5 * u - epsilon / (4.0 * kPi) * std::sin(2.0 * kPi * u / epsilon);
  };
  for (int i = 0; i < g.n_cells; ++i) {
    if (g.edges[i + 1] <= epsilon || g.edges[i] >= 2.0 * epsilon) continue;
    // sliver cells at the support boundary cancel catastrophically
    const double cell_int = std::max(
        0.0, bump_integral(g.edges[i + 1]) - bump_integral(g.edges[i]));
    src.values.values[i] = 4.0 / (3.0 * epsilon * epsilon) * cell_int / g.widths[i];
  }
  const double m1 = moment(src.values, 1.0);
  if (!(m1 > 0.0)) throw ConfigError("source projection vanished on the grid");
  for (double& v : src.values.values) v /= m1;
  src.first_moment = moment(src.values, 1.0);
  return src;
}

void CoagTable::build(const KernelFn& kernel, const GainCutoff* zeta) {
  const SizeGrid& g = *grid_;
  n_ = g.n_cells;
  k_.resize(static_cast<size_t>(n_) * n_);
  for (int i = 0; i < n_; ++i)
    for (int j = i; j < n_; ++j) {
      const double v = kernel(g.centers[i], g.centers[j]);
      k_[static_cast<size_t>(i) * n_ + j] = v;
      k_[static_cast<size_t>(j) * n_ + i] = v;
    }
  const size_t n_pairs = static_cast<size_t>(n_) * (n_ + 1) / 2;
  deposit_.resize(n_pairs);
  factor_.resize(n_pairs);
  zeta_s_.assign(n_pairs, 1.0);
  has_zeta_ = zeta != nullptr;
  size_t idx = 0;
  for (int i = 0; i < n_; ++i)
    for (int j = i; j < n_; ++j, ++idx) {
      const double s = g.centers[i] + g.centers[j];
      if (s >= g.x_max) {
        deposit_[idx] = -1;
        factor_[idx] = s;  // carries the event mass for overflow accounting
      } else {
        const int m = g.cell_of(s);
        deposit_[idx] = m;
        factor_[idx] = s / g.centers[m];
      }
      if (zeta) zeta_s_[idx] = (*zeta)(s);
    }
}

CoagTable::CoagTable(std::shared_ptr<const SizeGrid> grid, const KernelFn& kernel)
    : grid_(std::move(grid)) {
  build(kernel, nullptr);
}

CoagTable::CoagTable(std::shared_ptr<const SizeGrid> grid, const KernelFn& kernel,
                     const GainCutoff& zeta)
    : grid_(std::move(grid)) {
  build(kernel, &zeta);
}

void CoagTable::accumulate(const std::vector<double>& counts, int row_begin,
                           int row_end, std::vector<double>& gain,
                           std::vector<double>& loss, double& overflow_mass,
                           double& overflow_number, double& gain_deficit) const {
  const SizeGrid& g = *grid_;
  for (int i = row_begin; i < row_end; ++i) {
    const double ni = counts[i];
    size_t idx = static_cast<size_t>(i) * n_ - static_cast<size_t>(i) * (i - 1) / 2;
    if (ni == 0.0) continue;
    const double* krow = &k_[static_cast<size_t>(i) * n_];
    for (int j = i; j < n_; ++j) {
      const size_t p = idx + (j - i);
      const double nj = counts[j];
      if (nj == 0.0) continue;
      const double events = (i == j ? 0.5 * ni * ni : ni * nj) * krow[j];
      loss[i] += events;
      loss[j] += events;
      const double z = zeta_s_[p];
      const int m = deposit_[p];
      if (m >= 0) {
        gain[m] += z * events * factor_[p];
        if (has_zeta_)
          gain_deficit += (1.0 - z) * events * (g.centers[i] + g.centers[j]);
      } else {
        overflow_mass += z * events * factor_[p];
        overflow_number += z * events;
        if (has_zeta_) gain_deficit += (1.0 - z) * events * factor_[p];
      }
    }
  }
}

CoagRate CoagTable::apply(const GridDensity& f, int workers) const {
  require_nonnegative(f);
  const SizeGrid& g = *grid_;
  const std::vector<double> counts = cell_counts(f);
  CoagRate out;
  out.rate = zero_density(grid_);

  std::vector<double> gain(n_, 0.0), loss(n_, 0.0);
  if (workers <= 1) {
    accumulate(counts, 0, n_, gain, loss, out.overflow_mass, out.overflow_number,
               out.gain_deficit);
  } else {
    // Static row partition balanced by pair count; per-worker buffers are
    // merged in worker order so a fixed worker count is bit-stable.
    workers = std::min(workers, n_);
    std::vector<int> bounds(workers + 1, 0);
    const double total = 0.5 * static_cast<double>(n_) * (n_ + 1);
    double acc = 0.0;
    int w = 1;
    for (int r = 0; r < n_ && w < workers; ++r) {
      acc += n_ - r;
      if (acc >= total * w / workers) bounds[w++] = r + 1;
    }
    for (; w < workers; ++w) bounds[w] = n_;
    bounds[workers] = n_;
    struct Buf {
      std::vector<double> gain, loss;
      double om = 0.0, on = 0.0, gd = 0.0;
    };
    std::vector<Buf> bufs(workers);
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      bufs[w].gain.assign(n_, 0.0);
      bufs[w].loss.assign(n_, 0.0);
      pool.emplace_back([&, w] {
        accumulate(counts, bounds[w], bounds[w + 1], bufs[w].gain, bufs[w].loss,
                   bufs[w].om, bufs[w].on, bufs[w].gd);
      });
    }
    for (auto& t : pool) t.join();
    for (int w = 0; w < workers; ++w) {
      for (int i = 0; i < n_; ++i) {
        gain[i] += bufs[w].gain[i];
        loss[i] += bufs[w].loss[i];
      }
      out.overflow_mass += bufs[w].om;
      out.overflow_number += bufs[w].on;
      out.gain_deficit += bufs[w].gd;
    }
  }
  for (int i = 0; i < n_; ++i)
    out.rate.values[i] = (gain[i] - loss[i]) / g.widths[i];
  return out;
}

CoagTable::SplitRate CoagTable::apply_split(const GridDensity& f) const {
  require_nonnegative(f);
  const SizeGrid& g = *grid_;
  const std::vector<double> counts = cell_counts(f);
  SplitRate out;
  out.gain_count.assign(n_, 0.0);
  out.loss_per_particle.assign(n_, 0.0);
  for (int i = 0; i < n_; ++i) {
    const double* krow = &k_[static_cast<size_t>(i) * n_];
    double lam = 0.0;
    for (int j = 0; j < n_; ++j) lam += krow[j] * counts[j];
    out.loss_per_particle[i] = lam;
    const double ni = counts[i];
    if (ni == 0.0) continue;
    size_t idx = static_cast<size_t>(i) * n_ - static_cast<size_t>(i) * (i - 1) / 2;
    for (int j = i; j < n_; ++j) {
      const size_t p = idx + (j - i);
      const double nj = counts[j];
      if (nj == 0.0) continue;
      const double events = (i == j ? 0.5 * ni * ni : ni * nj) * krow[j];
      const double z = zeta_s_[p];
      const int m = deposit_[p];
      if (m >= 0) {
        out.gain_count[m] += z * events * factor_[p];
        if (has_zeta_)
          out.gain_deficit += (1.0 - z) * events * (g.centers[i] + g.centers[j]);
      } else {
        out.overflow_mass += z * events * factor_[p];
        out.overflow_number += z * events;
        if (has_zeta_) out.gain_deficit += (1.0 - z) * events * factor_[p];
      }
    }
  }
  return out;
}

FluxProfile CoagTable::flux(const GridDensity& f) const {
  const SizeGrid& g = *grid_;
  const std::vector<double> counts = cell_counts(f);
  FluxProfile out;
  out.grid = grid_;
  out.values.assign(g.n_cells + 1, 0.0);
  std::vector<double> suffix(n_ + 1);
  for (int i = 0; i < n_; ++i) {
    const double xi_ni = g.centers[i] * counts[i];
    if (xi_ni == 0.0) continue;
    const double* krow = &k_[static_cast<size_t>(i) * n_];
    suffix[n_] = 0.0;
    for (int j = n_ - 1; j >= 0; --j) suffix[j] = suffix[j + 1] + krow[j] * counts[j];
    // only edges at or above this cell's center see its pairs
    const int e_start = static_cast<int>(
        std::lower_bound(g.edges.begin(), g.edges.end(), g.centers[i]) -
        g.edges.begin());
    for (int e = e_start; e <= g.n_cells; ++e) {
      const double z = g.edges[e];
      const double thr = z - g.centers[i];
      const int jmin = static_cast<int>(
          std::upper_bound(g.centers.begin(), g.centers.end(), thr) -
          g.centers.begin());
      out.values[e] += xi_ni * suffix[jmin];
    }
  }
  return out;
}

std::vector<double> CoagTable::flux_at_centers(const GridDensity& f) const {
  const SizeGrid& g = *grid_;
  const std::vector<double> counts = cell_counts(f);
  std::vector<double> out(g.n_cells, 0.0);
  std::vector<double> suffix(n_ + 1);
  for (int i = 0; i < n_; ++i) {
    const double xi_ni = g.centers[i] * counts[i];
    if (xi_ni == 0.0) continue;
    const double* krow = &k_[static_cast<size_t>(i) * n_];
    suffix[n_] = 0.0;
    for (int j = n_ - 1; j >= 0; --j) suffix[j] = suffix[j + 1] + krow[j] * counts[j];
    for (int c = i; c < g.n_cells; ++c) {
      const double thr = g.centers[c] - g.centers[i];
      const int jmin = static_cast<int>(
          std::upper_bound(g.centers.begin(), g.centers.end(), thr) -
          g.centers.begin());
      out[c] += xi_ni * suffix[jmin];
    }
  }
  return out;
}

double CoagTable::flux_at(const GridDensity& f, double z) const {
  const SizeGrid& g = *grid_;
  const std::vector<double> counts = cell_counts(f);
  double sum = 0.0;
  for (int i = 0; i < n_; ++i) {
    if (g.centers[i] > z) break;
    if (counts[i] == 0.0) continue;
    const double thr = z - g.centers[i];
    const int jmin = static_cast<int>(
        std::upper_bound(g.centers.begin(), g.centers.end(), thr) -
        g.centers.begin());
    const double* krow = &k_[static_cast<size_t>(i) * n_];
    double inner = 0.0;
    for (int j = jmin; j < n_; ++j) inner += krow[j] * counts[j];
    sum += g.centers[i] * counts[i] * inner;
  }
  return sum;
}

CoagRate apply_coagulation(const KernelFn& kernel, const GridDensity& f,
                           int workers) {
  CoagTable table(f.grid, kernel);
  return table.apply(f, workers);
}

CoagRate apply_truncated_coagulation(const KernelFn& kernel, const GainCutoff& zeta,
                                     const GridDensity& f, int workers) {
  CoagTable table(f.grid, kernel, zeta);
  return table.apply(f, workers);
}

FluxProfile compute_flux(const KernelFn& kernel, const GridDensity& f) {
  CoagTable table(f.grid, kernel);
  return table.flux(f);
}

double flux_at(const KernelFn& kernel, const GridDensity& f, double z) {
  CoagTable table(f.grid, kernel);
  return table.flux_at(f, z);
}

} // namespace coagflux
