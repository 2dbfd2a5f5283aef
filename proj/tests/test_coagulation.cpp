#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "coagflux/coagulation.hpp"
#include "coagflux/errors.hpp"
#include "coagflux/grid.hpp"

using namespace coagflux;

namespace {

// Test-side oracle: ordered double loop with the 1/2 symmetry factor and a
// linear scan for the deposit cell. Independent of the CoagTable sweep.
struct OracleRate {
  std::vector<double> rate;
  double overflow_mass = 0.0;
  double overflow_number = 0.0;
};

OracleRate oracle_coag(const KernelFn& kernel, const GridDensity& f,
                       const GainCutoff* zeta = nullptr) {
  const SizeGrid& g = *f.grid;
  const int n = g.n_cells;
  std::vector<double> counts(n), gain(n, 0.0), loss(n, 0.0);
  for (int i = 0; i < n; ++i) counts[i] = f.values[i] * g.widths[i];
  OracleRate out;
  out.rate.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double events = 0.5 * kernel(g.centers[i], g.centers[j]) *
                            counts[i] * counts[j];
      loss[i] += events;
      loss[j] += events;
      const double s = g.centers[i] + g.centers[j];
      const double z = zeta ? (*zeta)(s) : 1.0;
      if (s >= g.x_max) {
        out.overflow_mass += z * events * s;
        out.overflow_number += z * events;
        continue;
      }
      int m = 0;
      while (m + 1 < n && g.edges[m + 1] <= s) ++m;
      gain[m] += z * events * s / g.centers[m];
    }
  }
  for (int i = 0; i < n; ++i) out.rate[i] = (gain[i] - loss[i]) / g.widths[i];
  return out;
}

GridDensity random_density(std::shared_ptr<const SizeGrid> grid, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 2.0);
  GridDensity f = zero_density(std::move(grid));
  for (double& v : f.values) v = dist(rng);
  return f;
}

const KernelFn kConstant = [](double, double) { return 2.0; };

} // namespace

TEST_CASE("coagulation of the zero density is zero") {
  auto grid = make_grid(1.0, 100.0, 24);
  const CoagRate out = apply_coagulation(kConstant, zero_density(grid));
  for (double v : out.rate.values) CHECK(v == 0.0);
  CHECK(out.overflow_mass == 0.0);
}

TEST_CASE("negative densities are rejected") {
  auto grid = make_grid(1.0, 100.0, 16);
  GridDensity f = zero_density(grid);
  f.values[3] = -1.0;
  CHECK_THROWS_AS(apply_coagulation(kConstant, f), DomainError);
}

TEST_CASE("single occupied cell: loss and gain bookkeeping") {
  auto grid = make_grid(1.0, 16.0, 8);  // edge ratio sqrt(2)
  GridDensity f = zero_density(grid);
  const int i0 = 3;
  const double x0 = grid->centers[i0];
  const double N = 5.0;
  f.values[i0] = N / grid->widths[i0];
  const double K = 2.0;
  const CoagRate out = apply_coagulation(kConstant, f);
  // events at rate K N^2 / 2, each removing two particles from the cell
  CHECK(out.rate.values[i0] * grid->widths[i0] ==
        doctest::Approx(-K * N * N).epsilon(1e-13));
  // total gain mass rate K N^2 x0 deposited at 2 x0
  const int target = grid->cell_of(2.0 * x0);
  double gain_mass = 0.0;
  for (int i = 0; i < out.rate.size(); ++i) {
    if (i == i0) continue;
    if (out.rate.values[i] != 0.0) CHECK(i == target);
    gain_mass += grid->centers[i] * out.rate.values[i] * grid->widths[i];
  }
  CHECK(gain_mass == doctest::Approx(K * N * N * x0).epsilon(1e-13));
}

TEST_CASE("hand-enumerated three-cell pair sum") {
  auto grid = make_grid(1.0, 8.0, 3);  // edges 1,2,4,8
  GridDensity f = zero_density(grid);
  // counts {3, 2, 1}
  f.values[0] = 3.0 / grid->widths[0];
  f.values[1] = 2.0 / grid->widths[1];
  f.values[2] = 1.0 / grid->widths[2];
  const CoagRate out = apply_coagulation(kConstant, f);
  CHECK(out.rate.values[0] == doctest::Approx(-36.0).epsilon(1e-13));
  CHECK(out.rate.values[1] == doctest::Approx(-7.5).epsilon(1e-13));
  CHECK(out.rate.values[2] == doctest::Approx(2.125).epsilon(1e-13));
  CHECK(out.overflow_mass ==
        doctest::Approx(32.0 * std::sqrt(2.0)).epsilon(1e-13));
  CHECK(out.overflow_number == doctest::Approx(5.0).epsilon(1e-13));
}

TEST_CASE("pair sum agrees with the oracle on small grids") {
  const KernelSpec brown = KernelSpec::brownian();
  const KernelFn kernel = [&brown](double x, double y) { return brown.eval(x, y); };
  for (unsigned seed : {1u, 2u, 3u}) {
    auto grid = make_grid(0.5, 64.0, 8);
    const GridDensity f = random_density(grid, seed);
    const CoagRate fast = apply_coagulation(kernel, f);
    const OracleRate slow = oracle_coag(kernel, f);
    for (int i = 0; i < fast.rate.size(); ++i)
      CHECK(fast.rate.values[i] ==
            doctest::Approx(slow.rate[i]).epsilon(1e-12));
    CHECK(fast.overflow_mass ==
          doctest::Approx(slow.overflow_mass).epsilon(1e-12));
  }
}

TEST_CASE("mass conservation with the overflow ledger") {
  const KernelSpec prod = KernelSpec::product(0.25, 0.25);
  const KernelFn kernel = [&prod](double x, double y) { return prod.eval(x, y); };
  auto grid = make_grid(1e-2, 1e2, 64);
  for (unsigned seed = 0; seed < 20; ++seed) {
    const GridDensity f = random_density(grid, seed);
    const CoagRate out = apply_coagulation(kernel, f);
    double mass_rate = 0.0;
    for (int i = 0; i < out.rate.size(); ++i)
      mass_rate += grid->centers[i] * out.rate.values[i] * grid->widths[i];
    const double scale = moment(f, 1.0);
    CHECK(std::abs(mass_rate + out.overflow_mass) <= 1e-12 * scale);
  }
}

TEST_CASE("bilinearity: cross term matches the oracle") {
  auto grid = make_grid(0.5, 32.0, 8);
  const GridDensity f = random_density(grid, 11);
  const GridDensity g = random_density(grid, 12);
  GridDensity sum = f;
  for (int i = 0; i < sum.size(); ++i) sum.values[i] += g.values[i];
  const CoagRate r_sum = apply_coagulation(kConstant, sum);
  const CoagRate r_f = apply_coagulation(kConstant, f);
  const CoagRate r_g = apply_coagulation(kConstant, g);
  // symmetric cross term via the oracle: rate(f+g) - rate(f) - rate(g)
  const OracleRate o_sum = oracle_coag(kConstant, sum);
  const OracleRate o_f = oracle_coag(kConstant, f);
  const OracleRate o_g = oracle_coag(kConstant, g);
  for (int i = 0; i < r_sum.rate.size(); ++i) {
    const double cross_impl =
        r_sum.rate.values[i] - r_f.rate.values[i] - r_g.rate.values[i];
    const double cross_oracle = o_sum.rate[i] - o_f.rate[i] - o_g.rate[i];
    CHECK(cross_impl == doctest::Approx(cross_oracle).epsilon(1e-11));
  }
}

TEST_CASE("flux of a single occupied cell") {
  auto grid = make_grid(1.0, 16.0, 8);
  GridDensity f = zero_density(grid);
  const int i0 = 3;
  const double x0 = grid->centers[i0];
  const double N = 2.0;
  f.values[i0] = N / grid->widths[i0];
  const FluxProfile flux = compute_flux(kConstant, f);
  for (int e = 0; e <= grid->n_cells; ++e) {
    const double z = grid->edges[e];
    const double expect = (x0 <= z && z < 2.0 * x0) ? 2.0 * x0 * N * N : 0.0;
    CHECK(flux.values[e] == doctest::Approx(expect).epsilon(1e-13));
  }
  // zero density has zero flux
  const FluxProfile none = compute_flux(kConstant, zero_density(grid));
  for (double v : none.values) CHECK(v == 0.0);
}

TEST_CASE("discrete flux identity: -dJ equals the cell mass rate") {
  const KernelSpec brown = KernelSpec::brownian();
  const KernelFn kernel = [&brown](double x, double y) { return brown.eval(x, y); };
  auto grid = make_grid(1e-2, 1e2, 64);
  const GridDensity f = random_density(grid, 21);
  const CoagRate rate = apply_coagulation(kernel, f);
  const FluxProfile flux = compute_flux(kernel, f);
  double scale = 0.0;
  for (double v : flux.values) scale = std::max(scale, std::abs(v));
  for (int i = 0; i < grid->n_cells; ++i) {
    const double mass_rate =
        grid->centers[i] * rate.rate.values[i] * grid->widths[i];
    const double minus_dj = flux.values[i] - flux.values[i + 1];
    CHECK(std::abs(mass_rate - minus_dj) <= 1e-10 * scale);
  }
}

TEST_CASE("flux_at matches the edge fluxes") {
  auto grid = make_grid(0.1, 10.0, 24);
  const GridDensity f = random_density(grid, 31);
  const FluxProfile flux = compute_flux(kConstant, f);
  CoagTable table(grid, kConstant);
  for (int e = 0; e <= grid->n_cells; ++e)
    CHECK(table.flux_at(f, grid->edges[e]) ==
          doctest::Approx(flux.values[e]).epsilon(1e-13));
  const std::vector<double> at_centers = table.flux_at_centers(f);
  for (int i = 0; i < grid->n_cells; ++i)
    CHECK(at_centers[i] ==
          doctest::Approx(table.flux_at(f, grid->centers[i])).epsilon(1e-13));
}

TEST_CASE("truncated operator with a far cutoff reproduces the plain one") {
  auto grid = make_grid(0.5, 32.0, 16);
  const GridDensity f = random_density(grid, 41);
  const GainCutoff far{2.0 * grid->x_max};
  const CoagRate plain = apply_coagulation(kConstant, f);
  const CoagRate trunc = apply_truncated_coagulation(kConstant, far, f);
  for (int i = 0; i < plain.rate.size(); ++i)
    CHECK(trunc.rate.values[i] == plain.rate.values[i]);
  CHECK(trunc.gain_deficit == 0.0);
}

TEST_CASE("gain fully suppressed for densities above the cutoff") {
  auto grid = make_grid(1.0, 1024.0, 40);
  GridDensity f = zero_density(grid);
  const double R = 8.0;
  for (int i = 0; i < f.size(); ++i)
    if (grid->centers[i] > 2.0 * R) f.values[i] = 1.0;
  const CoagRate out = apply_truncated_coagulation(kConstant, GainCutoff{R}, f);
  double mass_rate = 0.0;
  for (int i = 0; i < out.rate.size(); ++i) {
    CHECK(out.rate.values[i] <= 0.0);  // no gains survive
    mass_rate += grid->centers[i] * out.rate.values[i] * grid->widths[i];
  }
  CHECK(mass_rate <= 0.0);
  CHECK(out.gain_deficit > 0.0);
}

TEST_CASE("truncated operator never increases mass") {
  auto grid = make_grid(0.5, 64.0, 32);
  for (unsigned seed : {5u, 6u}) {
    const GridDensity f = random_density(grid, seed);
    for (double R : {2.0, 10.0, 100.0}) {
      const CoagRate out =
          apply_truncated_coagulation(kConstant, GainCutoff{R}, f);
      double mass_rate = 0.0;
      for (int i = 0; i < out.rate.size(); ++i)
        mass_rate += grid->centers[i] * out.rate.values[i] * grid->widths[i];
      CHECK(mass_rate <= 1e-12 * moment(f, 1.0));
    }
  }
}

TEST_CASE("worker partition is consistent with the serial sweep") {
  const KernelSpec brown = KernelSpec::brownian();
  const KernelFn kernel = [&brown](double x, double y) { return brown.eval(x, y); };
  auto grid = make_grid(1e-2, 1e2, 96);
  const GridDensity f = random_density(grid, 51);
  const CoagRate serial = apply_coagulation(kernel, f, 1);
  const CoagRate par2 = apply_coagulation(kernel, f, 2);
  const CoagRate par2_again = apply_coagulation(kernel, f, 2);
  const CoagRate par3 = apply_coagulation(kernel, f, 3);
  double scale = 0.0;
  for (double v : serial.rate.values) scale = std::max(scale, std::abs(v));
  for (int i = 0; i < serial.rate.size(); ++i) {
    CHECK(par2.rate.values[i] == par2_again.rate.values[i]);  // bit-stable
    CHECK(std::abs(par2.rate.values[i] - serial.rate.values[i]) <=
          1e-12 * scale);
    CHECK(std::abs(par3.rate.values[i] - serial.rate.values[i]) <=
          1e-12 * scale);
  }
}

TEST_CASE("source bump: support, moments, resolution") {
  auto grid = make_grid(1e-3, 10.0, 160);
  const double eps = 0.01;
  const SourceProfile src = build_source(eps, grid);
  CHECK(std::abs(moment(src.values, 1.0) - 1.0) <= 1e-10);
  for (int i = 0; i < src.values.size(); ++i) {
    const double x = grid->centers[i];
    if (grid->edges[i + 1] <= eps || grid->edges[i] >= 2.0 * eps)
      CHECK(src.values.values[i] == 0.0);
    (void)x;
  }
  const double m0 = moment(src.values, 0.0);
  CHECK(m0 >= 1.0 / (2.0 * eps));
  CHECK(m0 <= 1.0 / eps);
  // analytic evaluator integrates to one as well
  CHECK(src.density_at(eps) == 0.0);
  CHECK(src.density_at(2.0 * eps) == 0.0);
  CHECK(src.density_at(1.5 * eps) > 0.0);
  // under-resolved support
  auto coarse = make_grid(1e-3, 10.0, 12);
  CHECK_THROWS_AS(build_source(eps, coarse), ConfigError);
}

TEST_CASE("cutoff ramps") {
  const double eps = 0.05;
  CHECK(cutoff_xi(eps, eps / 2.0) == 0.0);
  CHECK(cutoff_xi(eps, 3.0 * eps) == 1.0);
  const double mid = cutoff_xi(eps, 1.5 * eps);
  CHECK(mid > 0.0);
  CHECK(mid < 1.0);
  double prev = -1.0;
  for (int i = 0; i <= 50; ++i) {
    const double x = eps * (0.5 + 2.0 * i / 50.0);
    const double v = cutoff_xi(eps, x);
    CHECK(v >= prev);
    prev = v;
  }
  const double R = 4.0;
  CHECK(cutoff_zeta(R, R / 2.0) == 1.0);
  CHECK(cutoff_zeta(R, 3.0 * R) == 0.0);
  prev = 2.0;
  for (int i = 0; i <= 50; ++i) {
    const double x = R * (0.5 + 2.0 * i / 50.0);
    const double v = cutoff_zeta(R, x);
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("positivity within one explicit step at the safety bound") {
  auto grid = make_grid(0.5, 64.0, 32);
  const GridDensity f = random_density(grid, 61);
  const CoagRate out = apply_coagulation(kConstant, f);
  const double safety = 0.9;
  double dt = 1e300;
  for (int i = 0; i < f.size(); ++i)
    if (out.rate.values[i] < 0.0 && f.values[i] > 0.0)
      dt = std::min(dt, safety * f.values[i] / (-out.rate.values[i]));
  for (int i = 0; i < f.size(); ++i)
    CHECK(f.values[i] + dt * out.rate.values[i] >= 0.0);
}
