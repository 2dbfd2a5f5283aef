#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "coagflux/errors.hpp"
#include "coagflux/grid.hpp"

using namespace coagflux;

TEST_CASE("build_grid forces the geometric progression") {
  const SizeGrid g = build_grid(1.0, 16.0, 4);
  REQUIRE(g.edges.size() == 5);
  const double expect[5] = {1.0, 2.0, 4.0, 8.0, 16.0};
  for (int i = 0; i < 5; ++i)
    CHECK(g.edges[i] == doctest::Approx(expect[i]).epsilon(1e-12));
  CHECK(g.edges.front() == 1.0);
  CHECK(g.edges.back() == 16.0);

  const SizeGrid d = build_grid(1e-4, 1e3, 7);
  CHECK(d.ratio == doctest::Approx(10.0).epsilon(1e-12));
  for (int i = 0; i + 1 < d.n_cells; ++i)
    CHECK(d.edges[i + 1] / d.edges[i] ==
          doctest::Approx(d.edges[i + 2] / d.edges[i + 1]).epsilon(1e-12));
}

TEST_CASE("build_grid rejects bad parameters") {
  CHECK_THROWS_AS(build_grid(1.0, 16.0, 0), ConfigError);
  CHECK_THROWS_AS(build_grid(4.0, 1.0, 8), ConfigError);
  CHECK_THROWS_AS(build_grid(0.0, 1.0, 8), ConfigError);
}

TEST_CASE("centers are geometric means") {
  const SizeGrid g = build_grid(0.5, 512.0, 20);
  for (int i = 0; i < g.n_cells; ++i)
    CHECK(g.centers[i] ==
          doctest::Approx(std::sqrt(g.edges[i] * g.edges[i + 1])).epsilon(1e-14));
}

TEST_CASE("cell_of brackets its argument") {
  const SizeGrid g = build_grid(1e-2, 1e2, 32);
  CHECK(g.cell_of(5e-3) == -1);
  CHECK(g.cell_of(1e3) == 32);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> dist(1e-2, 1e2);
  for (int i = 0; i < 200; ++i) {
    const double x = dist(rng);
    const int c = g.cell_of(x);
    if (c >= 0 && c < g.n_cells) {
      CHECK(g.edges[c] <= x);
      CHECK(x < g.edges[c + 1] + 1e-15 * x);
    }
  }
}

TEST_CASE("moment: single cell and zero density") {
  auto grid = make_grid(1.0, 2.0, 1);
  GridDensity f = zero_density(grid);
  f.values[0] = 1.0;
  CHECK(moment(f, 0.0) == doctest::Approx(1.0).epsilon(1e-14));
  GridDensity z = zero_density(grid);
  for (double mu : {-1.0, 0.0, 1.0, 2.5}) CHECK(moment(z, mu) == 0.0);
}

TEST_CASE("moment of x^-3/2 sampled at centers") {
  auto grid = make_grid(1.0, 4.0, 64);
  GridDensity f = zero_density(grid);
  for (int i = 0; i < f.size(); ++i)
    f.values[i] = std::pow(grid->centers[i], -1.5);
  // integral of x^{-1/2} over [1,4] is 2
  CHECK(moment(f, 1.0) == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("moment is exact for piecewise-constant densities") {
  auto grid = make_grid(0.1, 10.0, 16);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> dist(0.0, 3.0);
  GridDensity f = zero_density(grid);
  double expect = 0.0;
  for (int i = 0; i < f.size(); ++i) {
    f.values[i] = dist(rng);
    expect += f.values[i] * grid->widths[i];
  }
  CHECK(moment(f, 0.0) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("window_average: flat density gives 1 - b") {
  auto grid = make_grid(0.25, 64.0, 48);
  GridDensity f = zero_density(grid);
  for (double& v : f.values) v = 1.0;
  for (double z : {1.0, 3.0, 20.0})
    CHECK(window_average(f, z, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("window_average of the critical power law") {
  auto grid = make_grid(1e-3, 1e2, 600);
  GridDensity f = zero_density(grid);
  for (int i = 0; i < f.size(); ++i)
    f.values[i] = std::pow(grid->centers[i], -1.5);
  const double b = 8.0 / 9.0;
  for (double z : {0.1, 1.0, 10.0}) {
    const double expect = 2.0 * (std::pow(b, -0.5) - 1.0) * std::pow(z, -1.5);
    CHECK(window_average(f, z, b) == doctest::Approx(expect).epsilon(0.01));
  }
  // log-log slope across a decade
  const double w1 = window_average(f, 0.3, b);
  const double w2 = window_average(f, 3.0, b);
  const double slope = (std::log(w2) - std::log(w1)) / std::log(10.0);
  CHECK(slope == doctest::Approx(-1.5).epsilon(0.0067));
}

TEST_CASE("window_average errors off the grid") {
  auto grid = make_grid(1.0, 10.0, 8);
  GridDensity f = zero_density(grid);
  CHECK_THROWS_AS(window_average(f, 0.5, 0.5), DomainError);
  CHECK_THROWS_AS(window_average(f, 25.0, 0.9), DomainError);
  CHECK_THROWS_AS(window_average(f, 2.0, 1.5), DomainError);
}

TEST_CASE("window integral equals the restricted moment") {
  auto grid = make_grid(0.5, 50.0, 40);
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> dist(0.0, 2.0);
  GridDensity f = zero_density(grid);
  for (double& v : f.values) v = dist(rng);
  for (double z : {2.0, 7.0, 30.0}) {
    const double b = 0.4;
    const double via_window = window_average(f, z, b) * z;
    const double via_integral = integrate_window(f, b * z, z);
    CHECK(via_window == doctest::Approx(via_integral).epsilon(1e-13));
  }
}

TEST_CASE("moment refinement converges at second order") {
  // smooth density sampled at centers; halving widths shrinks the moment
  // error by about 4
  auto exact = []() {
    // integral of x e^{-x} over [0.1, 10] = [-(1+x)e^{-x}]
    auto anti = [](double x) { return -(1.0 + x) * std::exp(-x); };
    return anti(10.0) - anti(0.1);
  }();
  double err_coarse = 0.0, err_fine = 0.0;
  for (int pass = 0; pass < 2; ++pass) {
    const int n = pass == 0 ? 64 : 128;
    auto grid = make_grid(0.1, 10.0, n);
    GridDensity f = zero_density(grid);
    for (int i = 0; i < f.size(); ++i)
      f.values[i] = std::exp(-grid->centers[i]);
    const double err = std::abs(moment(f, 1.0) - exact);
    (pass == 0 ? err_coarse : err_fine) = err;
  }
  CHECK(err_coarse / err_fine > 3.0);
  CHECK(err_coarse / err_fine < 5.0);
}

TEST_CASE("moment exponents follow the closed formulas") {
  const MomentExponents brown = moment_exponents(KernelSpec::brownian());
  CHECK(brown.q == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(brown.p == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  const MomentExponents flat = moment_exponents(KernelSpec::constant_kernel());
  CHECK(flat.q == 1.0);
  CHECK(flat.p == 0.0);
  const MomentExponents mixed = moment_exponents(KernelSpec::custom(0.5, -0.25));
  CHECK(mixed.q == 1.0);
  CHECK(mixed.p == 0.25);
}

TEST_CASE("moment report carries orders, values and exponents") {
  auto grid = make_grid(1.0, 8.0, 12);
  GridDensity f = zero_density(grid);
  for (double& v : f.values) v = 0.5;
  const MomentReport rep =
      moment_report(f, {0.0, 1.0}, KernelSpec::constant_kernel());
  REQUIRE(rep.values.size() == 2);
  CHECK(rep.values[0] == doctest::Approx(3.5).epsilon(1e-13));  // 0.5 * 7
  CHECK(rep.q == 1.0);
  CHECK(rep.p == 0.0);
  for (double v : rep.values) CHECK(v >= 0.0);
}

TEST_CASE("resample reproduces a power law between grids") {
  auto src_grid = make_grid(1e-2, 1e2, 160);
  GridDensity f = zero_density(src_grid);
  for (int i = 0; i < f.size(); ++i)
    f.values[i] = 3.0 * std::pow(src_grid->centers[i], -1.2);
  auto dst_grid = make_grid(5e-2, 20.0, 70);
  const GridDensity g = resample(f, dst_grid);
  for (int i = 0; i < g.size(); ++i) {
    const double expect = 3.0 * std::pow(dst_grid->centers[i], -1.2);
    CHECK(g.values[i] == doctest::Approx(expect).epsilon(1e-3));
  }
}
