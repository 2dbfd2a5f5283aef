#pragma once

#include <functional>
#include <vector>

namespace coagflux {

struct GaussRule {
  std::vector<double> nodes;   // on [-1, 1]
  std::vector<double> weights;
};

/// Gauss-Legendre rule with n points (cached per n).
const GaussRule& gauss_legendre(int n);

/// Integrate f over [a, b] with an n-point Gauss-Legendre rule.
double gauss_integrate(const std::function<double(double)>& f, double a, double b,
                       int n = 32);

/// Adaptive Simpson with absolute/relative tolerance mix.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-10, int max_depth = 40);

} // namespace coagflux
