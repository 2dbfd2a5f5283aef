#pragma once

#include "coagflux/coagulation.hpp"

namespace coagflux {

/// Context for the inward drift flow dX/dtau = -beta X Xi_eps(X), X(0,x) = x.
struct FlowContext {
  double beta = 0.0;
  double epsilon = 0.0;
  TransportCutoff cutoff;

  FlowContext(double gamma, double eps)
      : beta(2.0 / (1.0 - gamma)), epsilon(eps), cutoff{eps} {}
};

/// X(tau, x). Closed form x e^{-beta tau} while the trajectory stays at or
/// above 2*eps; RK4 through the cutoff band; frozen at or below eps.
double flow_position(const FlowContext& ctx, double tau, double x);

/// g(tau, x) = beta * integral of Xi_eps(X(s,x)) over s in [0, tau].
double flow_damping(const FlowContext& ctx, double tau, double x);

/// The pre-merge coordinate l with X(tau, l) = X(tau, x) + X(tau, y), found
/// by bisection on the monotone flow map.
double merge_coordinate(const FlowContext& ctx, double tau, double x, double y);

/// Pulled-back source e^{-g(ln t, x)} dX/dx eta(X(ln t, x)); dX/dx by central
/// differences with relative step 1e-6. Defined for t >= 1.
double transformed_source(const FlowContext& ctx, const SourceProfile& eta,
                          double t, double x);

} // namespace coagflux
