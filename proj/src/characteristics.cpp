#include "coagflux/characteristics.hpp"

#include <cmath>

#include "coagflux/errors.hpp"

namespace coagflux {

namespace {

struct FlowPoint {
  double x;
  double g;
};

// Joint RK4 on (X, g): X' = -beta X Xi(X), g' = beta Xi(X). The band is the
// only region integrated numerically; the step keeps |dX| below eps/200.
FlowPoint integrate_band(const FlowContext& ctx, double tau_span, FlowPoint p) {
  const double h_max = 1.0 / (400.0 * ctx.beta);
  auto fx = [&](double x) { return -ctx.beta * x * ctx.cutoff(x); };
  auto fg = [&](double x) { return ctx.beta * ctx.cutoff(x); };
  double t = 0.0;
  while (t < tau_span) {
    const double h = std::min(h_max, tau_span - t);
    const double k1x = fx(p.x), k1g = fg(p.x);
    const double x2 = p.x + 0.5 * h * k1x;
    const double k2x = fx(x2), k2g = fg(x2);
    const double x3 = p.x + 0.5 * h * k2x;
    const double k3x = fx(x3), k3g = fg(x3);
    const double x4 = p.x + h * k3x;
    const double k4x = fx(x4), k4g = fg(x4);
    p.x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    p.g += h / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g);
    t += h;
  }
  return p;
}

FlowPoint flow_with_damping(const FlowContext& ctx, double tau, double x) {
  if (!(x > 0.0)) throw DomainError("flow requires x > 0");
  if (tau < 0.0) throw DomainError("flow requires tau >= 0");
  if (tau == 0.0 || x <= ctx.epsilon) return {x, 0.0};
  FlowPoint p{x, 0.0};
  double remaining = tau;
  if (x >= 2.0 * ctx.epsilon) {
    const double tau_star = std::log(x / (2.0 * ctx.epsilon)) / ctx.beta;
    if (tau <= tau_star) return {x * std::exp(-ctx.beta * tau), ctx.beta * tau};
    p.x = 2.0 * ctx.epsilon;
    p.g = ctx.beta * tau_star;
    remaining = tau - tau_star;
  }
  FlowPoint band = integrate_band(ctx, remaining, {p.x, 0.0});
  return {band.x, p.g + band.g};
}

} // namespace

double flow_position(const FlowContext& ctx, double tau, double x) {
  return flow_with_damping(ctx, tau, x).x;
}

double flow_damping(const FlowContext& ctx, double tau, double x) {
  return flow_with_damping(ctx, tau, x).g;
}

double merge_coordinate(const FlowContext& ctx, double tau, double x, double y) {
  if (!(x > 0.0) || !(y > 0.0)) throw DomainError("merge requires positive sizes");
  if (tau < 0.0) throw DomainError("merge requires tau >= 0");
  if (tau == 0.0) return x + y;
  const double target = flow_position(ctx, tau, x) + flow_position(ctx, tau, y);
  double lo = std::max(x, y);
  double hi = (x + y) * std::exp(ctx.beta * tau);
  double f_lo = flow_position(ctx, tau, lo) - target;
  double f_hi = flow_position(ctx, tau, hi) - target;
  if (f_lo > 0.0 || f_hi < 0.0)
    throw NumericError("merge coordinate bracket failure");
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double f_mid = flow_position(ctx, tau, mid) - target;
    if (std::abs(f_mid) <= 1e-13 * target || (hi - lo) <= 1e-15 * mid) return mid;
    if (f_mid < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return mid;
}

double transformed_source(const FlowContext& ctx, const SourceProfile& eta,
                          double t, double x) {
  if (!(t >= 1.0)) throw DomainError("transformed source defined for t >= 1");
  if (!(x > 0.0)) throw DomainError("transformed source requires x > 0");
  const double tau = std::log(t);
  const FlowPoint p = flow_with_damping(ctx, tau, x);
  const double delta = 1e-6 * x;
  const double dx = (flow_position(ctx, tau, x + delta) -
                     flow_position(ctx, tau, x - delta)) /
                    (2.0 * delta);
  return std::exp(-p.g) * dx * eta.density_at(p.x);
}

} // namespace coagflux
