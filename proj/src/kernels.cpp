#include "coagflux/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "coagflux/errors.hpp"

namespace coagflux {

namespace {

void require_positive(double x, double y) {
  if (!(x > 0.0) || !(y > 0.0))
    throw DomainError("kernel evaluation requires positive sizes");
}

} // namespace

double KernelSpec::eval_unchecked(double x, double y) const {
  switch (family_) {
    case KernelFamily::constant:
      return 2.0;
    case KernelFamily::product:
      return std::pow(x, a_exp_) * std::pow(y, b_exp_) +
             std::pow(x, b_exp_) * std::pow(y, a_exp_);
    case KernelFamily::brownian: {
      const double cx = std::cbrt(x), cy = std::cbrt(y);
      return (cx + cy) * (1.0 / cx + 1.0 / cy);
    }
    case KernelFamily::free_molecular: {
      const double cx = std::cbrt(x), cy = std::cbrt(y);
      return (cx + cy) * (cx + cy) * std::sqrt(1.0 / x + 1.0 / y);
    }
    case KernelFamily::custom:
      return envelope(x, y);
  }
  return 0.0;
}

double KernelSpec::eval(double x, double y) const {
  require_positive(x, y);
  return eval_unchecked(x, y);
}

double KernelSpec::envelope(double x, double y) const {
  require_positive(x, y);
  return std::pow(x, gamma_ + lambda_) * std::pow(y, -lambda_) +
         std::pow(y, gamma_ + lambda_) * std::pow(x, -lambda_);
}

double KernelSpec::shape(double s) const {
  if (!(s > 0.0) || !(s < 1.0))
    throw DomainError("shape function defined on the open interval (0,1)");
  return eval_unchecked(s, 1.0 - s);
}

double KernelSpec::p_exponent() const {
  return std::max(lambda_, -(gamma_ + lambda_));
}

ShapeFunction KernelSpec::shape_function() const {
  ShapeFunction sf;
  KernelSpec copy = *this;
  sf.eval = [copy](double s) { return copy.shape(s); };
  sf.p = p_exponent();
  sf.c1_shape = c1_shape_;
  sf.c2_shape = c2_shape_;
  return sf;
}

Admissibility KernelSpec::admissibility() const {
  Admissibility adm;
  adm.gelling = gamma_ >= 1.0;
  adm.flux_admissible = std::abs(gamma_ + 2.0 * lambda_) < 1.0;
  return adm;
}

ScalingExponents KernelSpec::scaling_exponents() const {
  if (gamma_ >= 1.0)
    throw DomainError("scaling exponents undefined in the gelling regime (gamma >= 1)");
  ScalingExponents se;
  se.beta = 2.0 / (1.0 - gamma_);
  se.alpha = (3.0 + gamma_) / (1.0 - gamma_);
  se.small_size_exponent = -(3.0 + gamma_) / 2.0;
  return se;
}

void KernelSpec::finish_init() {
  // Envelope constants: extrema of K/w on the simplex section, sampled densely
  // with endpoint refinement (the ratio has finite limits at s -> 0, 1).
  auto ratio = [this](double s) {
    const double w = std::pow(s, gamma_ + lambda_) * std::pow(1.0 - s, -lambda_) +
                     std::pow(1.0 - s, gamma_ + lambda_) * std::pow(s, -lambda_);
    return eval_unchecked(s, 1.0 - s) / w;
  };
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  const int n_lin = 2001;
  for (int i = 1; i < n_lin; ++i) {
    const double s = 0.5 * i / n_lin;
    const double r = ratio(s);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  for (int k = 2; k <= 12; ++k) {
    const double r = ratio(std::pow(10.0, -k));
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  c1_ = lo;
  c2_ = hi;

  // Shape envelope constants against (s(1-s))^-p.
  const double p = p_exponent();
  auto shape_ratio = [this, p](double s) {
    return eval_unchecked(s, 1.0 - s) * std::pow(s * (1.0 - s), p);
  };
  lo = std::numeric_limits<double>::infinity();
  hi = 0.0;
  for (int i = 1; i < n_lin; ++i) {
    const double s = 0.5 * i / n_lin;
    const double r = shape_ratio(s);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  for (int k = 2; k <= 12; ++k) {
    const double r = shape_ratio(std::pow(10.0, -k));
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  c1_shape_ = lo;
  c2_shape_ = hi;
}

KernelSpec KernelSpec::constant_kernel() {
  KernelSpec k;
  k.family_ = KernelFamily::constant;
  k.gamma_ = 0.0;
  k.lambda_ = 0.0;
  k.name_ = "constant";
  k.finish_init();
  return k;
}

KernelSpec KernelSpec::product(double a_exp, double b_exp) {
  if (b_exp > a_exp) std::swap(a_exp, b_exp);
  KernelSpec k;
  k.family_ = KernelFamily::product;
  k.a_exp_ = a_exp;
  k.b_exp_ = b_exp;
  k.gamma_ = a_exp + b_exp;
  k.lambda_ = -b_exp;
  k.name_ = "product";
  k.finish_init();
  return k;
}

KernelSpec KernelSpec::brownian() {
  KernelSpec k;
  k.family_ = KernelFamily::brownian;
  k.gamma_ = 0.0;
  k.lambda_ = 1.0 / 3.0;
  k.name_ = "brownian";
  k.finish_init();
  return k;
}

KernelSpec KernelSpec::free_molecular() {
  KernelSpec k;
  k.family_ = KernelFamily::free_molecular;
  k.gamma_ = 1.0 / 6.0;
  k.lambda_ = 0.5;
  k.name_ = "free_molecular";
  k.finish_init();
  return k;
}

KernelSpec KernelSpec::custom(double gamma, double lambda) {
  KernelSpec k;
  k.family_ = KernelFamily::custom;
  k.gamma_ = gamma;
  k.lambda_ = lambda;
  k.name_ = "custom";
  k.finish_init();
  return k;
}

bool sigma_rule_ok(const KernelSpec& spec, double sigma) {
  const double p = spec.p_exponent();
  const double gamma = spec.gamma();
  if (p <= 0.0) return sigma == 0.0;
  if (gamma <= 0.0) return sigma > 0.0;
  return sigma > 0.0 && sigma < p / gamma;
}

double default_level_A(const KernelSpec& spec) {
  double sup = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const double s = 0.25 + 0.5 * i / 400.0;
    sup = std::max(sup, spec.shape(s));
  }
  return 2.0 * sup;
}

double default_sigma(const KernelSpec& spec) {
  const double p = spec.p_exponent();
  const double gamma = spec.gamma();
  if (p <= 0.0) return 0.0;
  if (gamma <= 0.0) return 1.0;
  return p / (2.0 * gamma);
}

BoundedKernel::BoundedKernel(const KernelSpec& base, double a, double level_A,
                             double sigma, double taper_band)
    : base_(base), a_(a), level_A_(level_A), sigma_(sigma), band_(taper_band) {}

double BoundedKernel::shape_bounded(double s) const {
  const double f = base_.shape(s);
  const double level = level_A_ * std::pow(a_, sigma_);
  const double lo = level * (1.0 - 0.5 * band_);
  const double hi = level * (1.0 + 0.5 * band_);
  if (f <= lo) return f;
  if (f >= hi) return 0.0;
  const double t = (f - lo) / (hi - lo);
  return f * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

double BoundedKernel::eval(double x, double y) const {
  if (!(x > 0.0) || !(y > 0.0))
    throw DomainError("kernel evaluation requires positive sizes");
  const double s = x / (x + y);
  const double scale = std::min(std::pow(x + y, base_.gamma()), a_);
  return 1.0 / a_ + scale * shape_bounded(s);
}

BoundedKernel truncate_kernel(const KernelSpec& spec, double a, double level_A,
                              double sigma, double taper_band) {
  if (!(a > 1.0)) throw ConfigError("kernel bound parameter must satisfy a > 1");
  if (level_A <= 0.0) level_A = default_level_A(spec);
  if (std::isnan(sigma) || sigma < 0.0) sigma = default_sigma(spec);
  if (!sigma_rule_ok(spec, sigma))
    throw ConfigError("sigma violates the cut-exponent rule for (p, gamma)");
  if (!(taper_band > 0.0) || taper_band >= 1.0)
    throw ConfigError("taper band must lie in (0, 1)");
  return BoundedKernel(spec, a, level_A, sigma, taper_band);
}

Admissibility check_admissibility(const KernelSpec& spec) {
  return spec.admissibility();
}

ScalingExponents scaling_exponents(const KernelSpec& spec) {
  return spec.scaling_exponents();
}

} // namespace coagflux
