#pragma once

#include <functional>
#include <string>

namespace coagflux {

/// Built-in coagulation rate kernels. All are symmetric and homogeneous of
/// degree gamma, and sit inside the two-sided envelope
///   c1*w(x,y) <= K(x,y) <= c2*w(x,y),
///   w(x,y) = x^(gamma+lambda) y^(-lambda) + y^(gamma+lambda) x^(-lambda).
enum class KernelFamily { constant, product, brownian, free_molecular, custom };

struct Admissibility {
  bool gelling;          // gamma >= 1
  bool flux_admissible;  // |gamma + 2*lambda| < 1
};

struct ScalingExponents {
  double alpha;                // (3+gamma)/(1-gamma), amplitude exponent
  double beta;                 // 2/(1-gamma), size exponent
  double small_size_exponent;  // -(3+gamma)/2
};

/// The kernel restricted to the simplex section, K(s, 1-s) for s in (0,1),
/// together with its singularity exponent p = max{lambda, -(gamma+lambda)}
/// and envelope constants against (s(1-s))^-p.
struct ShapeFunction {
  std::function<double(double)> eval;
  double p;
  double c1_shape;
  double c2_shape;
};

class KernelSpec {
public:
  static KernelSpec constant_kernel();                     // K = 2
  static KernelSpec product(double a_exp, double b_exp);   // x^a y^b + x^b y^a
  static KernelSpec brownian();                            // (x^1/3+y^1/3)(x^-1/3+y^-1/3)
  static KernelSpec free_molecular();                      // (x^1/3+y^1/3)^2 sqrt(1/x+1/y)
  static KernelSpec custom(double gamma, double lambda);   // K = w itself

  /// K(x,y); throws DomainError for non-positive sizes.
  double eval(double x, double y) const;
  double operator()(double x, double y) const { return eval(x, y); }

  /// Envelope w(x,y); throws DomainError for non-positive sizes.
  double envelope(double x, double y) const;

  /// F(s) = K(s, 1-s), s in (0,1); throws DomainError outside the interval.
  double shape(double s) const;
  ShapeFunction shape_function() const;

  Admissibility admissibility() const;

  /// Throws DomainError in the gelling regime (gamma >= 1).
  ScalingExponents scaling_exponents() const;

  KernelFamily family() const { return family_; }
  double gamma() const { return gamma_; }
  double lambda() const { return lambda_; }
  double c1() const { return c1_; }
  double c2() const { return c2_; }
  /// p = max{lambda, -(gamma+lambda)}
  double p_exponent() const;
  double a_exp() const { return a_exp_; }
  double b_exp() const { return b_exp_; }
  const std::string& name() const { return name_; }

private:
  KernelSpec() = default;
  void finish_init();
  double eval_unchecked(double x, double y) const;

  KernelFamily family_ = KernelFamily::constant;
  double gamma_ = 0.0;
  double lambda_ = 0.0;
  double a_exp_ = 0.0;  // product family only
  double b_exp_ = 0.0;
  double c1_ = 1.0;
  double c2_ = 1.0;
  double c1_shape_ = 1.0;
  double c2_shape_ = 1.0;
  std::string name_;
};

/// Bounded kernel K_a(x,y) = 1/a + min{(x+y)^gamma, a} F_a(x/(x+y)) where F_a
/// tapers F to zero across a relative band around the level A*a^sigma.
class BoundedKernel {
public:
  BoundedKernel(const KernelSpec& base, double a, double level_A, double sigma,
                double taper_band);

  double eval(double x, double y) const;
  double operator()(double x, double y) const { return eval(x, y); }
  /// F_a(s)
  double shape_bounded(double s) const;

  const KernelSpec& base() const { return base_; }
  double bound() const { return a_; }
  double level_A() const { return level_A_; }
  double sigma() const { return sigma_; }
  double taper_band() const { return band_; }

private:
  KernelSpec base_;
  double a_;
  double level_A_;
  double sigma_;
  double band_;
};

/// sigma rule of the bounded-kernel definition:
///   sigma = 0        if p <= 0,
///   sigma > 0        if p > 0 and gamma <= 0,
///   0 < sigma < p/gamma if p > 0 and gamma > 0.
bool sigma_rule_ok(const KernelSpec& spec, double sigma);

/// Defaults: A = 2 sup_{[1/4,3/4]} F; sigma mid-range legal value.
double default_level_A(const KernelSpec& spec);
double default_sigma(const KernelSpec& spec);

/// Builds the bounded kernel; negative level_A or NaN sigma select defaults.
/// Throws ConfigError when a <= 1 or the sigma rule is violated.
BoundedKernel truncate_kernel(const KernelSpec& spec, double a, double level_A = -1.0,
                              double sigma = -1.0, double taper_band = 0.1);

Admissibility check_admissibility(const KernelSpec& spec);
ScalingExponents scaling_exponents(const KernelSpec& spec);

} // namespace coagflux
