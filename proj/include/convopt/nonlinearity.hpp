#pragma once

#include "convopt/mesh.hpp"

namespace convopt {

/// Monotone nonlinearity f(x, y) from a closed catalog:
///   zero:        f = 0
///   power:       f = a0(x) |y|^r y,  r >= 1
///   exponential: f = a0(x) exp(y)
/// with a0 >= 0. Every entry satisfies df/dy >= 0.
struct NonlinearitySpec {
  enum class Kind { zero, power, exponential };

  Kind kind = Kind::zero;
  Coefficient a0 = [](double, double) { return 1.0; };
  double r = 2.0;

  static NonlinearitySpec zero();
  static NonlinearitySpec power(double r, Coefficient a0);
  static NonlinearitySpec exponential(Coefficient a0);

  /// False only for power with r == 1, where the second derivative is a
  /// convention at y = 0 rather than a true derivative.
  bool twice_differentiable() const;
};

/// Throws UsageError for r < 1.
void validate(const NonlinearitySpec& spec);

/// f, df/dy or d2f/dy2 at (x, y). Throws CapabilityError for order 2 on a
/// spec that is not C^2, and MonotonicityError if a0(x) < 0.
double f_eval(const NonlinearitySpec& spec, Point x, double y, int order);

/// Tracking integrand L(x, y) = (y - y_d(x))^2 / 2 with Tikhonov weight nu.
struct ObjectiveSpec {
  ScalarField target;
  double nu = 1e-2;
};

/// L, dL/dy, d2L/dy2 for a target value y_d at the evaluation point.
double L_eval(double target, double y, int order);

}  // namespace convopt
