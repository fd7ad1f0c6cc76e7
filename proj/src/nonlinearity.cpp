#include "convopt/nonlinearity.hpp"

#include "convopt/error.hpp"

#include <cmath>
#include <string>

namespace convopt {

NonlinearitySpec NonlinearitySpec::zero() { return {Kind::zero, {}, 0.0}; }

NonlinearitySpec NonlinearitySpec::power(double r, Coefficient a0) {
  NonlinearitySpec s{Kind::power, std::move(a0), r};
  validate(s);
  return s;
}

NonlinearitySpec NonlinearitySpec::exponential(Coefficient a0) {
  return {Kind::exponential, std::move(a0), 0.0};
}

bool NonlinearitySpec::twice_differentiable() const {
  return !(kind == Kind::power && r == 1.0);
}

void validate(const NonlinearitySpec& spec) {
  if (spec.kind == NonlinearitySpec::Kind::power && !(spec.r >= 1.0)) {
    throw UsageError("power nonlinearity requires r >= 1 (got " + std::to_string(spec.r) + ")");
  }
}

double f_eval(const NonlinearitySpec& spec, Point x, double y, int order) {
  if (order < 0 || order > 2) throw UsageError("f_eval: order must be 0, 1 or 2");
  if (spec.kind == NonlinearitySpec::Kind::zero) return 0.0;
  if (order == 2 && !spec.twice_differentiable()) {
    throw CapabilityError("f_eval: power nonlinearity with r = 1 is first-order only");
  }
  const double a0 = spec.a0(x.x1, x.x2);
  if (a0 < 0.0) {
    throw MonotonicityError("nonlinearity weight a0 is negative at (" +
                            std::to_string(x.x1) + ", " + std::to_string(x.x2) + ")");
  }
  if (spec.kind == NonlinearitySpec::Kind::exponential) return a0 * std::exp(y);

  const double r = spec.r;
  const double ay = std::abs(y);
  switch (order) {
    case 0:
      return a0 * std::pow(ay, r) * y;
    case 1:
      return a0 * (r + 1.0) * std::pow(ay, r);
    default:
      // r (r+1) |y|^(r-1) sign(y); set to 0 at y = 0
      if (y == 0.0) return 0.0;
      return a0 * r * (r + 1.0) * std::pow(ay, r - 1.0) * (y > 0.0 ? 1.0 : -1.0);
  }
}

double L_eval(double target, double y, int order) {
  const double e = y - target;
  switch (order) {
    case 0:
      return 0.5 * e * e;
    case 1:
      return e;
    case 2:
      return 1.0;
    default:
      throw UsageError("L_eval: order must be 0, 1 or 2");
  }
}

}  // namespace convopt
