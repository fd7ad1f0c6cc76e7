#include "convopt/catalog.hpp"

#include "convopt/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace convopt::catalog {
namespace {

constexpr double kPi = std::numbers::pi;

[[noreturn]] void unknown(const std::string& what, const std::string& name,
                          const std::vector<std::string>& options) {
  std::string list;
  for (const auto& o : options) list += (list.empty() ? "" : ", ") + o;
  throw UsageError("unknown " + what + " '" + name + "' (expected one of: " + list + ")");
}

Coefficient constant(double c) {
  return [c](double, double) { return c; };
}

}  // namespace

std::vector<std::string> diffusion_names() { return {"identity", "anisotropic", "variable"}; }

DiffusionTensor diffusion(const std::string& name) {
  if (name == "identity") return DiffusionTensor::identity();
  if (name == "anisotropic") {
    // eigenvalues (3 -+ sqrt 2) / 2
    return {constant(2.0), constant(0.5), constant(0.5), constant(1.0), 0.79};
  }
  if (name == "variable") {
    const Coefficient s = [](double x, double y) { return 1.0 + x * y; };
    return {s, constant(0.0), constant(0.0), s, 1.0};
  }
  unknown("diffusion", name, diffusion_names());
}

std::vector<std::string> convection_names() {
  return {"zero", "constant", "rotation", "affine", "expansion", "shear"};
}

VectorCoefficient convection(const std::string& name, double s) {
  if (name == "zero") return VectorCoefficient::zero();
  if (name == "constant") return VectorCoefficient::constant(s, 0.5 * s);
  if (name == "rotation") {
    return {[s](double, double y) { return s * y; }, [s](double x, double) { return -s * x; }};
  }
  if (name == "affine") {
    return {[s](double x, double) { return s * (1.0 + x); }, [s](double, double y) { return s * y; }};
  }
  if (name == "expansion") {
    return {[s](double x, double) { return s * x; }, [s](double, double y) { return s * y; }};
  }
  if (name == "shear") {
    return {constant(s), [s](double x, double) { return s * x; }};
  }
  unknown("convection", name, convection_names());
}

std::vector<std::string> weight_names() { return {"one", "variable"}; }

Coefficient weight(const std::string& name) {
  if (name == "one") return constant(1.0);
  if (name == "variable") return [](double x, double y) { return 1.0 + x * y; };
  unknown("nonlinearity weight", name, weight_names());
}

std::vector<std::string> target_names() { return {"zero", "sine", "bump", "uncontrolled"}; }

ScalarField target(const std::string& name, double amplitude, const ProblemSpec& problem) {
  const UniformGrid& g = problem.grid;
  if (name == "zero") return ScalarField::Zero(g.interior_count());
  if (name == "sine") {
    return interpolate(g, [amplitude](double x, double y) {
      return amplitude * std::sin(kPi * x) * std::sin(2 * kPi * y);
    });
  }
  if (name == "bump") {
    return interpolate(g, [amplitude](double x, double y) {
      return amplitude * 16.0 * x * (1 - x) * y * (1 - y);
    });
  }
  if (name == "uncontrolled") {
    ProblemSpec p = problem;
    p.objective.target = ScalarField::Zero(g.interior_count());
    const Discretization disc(p);
    return amplitude * solve_state_newton(disc, ScalarField::Zero(disc.size())).y;
  }
  unknown("target", name, target_names());
}

double convection_sup(const UniformGrid& g, const VectorCoefficient& b) {
  double sup = 0.0;
  auto visit = [&](double x, double y) { sup = std::max(sup, std::hypot(b.b1(x, y), b.b2(x, y))); };
  for (int j = 0; j <= g.ny; ++j) {
    for (int i = 0; i <= g.nx; ++i) {
      const Point p = g.node(i, j);
      visit(p.x1, p.x2);
      if (i < g.nx && j < g.ny) visit(p.x1 + 0.5 * g.hx, p.x2 + 0.5 * g.hy);
    }
  }
  return sup;
}

std::vector<std::string> control_problem_names() {
  return {"linear_quadratic", "cubic", "exponential"};
}

ProblemSpec control_problem(const std::string& name, int n) {
  ProblemSpec p;
  p.grid = build_grid(RectDomain{}, n, n);
  p.objective.nu = 1e-2;
  p.alpha = -1.0;
  p.beta = 1.0;
  if (name == "linear_quadratic") {
    p.convection = convection("affine");
  } else if (name == "cubic") {
    p.nonlinearity = NonlinearitySpec::power(2.0, weight("one"));
    p.convection = convection("expansion", 2.0);
  } else if (name == "exponential") {
    p.nonlinearity = NonlinearitySpec::exponential(weight("one"));
    p.convection = convection("rotation");
  } else {
    unknown("control problem", name, control_problem_names());
  }
  p.objective.target = target("sine", 1.0, p);
  return p;
}

std::vector<std::string> manufactured_names() {
  return {"cubic_affine", "exponential_affine", "cubic_shear", "zero"};
}

ManufacturedProblem manufactured_sine(const std::string& diffusion_name, const ProblemSpec& base) {
  const DiffusionTensor a = diffusion(diffusion_name);
  const RectDomain dom = base.grid.domain;
  const double lx = dom.x_max - dom.x_min, ly = dom.y_max - dom.y_min;
  const double kx = kPi / lx, ky = kPi / ly;

  ManufacturedProblem mp;
  mp.name = "sine";
  mp.make = [base, a, dom](int n) {
    ProblemSpec p = base;
    p.diffusion = a;
    p.grid = build_grid(dom, n, n);
    p.objective.target = ScalarField::Zero(p.grid.interior_count());
    return p;
  };
  mp.exact = [=](double x, double y) {
    return std::sin(kx * (x - dom.x_min)) * std::sin(ky * (y - dom.y_min));
  };
  mp.gradient = [=](double x, double y) {
    const double sx = std::sin(kx * (x - dom.x_min)), cx = std::cos(kx * (x - dom.x_min));
    const double sy = std::sin(ky * (y - dom.y_min)), cy = std::cos(ky * (y - dom.y_min));
    return std::array<double, 2>{kx * cx * sy, ky * sx * cy};
  };
  const VectorCoefficient b = base.convection;
  const NonlinearitySpec f = base.nonlinearity;
  const bool variable = diffusion_name == "variable";
  mp.load = [=](double x, double y) {
    const double sx = std::sin(kx * (x - dom.x_min)), cx = std::cos(kx * (x - dom.x_min));
    const double sy = std::sin(ky * (y - dom.y_min)), cy = std::cos(ky * (y - dom.y_min));
    const double u = sx * sy;
    const double ux = kx * cx * sy, uy = ky * sx * cy;
    const double uxx = -kx * kx * u, uyy = -ky * ky * u, uxy = kx * ky * cx * cy;
    // -div(a grad u) for a with constant entries or a = (1 + x y) I
    double diffusive = -(a.a11(x, y) * uxx + (a.a12(x, y) + a.a21(x, y)) * uxy + a.a22(x, y) * uyy);
    if (variable) diffusive -= y * ux + x * uy;
    return diffusive + b.b1(x, y) * ux + b.b2(x, y) * uy + f_eval(f, {x, y}, u, 0);
  };
  return mp;
}

ManufacturedProblem manufactured(const std::string& name) {
  const auto exists = manufactured_names();
  if (std::find(exists.begin(), exists.end(), name) == exists.end()) {
    unknown("manufactured problem", name, exists);
  }
  ProblemSpec base;
  base.grid = build_grid(RectDomain{}, 2, 2);
  base.convection = name == "cubic_shear" ? convection("shear") : convection("affine");
  base.nonlinearity = name == "exponential_affine" ? NonlinearitySpec::exponential(weight("one"))
                                                   : NonlinearitySpec::power(2.0, weight("one"));
  ManufacturedProblem mp = manufactured_sine("identity", base);
  mp.name = name;
  if (name == "zero") {
    mp.exact = constant(0.0);
    mp.gradient = [](double, double) { return std::array<double, 2>{0.0, 0.0}; };
    mp.load = constant(0.0);
  }
  return mp;
}

}  // namespace convopt::catalog
