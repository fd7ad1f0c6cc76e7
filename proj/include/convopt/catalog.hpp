#pragma once

// Named coefficient choices exposed to configuration files, the catalog of
// control problems and the manufactured-solution families.

#include "convopt/verification.hpp"

#include <string>
#include <vector>

namespace convopt::catalog {

/// "identity", "anisotropic" (a = [[2, 0.5], [0.5, 1]], lambda 0.79),
/// "variable" (a = (1 + x1 x2) I).
DiffusionTensor diffusion(const std::string& name);
std::vector<std::string> diffusion_names();

/// "zero", "constant" (1, 0.5), "rotation" (x2, -x1), "affine" (1 + x1, x2),
/// "expansion" (x1, x2), "shear" (1, x1); every entry is multiplied by scale.
VectorCoefficient convection(const std::string& name, double scale = 1.0);
std::vector<std::string> convection_names();

/// Nonlinearity weight a0: "one", "variable" (1 + x1 x2).
Coefficient weight(const std::string& name);
std::vector<std::string> weight_names();

/// "zero", "sine" (amplitude sin(pi x1) sin(2 pi x2)), "bump"
/// (amplitude 16 x1 (1 - x1) x2 (1 - x2)), "uncontrolled" (the state of u = 0,
/// scaled by amplitude). The last needs the rest of the problem to be set.
ScalarField target(const std::string& name, double amplitude, const ProblemSpec& problem);
std::vector<std::string> target_names();

/// Largest |b| over grid nodes and cell centres.
double convection_sup(const UniformGrid& grid, const VectorCoefficient& b);

/// Control problems on the unit square with nu = 1e-2, bounds [-1, 1] and a
/// sine target of amplitude 1:
///   "linear_quadratic": f = 0, b = affine
///   "cubic":            f = y^3, b = 2 expansion
///   "exponential":      f = exp(y), b = rotation
ProblemSpec control_problem(const std::string& name, int n);
std::vector<std::string> control_problem_names();

/// y* = sin(pi x1) sin(pi x2) with the load that produces it:
///   "cubic_affine":       f = y^3, b = (1 + x1, x2)   (div b = 2)
///   "exponential_affine": f = exp(y), b = (1 + x1, x2)
///   "cubic_shear":        f = y^3, b = (1, x1)        (div b = 0)
///   "zero":               y* = 0, f = y^3, b = (1 + x1, x2)
ManufacturedProblem manufactured(const std::string& name);

/// y* = sin(pi s) sin(pi t) in the domain's local coordinates s, t in [0, 1]
/// for an arbitrary catalog diffusion, convection and nonlinearity; `base`
/// supplies everything but the grid. The load is exact for the named
/// diffusion entry.
ManufacturedProblem manufactured_sine(const std::string& diffusion_name, const ProblemSpec& base);
std::vector<std::string> manufactured_names();

}  // namespace convopt::catalog
