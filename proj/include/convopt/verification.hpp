#pragma once

// Executable checks of the structural properties of the discrete problem:
// derivative consistency, convergence orders, comparison principle, Garding
// constant, Lipschitz stability and quadratic growth. Every randomized check
// takes a seed and records it in its report.

#include "convopt/optimal_control.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace convopt {

struct DiagnosticReport {
  std::string check;
  std::string inputs_digest;
  std::uint64_t seed = 0;
  bool pass = false;
  double tolerance = 0.0;
  /// Named scalar measurements in insertion order.
  std::vector<std::pair<std::string, double>> values;
  /// Named sequences, e.g. per-direction mismatches.
  std::vector<std::pair<std::string, std::vector<double>>> series;
  std::string note;

  void set(const std::string& name, double v);
  /// Throws UsageError for an unknown name.
  double value(const std::string& name) const;
  const std::vector<double>& sequence(const std::string& name) const;
};

struct ConvergenceStudy {
  std::string name;
  std::vector<int> grids;  ///< nx of each grid (ny scales with it)
  std::vector<double> h;
  std::vector<double> l2;
  std::vector<double> h1;
  std::vector<double> max;
  /// Order between grids k and k+1; NaN where both errors are zero.
  std::vector<double> l2_order;
  std::vector<double> h1_order;
  std::vector<double> max_order;
};

/// Digest of everything that determines a discrete problem: grid, nodal
/// samples of the coefficients, nonlinearity, objective, bounds and solver
/// tolerances.
std::string problem_digest(const Discretization& disc);

/// Worker count for the parallel checks: CONVOPT_THREADS if set to a
/// positive integer, the hardware concurrency otherwise.
int thread_count();

/// Step sizes of the finite-difference checks.
inline const std::vector<double> kGradientSteps{1e-3, 1e-4, 1e-5};

/// Central differences of J along each direction against <g, v>_D.
/// Mismatches are relative to max(|<g, v>_D|, ||g||_D ||v||_D). Passes when
/// the mismatch at t = 1e-4 is within `tolerance` and, on mismatches above
/// 10x the state tolerance, decays with slope 2 +- 0.3.
DiagnosticReport gradient_fd_check(const Discretization& disc, const ScalarField& u,
                                   const std::vector<ScalarField>& directions,
                                   double tolerance = 1e-8);
/// Same with `n_directions` seeded Gaussian directions normalized in D.
DiagnosticReport gradient_fd_check(const Discretization& disc, const ScalarField& u,
                                   int n_directions, std::uint64_t seed,
                                   double tolerance = 1e-8);

/// J''(u)(v, v) against (J(u+tv) - 2J(u) + J(u-tv)) / t^2, best over
/// t in {1e-2, 1e-3}, and |J''(v, w) - J''(w, v)| for consecutive direction
/// pairs. Passes when the best relative error is within `tolerance` and the
/// symmetry defect within `symmetry_tolerance`. Throws CapabilityError when f
/// is not C^2.
DiagnosticReport hessian_fd_check(const Discretization& disc, const ScalarField& u,
                                  const std::vector<ScalarField>& directions,
                                  double tolerance = 1e-4, double symmetry_tolerance = 1e-9);
DiagnosticReport hessian_fd_check(const Discretization& disc, const ScalarField& u,
                                  int n_directions, std::uint64_t seed,
                                  double tolerance = 1e-4, double symmetry_tolerance = 1e-9);

/// Smallest C >= 0 with z.(sym(K) + C M) z >= (lambda/4) z.K_I z, where K is
/// diffusion + convection + lumped reaction c and K_I the Laplace stiffness,
/// and gamma_h = min z.(sym(K) + C M) z / z.K_I z. Values "C", "gamma_h",
/// "mu_min". Dense generalized eigensolves; throws SolverError on failure.
DiagnosticReport garding_diagnostic(const UniformGrid& grid, const DiffusionTensor& a,
                                    const VectorCoefficient& b, const Coefficient& c);

struct ComparisonSuiteOptions {
  /// u1 is uniform in [-amplitude, amplitude]; u2 = u1 + |w| with w of the same law.
  double amplitude = 5.0;
  bool identical_pairs = false;
  double tolerance = 1e-9;
  /// Assert the tolerance; false only records the violation.
  bool assert_pass = true;
};

/// comparison_check on n_pairs seeded ordered pairs. Reports the largest
/// violation, the pair achieving it and the per-pair series.
DiagnosticReport comparison_suite(const Discretization& disc, int n_pairs, std::uint64_t seed,
                                  const ComparisonSuiteOptions& opts = {});

/// Samples pairs in the D-ball of `radius` around 0 and records
/// (||dy||_inf + ||dy||_H1) / ||du||_D. Passes when max/median <= 50.
DiagnosticReport lipschitz_stability_check(const Discretization& disc, int n_pairs,
                                           double radius, std::uint64_t seed);

/// A problem family with a known smooth solution vanishing on the boundary
/// and the load that produces it.
struct ManufacturedProblem {
  std::string name;
  std::function<ProblemSpec(int n)> make;
  Coefficient exact;
  std::function<std::array<double, 2>(double, double)> gradient;
  Coefficient load;
};

/// Solves on each grid with the interpolated load and measures L2, H1-seminorm
/// (3x3 Gauss per cell) and nodal max errors. Throws UsageError unless the
/// grids strictly refine.
ConvergenceStudy manufactured_convergence(const ManufacturedProblem& problem,
                                          const std::vector<int>& grids);

/// Samples feasible u with ||u - ubar||_D <= radius and checks
/// J(u) - J(ubar) >= (kappa/2) ||u - ubar||_D^2 with kappa = kappa0 / 2.
/// Throws UsageError if ubar is not stationary to `stationarity_tol` or
/// kappa0 <= 0.
DiagnosticReport quadratic_growth_check(const Discretization& disc, const ScalarField& ubar,
                                        double kappa0, int n_probes, double radius,
                                        std::uint64_t seed, double stationarity_tol = 1e-8);
/// Same with kappa0 taken from critical_cone_curvature (throws UsageError if
/// the cone is vacuous).
DiagnosticReport quadratic_growth_check(const Discretization& disc, const ScalarField& ubar,
                                        int n_probes, double radius, std::uint64_t seed,
                                        double stationarity_tol = 1e-8);

}  // namespace convopt
