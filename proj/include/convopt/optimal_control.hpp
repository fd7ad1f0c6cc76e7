#pragma once

// Reduced control problem
//   J(u) = 1/2 (y_u - y_d)^T M (y_u - y_d) + nu/2 u^T D u,   alpha <= u <= beta
// with the discrete state of pde_solver and D the lumped mass. Gradients and
// Hessian actions are returned as nodal fields g with J'(u) v = <g, v>_D, so
// the first-order
// condition reads u = Proj_[alpha,beta](-phi / nu) node by node.

#include "convopt/pde_solver.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace convopt {

struct OptOptions {
  int max_outer = 200;
  double tol_opt = 1e-9;
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
  double min_step = 1e-14;
  double bb_min = 1e-6;
  double bb_max = 1e6;
  /// Nodes whose projection argument lies within tau_active of a bound stay inactive.
  double tau_active = 1e-12;
  double krylov_tol = 1e-13;
  int krylov_max_iterations = 500;
};

/// Everything known about one control: state, adjoint, J and gradient.
/// Keeps the factorized linearized operator for Hessian actions.
struct ControlPoint {
  ScalarField u;
  ScalarField y;
  ScalarField phi;
  ScalarField gradient;  ///< phi + nu u
  double objective = 0.0;
  std::shared_ptr<const LinearizedOperator> linearized;
};

/// Solves state (and adjoint unless with_adjoint is false) at u.
ControlPoint evaluate_control(const Discretization& disc, const ScalarField& u,
                              bool with_adjoint = true);

double eval_objective(const Discretization& disc, const ScalarField& u);
/// J from a known state.
double objective_value(const Discretization& disc, const ScalarField& u, const ScalarField& y);

ScalarField eval_gradient(const Discretization& disc, const ScalarField& u);

/// Field h with <h, w>_D = J''(u)(v, w). One linearized and one transposed
/// solve on the cached factorization.
ScalarField hessian_vector(const Discretization& disc, const ControlPoint& at,
                           const ScalarField& v);
ScalarField hessian_vector(const Discretization& disc, const ScalarField& u,
                           const ScalarField& v);

/// J''(u)(v, w) via one Hessian action.
double hessian_form(const Discretization& disc, const ControlPoint& at, const ScalarField& v,
                    const ScalarField& w);

/// Nodal clamp; infinite bounds skip their side. Throws UsageError unless alpha < beta.
ScalarField project_box(const ScalarField& u, double alpha, double beta);

/// || u - Proj(-phi / nu) ||_D.
double optimality_residual(const Discretization& disc, const ScalarField& u);
double optimality_residual(const Discretization& disc, const ControlPoint& at);

enum class OptStatus { converged, max_iter, line_search_failure };

std::string to_string(OptStatus status);

struct OptResult {
  ScalarField u;
  ScalarField y;
  ScalarField phi;
  std::vector<double> objective_history;
  std::vector<double> residual_history;
  std::vector<int> active_set_sizes;  ///< semismooth Newton only
  OptStatus status = OptStatus::max_iter;
  int iterations = 0;
  int gradient_fallbacks = 0;
  std::string method;
  std::string message;
};

/// Proj(u_k - s_k g_k) with Barzilai-Borwein initial steps and Armijo
/// backtracking on J.
OptResult optimize_projected_gradient(const Discretization& disc, const ScalarField& u0,
                                      const OptOptions& opts = {});

/// Primal-dual active set iteration on u = Proj(-phi/nu). The inactive block
/// is solved by GMRES on Hessian actions; a non-positive curvature along the
/// computed direction or a non-descending step triggers a projected gradient
/// step instead.
OptResult optimize_semismooth_newton(const Discretization& disc, const ScalarField& u0,
                                     const OptOptions& opts = {});

struct CurvatureReport {
  double minimum = 0.0;          ///< min over sampled directions and Rayleigh quotient
  double sampled_minimum = 0.0;
  double rayleigh_minimum = 0.0;
  bool vacuous = false;          ///< cone is {0}
  int free_nodes = 0;
  int sign_constrained_nodes = 0;
  int fixed_nodes = 0;
  int samples = 0;
  std::uint64_t seed = 0;
};

struct CurvatureOptions {
  /// |phi + nu u| above this at a bound node forces v = 0 there.
  double strict_multiplier_tol = 1e-6;
  /// Distance to a bound under which a node counts as active.
  double bound_tol = 1e-8;
  /// Required stationarity before the cone is formed.
  double stationarity_tol = 1e-6;
};

/// Minimum of J''(u)(v, v) over ||v||_D = 1 in the discrete critical cone.
/// Throws UsageError if u is not stationary.
CurvatureReport critical_cone_curvature(const Discretization& disc, const ScalarField& u,
                                        int n_samples, std::uint64_t seed = 0,
                                        const CurvatureOptions& opts = {});

}  // namespace convopt
