#pragma once

// Discrete state equation
//   K y + m .* f(x, y) = m .* u,    K = A_h + N_h (+ eps_stab * K_I)
// on interior dofs, where A_h is the diffusion stiffness, N_h the convection
// matrix and m the lumped masses. The nonlinearity and the control enter
// nodally, so derivatives with respect to y and u are diagonal and the
// linearized, second-variation and adjoint operators are exact derivatives and
// transposes of the discrete residual. The tracking term uses the consistent
// mass M.

#include "convopt/linear_solver.hpp"
#include "convopt/mesh.hpp"
#include "convopt/nonlinearity.hpp"

#include <limits>
#include <memory>
#include <vector>

namespace convopt {

struct StateSolverOptions {
  /// Absolute Euclidean residual tolerance on interior dofs.
  double tol_state = 1e-10;
  int max_newton = 50;
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
  double min_step = 1.0 / 1048576.0;  // 2^-20
  int max_picard = 5000;
  double picard_relaxation = 1.0;
  /// Isotropic artificial diffusion added to the operator; 0 keeps it faithful.
  double stabilization = 0.0;
  LinearSolverOptions linear;
};

struct ProblemSpec {
  UniformGrid grid;
  DiffusionTensor diffusion = DiffusionTensor::identity();
  VectorCoefficient convection = VectorCoefficient::zero();
  NonlinearitySpec nonlinearity = NonlinearitySpec::zero();
  ObjectiveSpec objective;
  double alpha = -std::numeric_limits<double>::infinity();
  double beta = std::numeric_limits<double>::infinity();
  StateSolverOptions solver;
};

/// Throws SemanticError when an invariant of the problem is violated.
void validate(const ProblemSpec& problem);

/// Assembled operators for one ProblemSpec. Immutable after construction.
class Discretization {
 public:
  explicit Discretization(ProblemSpec problem);

  const ProblemSpec& problem() const { return problem_; }
  const UniformGrid& grid() const { return problem_.grid; }
  std::ptrdiff_t size() const { return problem_.grid.interior_count(); }

  /// K = A_h + N_h (+ stabilization).
  const SparseMatrix& linear_operator() const { return linear_; }
  const SparseMatrix& mass() const { return mass_; }
  const ScalarField& lumped() const { return lumped_; }
  /// Stiffness of -Laplace; defines the discrete H1 seminorm.
  const SparseMatrix& h1_stiffness() const { return h1_; }
  const LinearSolver& linear_solver() const { return *linear_solver_; }

  /// Nodal f^(order)(x_i, y_i), without mass weights.
  ScalarField nonlinearity(const ScalarField& y, int order) const;
  /// Same with y clamped to [-k, k] before evaluation.
  ScalarField truncated_nonlinearity(const ScalarField& y, double k) const;

  /// K y + m .* f(y) - load.
  ScalarField residual(const ScalarField& y, const ScalarField& load) const;

  /// Load m .* u of a nodal control.
  ScalarField control_load(const ScalarField& u) const { return lumped_.cwiseProduct(u); }

  /// Consistent-mass L2 product for states.
  double l2_inner(const ScalarField& v, const ScalarField& w) const;
  double l2_norm(const ScalarField& v) const;
  /// Lumped-mass L2 product for controls; diagonal, so nodal projection and
  /// the variational inequality coincide.
  double control_inner(const ScalarField& v, const ScalarField& w) const;
  double control_norm(const ScalarField& v) const;
  double h1_seminorm(const ScalarField& v) const;

 private:
  ProblemSpec problem_;
  std::vector<Point> points_;
  SparseMatrix linear_;
  SparseMatrix mass_;
  SparseMatrix h1_;
  ScalarField lumped_;
  std::shared_ptr<const LinearSolver> linear_solver_;
};

struct SolveReport {
  bool converged = false;
  int iterations = 0;
  double final_residual = 0.0;
  std::vector<double> residual_history;
  std::vector<double> damping_history;
};

struct StateSolution {
  ScalarField y;
  double residual_norm = 0.0;
  int newton_iterations = 0;
  bool globalization_used = false;
  SolveReport report;
};

/// Damped Newton with Armijo backtracking on ||residual||, started from the
/// solution with f dropped. Falls back to solve_state_truncated with
/// k = 10 (1 + ||u||_inf) on stagnation. tol <= 0 uses the problem default.
StateSolution solve_state_newton(const Discretization& disc, const ScalarField& u,
                                 double tol = 0.0);

/// Same as solve_state_newton for an already assembled load vector int u phi_i
/// (used when the right-hand side is not a control in the dof space).
StateSolution solve_state_load(const Discretization& disc, const ScalarField& load,
                               double tol = 0.0);

/// Under-relaxed Picard iteration on the equation with f(x, proj_[-k,k](y)).
/// Throws TruncationActiveError when the limit reaches |y| >= k.
StateSolution solve_state_truncated(const Discretization& disc, const ScalarField& u,
                                    double k, double tol = 0.0);
StateSolution solve_state_truncated_load(const Discretization& disc, const ScalarField& load,
                                         double k, double tol = 0.0);

/// K + diag(m .* f'(y)) factorized once; solves with the operator and its
/// transpose.
class LinearizedOperator {
 public:
  LinearizedOperator(const Discretization& disc, const ScalarField& y);

  const SparseMatrix& matrix() const { return matrix_; }
  ScalarField apply(const ScalarField& v) const { return matrix_ * v; }
  ScalarField apply_transpose(const ScalarField& w) const {
    return matrix_.transpose() * w;
  }
  ScalarField solve(const ScalarField& rhs) const { return solver_.solve(rhs); }
  ScalarField solve_transpose(const ScalarField& rhs) const {
    return solver_.solve_transpose(rhs);
  }

 private:
  SparseMatrix matrix_;
  LinearSolver solver_;
};

/// z_v: linearized equation with right-hand side m .* v.
ScalarField solve_linearized(const Discretization& disc, const ScalarField& y,
                             const ScalarField& v);
ScalarField solve_linearized(const Discretization& disc, const LinearizedOperator& op,
                             const ScalarField& v);

/// z_{v1,v2}: linearized operator with load -m .* f''(y) .* z1 .* z2.
ScalarField solve_second_variation(const Discretization& disc, const ScalarField& y,
                                   const ScalarField& z1, const ScalarField& z2);
ScalarField solve_second_variation(const Discretization& disc, const LinearizedOperator& op,
                                   const ScalarField& y, const ScalarField& z1,
                                   const ScalarField& z2);

/// phi: transposed linearized operator against the load of dL/dy(x, y).
ScalarField solve_adjoint(const Discretization& disc, const ScalarField& y);
ScalarField solve_adjoint(const Discretization& disc, const LinearizedOperator& op,
                          const ScalarField& y);

struct ComparisonReport {
  double max_violation = 0.0;  ///< max_i (y1 - y2)_i
  std::ptrdiff_t worst_dof = -1;
  bool pass = false;
  double tolerance = 1e-9;
};

/// Solves both states for u1 <= u2 and reports the largest nodal y1 - y2.
/// Throws UsageError if u1 > u2 somewhere.
ComparisonReport comparison_check(const Discretization& disc, const ScalarField& u1,
                                  const ScalarField& u2, double tolerance = 1e-9);

}  // namespace convopt
