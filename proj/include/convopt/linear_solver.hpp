#pragma once

#include "convopt/mesh.hpp"

#include <memory>

namespace convopt {

struct LinearSolverOptions {
  enum class Method { sparse_lu, gmres_ilut };

  Method method = Method::sparse_lu;
  /// Required ||A x - b|| <= tolerance * max(1, ||b||).
  double tolerance = 1e-10;
  int gmres_restart = 50;
  int gmres_max_iterations = 2000;
};

/// Factorized square operator supporting solves with A and with A^T.
/// The sparse LU path refines once if the first residual misses tolerance.
class LinearSolver {
 public:
  LinearSolver(const SparseMatrix& matrix, LinearSolverOptions options = {});
  ~LinearSolver();
  LinearSolver(LinearSolver&&) noexcept;
  LinearSolver& operator=(LinearSolver&&) noexcept;

  ScalarField solve(const ScalarField& rhs) const;
  ScalarField solve_transpose(const ScalarField& rhs) const;

  std::ptrdiff_t size() const;
  const Eigen::SparseMatrix<double>& matrix() const;

 private:
  struct Impl;
  LinearSolverOptions options_;
  std::unique_ptr<Impl> impl_;
};

/// One-shot solve of op x = rhs; throws SolverError with diagnostics.
ScalarField solve_linear(const SparseOperator& op, const ScalarField& rhs,
                         const LinearSolverOptions& options = {});

}  // namespace convopt
