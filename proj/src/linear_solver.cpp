#include "convopt/linear_solver.hpp"

#include "convopt/error.hpp"

#include <unsupported/Eigen/IterativeSolvers>

#include <algorithm>
#include <optional>
#include <string>

namespace convopt {

struct LinearSolver::Impl {
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  // Krylov path keeps one solver per orientation.
  std::optional<Eigen::GMRES<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>>> gmres;
  std::optional<Eigen::GMRES<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>>> gmres_t;
  // GMRES keeps references to these, so they live here rather than in the
  // movable LinearSolver.
  Eigen::SparseMatrix<double> matrix;
  Eigen::SparseMatrix<double> transposed;
};

LinearSolver::LinearSolver(const SparseMatrix& matrix, LinearSolverOptions options)
    : options_(options), impl_(std::make_unique<Impl>()) {
  if (matrix.rows() != matrix.cols()) throw UsageError("linear solve: operator is not square");
  impl_->matrix = matrix;
  impl_->matrix.makeCompressed();
  impl_->transposed = impl_->matrix.transpose();
  const Eigen::SparseMatrix<double>& op = impl_->matrix;
  if (options_.method == LinearSolverOptions::Method::sparse_lu) {
    impl_->lu.analyzePattern(op);
    impl_->lu.factorize(op);
    if (impl_->lu.info() != Eigen::Success) {
      throw SolverError("sparse LU factorization failed: " + impl_->lu.lastErrorMessage());
    }
    return;
  }
  auto setup = [&](auto& slot, const Eigen::SparseMatrix<double>& a) {
    slot.emplace();
    slot->set_restart(options_.gmres_restart);
    slot->setMaxIterations(options_.gmres_max_iterations);
    slot->setTolerance(options_.tolerance * 1e-2);
    slot->compute(a);
    if (slot->info() != Eigen::Success) {
      throw SolverError("incomplete LU preconditioner setup failed");
    }
  };
  setup(impl_->gmres, op);
  setup(impl_->gmres_t, impl_->transposed);
}

LinearSolver::~LinearSolver() = default;
std::ptrdiff_t LinearSolver::size() const { return impl_->matrix.rows(); }
const Eigen::SparseMatrix<double>& LinearSolver::matrix() const { return impl_->matrix; }
LinearSolver::LinearSolver(LinearSolver&&) noexcept = default;
LinearSolver& LinearSolver::operator=(LinearSolver&&) noexcept = default;

namespace {

void check_residual(const Eigen::SparseMatrix<double>& a, const ScalarField& x,
                    const ScalarField& rhs, double tol, const char* what) {
  const double res = (a * x - rhs).norm();
  const double bound = tol * std::max(1.0, rhs.norm());
  if (!(res <= bound) || !x.allFinite()) {
    throw SolverError(std::string(what) + ": residual " + std::to_string(res) +
                      " exceeds " + std::to_string(bound));
  }
}

}  // namespace

ScalarField LinearSolver::solve(const ScalarField& rhs) const {
  if (rhs.size() != size()) throw UsageError("linear solve: dimension mismatch");
  const Eigen::SparseMatrix<double>& op = impl_->matrix;
  ScalarField x;
  if (impl_->gmres) {
    x = impl_->gmres->solve(rhs);
  } else {
    x = impl_->lu.solve(rhs);
    const ScalarField r = rhs - op * x;
    if (r.norm() > options_.tolerance * std::max(1.0, rhs.norm())) x += impl_->lu.solve(r);
  }
  check_residual(op, x, rhs, options_.tolerance, "linear solve");
  return x;
}

ScalarField LinearSolver::solve_transpose(const ScalarField& rhs) const {
  if (rhs.size() != size()) throw UsageError("linear solve: dimension mismatch");
  const Eigen::SparseMatrix<double>& at = impl_->transposed;
  ScalarField x;
  if (impl_->gmres_t) {
    x = impl_->gmres_t->solve(rhs);
  } else {
    x = impl_->lu.transpose().solve(rhs);
    const ScalarField r = rhs - at * x;
    if (r.norm() > options_.tolerance * std::max(1.0, rhs.norm())) {
      x += impl_->lu.transpose().solve(r);
    }
  }
  check_residual(at, x, rhs, options_.tolerance, "transpose solve");
  return x;
}

ScalarField solve_linear(const SparseOperator& op, const ScalarField& rhs,
                         const LinearSolverOptions& options) {
  return LinearSolver(op.matrix, options).solve(rhs);
}

}  // namespace convopt
