#include "convopt/pde_solver.hpp"

#include "convopt/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace convopt {

void validate(const ProblemSpec& p) {
  if (p.grid.nx < 2 || p.grid.ny < 2) throw SemanticError("grid must have nx, ny >= 2");
  if (!(p.alpha < p.beta)) throw SemanticError("control bounds require alpha < beta");
  if (!(p.objective.nu > 0.0)) throw SemanticError("Tikhonov weight requires ν > 0");
  if (p.objective.target.size() != p.grid.interior_count()) {
    throw SemanticError("target y_d has wrong length for the grid");
  }
  if (!p.objective.target.allFinite()) throw SemanticError("target y_d must be finite");
  if (!(p.solver.stabilization >= 0.0)) throw SemanticError("stabilization must be >= 0");
  if (!(p.solver.tol_state > 0.0)) throw SemanticError("tol_state must be positive");
  try {
    validate(p.nonlinearity);
  } catch (const UsageError& e) {
    throw SemanticError(e.what());
  }
}

Discretization::Discretization(ProblemSpec problem) : problem_(std::move(problem)) {
  validate(problem_);
  const UniformGrid& g = problem_.grid;
  points_.reserve(static_cast<std::size_t>(g.interior_count()));
  for (std::ptrdiff_t d = 0; d < g.interior_count(); ++d) points_.push_back(g.dof_point(d));

  h1_ = assemble_diffusion(g, DiffusionTensor::identity()).matrix;
  linear_ = assemble_diffusion(g, problem_.diffusion).matrix +
            assemble_convection(g, problem_.convection).matrix;
  if (problem_.solver.stabilization > 0.0) linear_ += problem_.solver.stabilization * h1_;
  linear_.makeCompressed();
  mass_ = assemble_mass(g).matrix;
  lumped_ = lumped_mass(g);

  // a0 >= 0 is checked once up front for the nodal evaluation points
  if (problem_.nonlinearity.kind != NonlinearitySpec::Kind::zero) {
    for (const Point& x : points_) {
      if (problem_.nonlinearity.a0(x.x1, x.x2) < 0.0) {
        throw SemanticError("nonlinearity weight a0 must be nonnegative");
      }
    }
  }
  linear_solver_ = std::make_shared<LinearSolver>(linear_, problem_.solver.linear);
}

ScalarField Discretization::nonlinearity(const ScalarField& y, int order) const {
  ScalarField out(y.size());
  for (std::ptrdiff_t i = 0; i < y.size(); ++i) {
    out[i] = f_eval(problem_.nonlinearity, points_[static_cast<std::size_t>(i)], y[i], order);
  }
  return out;
}

ScalarField Discretization::truncated_nonlinearity(const ScalarField& y, double k) const {
  return nonlinearity(y.cwiseMax(-k).cwiseMin(k), 0);
}

ScalarField Discretization::residual(const ScalarField& y, const ScalarField& load) const {
  ScalarField r = linear_ * y - load;
  if (problem_.nonlinearity.kind != NonlinearitySpec::Kind::zero) {
    r += lumped_.cwiseProduct(nonlinearity(y, 0));
  }
  return r;
}

double Discretization::l2_inner(const ScalarField& v, const ScalarField& w) const {
  return v.dot(mass_ * w);
}

double Discretization::l2_norm(const ScalarField& v) const {
  return std::sqrt(std::max(0.0, l2_inner(v, v)));
}

double Discretization::control_inner(const ScalarField& v, const ScalarField& w) const {
  return v.cwiseProduct(lumped_).dot(w);
}

double Discretization::control_norm(const ScalarField& v) const {
  return std::sqrt(control_inner(v, v));
}

double Discretization::h1_seminorm(const ScalarField& v) const {
  return std::sqrt(std::max(0.0, v.dot(h1_ * v)));
}

namespace {

double resolve_tol(const Discretization& disc, double tol) {
  return tol > 0.0 ? tol : disc.problem().solver.tol_state;
}

double finite_norm(const ScalarField& r) {
  return r.allFinite() ? r.norm() : std::numeric_limits<double>::infinity();
}

// sup of the nodal control behind `load`
double load_sup(const Discretization& disc, const ScalarField& load) {
  return load.cwiseQuotient(disc.lumped()).cwiseAbs().maxCoeff();
}

}  // namespace

LinearizedOperator::LinearizedOperator(const Discretization& disc, const ScalarField& y)
    : matrix_([&] {
        SparseMatrix k = disc.linear_operator();
        if (disc.problem().nonlinearity.kind != NonlinearitySpec::Kind::zero) {
          const ScalarField c = disc.nonlinearity(y, 1);
          k += assemble_reaction(disc.grid(), c).matrix;
        }
        k.makeCompressed();
        return k;
      }()),
      solver_(matrix_, disc.problem().solver.linear) {}

StateSolution solve_state_newton(const Discretization& disc, const ScalarField& u, double tol) {
  if (u.size() != disc.size()) throw UsageError("state solve: control has wrong length");
  return solve_state_load(disc, disc.control_load(u), tol);
}

StateSolution solve_state_load(const Discretization& disc, const ScalarField& load, double tol) {
  if (load.size() != disc.size()) throw UsageError("state solve: load has wrong length");
  const StateSolverOptions& opts = disc.problem().solver;
  tol = resolve_tol(disc, tol);

  StateSolution sol;
  sol.y = disc.linear_solver().solve(load);
  ScalarField r = disc.residual(sol.y, load);
  double rnorm = finite_norm(r);
  sol.report.residual_history.push_back(rnorm);

  bool stagnated = false;
  while (rnorm > tol) {
    if (sol.newton_iterations >= opts.max_newton) {
      stagnated = true;
      break;
    }
    const LinearizedOperator jac(disc, sol.y);
    ScalarField step;
    try {
      step = jac.solve(-r);
    } catch (const SolverError&) {
      stagnated = true;
      break;
    }
    double s = 1.0;
    ScalarField trial;
    ScalarField trial_r;
    double trial_norm = 0.0;
    for (;;) {
      trial = sol.y + s * step;
      trial_r = disc.residual(trial, load);
      trial_norm = finite_norm(trial_r);
      if (trial_norm <= (1.0 - opts.armijo_c * s) * rnorm) break;
      s *= opts.backtrack_factor;
      if (s < opts.min_step) break;
    }
    if (s < opts.min_step) {
      stagnated = true;
      break;
    }
    sol.y = std::move(trial);
    r = std::move(trial_r);
    rnorm = trial_norm;
    ++sol.newton_iterations;
    sol.report.damping_history.push_back(s);
    sol.report.residual_history.push_back(rnorm);
  }

  if (stagnated) {
    const double k = 10.0 * (1.0 + load_sup(disc, load));
    StateSolution fallback;
    try {
      fallback = solve_state_truncated_load(disc, load, k, tol);
    } catch (const StateSolveError& e) {
      throw StateSolveError("state solve failed: Newton stagnated after " +
                            std::to_string(sol.newton_iterations) + " iterations at residual " +
                            std::to_string(rnorm) + "; truncated fallback: " + e.what());
    }
    fallback.globalization_used = true;
    fallback.newton_iterations = sol.newton_iterations;
    auto& hist = sol.report.residual_history;
    hist.insert(hist.end(), fallback.report.residual_history.begin(),
                fallback.report.residual_history.end());
    fallback.report.residual_history = hist;
    fallback.report.damping_history = sol.report.damping_history;
    return fallback;
  }

  sol.residual_norm = rnorm;
  sol.report.converged = true;
  sol.report.iterations = sol.newton_iterations;
  sol.report.final_residual = rnorm;
  return sol;
}

StateSolution solve_state_truncated(const Discretization& disc, const ScalarField& u, double k,
                                    double tol) {
  if (u.size() != disc.size()) throw UsageError("state solve: control has wrong length");
  return solve_state_truncated_load(disc, disc.control_load(u), k, tol);
}

StateSolution solve_state_truncated_load(const Discretization& disc, const ScalarField& load,
                                         double k, double tol) {
  if (!(k > 0.0)) throw UsageError("truncation level must be positive");
  if (load.size() != disc.size()) throw UsageError("state solve: load has wrong length");
  const StateSolverOptions& opts = disc.problem().solver;
  tol = resolve_tol(disc, tol);
  const ScalarField& m = disc.lumped();
  const bool has_f = disc.problem().nonlinearity.kind != NonlinearitySpec::Kind::zero;

  auto truncated_residual = [&](const ScalarField& y) {
    ScalarField r = disc.linear_operator() * y - load;
    if (has_f) r += m.cwiseProduct(disc.truncated_nonlinearity(y, k));
    return r;
  };
  auto picard_map = [&](const ScalarField& y) {
    ScalarField rhs = load;
    if (has_f) rhs -= m.cwiseProduct(disc.truncated_nonlinearity(y, k));
    return disc.linear_solver().solve(rhs);
  };

  StateSolution sol;
  sol.globalization_used = true;
  sol.y = ScalarField::Zero(disc.size());
  double omega = opts.picard_relaxation;
  double previous_increment = std::numeric_limits<double>::infinity();
  double rnorm = finite_norm(truncated_residual(sol.y));
  sol.report.residual_history.push_back(rnorm);
  int it = 0;
  while (rnorm > tol) {
    if (it >= opts.max_picard) {
      throw StateSolveError("truncated Picard iteration did not converge in " +
                            std::to_string(it) + " iterations (residual " +
                            std::to_string(rnorm) + ")");
    }
    const ScalarField increment = picard_map(sol.y) - sol.y;
    const double inc = increment.lpNorm<Eigen::Infinity>();
    if (inc > previous_increment && omega > 1e-3) omega *= 0.5;
    previous_increment = inc;
    sol.y += omega * increment;
    rnorm = finite_norm(truncated_residual(sol.y));
    sol.report.residual_history.push_back(rnorm);
    sol.report.damping_history.push_back(omega);
    ++it;
  }
  const double sup = sol.y.lpNorm<Eigen::Infinity>();
  if (sup >= k) {
    throw TruncationActiveError("truncation active: |y|_inf = " + std::to_string(sup) +
                                " reaches k = " + std::to_string(k) +
                                "; rerun with a larger truncation level");
  }
  sol.residual_norm = rnorm;
  sol.report.converged = true;
  sol.report.iterations = it;
  sol.report.final_residual = rnorm;
  return sol;
}

ScalarField solve_linearized(const Discretization& disc, const ScalarField& y,
                             const ScalarField& v) {
  return solve_linearized(disc, LinearizedOperator(disc, y), v);
}

ScalarField solve_linearized(const Discretization& disc, const LinearizedOperator& op,
                             const ScalarField& v) {
  if (v.size() != disc.size()) throw UsageError("linearized solve: direction has wrong length");
  return op.solve(disc.control_load(v));
}

ScalarField solve_second_variation(const Discretization& disc, const ScalarField& y,
                                   const ScalarField& z1, const ScalarField& z2) {
  return solve_second_variation(disc, LinearizedOperator(disc, y), y, z1, z2);
}

ScalarField solve_second_variation(const Discretization& disc, const LinearizedOperator& op,
                                   const ScalarField& y, const ScalarField& z1,
                                   const ScalarField& z2) {
  if (!disc.problem().nonlinearity.twice_differentiable()) {
    throw CapabilityError("second variation requires a C^2 nonlinearity");
  }
  if (disc.problem().nonlinearity.kind == NonlinearitySpec::Kind::zero) {
    return ScalarField::Zero(disc.size());
  }
  const ScalarField load =
      -disc.lumped().cwiseProduct(disc.nonlinearity(y, 2)).cwiseProduct(z1.cwiseProduct(z2));
  return op.solve(load);
}

ScalarField solve_adjoint(const Discretization& disc, const ScalarField& y) {
  return solve_adjoint(disc, LinearizedOperator(disc, y), y);
}

ScalarField solve_adjoint(const Discretization& disc, const LinearizedOperator& op,
                          const ScalarField& y) {
  if (y.size() != disc.size()) throw UsageError("adjoint solve: state has wrong length");
  // dL/dy = y - y_d for tracking, assembled with the consistent mass
  const ScalarField misfit = y - disc.problem().objective.target;
  return op.solve_transpose(disc.mass() * misfit);
}

ComparisonReport comparison_check(const Discretization& disc, const ScalarField& u1,
                                  const ScalarField& u2, double tolerance) {
  if (u1.size() != disc.size() || u2.size() != disc.size()) {
    throw UsageError("comparison: controls have wrong length");
  }
  if ((u1.array() > u2.array()).any()) {
    throw UsageError("comparison: requires u1 <= u2 at every node");
  }
  const ScalarField y1 = solve_state_newton(disc, u1).y;
  const ScalarField y2 = solve_state_newton(disc, u2).y;
  ComparisonReport rep;
  rep.tolerance = tolerance;
  const ScalarField diff = y1 - y2;
  Eigen::Index worst = 0;
  rep.max_violation = diff.maxCoeff(&worst);
  rep.worst_dof = worst;
  rep.pass = rep.max_violation <= tolerance;
  return rep;
}

}  // namespace convopt
