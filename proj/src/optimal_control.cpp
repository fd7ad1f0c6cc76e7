#include "convopt/optimal_control.hpp"

#include "convopt/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <limits>
#include <random>

namespace convopt {
namespace {

using Operator = std::function<ScalarField(const ScalarField&)>;

// Restarted GMRES with Givens rotations, zero initial guess. Stops on
// ||b - A x|| <= tol * ||b||.
ScalarField gmres(const Operator& apply, const ScalarField& b, double tol, int max_iterations,
                  int restart, int& iterations) {
  const Eigen::Index n = b.size();
  ScalarField x = ScalarField::Zero(n);
  iterations = 0;
  const double bnorm = b.norm();
  if (bnorm == 0.0) return x;
  restart = std::max(1, std::min<int>(restart, static_cast<int>(n)));

  while (iterations < max_iterations) {
    ScalarField r = b - apply(x);
    double beta = r.norm();
    if (beta <= tol * bnorm) break;
    Eigen::MatrixXd v(n, restart + 1);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(restart + 1, restart);
    Eigen::VectorXd cs = Eigen::VectorXd::Zero(restart);
    Eigen::VectorXd sn = Eigen::VectorXd::Zero(restart);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(restart + 1);
    v.col(0) = r / beta;
    g[0] = beta;
    int k = 0;
    for (; k < restart && iterations < max_iterations; ++k, ++iterations) {
      ScalarField w = apply(v.col(k));
      for (int i = 0; i <= k; ++i) {  // modified Gram-Schmidt
        h(i, k) = w.dot(v.col(i));
        w -= h(i, k) * v.col(i);
      }
      h(k + 1, k) = w.norm();
      if (h(k + 1, k) > 0.0) v.col(k + 1) = w / h(k + 1, k);
      for (int i = 0; i < k; ++i) {
        const double t = cs[i] * h(i, k) + sn[i] * h(i + 1, k);
        h(i + 1, k) = -sn[i] * h(i, k) + cs[i] * h(i + 1, k);
        h(i, k) = t;
      }
      const double denom = std::hypot(h(k, k), h(k + 1, k));
      cs[k] = h(k, k) / denom;
      sn[k] = h(k + 1, k) / denom;
      h(k, k) = denom;
      h(k + 1, k) = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];
      if (std::abs(g[k + 1]) <= tol * bnorm || h(k, k) == 0.0) {
        ++k;
        ++iterations;
        break;
      }
    }
    const Eigen::VectorXd y =
        h.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    x += v.leftCols(k) * y;
  }
  return x;
}

bool has_nonlinearity(const Discretization& disc) {
  return disc.problem().nonlinearity.kind != NonlinearitySpec::Kind::zero;
}

}  // namespace

double objective_value(const Discretization& disc, const ScalarField& u, const ScalarField& y) {
  const ScalarField misfit = y - disc.problem().objective.target;
  return 0.5 * disc.l2_inner(misfit, misfit) +
         0.5 * disc.problem().objective.nu * disc.control_inner(u, u);
}

ControlPoint evaluate_control(const Discretization& disc, const ScalarField& u,
                              bool with_adjoint) {
  if (u.size() != disc.size()) throw UsageError("control has wrong length");
  ControlPoint at;
  at.u = u;
  at.y = solve_state_newton(disc, u).y;
  at.objective = objective_value(disc, u, at.y);
  if (with_adjoint) {
    at.linearized = std::make_shared<const LinearizedOperator>(disc, at.y);
    at.phi = solve_adjoint(disc, *at.linearized, at.y);
    at.gradient = at.phi + disc.problem().objective.nu * u;
  }
  return at;
}

double eval_objective(const Discretization& disc, const ScalarField& u) {
  return evaluate_control(disc, u, false).objective;
}

ScalarField eval_gradient(const Discretization& disc, const ScalarField& u) {
  return evaluate_control(disc, u).gradient;
}

ScalarField hessian_vector(const Discretization& disc, const ControlPoint& at,
                           const ScalarField& v) {
  if (!at.linearized) throw UsageError("hessian_vector: control point lacks adjoint data");
  if (v.size() != disc.size()) throw UsageError("hessian_vector: direction has wrong length");
  const ScalarField z = at.linearized->solve(disc.control_load(v));
  ScalarField q = disc.mass() * z;
  if (has_nonlinearity(disc)) {
    if (!disc.problem().nonlinearity.twice_differentiable()) {
      throw CapabilityError("Hessian requires a C^2 nonlinearity");
    }
    q -= disc.lumped().cwiseProduct(disc.nonlinearity(at.y, 2)).cwiseProduct(at.phi).cwiseProduct(z);
  }
  return at.linearized->solve_transpose(q) + disc.problem().objective.nu * v;
}

ScalarField hessian_vector(const Discretization& disc, const ScalarField& u,
                           const ScalarField& v) {
  return hessian_vector(disc, evaluate_control(disc, u), v);
}

double hessian_form(const Discretization& disc, const ControlPoint& at, const ScalarField& v,
                    const ScalarField& w) {
  return disc.control_inner(hessian_vector(disc, at, v), w);
}

ScalarField project_box(const ScalarField& u, double alpha, double beta) {
  if (!(alpha < beta)) throw UsageError("project_box: requires alpha < beta");
  return u.cwiseMax(alpha).cwiseMin(beta);
}

double optimality_residual(const Discretization& disc, const ControlPoint& at) {
  const auto& p = disc.problem();
  const ScalarField target = project_box(-at.phi / p.objective.nu, p.alpha, p.beta);
  return disc.control_norm(at.u - target);
}

double optimality_residual(const Discretization& disc, const ScalarField& u) {
  return optimality_residual(disc, evaluate_control(disc, u));
}

std::string to_string(OptStatus status) {
  switch (status) {
    case OptStatus::converged:
      return "converged";
    case OptStatus::max_iter:
      return "max_iter";
    case OptStatus::line_search_failure:
      return "line_search_failure";
  }
  return "unknown";
}

namespace {

OptResult finish(OptResult res, const ControlPoint& at) {
  res.u = at.u;
  res.y = at.y;
  res.phi = at.phi;
  return res;
}

struct StepOutcome {
  bool accepted = false;
  ControlPoint next;
  double step = 0.0;
};

// Armijo backtracking along the projection arc Proj(u - s g). A step that
// fails the Armijo test is still taken when it lowers both J and the
// optimality residual, which only happens at rounding level near the optimum.
StepOutcome projected_step(const Discretization& disc, const ControlPoint& at, double residual,
                           double s, const OptOptions& opts) {
  const auto& p = disc.problem();
  StepOutcome out;
  while (s >= opts.min_step) {
    const ScalarField trial_u = project_box(at.u - s * at.gradient, p.alpha, p.beta);
    try {
      ControlPoint trial = evaluate_control(disc, trial_u);
      const double decrease = disc.control_inner(at.gradient, trial_u - at.u);
      const bool armijo = trial.objective <= at.objective + opts.armijo_c * decrease;
      const bool tie = trial.objective <= at.objective &&
                       optimality_residual(disc, trial) < residual;
      if (armijo || tie) {
        out.accepted = true;
        out.next = std::move(trial);
        out.step = s;
        return out;
      }
    } catch (const StateSolveError&) {
    } catch (const SolverError&) {
    }
    s *= opts.backtrack_factor;
  }
  return out;
}

}  // namespace

OptResult optimize_projected_gradient(const Discretization& disc, const ScalarField& u0,
                                      const OptOptions& opts) {
  const auto& p = disc.problem();
  OptResult res;
  res.method = "projected_gradient";
  ControlPoint at = evaluate_control(disc, project_box(u0, p.alpha, p.beta));
  double residual = optimality_residual(disc, at);
  res.objective_history.push_back(at.objective);
  res.residual_history.push_back(residual);

  double s = std::clamp(1.0 / p.objective.nu, opts.bb_min, opts.bb_max);
  while (residual > opts.tol_opt) {
    if (res.iterations >= opts.max_outer) {
      res.status = OptStatus::max_iter;
      res.message = "iteration budget exhausted";
      return finish(std::move(res), at);
    }
    StepOutcome step = projected_step(disc, at, residual, s, opts);
    if (!step.accepted) {
      res.status = OptStatus::line_search_failure;
      res.message = "Armijo backtracking fell below the minimum step " +
                    std::to_string(opts.min_step) + " at residual " + std::to_string(residual);
      return finish(std::move(res), at);
    }
    const ScalarField du = step.next.u - at.u;
    const ScalarField dg = step.next.gradient - at.gradient;
    const double curvature = disc.control_inner(du, dg);
    s = curvature > 0.0 ? std::clamp(disc.control_inner(du, du) / curvature, opts.bb_min, opts.bb_max)
                        : opts.bb_max;
    at = std::move(step.next);
    residual = optimality_residual(disc, at);
    ++res.iterations;
    res.objective_history.push_back(at.objective);
    res.residual_history.push_back(residual);
  }
  res.status = OptStatus::converged;
  res.message = "optimality residual below tolerance";
  return finish(std::move(res), at);
}

OptResult optimize_semismooth_newton(const Discretization& disc, const ScalarField& u0,
                                     const OptOptions& opts) {
  const auto& p = disc.problem();
  const double nu = p.objective.nu;
  const Eigen::Index n = disc.size();
  OptResult res;
  res.method = "semismooth_newton";
  ControlPoint at = evaluate_control(disc, u0);
  double residual = optimality_residual(disc, at);
  res.objective_history.push_back(at.objective);
  res.residual_history.push_back(residual);

  std::vector<Eigen::Index> previous_inactive;
  bool first = true;
  while (residual > opts.tol_opt) {
    if (res.iterations >= opts.max_outer) {
      res.status = OptStatus::max_iter;
      res.message = "active set did not stabilize within the iteration budget";
      return finish(std::move(res), at);
    }
    // active sets from the projection argument -phi/nu
    const ScalarField w = -at.phi / nu;
    ScalarField delta = ScalarField::Zero(n);
    std::vector<Eigen::Index> inactive;
    int active = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (w[i] > p.beta + opts.tau_active) {
        delta[i] = p.beta - at.u[i];
        ++active;
      } else if (w[i] < p.alpha - opts.tau_active) {
        delta[i] = p.alpha - at.u[i];
        ++active;
      } else {
        inactive.push_back(i);
      }
    }
    res.active_set_sizes.push_back(active);

    // (H delta)_I = -g_I with delta fixed on the active set
    bool newton_ok = true;
    if (!inactive.empty()) {
      const auto ni = static_cast<Eigen::Index>(inactive.size());
      ScalarField rhs(ni);
      const ScalarField h_active = delta.isZero(0.0) ? ScalarField::Zero(n)
                                                     : hessian_vector(disc, at, delta);
      for (Eigen::Index k = 0; k < ni; ++k) {
        rhs[k] = -at.gradient[inactive[k]] - h_active[inactive[k]];
      }
      auto reduced = [&](const ScalarField& x) {
        ScalarField full = ScalarField::Zero(n);
        for (Eigen::Index k = 0; k < ni; ++k) full[inactive[k]] = x[k];
        const ScalarField hx = hessian_vector(disc, at, full);
        ScalarField out(ni);
        for (Eigen::Index k = 0; k < ni; ++k) out[k] = hx[inactive[k]];
        return out;
      };
      int krylov_iterations = 0;
      const ScalarField x = gmres(reduced, rhs, opts.krylov_tol, opts.krylov_max_iterations,
                                  100, krylov_iterations);
      ScalarField xi = ScalarField::Zero(n);
      for (Eigen::Index k = 0; k < ni; ++k) xi[inactive[k]] = x[k];
      const double curvature = disc.control_inner(hessian_vector(disc, at, xi), xi);
      if (!(curvature > 0.0) && xi.norm() > 0.0) newton_ok = false;
      delta += xi;
    }

    std::optional<ControlPoint> next;
    if (newton_ok) {
      try {
        ControlPoint trial = evaluate_control(disc, at.u + delta);
        const double trial_residual = optimality_residual(disc, trial);
        // accept full steps while the active set is changing or the
        // residual drops; otherwise globalize with a gradient step
        if (trial_residual < residual || inactive != previous_inactive || first) {
          next = std::move(trial);
        }
      } catch (const StateSolveError&) {
      } catch (const SolverError&) {
      }
    }
    if (!next) {
      ++res.gradient_fallbacks;
      StepOutcome step = projected_step(disc, at, residual, 1.0 / nu, opts);
      if (!step.accepted) {
        res.status = OptStatus::line_search_failure;
        res.message = "gradient fallback failed to find an acceptable step";
        return finish(std::move(res), at);
      }
      next = std::move(step.next);
    }
    previous_inactive = std::move(inactive);
    first = false;
    at = std::move(*next);
    residual = optimality_residual(disc, at);
    ++res.iterations;
    res.objective_history.push_back(at.objective);
    res.residual_history.push_back(residual);
  }
  res.status = OptStatus::converged;
  res.message = "optimality residual below tolerance";
  return finish(std::move(res), at);
}

CurvatureReport critical_cone_curvature(const Discretization& disc, const ScalarField& u,
                                        int n_samples, std::uint64_t seed,
                                        const CurvatureOptions& opts) {
  const auto& p = disc.problem();
  const ControlPoint at = evaluate_control(disc, u);
  const double residual = optimality_residual(disc, at);
  if (residual > opts.stationarity_tol) {
    throw UsageError("critical_cone_curvature: control is not stationary (residual " +
                     std::to_string(residual) + ")");
  }
  const Eigen::Index n = disc.size();
  // +1: v >= 0, -1: v <= 0, 0: free, 2: v = 0
  std::vector<int> kind(static_cast<std::size_t>(n), 0);
  std::vector<Eigen::Index> free_nodes;
  CurvatureReport rep;
  rep.seed = seed;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool at_lower = std::abs(u[i] - p.alpha) <= opts.bound_tol;
    const bool at_upper = std::abs(u[i] - p.beta) <= opts.bound_tol;
    const bool strict = std::abs(at.gradient[i]) > opts.strict_multiplier_tol;
    int& k = kind[static_cast<std::size_t>(i)];
    if (strict) {
      k = 2;
      ++rep.fixed_nodes;
    } else if (at_lower) {
      k = 1;
      ++rep.sign_constrained_nodes;
    } else if (at_upper) {
      k = -1;
      ++rep.sign_constrained_nodes;
    } else {
      free_nodes.push_back(i);
      ++rep.free_nodes;
    }
  }
  if (rep.free_nodes == 0 && rep.sign_constrained_nodes == 0) {
    rep.vacuous = true;
    rep.minimum = rep.sampled_minimum = rep.rayleigh_minimum =
        std::numeric_limits<double>::infinity();
    return rep;
  }

  rep.rayleigh_minimum = std::numeric_limits<double>::infinity();
  if (!free_nodes.empty()) {
    // reduced Hessian D H on the free nodes against the lumped mass D
    const auto nf = static_cast<Eigen::Index>(free_nodes.size());
    Eigen::MatrixXd hff(nf, nf);
    Eigen::MatrixXd mff = Eigen::MatrixXd::Zero(nf, nf);
    for (Eigen::Index c = 0; c < nf; ++c) {
      ScalarField e = ScalarField::Zero(n);
      e[free_nodes[c]] = 1.0;
      const ScalarField col = disc.control_load(hessian_vector(disc, at, e));
      for (Eigen::Index r = 0; r < nf; ++r) hff(r, c) = col[free_nodes[r]];
      mff(c, c) = disc.lumped()[free_nodes[c]];
    }
    const Eigen::MatrixXd sym = 0.5 * (hff + hff.transpose());
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, mff,
                                                                  Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) throw SolverError("critical cone: eigensolve failed");
    rep.rayleigh_minimum = eig.eigenvalues().minCoeff();
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  rep.sampled_minimum = std::numeric_limits<double>::infinity();
  for (int s = 0; s < n_samples; ++s) {
    ScalarField v = ScalarField::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int k = kind[static_cast<std::size_t>(i)];
      const double draw = normal(rng);
      if (k == 0) v[i] = draw;
      else if (k == 1) v[i] = std::abs(draw);
      else if (k == -1) v[i] = -std::abs(draw);
    }
    const double norm = disc.control_norm(v);
    if (norm == 0.0) continue;
    v /= norm;
    rep.sampled_minimum = std::min(rep.sampled_minimum, hessian_form(disc, at, v, v));
    ++rep.samples;
  }
  rep.minimum = std::min(rep.sampled_minimum, rep.rayleigh_minimum);
  return rep;
}

}  // namespace convopt
