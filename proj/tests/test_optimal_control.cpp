#include <doctest.h>

#include "convopt/error.hpp"
#include "convopt/optimal_control.hpp"
#include "test_support.hpp"

#include <Eigen/Dense>

using namespace convopt;
using namespace convopt::testing;

namespace {

ScalarField bump(const UniformGrid& g, double amplitude) {
  return interpolate(g, [amplitude](double x, double y) {
    return amplitude * std::sin(kPi * x) * std::sin(2 * kPi * y);
  });
}

ProblemSpec lq_problem(int n, double alpha, double beta, double amplitude = 0.1) {
  ProblemSpec p = base_problem(n, NonlinearitySpec::zero(), affine_b(0, 0, 3, 3, -3, 0));
  p.objective.target = bump(p.grid, amplitude);
  p.alpha = alpha;
  p.beta = beta;
  return p;
}

ProblemSpec cubic_problem(int n, double alpha = -1.0, double beta = 1.0) {
  ProblemSpec p = base_problem(n, NonlinearitySpec::power(2.0, constant(1.0)),
                               affine_b(1, 1, 0, 0, 0, 1));
  p.objective.target = bump(p.grid, 1.0);
  p.alpha = alpha;
  p.beta = beta;
  return p;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// Dense control-to-state matrix S = K^{-1} D for f = 0.
Eigen::MatrixXd dense_control_to_state(const Discretization& disc) {
  const Eigen::MatrixXd k = dense(disc.linear_operator());
  return k.partialPivLu().solve(Eigen::MatrixXd(disc.lumped().asDiagonal()));
}

// Reduced QP for f = 0: 1/2 u^T Q u + c^T u with Q = S^T M S + nu D.
struct DenseQP {
  Eigen::MatrixXd q;
  Eigen::VectorXd c;
};

DenseQP dense_qp(const Discretization& disc) {
  const Eigen::MatrixXd s = dense_control_to_state(disc);
  const Eigen::MatrixXd m = dense(disc.mass());
  DenseQP qp;
  qp.q = s.transpose() * m * s;
  qp.q.diagonal() += disc.problem().objective.nu * disc.lumped();
  qp.c = -s.transpose() * (m * disc.problem().objective.target);
  return qp;
}

// Monolithic KKT system for the unconstrained problem in (y, u, p).
Eigen::VectorXd kkt_control(const Discretization& disc) {
  const Eigen::Index n = disc.size();
  const Eigen::MatrixXd k = dense(disc.linear_operator());
  const Eigen::MatrixXd m = dense(disc.mass());
  const Eigen::MatrixXd d = disc.lumped().asDiagonal();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  a.block(0, 0, n, n) = m;
  a.block(0, 2 * n, n, n) = k.transpose();
  a.block(n, n, n, n) = disc.problem().objective.nu * d;
  a.block(n, 2 * n, n, n) = -d;
  a.block(2 * n, 0, n, n) = k;
  a.block(2 * n, n, n, n) = -d;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(3 * n);
  rhs.head(n) = m * disc.problem().objective.target;
  return a.fullPivLu().solve(rhs).segment(n, n);
}

// Projected coordinate descent on the box QP, run to stagnation.
Eigen::VectorXd box_qp(const DenseQP& qp, double alpha, double beta) {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(qp.c.size());
  for (int sweep = 0; sweep < 200000; ++sweep) {
    double change = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const double gi = qp.q.row(i).dot(u) + qp.c[i];
      const double ui = std::clamp(u[i] - gi / qp.q(i, i), alpha, beta);
      change = std::max(change, std::abs(ui - u[i]));
      u[i] = ui;
    }
    if (change < 1e-15) break;
  }
  return u;
}

}  // namespace

TEST_CASE("objective vanishes at the target and matches the dense QP for f = 0") {
  const Discretization zero(base_problem(6, NonlinearitySpec::power(2.0, constant(1.0)),
                                         affine_b(1, 0, 0, 0, 1, 0)));
  CHECK(eval_objective(zero, ScalarField::Zero(zero.size())) == 0.0);

  const Discretization disc(lq_problem(6, -kInf, kInf));
  const DenseQP qp = dense_qp(disc);
  const ScalarField yd = disc.problem().objective.target;
  const double offset = 0.5 * yd.dot(dense(disc.mass()) * yd);
  std::mt19937_64 rng(1);
  for (int s = 0; s < 3; ++s) {
    const ScalarField u = random_field(disc.size(), rng, 2.0);
    const double expected = 0.5 * u.dot(qp.q * u) + qp.c.dot(u) + offset;
    CHECK(eval_objective(disc, u) == doctest::Approx(expected).epsilon(1e-11));
    // gradient field is the D-representer of Q u + c
    const ScalarField g = eval_gradient(disc, u);
    const ScalarField expected_g = (qp.q * u + qp.c).cwiseQuotient(disc.lumped());
    CHECK((g - expected_g).norm() <= 1e-9 * expected_g.norm());
  }
}

TEST_CASE("gradient matches central differences on the cubic problem") {
  const Discretization disc(cubic_problem(8));
  std::mt19937_64 rng(2);
  const ScalarField u = random_field(disc.size(), rng, 3.0);
  const ControlPoint at = evaluate_control(disc, u);
  for (int s = 0; s < 4; ++s) {
    const ScalarField v = random_field(disc.size(), rng);
    const double t = 1e-4;
    const double fd = (eval_objective(disc, u + t * v) - eval_objective(disc, u - t * v)) / (2 * t);
    const double an = disc.control_inner(at.gradient, v);
    CHECK(std::abs(fd - an) <= 1e-8 * std::max(1.0, std::abs(at.objective)));
  }
}

TEST_CASE("gradient is affine in nu with slope u") {
  ProblemSpec p1 = cubic_problem(6);
  ProblemSpec p2 = p1;
  p2.objective.nu = 0.5;
  std::mt19937_64 rng(3);
  const ScalarField u = random_field(p1.grid.interior_count(), rng);
  const ScalarField diff = eval_gradient(Discretization(p2), u) - eval_gradient(Discretization(p1), u);
  CHECK((diff - (0.5 - 1e-2) * u).norm() <= 1e-12 * u.norm());
}

TEST_CASE("Hessian closed form for f = 0") {
  const Discretization disc(lq_problem(6, -kInf, kInf));
  const DenseQP qp = dense_qp(disc);
  std::mt19937_64 rng(4);
  const ScalarField u = random_field(disc.size(), rng);
  const ControlPoint at = evaluate_control(disc, u);
  for (int s = 0; s < 3; ++s) {
    const ScalarField v = random_field(disc.size(), rng);
    const ScalarField expected = (qp.q * v).cwiseQuotient(disc.lumped());
    CHECK((hessian_vector(disc, at, v) - expected).norm() <= 1e-9 * expected.norm());
  }
}

TEST_CASE("Hessian is symmetric and matches gradient differences") {
  for (const ProblemSpec& p :
       {cubic_problem(8),
        [] {
          ProblemSpec q = cubic_problem(8);
          q.nonlinearity = NonlinearitySpec::exponential(constant(1.0));
          return q;
        }()}) {
    const Discretization disc(p);
    std::mt19937_64 rng(5);
    const ScalarField u = random_field(disc.size(), rng, 3.0);
    const ControlPoint at = evaluate_control(disc, u);
    const ScalarField v = random_field(disc.size(), rng);
    const ScalarField w = random_field(disc.size(), rng);
    const double vw = hessian_form(disc, at, v, w);
    const double wv = hessian_form(disc, at, w, v);
    CHECK(std::abs(vw - wv) <= 1e-9 * std::max(1.0, std::abs(vw)));

    const double t = 1e-4;
    const ScalarField fd = (eval_gradient(disc, u + t * v) - eval_gradient(disc, u - t * v)) / (2 * t);
    const ScalarField hv = hessian_vector(disc, at, v);
    CHECK((fd - hv).norm() <= 1e-5 * hv.norm());
  }
}

TEST_CASE("Hessian requires a C2 nonlinearity") {
  ProblemSpec p = cubic_problem(4);
  p.nonlinearity = NonlinearitySpec::power(1.0, constant(1.0));
  const Discretization disc(p);
  const ScalarField u = ScalarField::Ones(disc.size());
  CHECK_THROWS_AS(hessian_vector(disc, u, u), CapabilityError);
}

TEST_CASE("project_box") {
  ScalarField u(4);
  u << -2.0, -0.5, 0.5, 3.0;
  ScalarField clamped(4);
  clamped << -1.0, -0.5, 0.5, 1.0;
  CHECK(project_box(u, -1.0, 1.0) == clamped);
  CHECK(project_box(u, -kInf, kInf) == u);
  CHECK(project_box(clamped, -1.0, 1.0) == clamped);
  CHECK_THROWS_AS(project_box(u, 1.0, 1.0), UsageError);
  CHECK_THROWS_AS(project_box(u, 2.0, 1.0), UsageError);
}

TEST_CASE("optimality residual vanishes only at the optimum") {
  const Discretization zero(base_problem(6, NonlinearitySpec::zero(), VectorCoefficient::zero()));
  CHECK(optimality_residual(zero, ScalarField::Zero(zero.size())) == 0.0);
  const Discretization disc(lq_problem(6, -kInf, kInf));
  CHECK(optimality_residual(disc, ScalarField::Zero(disc.size())) > 1e-3);
  CHECK(optimality_residual(disc, kkt_control(disc)) <= 1e-10);
}

TEST_CASE("projected gradient reproduces the unconstrained KKT solution") {
  const Discretization disc(lq_problem(8, -kInf, kInf));
  const OptResult res = optimize_projected_gradient(disc, ScalarField::Zero(disc.size()));
  REQUIRE(res.status == OptStatus::converged);
  const ScalarField oracle = kkt_control(disc);
  CHECK((res.u - oracle).lpNorm<Eigen::Infinity>() <= 1e-6 * std::max(1.0, oracle.lpNorm<Eigen::Infinity>()));
  for (std::size_t k = 0; k + 1 < res.objective_history.size(); ++k) {
    CHECK(res.objective_history[k + 1] <= res.objective_history[k] + 1e-14);
  }
}

TEST_CASE("both optimizers match the dense box-constrained QP") {
  const Discretization disc(lq_problem(8, -1.0, 1.0, 1.0));
  const Eigen::VectorXd oracle = box_qp(dense_qp(disc), -1.0, 1.0);
  const auto at_bound = (oracle.array().abs() >= 1.0 - 1e-12).count();
  INFO("oracle active nodes " << at_bound << " max " << oracle.cwiseAbs().maxCoeff());
  CHECK(at_bound > 0);
  CHECK(at_bound < oracle.size());
  const OptResult pg = optimize_projected_gradient(disc, ScalarField::Zero(disc.size()));
  const OptResult ssn = optimize_semismooth_newton(disc, ScalarField::Zero(disc.size()));
  REQUIRE(pg.status == OptStatus::converged);
  REQUIRE(ssn.status == OptStatus::converged);
  CHECK((pg.u - oracle).lpNorm<Eigen::Infinity>() <= 1e-7);
  CHECK((ssn.u - oracle).lpNorm<Eigen::Infinity>() <= 1e-7);
}

TEST_CASE("zero target without bounds gives the zero control") {
  const Discretization disc(base_problem(8, NonlinearitySpec::power(2.0, constant(1.0)),
                                         affine_b(1, 0, 0, 0, 1, 0)));
  const OptResult pg = optimize_projected_gradient(disc, ScalarField::Zero(disc.size()));
  CHECK(pg.status == OptStatus::converged);
  CHECK(pg.iterations == 0);
  CHECK(pg.u.norm() == 0.0);
}

TEST_CASE("semismooth Newton on the linear-quadratic problem") {
  const Discretization disc(lq_problem(8, -kInf, kInf));
  const OptResult res = optimize_semismooth_newton(disc, ScalarField::Zero(disc.size()));
  REQUIRE(res.status == OptStatus::converged);
  CHECK(res.iterations <= 2);
  CHECK(res.gradient_fallbacks == 0);
  const ScalarField oracle = kkt_control(disc);
  CHECK((res.u - oracle).lpNorm<Eigen::Infinity>() <= 1e-8 * std::max(1.0, oracle.lpNorm<Eigen::Infinity>()));

  const OptResult again = optimize_semismooth_newton(disc, res.u);
  CHECK(again.iterations == 0);
  CHECK(again.u == res.u);
}

TEST_CASE("semismooth Newton converges superlinearly on the cubic problem") {
  const Discretization disc(cubic_problem(16));
  const OptResult res = optimize_semismooth_newton(disc, ScalarField::Zero(disc.size()));
  REQUIRE(res.status == OptStatus::converged);
  CHECK(res.iterations <= 15);
  const auto& r = res.residual_history;
  INFO("final residual " << r.back() << " after " << res.iterations << " iterations");
  CHECK(r.back() <= 1e-9);
  // once in the fast phase the residual drops by far more than a linear rate
  bool superlinear = false;
  for (std::size_t k = 1; k + 1 < r.size(); ++k) {
    if (r[k] < 1e-3 && r[k + 1] <= 1e-2 * r[k]) superlinear = true;
  }
  CHECK(superlinear);
  CHECK(res.active_set_sizes.size() == static_cast<std::size_t>(res.iterations));
  CHECK(res.active_set_sizes.back() > 0);
  CHECK(res.active_set_sizes.back() < disc.size());
}

TEST_CASE("optimizers agree and the variational inequality holds") {
  const Discretization disc(cubic_problem(12));
  const OptResult pg = optimize_projected_gradient(disc, ScalarField::Zero(disc.size()));
  const OptResult ssn = optimize_semismooth_newton(disc, ScalarField::Zero(disc.size()));
  REQUIRE(pg.status == OptStatus::converged);
  REQUIRE(ssn.status == OptStatus::converged);
  CHECK((pg.u - ssn.u).lpNorm<Eigen::Infinity>() <= 1e-5);
  CHECK(ssn.u.maxCoeff() <= 1.0);
  CHECK(ssn.u.minCoeff() >= -1.0);

  const ControlPoint at = evaluate_control(disc, ssn.u);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> box(-1.0, 1.0);
  for (int s = 0; s < 50; ++s) {
    ScalarField v(disc.size());
    for (auto& x : v) x = box(rng);
    CHECK(disc.control_inner(at.gradient, v - ssn.u) >= -1e-8);
  }
}

TEST_CASE("critical cone curvature without bounds and f = 0") {
  const Discretization disc(lq_problem(4, -kInf, kInf));
  const ScalarField u = kkt_control(disc);
  const CurvatureReport rep = critical_cone_curvature(disc, u, 20, 9);
  CHECK_FALSE(rep.vacuous);
  CHECK(rep.free_nodes == disc.size());
  CHECK(rep.minimum >= disc.problem().objective.nu - 1e-9);

  // generalized eigenproblem Q x = lambda D x
  const DenseQP qp = dense_qp(disc);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> eig(
      0.5 * (qp.q + qp.q.transpose()), Eigen::MatrixXd(disc.lumped().asDiagonal()));
  CHECK(rep.rayleigh_minimum == doctest::Approx(eig.eigenvalues().minCoeff()).epsilon(1e-8));
  CHECK(rep.sampled_minimum >= rep.rayleigh_minimum - 1e-12);
  CHECK(rep.samples == 20);
}

TEST_CASE("critical cone is vacuous when every node is strongly active") {
  ProblemSpec p = lq_problem(6, -1.0, 1.0);
  p.objective.target = ScalarField::Constant(p.grid.interior_count(), 100.0);
  const Discretization disc(p);
  const ScalarField u = ScalarField::Ones(disc.size());
  REQUIRE(optimality_residual(disc, u) == 0.0);
  const CurvatureReport rep = critical_cone_curvature(disc, u, 10);
  CHECK(rep.vacuous);
  CHECK(rep.fixed_nodes == disc.size());
  CHECK(std::isinf(rep.minimum));
}

TEST_CASE("critical cone rejects non-stationary controls") {
  const Discretization disc(lq_problem(4, -1.0, 1.0));
  CHECK_THROWS_AS(critical_cone_curvature(disc, ScalarField::Zero(disc.size()), 5), UsageError);
}
