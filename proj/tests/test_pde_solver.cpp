#include <doctest.h>

#include "convopt/error.hpp"
#include "convopt/pde_solver.hpp"
#include "test_support.hpp"

#include <Eigen/Dense>

using namespace convopt;
using namespace convopt::testing;

namespace {

double sine(double x, double y) { return std::sin(kPi * x) * std::sin(kPi * y); }

// -Lap y* + d/dx1 y* + (y*)^3 for y* = sin(pi x) sin(pi y)
double manufactured_load(double x, double y) {
  const double s = sine(x, y);
  return 2 * kPi * kPi * s + kPi * std::cos(kPi * x) * std::sin(kPi * y) + s * s * s;
}

ProblemSpec manufactured_problem(int n) {
  return base_problem(n, NonlinearitySpec::power(2.0, constant(1.0)),
                      VectorCoefficient::constant(1.0, 0.0));
}

Errors manufactured_error(int n) {
  const Discretization disc(manufactured_problem(n));
  const ScalarField load = assemble_load(disc.grid(), interpolate_nodal(disc.grid(), manufactured_load));
  const StateSolution sol = solve_state_load(disc, load);
  return quadrature_errors(disc.grid(), sol.y, sine, [](double x, double y) {
    return std::array<double, 2>{kPi * std::cos(kPi * x) * std::sin(kPi * y),
                                 kPi * std::sin(kPi * x) * std::cos(kPi * y)};
  });
}

}  // namespace

TEST_CASE("solve_linear on the hand-assembled Laplacian") {
  const SparseOperator k = assemble_diffusion(unit_grid(2), DiffusionTensor::identity());
  ScalarField rhs(1);
  rhs << 0.25;
  CHECK(solve_linear(k, rhs)[0] == doctest::Approx(3.0 / 32.0).epsilon(1e-14));
  CHECK(solve_linear(k, ScalarField::Zero(1)).norm() == 0.0);
}

TEST_CASE("solve_linear round trip on a nonsymmetric operator, both backends") {
  const UniformGrid g = unit_grid(12);
  SparseOperator op;
  op.matrix = assemble_diffusion(g, DiffusionTensor::identity()).matrix +
              assemble_convection(g, affine_b(3.0, 0.0, 2.0, -1.0, 4.0, 0.0)).matrix;
  std::mt19937_64 rng(3);
  const ScalarField x = random_field(g.interior_count(), rng);
  const ScalarField rhs = op.matrix * x;
  for (auto method : {LinearSolverOptions::Method::sparse_lu, LinearSolverOptions::Method::gmres_ilut}) {
    LinearSolverOptions opts;
    opts.method = method;
    const ScalarField back = solve_linear(op, rhs, opts);
    CHECK((back - x).norm() <= 1e-9 * x.norm());
    CHECK((op.matrix * back - rhs).norm() <= 1e-10 * std::max(1.0, rhs.norm()));
    const LinearSolver solver(op.matrix, opts);
    const ScalarField xt = solver.solve_transpose(rhs);
    CHECK((SparseMatrix(op.matrix.transpose()) * xt - rhs).norm() <= 1e-10 * std::max(1.0, rhs.norm()));
  }
}

TEST_CASE("singular operator is a solver error") {
  SparseOperator op;
  op.matrix = SparseMatrix(4, 4);
  op.matrix.insert(0, 0) = 1.0;
  op.matrix.makeCompressed();
  CHECK_THROWS_AS(solve_linear(op, ScalarField::Ones(4)), SolverError);
}

TEST_CASE("zero control gives the zero state") {
  const Discretization disc(base_problem(8, NonlinearitySpec::power(2.0, constant(1.0)),
                                         affine_b(0, 0, 1, 1, -1, 0)));
  const StateSolution sol = solve_state_newton(disc, ScalarField::Zero(disc.size()));
  CHECK(sol.y.norm() == 0.0);
  CHECK(sol.newton_iterations <= 1);
  CHECK(sol.report.converged);
  CHECK_FALSE(sol.globalization_used);

  const StateSolution tr = solve_state_truncated(disc, ScalarField::Zero(disc.size()), 0.5);
  CHECK(tr.y.norm() == 0.0);
}

TEST_CASE("manufactured solution converges at second order") {
  const Errors e16 = manufactured_error(16);
  const Errors e32 = manufactured_error(32);
  const double ratio = e16.l2 / e32.l2;
  INFO("L2 errors " << e16.l2 << " " << e32.l2);
  CHECK(ratio >= 3.6);
  CHECK(ratio <= 4.4);
  CHECK(e16.h1 / e32.h1 == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("state residual meets tolerance and Newton converges quadratically") {
  ProblemSpec p = base_problem(16, NonlinearitySpec::exponential(constant(1.0)),
                               affine_b(0, 0, 2, 2, -2, 0));
  const Discretization disc(p);
  const ScalarField u = interpolate(disc.grid(), [](double x, double y) {
    return 60.0 * std::sin(kPi * x) * std::sin(kPi * y);
  });
  const StateSolution sol = solve_state_newton(disc, u);
  CHECK(disc.residual(sol.y, disc.control_load(u)).norm() <= p.solver.tol_state);
  const auto& r = sol.report.residual_history;
  REQUIRE(r.size() >= 3);
  for (std::size_t k = 0; k + 1 < r.size(); ++k) {
    if (r[k] <= 1e-3 && r[k + 1] > 1e-14) {
      INFO("r_k = " << r[k] << " r_k+1 = " << r[k + 1]);
      CHECK(r[k + 1] <= 1e3 * r[k] * r[k]);
    }
  }
}

TEST_CASE("comparison principle for ordered constant loads") {
  const Discretization disc(base_problem(16, NonlinearitySpec::power(2.0, constant(1.0)),
                                         affine_b(0, 0, 1, 1, -1, 0)));
  const ScalarField one = ScalarField::Ones(disc.size());
  const ScalarField y1 = solve_state_newton(disc, one).y;
  const ScalarField y2 = solve_state_newton(disc, 2.0 * one).y;
  CHECK((y1 - y2).maxCoeff() <= 1e-10);
}

TEST_CASE("truncated Picard agrees with Newton and detects active truncation") {
  const Discretization disc(manufactured_problem(16));
  const ScalarField load = assemble_load(disc.grid(), interpolate_nodal(disc.grid(), manufactured_load));
  const StateSolution newton = solve_state_load(disc, load);
  const StateSolution picard = solve_state_truncated_load(disc, load, 10.0);
  CHECK((newton.y - picard.y).lpNorm<Eigen::Infinity>() <= 1e-8);
  CHECK(picard.globalization_used);
  CHECK_THROWS_AS(solve_state_truncated_load(disc, load, 0.1), TruncationActiveError);
  CHECK_THROWS_AS(solve_state_truncated_load(disc, load, 0.0), UsageError);
}

TEST_CASE("linearized solve") {
  const ProblemSpec p = base_problem(10, NonlinearitySpec::power(2.0, constant(1.0)),
                                     affine_b(1, 0, 0, 0, 1, 0));
  const Discretization disc(p);
  std::mt19937_64 rng(5);
  const ScalarField u = random_field(disc.size(), rng, 5.0);
  const ScalarField y = solve_state_newton(disc, u).y;
  CHECK(solve_linearized(disc, y, ScalarField::Zero(disc.size())).norm() == 0.0);

  // directional derivative of the control-to-state map
  const ScalarField v = random_field(disc.size(), rng, 1.0);
  const ScalarField z = solve_linearized(disc, y, v);
  std::vector<double> ts, errs;
  for (double t : {1e-2, 1e-3, 1e-4, 1e-5}) {
    const ScalarField yt = solve_state_newton(disc, u + t * v).y;
    ts.push_back(t);
    errs.push_back(((yt - y) / t - z).norm());
  }
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    const double slope = std::log(errs[k] / errs[k + 1]) / std::log(ts[k] / ts[k + 1]);
    INFO("t = " << ts[k] << " err " << errs[k] << " slope " << slope);
    CHECK(slope == doctest::Approx(1.0).epsilon(0.15));
  }
}

TEST_CASE("linearized solve with f = 0 is the plain linear solve") {
  const Discretization disc(base_problem(7, NonlinearitySpec::zero(), affine_b(1, 0, 0, 0, 1, 0)));
  std::mt19937_64 rng(9);
  const ScalarField v = random_field(disc.size(), rng);
  const ScalarField y = random_field(disc.size(), rng);
  SparseOperator k{disc.linear_operator(), false};
  const ScalarField expected = solve_linear(k, disc.control_load(v));
  CHECK((solve_linearized(disc, y, v) - expected).norm() <= 1e-12 * expected.norm());
}

TEST_CASE("second variation") {
  std::mt19937_64 rng(13);
  {
    const Discretization disc(base_problem(6, NonlinearitySpec::zero(), VectorCoefficient::zero()));
    const ScalarField z1 = random_field(disc.size(), rng), z2 = random_field(disc.size(), rng);
    CHECK(solve_second_variation(disc, z1, z1, z2).norm() == 0.0);
  }
  const Discretization disc(base_problem(8, NonlinearitySpec::power(2.0, constant(1.0)),
                                         affine_b(0, 1, 0, 0, 0, 1)));
  const ScalarField y = solve_state_newton(disc, random_field(disc.size(), rng, 20.0)).y;
  const ScalarField z1 = random_field(disc.size(), rng), z2 = random_field(disc.size(), rng);
  CHECK(solve_second_variation(disc, y, ScalarField::Zero(disc.size()), z2).norm() == 0.0);
  const ScalarField a = solve_second_variation(disc, y, z1, z2);
  const ScalarField b = solve_second_variation(disc, y, z2, z1);
  CHECK((a - b).norm() == 0.0);

  const Discretization lin(base_problem(5, NonlinearitySpec::power(1.0, constant(1.0)),
                                        VectorCoefficient::zero()));
  const ScalarField w = ScalarField::Ones(lin.size());
  CHECK_THROWS_AS(solve_second_variation(lin, w, w, w), CapabilityError);
}

TEST_CASE("second variation matches second differences of the state") {
  const Discretization disc(base_problem(8, NonlinearitySpec::power(2.0, constant(1.0)),
                                         affine_b(1, 0, 0, 0, 0, 0)));
  std::mt19937_64 rng(21);
  const ScalarField u = random_field(disc.size(), rng, 30.0);
  const ScalarField v = random_field(disc.size(), rng, 10.0);
  const ScalarField y = solve_state_newton(disc, u).y;
  const ScalarField z = solve_linearized(disc, y, v);
  const ScalarField zz = solve_second_variation(disc, y, z, z);
  const double t = 1e-3;
  const ScalarField d2 = (solve_state_newton(disc, u + t * v).y - 2.0 * y +
                          solve_state_newton(disc, u - t * v).y) / (t * t);
  CHECK((d2 - zz).norm() <= 1e-4 * zz.norm());
}

TEST_CASE("adjoint solve") {
  std::mt19937_64 rng(17);
  {
    ProblemSpec p = base_problem(9, NonlinearitySpec::power(2.0, constant(1.0)),
                                 affine_b(1, 0, 1, 0, 1, 0));
    const Discretization tmp(p);
    const ScalarField y = solve_state_newton(tmp, random_field(tmp.size(), rng, 5.0)).y;
    p.objective.target = y;
    const Discretization disc(p);
    CHECK(solve_adjoint(disc, y).norm() == 0.0);
  }
  {
    // self-adjoint case: phi solves K phi = M (y - y_d) with K symmetric
    ProblemSpec p = base_problem(9, NonlinearitySpec::zero(), VectorCoefficient::zero());
    p.objective.target = random_field(p.grid.interior_count(), rng);
    const Discretization disc(p);
    const ScalarField y = random_field(disc.size(), rng);
    SparseOperator k{disc.linear_operator(), true};
    const ScalarField expected = solve_linear(k, disc.mass() * (y - p.objective.target));
    CHECK((solve_adjoint(disc, y) - expected).norm() <= 1e-12 * expected.norm());
  }
}

TEST_CASE("discrete adjoint identity") {
  ProblemSpec p = base_problem(11, NonlinearitySpec::exponential(constant(1.0)),
                               affine_b(2, 0, 1, -1, 3, 0));
  std::mt19937_64 rng(19);
  p.objective.target = random_field(p.grid.interior_count(), rng);
  const Discretization disc(p);
  const ScalarField y = solve_state_newton(disc, random_field(disc.size(), rng, 3.0)).y;
  const LinearizedOperator op(disc, y);
  for (int s = 0; s < 5; ++s) {
    const ScalarField v = random_field(disc.size(), rng);
    const ScalarField w = random_field(disc.size(), rng);
    CHECK(w.dot(op.apply(v)) == doctest::Approx(v.dot(op.apply_transpose(w))).epsilon(1e-13));
    // <phi_w, m v> = <w, z_v> for phi_w solving the transposed system with load w
    const ScalarField z = solve_linearized(disc, op, v);
    const ScalarField phi = op.solve_transpose(w);
    CHECK(std::abs(phi.dot(disc.control_load(v)) - w.dot(z)) <= 1e-10 * std::max(1.0, std::abs(w.dot(z))));
  }
}

TEST_CASE("comparison_check") {
  {
    const Discretization disc(base_problem(8, NonlinearitySpec::power(2.0, constant(1.0)),
                                           affine_b(1, 0, 0, 0, 0, 0)));
    const ScalarField u = ScalarField::Constant(disc.size(), 3.0);
    const ComparisonReport rep = comparison_check(disc, u, u);
    CHECK(rep.max_violation <= 1e-12);
    CHECK(rep.pass);
    ScalarField bad = u;
    bad[2] += 1.0;
    CHECK_THROWS_AS(comparison_check(disc, bad, u), UsageError);
  }
  {
    const Discretization disc(base_problem(16, NonlinearitySpec::exponential(constant(1.0)),
                                           VectorCoefficient::constant(1.0, 1.0)));
    const ComparisonReport rep = comparison_check(disc, ScalarField::Zero(disc.size()),
                                                  ScalarField::Ones(disc.size()));
    CHECK(rep.pass);
  }
  {
    const Discretization disc(base_problem(16, NonlinearitySpec::power(2.0, constant(1.0)),
                                           affine_b(0, 0, 1, 1, -1, 0)));
    const ScalarField u1 = -interpolate(disc.grid(), [](double x, double) {
      return std::abs(std::sin(2 * kPi * x));
    });
    const ComparisonReport rep = comparison_check(disc, u1, ScalarField::Zero(disc.size()));
    CHECK(rep.pass);
  }
}

TEST_CASE("states depend continuously on the control") {
  const Discretization disc(base_problem(12, NonlinearitySpec::exponential(constant(2.0)),
                                         affine_b(0, 3, 0, 0, 0, 3)));
  std::mt19937_64 rng(23);
  const ScalarField u = random_field(disc.size(), rng, 10.0);
  const ScalarField v = random_field(disc.size(), rng, 10.0);
  const ScalarField y = solve_state_newton(disc, u).y;
  double previous = std::numeric_limits<double>::infinity();
  for (int k : {1, 2, 4, 8, 16, 32, 64}) {
    const double dist = (solve_state_newton(disc, u + v / k).y - y).lpNorm<Eigen::Infinity>();
    CHECK(dist < previous);
    previous = dist;
  }
  CHECK(previous < 1e-2);
}

TEST_CASE("problem validation") {
  ProblemSpec p = base_problem(4, NonlinearitySpec::zero(), VectorCoefficient::zero());
  p.objective.nu = 0.0;
  CHECK_THROWS_AS(Discretization{p}, SemanticError);
  p.objective.nu = 1.0;
  p.alpha = 1.0;
  p.beta = 1.0;
  CHECK_THROWS_AS(Discretization{p}, SemanticError);
  p.beta = 2.0;
  p.objective.target = ScalarField::Zero(3);
  CHECK_THROWS_AS(Discretization{p}, SemanticError);
}
