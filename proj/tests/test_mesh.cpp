#include <doctest.h>

#include "convopt/error.hpp"
#include "convopt/mesh.hpp"
#include "test_support.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

using namespace convopt;
using namespace convopt::testing;

TEST_CASE("build_grid counts interior dofs") {
  CHECK(unit_grid(2).interior_count() == 1);
  CHECK(unit_grid(4).interior_count() == 9);
  const UniformGrid g = build_grid({0.0, 2.0, 0.0, 1.0}, 4, 2);
  CHECK(g.hx == 0.5);
  CHECK(g.hy == 0.5);
  CHECK(g.interior_count() == 3);
  CHECK_THROWS_AS(build_grid(RectDomain{}, 1, 4), UsageError);
  CHECK_THROWS_AS(build_grid(RectDomain{}, 4, 1), UsageError);
  CHECK_THROWS_AS(build_grid({1.0, 0.0, 0.0, 1.0}, 4, 4), UsageError);
}

TEST_CASE("dof map is a bijection on interior nodes") {
  const UniformGrid g = build_grid({0.0, 3.0, -1.0, 1.0}, 5, 7);
  std::vector<int> hits(static_cast<std::size_t>(g.interior_count()), 0);
  for (int j = 0; j <= g.ny; ++j) {
    for (int i = 0; i <= g.nx; ++i) {
      const auto d = g.dofs.dof(i, j);
      const bool boundary = i == 0 || j == 0 || i == g.nx || j == g.ny;
      CHECK((d == DofMap::kEliminated) == boundary);
      if (d == DofMap::kEliminated) continue;
      ++hits[static_cast<std::size_t>(d)];
      const auto [ii, jj] = g.dofs.node(d);
      CHECK(ii == i);
      CHECK(jj == j);
    }
  }
  for (int h : hits) CHECK(h == 1);
}

TEST_CASE("diffusion stiffness on the single-dof grid") {
  const UniformGrid g = unit_grid(2);
  const SparseOperator k = assemble_diffusion(g, DiffusionTensor::identity());
  REQUIRE(k.size() == 1);
  CHECK(k.matrix.coeff(0, 0) == doctest::Approx(8.0 / 3.0).epsilon(1e-14));
  CHECK(k.symmetric);

  const SparseOperator k2 = assemble_diffusion(g, DiffusionTensor::identity(2.0));
  CHECK(k2.matrix.coeff(0, 0) == doctest::Approx(16.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("diffusion is linear in the tensor and symmetric with nonnegative row sums") {
  for (int n : {3, 4, 8, 13}) {
    const UniformGrid g = unit_grid(n);
    const Eigen::MatrixXd k = dense(assemble_diffusion(g, DiffusionTensor::identity()).matrix);
    const Eigen::MatrixXd k2 = dense(assemble_diffusion(g, DiffusionTensor::identity(2.0)).matrix);
    CHECK((k2 - 2.0 * k).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK((k - k.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * k.cwiseAbs().maxCoeff());
    CHECK(k.rowwise().sum().minCoeff() >= -1e-13);
  }
}

TEST_CASE("variable symmetric tensor gives a symmetric matrix") {
  DiffusionTensor a;
  a.a11 = [](double x, double) { return 1.0 + 0.5 * x; };
  a.a12 = [](double x, double y) { return 0.2 * x * y; };
  a.a21 = a.a12;
  a.a22 = [](double, double y) { return 2.0 + y; };
  a.lambda = 0.5;
  const SparseOperator k = assemble_diffusion(unit_grid(9), a);
  const Eigen::MatrixXd d = dense(k.matrix);
  CHECK((d - d.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * d.cwiseAbs().maxCoeff());
}

TEST_CASE("ellipticity violation is a coefficient error") {
  DiffusionTensor a = DiffusionTensor::identity();
  a.lambda = 1.5;
  CHECK_THROWS_AS(assemble_diffusion(unit_grid(4), a), CoefficientError);
  DiffusionTensor b = DiffusionTensor::identity();
  b.a12 = [](double, double) { return 2.0; };
  b.a21 = b.a12;
  CHECK_THROWS_AS(assemble_diffusion(unit_grid(4), b), CoefficientError);
}

TEST_CASE("Laplacian stiffness is positive definite up to 64x64") {
  for (int n : {2, 4, 8, 16, 32, 64}) {
    const UniformGrid g = unit_grid(n);
    Eigen::SparseMatrix<double> k = assemble_diffusion(g, DiffusionTensor::identity()).matrix;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(k);
    REQUIRE(ldlt.info() == Eigen::Success);
    CHECK(ldlt.vectorD().minCoeff() > 0.0);
    // inverse iteration for the smallest eigenvalue
    Eigen::VectorXd v = Eigen::VectorXd::Ones(k.rows());
    double lambda = 0.0;
    for (int it = 0; it < 200; ++it) {
      v = ldlt.solve(v);
      v.normalize();
      lambda = v.dot(k * v);
    }
    CHECK(lambda > 0.0);
  }
}

TEST_CASE("convection: zero field, skew symmetry, and divergence defect") {
  const UniformGrid g = unit_grid(4);
  CHECK(assemble_convection(g, VectorCoefficient::zero()).matrix.norm() == 0.0);

  // constant b: int (b.grad v) v = 0 under homogeneous Dirichlet
  for (int n : {3, 4, 7}) {
    const Eigen::MatrixXd nc = dense(assemble_convection(unit_grid(n), VectorCoefficient::constant(1.0, 0.0)).matrix);
    CHECK((nc + nc.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
    const Eigen::MatrixXd nd = dense(assemble_convection(unit_grid(n), VectorCoefficient::constant(-2.0, 3.5)).matrix);
    CHECK((nd + nd.transpose()).cwiseAbs().maxCoeff() <= 1e-13);
  }

  // b = (x1, 0): N + N^T = -int div(b) phi_i phi_j = -M exactly
  const Eigen::MatrixXd n = dense(assemble_convection(g, affine_b(0, 1, 0, 0, 0, 0)).matrix);
  const Eigen::MatrixXd m = dense(assemble_mass(g).matrix);
  CHECK((n + n.transpose()).cwiseAbs().maxCoeff() > 1e-3);
  CHECK((n + n.transpose() + m).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("convection is linear in b") {
  const UniformGrid g = unit_grid(6);
  const auto b1 = affine_b(1.0, 2.0, -1.0, 0.5, 0.0, 3.0);
  const auto b2 = affine_b(-0.3, 0.0, 4.0, 1.0, -2.0, 0.0);
  const VectorCoefficient sum{[&](double x, double y) { return b1.b1(x, y) + b2.b1(x, y); },
                              [&](double x, double y) { return b1.b2(x, y) + b2.b2(x, y); }};
  const Eigen::MatrixXd lhs = dense(assemble_convection(g, sum).matrix);
  const Eigen::MatrixXd rhs =
      dense(assemble_convection(g, b1).matrix) + dense(assemble_convection(g, b2).matrix);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("non-finite convection is rejected") {
  const VectorCoefficient bad{[](double, double) { return std::nan(""); }, constant(0.0)};
  CHECK_THROWS_AS(assemble_convection(unit_grid(3), bad), CoefficientError);
}

TEST_CASE("reaction is the lumped weighted mass") {
  const UniformGrid g2 = unit_grid(2);
  CHECK(assemble_reaction(g2, ScalarField::Zero(1)).matrix.norm() == 0.0);
  CHECK(assemble_reaction(g2, ScalarField::Ones(1)).matrix.coeff(0, 0) ==
        doctest::Approx(0.25).epsilon(1e-14));

  const UniformGrid g = build_grid({0.0, 2.0, 0.0, 1.0}, 6, 5);
  const ScalarField c = ScalarField::Ones(g.interior_count());
  const Eigen::MatrixXd r = dense(assemble_reaction(g, c).matrix);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r);
  CHECK(eig.eigenvalues().minCoeff() >= 0.0);
  // row sums of the consistent mass
  const Eigen::MatrixXd m = dense(assemble_mass(g).matrix);
  CHECK((r.diagonal() - Eigen::VectorXd::Constant(r.rows(), g.hx * g.hy)).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(m.sum() <= r.sum());  // eliminated boundary couplings only shrink the consistent mass

  ScalarField neg = c;
  neg[3] = -1e-3;
  CHECK_THROWS_AS(assemble_reaction(g, neg), MonotonicityError);
}

TEST_CASE("load vector") {
  const UniformGrid g2 = unit_grid(2);
  CHECK(assemble_load(g2, NodalField{Eigen::VectorXd::Zero(9)}).norm() == 0.0);
  CHECK(assemble_load(g2, interpolate_nodal(g2, constant(1.0)))[0] ==
        doctest::Approx(0.25).epsilon(1e-14));

  const UniformGrid g = build_grid({-1.0, 2.0, 0.0, 1.5}, 7, 5);
  const ScalarField one = assemble_load(g, interpolate_nodal(g, constant(1.0)));
  // int phi_i = hx hy for every interior node
  CHECK(one.sum() == doctest::Approx(g.interior_count() * g.hx * g.hy).epsilon(1e-13));
  const ScalarField three = assemble_load(g, interpolate_nodal(g, constant(3.0)));
  CHECK((three - 3.0 * one).cwiseAbs().maxCoeff() <= 1e-14);

  CHECK_THROWS_AS(assemble_load(g, NodalField{Eigen::VectorXd::Zero(4)}), UsageError);
}

TEST_CASE("load of an interior field equals consistent mass times the field") {
  const UniformGrid g = unit_grid(5);
  std::mt19937_64 rng(7);
  const ScalarField u = random_field(g.interior_count(), rng);
  const ScalarField a = assemble_load(g, extend_by_zero(g, u));
  const ScalarField b = assemble_mass(g).matrix * u;
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((restrict_to_interior(g, extend_by_zero(g, u)) - u).norm() == 0.0);
}
