#pragma once

// Structured Q1 discretization of a rectangle with homogeneous Dirichlet
// boundary elimination, and assembly of the divergence-form operator
//   -div(a grad y) + b . grad y + c y
// restricted to interior degrees of freedom.

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <cstddef>
#include <functional>

namespace convopt {

/// Nodal values on interior degrees of freedom (y, u, phi, z, y_d, ...).
using ScalarField = Eigen::VectorXd;

using Coefficient = std::function<double(double x1, double x2)>;

struct Point {
  double x1 = 0.0;
  double x2 = 0.0;
};

struct RectDomain {
  double x_min = 0.0;
  double x_max = 1.0;
  double y_min = 0.0;
  double y_max = 1.0;

  double area() const { return (x_max - x_min) * (y_max - y_min); }
};

/// Interior-node numbering. Node (i, j) with 0 <= i <= nx, 0 <= j <= ny;
/// interior nodes are numbered x-fastest, boundary nodes map to kEliminated.
class DofMap {
 public:
  static constexpr std::ptrdiff_t kEliminated = -1;

  DofMap() = default;
  DofMap(int nx, int ny) : nx_(nx), ny_(ny) {}

  std::ptrdiff_t dof(int i, int j) const {
    if (i <= 0 || j <= 0 || i >= nx_ || j >= ny_) return kEliminated;
    return static_cast<std::ptrdiff_t>(j - 1) * (nx_ - 1) + (i - 1);
  }
  std::array<int, 2> node(std::ptrdiff_t dof) const {
    const auto w = static_cast<std::ptrdiff_t>(nx_ - 1);
    return {static_cast<int>(dof % w) + 1, static_cast<int>(dof / w) + 1};
  }
  std::ptrdiff_t size() const {
    return static_cast<std::ptrdiff_t>(nx_ - 1) * (ny_ - 1);
  }
  bool is_boundary(int i, int j) const { return dof(i, j) == kEliminated; }

 private:
  int nx_ = 0;
  int ny_ = 0;
};

struct UniformGrid {
  RectDomain domain;
  int nx = 0;
  int ny = 0;
  double hx = 0.0;
  double hy = 0.0;
  DofMap dofs;

  std::ptrdiff_t interior_count() const { return dofs.size(); }
  std::ptrdiff_t node_count() const {
    return static_cast<std::ptrdiff_t>(nx + 1) * (ny + 1);
  }
  /// Row-major (x fastest) index over all nodes, boundary included.
  std::ptrdiff_t node_index(int i, int j) const {
    return static_cast<std::ptrdiff_t>(j) * (nx + 1) + i;
  }
  Point node(int i, int j) const {
    return {domain.x_min + i * hx, domain.y_min + j * hy};
  }
  Point dof_point(std::ptrdiff_t dof) const {
    const auto [i, j] = dofs.node(dof);
    return node(i, j);
  }
};

UniformGrid build_grid(const RectDomain& domain, int nx, int ny);

/// Values on every grid node, boundary included (row-major, x fastest).
struct NodalField {
  Eigen::VectorXd values;
};

/// Samples g at every interior node.
ScalarField interpolate(const UniformGrid& grid, const Coefficient& g);
/// Samples g at every node of the grid.
NodalField interpolate_nodal(const UniformGrid& grid, const Coefficient& g);
/// Extends an interior field by the homogeneous boundary values.
NodalField extend_by_zero(const UniformGrid& grid, const ScalarField& field);
/// Restriction of a nodal field to interior nodes.
ScalarField restrict_to_interior(const UniformGrid& grid, const NodalField& field);

struct DiffusionTensor {
  Coefficient a11, a12, a21, a22;
  /// Declared ellipticity constant; checked at every quadrature point.
  double lambda = 1.0;

  static DiffusionTensor identity(double scale = 1.0);
};

struct VectorCoefficient {
  Coefficient b1, b2;

  static VectorCoefficient zero();
  static VectorCoefficient constant(double c1, double c2);
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Square operator on interior dofs, compressed row storage.
struct SparseOperator {
  SparseMatrix matrix;
  bool symmetric = false;

  std::ptrdiff_t size() const { return matrix.rows(); }
};

/// Q1 stiffness matrix, 2x2 Gauss per element. Throws CoefficientError when
/// the symmetric part of a drops below lambda at a quadrature point.
SparseOperator assemble_diffusion(const UniformGrid& grid, const DiffusionTensor& a);

/// Entries int (b . grad phi_j) phi_i, no stabilization.
SparseOperator assemble_convection(const UniformGrid& grid, const VectorCoefficient& b);

/// Row-sum lumped weighted mass diag(c_i m_i), m_i = int phi_i. Throws
/// MonotonicityError on a negative weight.
SparseOperator assemble_reaction(const UniformGrid& grid, const ScalarField& c);

/// Consistent Q1 mass matrix int phi_i phi_j.
SparseOperator assemble_mass(const UniformGrid& grid);

/// Lumped nodal masses m_i = int phi_i for interior dofs.
ScalarField lumped_mass(const UniformGrid& grid);

/// Load vector int g_h phi_i with g_h the bilinear interpolant of g.
ScalarField assemble_load(const UniformGrid& grid, const NodalField& g);

}  // namespace convopt
