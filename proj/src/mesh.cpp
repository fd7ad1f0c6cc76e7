#include "convopt/mesh.hpp"

#include "convopt/error.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace convopt {
namespace {

// Local node k of element (ex, ey) sits at (ex + kOffset[k][0], ey + kOffset[k][1]).
constexpr int kOffset[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};

struct QuadPoint {
  Point x;
  double weight = 0.0;
  std::array<double, 4> phi{};
  std::array<double, 4> dphi_dx{};
  std::array<double, 4> dphi_dy{};
};

// 2x2 Gauss on one element, shape functions in physical coordinates.
std::array<QuadPoint, 4> element_quadrature(const UniformGrid& grid, int ex, int ey) {
  const double g = 0.5 / std::sqrt(3.0);
  const double ref[2] = {0.5 - g, 0.5 + g};
  const Point origin = grid.node(ex, ey);
  std::array<QuadPoint, 4> qps;
  int q = 0;
  for (double eta : ref) {
    for (double xi : ref) {
      QuadPoint& p = qps[q++];
      p.x = {origin.x1 + xi * grid.hx, origin.x2 + eta * grid.hy};
      p.weight = 0.25 * grid.hx * grid.hy;
      const double sx[2] = {1.0 - xi, xi};
      const double sy[2] = {1.0 - eta, eta};
      const double dsx[2] = {-1.0 / grid.hx, 1.0 / grid.hx};
      const double dsy[2] = {-1.0 / grid.hy, 1.0 / grid.hy};
      for (int k = 0; k < 4; ++k) {
        const int a = kOffset[k][0];
        const int b = kOffset[k][1];
        p.phi[k] = sx[a] * sy[b];
        p.dphi_dx[k] = dsx[a] * sy[b];
        p.dphi_dy[k] = sx[a] * dsy[b];
      }
    }
  }
  return qps;
}

using LocalMatrix = std::array<std::array<double, 4>, 4>;

// Runs `local(qp, K)` over every element quadrature point and scatters the
// 4x4 element matrices onto interior dofs. K[test][trial].
template <class LocalFn>
SparseMatrix assemble(const UniformGrid& grid, LocalFn&& local) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(grid.nx) * grid.ny * 16);
  for (int ey = 0; ey < grid.ny; ++ey) {
    for (int ex = 0; ex < grid.nx; ++ex) {
      LocalMatrix k{};
      for (const QuadPoint& qp : element_quadrature(grid, ex, ey)) local(qp, k);
      for (int a = 0; a < 4; ++a) {
        const auto row = grid.dofs.dof(ex + kOffset[a][0], ey + kOffset[a][1]);
        if (row == DofMap::kEliminated) continue;
        for (int b = 0; b < 4; ++b) {
          const auto col = grid.dofs.dof(ex + kOffset[b][0], ey + kOffset[b][1]);
          if (col == DofMap::kEliminated) continue;
          triplets.emplace_back(row, col, k[a][b]);
        }
      }
    }
  }
  SparseMatrix m(grid.interior_count(), grid.interior_count());
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  return m;
}

std::string where(const Point& x) {
  return "(" + std::to_string(x.x1) + ", " + std::to_string(x.x2) + ")";
}

}  // namespace

UniformGrid build_grid(const RectDomain& domain, int nx, int ny) {
  if (nx < 2 || ny < 2) {
    throw UsageError("build_grid: nx and ny must be at least 2 (got " +
                     std::to_string(nx) + ", " + std::to_string(ny) + ")");
  }
  if (!(domain.x_min < domain.x_max) || !(domain.y_min < domain.y_max)) {
    throw UsageError("build_grid: degenerate rectangle");
  }
  UniformGrid grid;
  grid.domain = domain;
  grid.nx = nx;
  grid.ny = ny;
  grid.hx = (domain.x_max - domain.x_min) / nx;
  grid.hy = (domain.y_max - domain.y_min) / ny;
  grid.dofs = DofMap(nx, ny);
  return grid;
}

ScalarField interpolate(const UniformGrid& grid, const Coefficient& g) {
  ScalarField out(grid.interior_count());
  for (std::ptrdiff_t d = 0; d < out.size(); ++d) {
    const Point x = grid.dof_point(d);
    out[d] = g(x.x1, x.x2);
  }
  return out;
}

NodalField interpolate_nodal(const UniformGrid& grid, const Coefficient& g) {
  NodalField out{Eigen::VectorXd(grid.node_count())};
  for (int j = 0; j <= grid.ny; ++j) {
    for (int i = 0; i <= grid.nx; ++i) {
      const Point x = grid.node(i, j);
      out.values[grid.node_index(i, j)] = g(x.x1, x.x2);
    }
  }
  return out;
}

NodalField extend_by_zero(const UniformGrid& grid, const ScalarField& field) {
  NodalField out{Eigen::VectorXd::Zero(grid.node_count())};
  for (std::ptrdiff_t d = 0; d < field.size(); ++d) {
    const auto [i, j] = grid.dofs.node(d);
    out.values[grid.node_index(i, j)] = field[d];
  }
  return out;
}

ScalarField restrict_to_interior(const UniformGrid& grid, const NodalField& field) {
  ScalarField out(grid.interior_count());
  for (std::ptrdiff_t d = 0; d < out.size(); ++d) {
    const auto [i, j] = grid.dofs.node(d);
    out[d] = field.values[grid.node_index(i, j)];
  }
  return out;
}

DiffusionTensor DiffusionTensor::identity(double scale) {
  auto diag = [scale](double, double) { return scale; };
  auto off = [](double, double) { return 0.0; };
  return {diag, off, off, diag, scale};
}

VectorCoefficient VectorCoefficient::zero() { return constant(0.0, 0.0); }

VectorCoefficient VectorCoefficient::constant(double c1, double c2) {
  return {[c1](double, double) { return c1; }, [c2](double, double) { return c2; }};
}

SparseOperator assemble_diffusion(const UniformGrid& grid, const DiffusionTensor& a) {
  if (!(a.lambda > 0.0)) throw CoefficientError("diffusion: lambda must be positive");
  bool symmetric = true;
  auto local = [&](const QuadPoint& qp, LocalMatrix& k) {
    const double a11 = a.a11(qp.x.x1, qp.x.x2);
    const double a12 = a.a12(qp.x.x1, qp.x.x2);
    const double a21 = a.a21(qp.x.x1, qp.x.x2);
    const double a22 = a.a22(qp.x.x1, qp.x.x2);
    if (!std::isfinite(a11) || !std::isfinite(a12) || !std::isfinite(a21) ||
        !std::isfinite(a22)) {
      throw CoefficientError("diffusion: non-finite coefficient at " + where(qp.x));
    }
    // smallest eigenvalue of the symmetric part
    const double s = 0.5 * (a12 + a21);
    const double mean = 0.5 * (a11 + a22);
    const double rad = std::hypot(0.5 * (a11 - a22), s);
    if (mean - rad < a.lambda * (1.0 - 1e-12)) {
      throw CoefficientError("diffusion: ellipticity constant " +
                             std::to_string(a.lambda) + " violated at " + where(qp.x));
    }
    if (a12 != a21) symmetric = false;
    for (int t = 0; t < 4; ++t) {
      for (int s2 = 0; s2 < 4; ++s2) {
        // sum_ij a_ij d_i(trial) d_j(test)
        const double v = a11 * qp.dphi_dx[s2] * qp.dphi_dx[t] +
                         a12 * qp.dphi_dx[s2] * qp.dphi_dy[t] +
                         a21 * qp.dphi_dy[s2] * qp.dphi_dx[t] +
                         a22 * qp.dphi_dy[s2] * qp.dphi_dy[t];
        k[t][s2] += qp.weight * v;
      }
    }
  };
  SparseOperator op{assemble(grid, local), false};
  op.symmetric = symmetric;
  return op;
}

SparseOperator assemble_convection(const UniformGrid& grid, const VectorCoefficient& b) {
  auto local = [&](const QuadPoint& qp, LocalMatrix& k) {
    const double b1 = b.b1(qp.x.x1, qp.x.x2);
    const double b2 = b.b2(qp.x.x1, qp.x.x2);
    if (!std::isfinite(b1) || !std::isfinite(b2)) {
      throw CoefficientError("convection: non-finite coefficient at " + where(qp.x));
    }
    for (int t = 0; t < 4; ++t) {
      for (int s = 0; s < 4; ++s) {
        k[t][s] += qp.weight * (b1 * qp.dphi_dx[s] + b2 * qp.dphi_dy[s]) * qp.phi[t];
      }
    }
  };
  return {assemble(grid, local), false};
}

SparseOperator assemble_mass(const UniformGrid& grid) {
  auto local = [](const QuadPoint& qp, LocalMatrix& k) {
    for (int t = 0; t < 4; ++t) {
      for (int s = 0; s < 4; ++s) k[t][s] += qp.weight * qp.phi[s] * qp.phi[t];
    }
  };
  return {assemble(grid, local), true};
}

ScalarField lumped_mass(const UniformGrid& grid) {
  ScalarField m = ScalarField::Zero(grid.interior_count());
  for (int ey = 0; ey < grid.ny; ++ey) {
    for (int ex = 0; ex < grid.nx; ++ex) {
      for (const QuadPoint& qp : element_quadrature(grid, ex, ey)) {
        for (int a = 0; a < 4; ++a) {
          const auto d = grid.dofs.dof(ex + kOffset[a][0], ey + kOffset[a][1]);
          if (d != DofMap::kEliminated) m[d] += qp.weight * qp.phi[a];
        }
      }
    }
  }
  return m;
}

SparseOperator assemble_reaction(const UniformGrid& grid, const ScalarField& c) {
  if (c.size() != grid.interior_count()) {
    throw UsageError("reaction: weight has wrong length");
  }
  const ScalarField m = lumped_mass(grid);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(c.size()));
  for (std::ptrdiff_t d = 0; d < c.size(); ++d) {
    if (!std::isfinite(c[d])) {
      throw CoefficientError("reaction: non-finite weight at dof " + std::to_string(d));
    }
    if (c[d] < 0.0) {
      throw MonotonicityError("reaction: negative weight " + std::to_string(c[d]) +
                              " at " + where(grid.dof_point(d)));
    }
    triplets.emplace_back(d, d, c[d] * m[d]);
  }
  SparseMatrix r(c.size(), c.size());
  r.setFromTriplets(triplets.begin(), triplets.end());
  r.makeCompressed();
  return {std::move(r), true};
}

ScalarField assemble_load(const UniformGrid& grid, const NodalField& g) {
  if (g.values.size() != grid.node_count()) {
    throw UsageError("load: nodal field has wrong length");
  }
  ScalarField out = ScalarField::Zero(grid.interior_count());
  for (int ey = 0; ey < grid.ny; ++ey) {
    for (int ex = 0; ex < grid.nx; ++ex) {
      double gl[4];
      for (int a = 0; a < 4; ++a) {
        gl[a] = g.values[grid.node_index(ex + kOffset[a][0], ey + kOffset[a][1])];
      }
      for (const QuadPoint& qp : element_quadrature(grid, ex, ey)) {
        double gq = 0.0;
        for (int a = 0; a < 4; ++a) gq += gl[a] * qp.phi[a];
        for (int t = 0; t < 4; ++t) {
          const auto d = grid.dofs.dof(ex + kOffset[t][0], ey + kOffset[t][1]);
          if (d != DofMap::kEliminated) out[d] += qp.weight * gq * qp.phi[t];
        }
      }
    }
  }
  return out;
}

}  // namespace convopt
