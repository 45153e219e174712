#include "compdyn/constraint.hpp"

#include <Eigen/LU>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>

#include "compdyn/error.hpp"
#include "compdyn/kernels.hpp"

namespace compdyn {

MomentumLeak MomentumLeak::identity(Eigen::Index dof_count) { return {Eigen::VectorXd::Ones(dof_count)}; }

MomentumLeak MomentumLeak::constant(Eigen::Index dof_count, double value) {
  if (!(value >= 0.0 && value <= 1.0)) throw InvalidArgument("momentum-leak constant must lie in [0, 1]");
  return {Eigen::VectorXd::Constant(dof_count, value)};
}

bool MomentumLeak::is_identity() const { return (d.array() == 1.0).all(); }

MomentumLeak build_momentum_leak(const Mesh& mesh, const LeakSettings& settings) {
  const auto n = mesh.vertex_count();
  const int dim = mesh.dim();
  switch (settings.mode) {
    case LeakMode::Identity: return MomentumLeak::identity(n * dim);
    case LeakMode::Constant: return MomentumLeak::constant(n * dim, settings.value);
    case LeakMode::Poisson: break;
  }
  if (!(settings.value >= 0.0 && settings.value <= 1.0))
    throw InvalidArgument("Poisson momentum-leak interior value must lie in [0, 1]");

  const std::vector<int> boundary = boundary_vertices(mesh);
  std::vector<int> slot(n, -1);
  std::vector<char> on_boundary(n, 0);
  for (int b : boundary) on_boundary[b] = 1;
  std::vector<int> interior;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!on_boundary[i]) {
      slot[i] = static_cast<int>(interior.size());
      interior.push_back(static_cast<int>(i));
    }
  if (interior.empty()) return MomentumLeak::identity(n * dim);

  const SparseMatrix L = cotan_laplacian(mesh);
  const Eigen::VectorXd mass = lumped_mass(mesh, 1.0).vertex_masses(n);
  std::vector<Triplet> t;
  for (int col = 0; col < L.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(L, col); it; ++it)
      if (slot[it.row()] >= 0 && slot[col] >= 0) t.emplace_back(slot[it.row()], slot[col], -it.value());
  const auto ni = static_cast<Eigen::Index>(interior.size());
  SparseMatrix A(ni, ni);
  A.setFromTriplets(t.begin(), t.end());
  Eigen::VectorXd rhs(ni);
  for (Eigen::Index k = 0; k < ni; ++k) rhs[k] = mass[interior[k]];
  Eigen::SimplicialLDLT<SparseMatrix> solver(A);
  if (solver.info() != Eigen::Success) throw SolverError("momentum leak: interior Laplacian is singular");
  const Eigen::VectorXd phi = solver.solve(rhs);
  const double peak = phi.maxCoeff();

  Eigen::VectorXd field = Eigen::VectorXd::Ones(n);
  if (peak > 0.0)
    for (Eigen::Index k = 0; k < ni; ++k)
      field[interior[k]] = std::clamp(1.0 - (1.0 - settings.value) * phi[k] / peak, 0.0, 1.0);
  return {field.replicate(dim, 1)};
}

ConstraintMatrix assemble_constraint(const RigJacobian& jacobian, const LumpedMassMatrix& M, const MomentumLeak& D) {
  const Eigen::MatrixXd& J = jacobian.J;
  if (J.rows() != M.size() || D.d.size() != M.size())
    throw InvalidArgument("constraint assembly: J has " + std::to_string(J.rows()) + " rows, M " +
                          std::to_string(M.size()) + ", D " + std::to_string(D.d.size()));
  // Build C' column by column (contiguous), then transpose once.
  Eigen::MatrixXd Ct(J.rows(), J.cols());
  for (Eigen::Index j = 0; j < J.cols(); ++j)
    kernels::scale3({Ct.col(j).data(), static_cast<std::size_t>(J.rows())},
                    {J.col(j).data(), static_cast<std::size_t>(J.rows())},
                    {M.diag.data(), static_cast<std::size_t>(M.size())},
                    {D.d.data(), static_cast<std::size_t>(D.d.size())});
  ConstraintMatrix out;
  out.C = Ct.transpose();
  out.lambda = Eigen::VectorXd::Zero(J.cols());
  return out;
}

EmbeddedSurface embed_surface(const Mesh& mesh, const Eigen::MatrixXd& points, const Eigen::MatrixXi& facets,
                              double density) {
  const int dim = mesh.dim();
  if (points.cols() != dim) throw InvalidArgument("surface points must have the mesh dimension");
  const auto n = mesh.vertex_count();
  const auto s = points.rows();
  const auto& V = mesh.vertices();
  const auto& T = mesh.elements();

  std::vector<Eigen::MatrixXd> inverse_edges(T.rows());
  for (Eigen::Index e = 0; e < T.rows(); ++e) {
    Eigen::MatrixXd E(dim, dim);
    for (int a = 0; a < dim; ++a) E.col(a) = (V.row(T(e, a + 1)) - V.row(T(e, 0))).transpose();
    inverse_edges[e] = E.inverse();
  }

  std::vector<Triplet> t;
  for (Eigen::Index k = 0; k < s; ++k) {
    Eigen::Index best = -1;
    double best_min = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_bary;
    for (Eigen::Index e = 0; e < T.rows(); ++e) {
      const Eigen::VectorXd mu = inverse_edges[e] * (points.row(k) - V.row(T(e, 0))).transpose();
      Eigen::VectorXd bary(dim + 1);
      bary[0] = 1.0 - mu.sum();
      bary.tail(dim) = mu;
      const double lo = bary.minCoeff();
      if (lo > best_min) {
        best_min = lo;
        best = e;
        best_bary = bary;
      }
    }
    if (best < 0 || best_min < -1e-9)
      throw InvalidArgument("surface point " + std::to_string(k) + " lies outside the volume mesh");
    best_bary = best_bary.cwiseMax(0.0);
    best_bary /= best_bary.sum();
    for (int a = 0; a <= dim; ++a) {
      if (best_bary[a] == 0.0) continue;
      for (int c = 0; c < dim; ++c) t.emplace_back(c * s + k, c * n + T(best, a), best_bary[a]);
    }
  }
  EmbeddedSurface out;
  out.S.resize(dim * s, dim * n);
  out.S.setFromTriplets(t.begin(), t.end());
  out.M_sur = facet_lumped_mass(points, facets, density);
  return out;
}

ConstraintMatrix build_surface_constraint(const EmbeddedSurface& surface, const Eigen::MatrixXd& J_sur,
                                          const MomentumLeak* D, SurfaceMassMode mode, const LumpedMassMatrix* M) {
  if (J_sur.rows() != surface.S.rows())
    throw InvalidArgument("surface Jacobian has " + std::to_string(J_sur.rows()) + " rows, surface has " +
                          std::to_string(surface.S.rows()) + " dofs");
  const auto dn = surface.S.cols();
  if (D && D->d.size() != dn) throw InvalidArgument("momentum leak does not match the volume dofs");
  Eigen::MatrixXd Ct;
  if (mode == SurfaceMassMode::SurfaceMass) {
    if (surface.M_sur.size() != J_sur.rows()) throw InvalidArgument("surface mass does not match the surface dofs");
    Ct = surface.S.transpose() * (surface.M_sur.asDiagonal() * J_sur);
  } else {
    if (!M) throw InvalidArgument("volume mass mode needs the volume mass matrix");
    if (M->size() != dn) throw InvalidArgument("volume mass does not match the volume dofs");
    Ct = M->diag.asDiagonal() * (surface.S.transpose() * J_sur);
  }
  if (D) Ct = D->d.asDiagonal() * Ct;
  ConstraintMatrix out;
  out.C = Ct.transpose();
  out.lambda = Eigen::VectorXd::Zero(J_sur.cols());
  return out;
}

}  // namespace compdyn
