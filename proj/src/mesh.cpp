#include "compdyn/mesh.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>

#include "compdyn/error.hpp"

namespace compdyn {
namespace {

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

// Facets opposite each corner, oriented so that their normals point out of a
// positively oriented element.
const std::vector<std::vector<int>>& facet_table(int dim) {
  static const std::vector<std::vector<int>> tri = {{1, 2}, {2, 0}, {0, 1}};
  static const std::vector<std::vector<int>> tet = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
  return dim == 2 ? tri : tet;
}

}  // namespace

double signed_measure(const Eigen::MatrixXd& corners) {
  const int dim = static_cast<int>(corners.cols());
  Eigen::MatrixXd edges(dim, dim);
  for (int a = 0; a < dim; ++a) edges.col(a) = (corners.row(a + 1) - corners.row(0)).transpose();
  return edges.determinant() / factorial(dim);
}

Mesh::Mesh(Eigen::MatrixXd vertices, Eigen::MatrixXi elements)
    : vertices_(std::move(vertices)), elements_(std::move(elements)) {
  const auto dim = vertices_.cols();
  if (dim != 2 && dim != 3) throw InvalidArgument("mesh dimension must be 2 or 3");
  if (elements_.cols() != dim + 1)
    throw InvalidArgument("elements must have dim+1 = " + std::to_string(dim + 1) + " corners");
  if (vertices_.rows() < dim + 1) throw InvalidArgument("mesh needs at least dim+1 vertices");
  if (elements_.rows() == 0) throw InvalidArgument("mesh has no elements");
  if (!vertices_.allFinite()) throw InvalidArgument("mesh has non-finite vertex coordinates");

  const double diag = bbox_diagonal();
  const double min_measure = 1e-12 * std::pow(diag, static_cast<double>(dim));
  measures_.resize(elements_.rows());
  Eigen::MatrixXd corners(dim + 1, dim);
  for (Eigen::Index e = 0; e < elements_.rows(); ++e) {
    for (Eigen::Index a = 0; a <= dim; ++a) {
      const int v = elements_(e, a);
      if (v < 0 || v >= vertices_.rows())
        throw InvalidArgument("element " + std::to_string(e) + " references vertex " +
                              std::to_string(v) + " out of range [0, " +
                              std::to_string(vertices_.rows()) + ")");
      corners.row(a) = vertices_.row(v);
    }
    double m = signed_measure(corners);
    if (std::abs(m) < min_measure)
      throw InvalidArgument("degenerate element " + std::to_string(e) + " (measure " +
                            std::to_string(m) + ")");
    if (m < 0) {
      std::swap(elements_(e, 0), elements_(e, 1));
      m = -m;
    }
    measures_[e] = m;
  }
}

double Mesh::bbox_diagonal() const {
  return (vertices_.colwise().maxCoeff() - vertices_.colwise().minCoeff()).norm();
}

Eigen::VectorXd Mesh::rest_vector() const { return flatten(vertices_); }

SparseMatrix LumpedMassMatrix::as_sparse() const {
  SparseMatrix m(diag.size(), diag.size());
  std::vector<Triplet> t;
  t.reserve(diag.size());
  for (Eigen::Index i = 0; i < diag.size(); ++i) t.emplace_back(i, i, diag[i]);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

LumpedMassMatrix lumped_mass(const Mesh& mesh, double density) {
  if (!(density > 0.0) || !std::isfinite(density))
    throw InvalidArgument("density must be positive, got " + std::to_string(density));
  const int dim = mesh.dim();
  const auto n = mesh.vertex_count();
  Eigen::VectorXd per_vertex = Eigen::VectorXd::Zero(n);
  const auto& el = mesh.elements();
  for (Eigen::Index e = 0; e < mesh.element_count(); ++e) {
    const double share = density * mesh.measures()[e] / (dim + 1);
    for (int a = 0; a <= dim; ++a) per_vertex[el(e, a)] += share;
  }
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(per_vertex[i] > 0.0))
      throw InvalidArgument("vertex " + std::to_string(i) + " is not referenced by any element");
  LumpedMassMatrix m;
  m.density = density;
  m.diag = per_vertex.replicate(dim, 1);
  return m;
}

Eigen::VectorXd facet_lumped_mass(const Eigen::MatrixXd& points, const Eigen::MatrixXi& facets,
                                  double density) {
  if (!(density > 0.0)) throw InvalidArgument("density must be positive");
  const auto dim = points.cols();
  if (facets.cols() != dim) throw InvalidArgument("facets must have dim corners");
  Eigen::VectorXd per_vertex = Eigen::VectorXd::Zero(points.rows());
  for (Eigen::Index f = 0; f < facets.rows(); ++f) {
    // Gram determinant gives the (dim-1)-volume of the facet in R^dim
    Eigen::MatrixXd edges(dim, dim - 1);
    for (Eigen::Index a = 1; a < dim; ++a)
      edges.col(a - 1) = (points.row(facets(f, a)) - points.row(facets(f, 0))).transpose();
    const double gram = (edges.transpose() * edges).determinant();
    const double measure = std::sqrt(std::max(gram, 0.0)) / factorial(static_cast<int>(dim) - 1);
    for (Eigen::Index a = 0; a < dim; ++a) per_vertex[facets(f, a)] += density * measure / dim;
  }
  return per_vertex.replicate(dim, 1);
}

std::vector<Eigen::MatrixXd> shape_gradients(const Mesh& mesh) {
  const int dim = mesh.dim();
  const auto& V = mesh.vertices();
  const auto& T = mesh.elements();
  std::vector<Eigen::MatrixXd> grads(mesh.element_count());
  Eigen::MatrixXd edges(dim, dim);
  for (Eigen::Index e = 0; e < mesh.element_count(); ++e) {
    for (int a = 0; a < dim; ++a) edges.col(a) = (V.row(T(e, a + 1)) - V.row(T(e, 0))).transpose();
    const Eigen::MatrixXd inv = edges.inverse();
    Eigen::MatrixXd g(dim + 1, dim);
    g.bottomRows(dim) = inv;
    g.row(0) = -inv.colwise().sum();
    grads[e] = std::move(g);
  }
  return grads;
}

SparseMatrix cotan_laplacian(const Mesh& mesh) {
  // -integral(grad phi_i . grad phi_j); in 2D this is exactly the half-cotangent
  // weight of the opposite angle, in 3D the dihedral cotangent weight.
  const int dim = mesh.dim();
  const auto grads = shape_gradients(mesh);
  const auto& T = mesh.elements();
  std::vector<Triplet> t;
  t.reserve(mesh.element_count() * (dim + 1) * (dim + 1));
  for (Eigen::Index e = 0; e < mesh.element_count(); ++e) {
    const Eigen::MatrixXd& g = grads[e];
    const double vol = mesh.measures()[e];
    for (int a = 0; a <= dim; ++a) {
      double diag = 0.0;
      for (int b = 0; b <= dim; ++b) {
        if (a == b) continue;
        const double w = -vol * g.row(a).dot(g.row(b));
        t.emplace_back(T(e, a), T(e, b), w);
        diag -= w;
      }
      t.emplace_back(T(e, a), T(e, a), diag);
    }
  }
  SparseMatrix L(mesh.vertex_count(), mesh.vertex_count());
  L.setFromTriplets(t.begin(), t.end());
  return L;
}

Eigen::MatrixXi boundary_facets(const Mesh& mesh) {
  const int dim = mesh.dim();
  const auto& T = mesh.elements();
  const auto& table = facet_table(dim);
  std::map<std::vector<int>, std::pair<int, std::vector<int>>> count;
  for (Eigen::Index e = 0; e < mesh.element_count(); ++e) {
    for (const auto& local : table) {
      std::vector<int> facet;
      for (int a : local) facet.push_back(T(e, a));
      std::vector<int> key = facet;
      std::sort(key.begin(), key.end());
      auto [it, inserted] = count.try_emplace(key, 0, facet);
      ++it->second.first;
    }
  }
  std::vector<std::vector<int>> out;
  for (const auto& [key, entry] : count)
    if (entry.first == 1) out.push_back(entry.second);
  Eigen::MatrixXi F(static_cast<Eigen::Index>(out.size()), dim);
  for (std::size_t f = 0; f < out.size(); ++f)
    for (int a = 0; a < dim; ++a) F(static_cast<Eigen::Index>(f), a) = out[f][a];
  return F;
}

std::vector<int> boundary_vertices(const Mesh& mesh) {
  const Eigen::MatrixXi F = boundary_facets(mesh);
  std::vector<int> v(F.data(), F.data() + F.size());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

Eigen::VectorXd flatten(const Eigen::MatrixXd& per_vertex) {
  // column-major storage of an n x dim matrix is exactly the coordinate-major layout
  return Eigen::Map<const Eigen::VectorXd>(per_vertex.data(), per_vertex.size());
}

Eigen::MatrixXd unflatten(const Eigen::VectorXd& stacked, int dim) {
  if (dim <= 0 || stacked.size() % dim != 0) throw InvalidArgument("vector length not a multiple of dim");
  return Eigen::Map<const Eigen::MatrixXd>(stacked.data(), stacked.size() / dim, dim);
}

}  // namespace compdyn
