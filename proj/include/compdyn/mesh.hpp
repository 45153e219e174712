#pragma once

// Simplicial meshes (triangles in 2D, tetrahedra in 3D), their measures,
// lumped mass, cotangent Laplacian and boundary.
//
// Displacement vectors over a mesh use coordinate-major layout throughout the
// library: entry (vertex i, coordinate c) lives at c * n + i. This matches
// the Kronecker structure I_d (x) [V 1] of the affine rig Jacobian.

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <filesystem>
#include <vector>

namespace compdyn {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

class Mesh {
 public:
  // vertices: n x dim rest positions; elements: k x (dim+1) vertex indices.
  // Validates indices, flips negatively oriented elements and rejects
  // degenerate ones (measure < 1e-12 * bbox_diag^dim). Throws InvalidArgument.
  Mesh(Eigen::MatrixXd vertices, Eigen::MatrixXi elements);

  int dim() const { return static_cast<int>(vertices_.cols()); }
  Eigen::Index vertex_count() const { return vertices_.rows(); }
  Eigen::Index element_count() const { return elements_.rows(); }
  Eigen::Index dof_count() const { return vertices_.rows() * vertices_.cols(); }

  const Eigen::MatrixXd& vertices() const { return vertices_; }
  const Eigen::MatrixXi& elements() const { return elements_; }

  // Unsigned (after orientation fixing: positive) area or volume per element.
  const Eigen::VectorXd& measures() const { return measures_; }
  double total_measure() const { return measures_.sum(); }
  double bbox_diagonal() const;

  // Rest positions flattened in coordinate-major layout.
  Eigen::VectorXd rest_vector() const;

 private:
  Eigen::MatrixXd vertices_;
  Eigen::MatrixXi elements_;
  Eigen::VectorXd measures_;
};

// Signed measure of a simplex given its dim+1 corner rows.
double signed_measure(const Eigen::MatrixXd& corners);

struct LumpedMassMatrix {
  Eigen::VectorXd diag;  // length dim * n, coordinate-major
  double density = 0.0;

  Eigen::Index size() const { return diag.size(); }
  double max() const { return diag.maxCoeff(); }
  // Per-vertex mass (first coordinate block).
  Eigen::VectorXd vertex_masses(Eigen::Index n) const { return diag.head(n); }
  SparseMatrix as_sparse() const;
};

// Barycentric lumping: every element hands density * measure / (dim + 1) to
// each of its vertices, replicated per coordinate.
LumpedMassMatrix lumped_mass(const Mesh& mesh, double density);

// Lumped mass of a codimension-1 facet set (segments in 2D, triangles in 3D)
// living in R^dim. Used for surface-only constraints.
Eigen::VectorXd facet_lumped_mass(const Eigen::MatrixXd& points, const Eigen::MatrixXi& facets,
                                  double density);

// n x n cotangent Laplacian, negative semidefinite, zero row sums.
SparseMatrix cotan_laplacian(const Mesh& mesh);

// Vertices incident on facets that belong to exactly one element (sorted).
std::vector<int> boundary_vertices(const Mesh& mesh);
// Facets (dim vertices each) that belong to exactly one element, oriented
// outward.
Eigen::MatrixXi boundary_facets(const Mesh& mesh);

// Barycentric-coordinate gradients of every element's linear hat functions:
// result[e] is (dim+1) x dim, row a = grad phi_a.
std::vector<Eigen::MatrixXd> shape_gradients(const Mesh& mesh);

// ---- file formats -------------------------------------------------------

// OBJ with `v` and triangle `f` records. dim = 2 iff every z == 0.
Mesh load_tri_obj(const std::filesystem::path& path);
// Vertex positions only (faces ignored). Columns = 3 unless all z == 0.
Eigen::MatrixXd load_obj_vertices(const std::filesystem::path& path);
// TetGen .node / .ele pair.
Mesh load_tet_mesh(const std::filesystem::path& node_path, const std::filesystem::path& ele_path);

// Writes `v` records at 17 significant digits (z = 0 for 2D) and `f` records
// (1-based). faces may be empty.
void write_obj(const std::filesystem::path& path, const Eigen::MatrixXd& vertices,
               const Eigen::MatrixXi& faces);

// DMAT ASCII: header `ncols nrows`, then values column-major, one per line.
Eigen::MatrixXd read_dmat(const std::filesystem::path& path);
void write_dmat(const std::filesystem::path& path, const Eigen::MatrixXd& matrix);

// Reshape helpers between n x dim matrices and coordinate-major vectors.
Eigen::VectorXd flatten(const Eigen::MatrixXd& per_vertex);
Eigen::MatrixXd unflatten(const Eigen::VectorXd& stacked, int dim);

}  // namespace compdyn
