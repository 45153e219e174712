#include "compdyn/elastic.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <set>
#include <thread>

#include "compdyn/error.hpp"

namespace compdyn {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::atomic<int> g_threads{1};

// Runs body(begin, end) over [0, count) in contiguous chunks. Callers write
// into per-item slots and reduce afterwards, so the chunking never changes
// results.
template <class Body>
void parallel_for(Eigen::Index count, Body&& body) {
  const int threads = std::max(1, std::min<int>(g_threads.load(), static_cast<int>(count / 64 + 1)));
  if (threads == 1) {
    body(Eigen::Index{0}, count);
    return;
  }
  std::vector<std::thread> pool;
  const Eigen::Index chunk = (count + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const Eigen::Index b = t * chunk;
    const Eigen::Index e = std::min(count, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&body, b, e] { body(b, e); });
  }
  for (auto& th : pool) th.join();
}

template <int D> using Mat = Eigen::Matrix<double, D, D>;
template <int D> using Vec = Eigen::Matrix<double, D, 1>;
template <int D> using Tangent = Eigen::Matrix<double, D * D, D * D>;
template <int D> using StrainMap = Eigen::Matrix<double, D * D, D*(D + 1)>;
template <int D> using ElemVec = Eigen::Matrix<double, D*(D + 1), 1>;
template <int D> using ElemMat = Eigen::Matrix<double, D*(D + 1), D*(D + 1)>;

// vec() uses row-major flattening: (i, j) -> i * D + j.
template <int D>
Eigen::Matrix<double, D * D, 1> vec(const Mat<D>& A) {
  Eigen::Matrix<double, D * D, 1> v;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) v[i * D + j] = A(i, j);
  return v;
}

template <int D>
Mat<D> deformation_gradient(const ElementGeometry& g, Eigen::Index e, const Eigen::VectorXd& u) {
  Mat<D> F = Mat<D>::Identity();
  const Eigen::MatrixXd& G = g.grads[e];
  for (int a = 0; a <= D; ++a)
    for (int i = 0; i < D; ++i) {
      const double ua = u[g.global_dof(e, a, i)];
      for (int j = 0; j < D; ++j) F(i, j) += ua * G(a, j);
    }
  return F;
}

// d vec(F) / d u_e, local dof order (corner a, coordinate i) -> a * D + i.
template <int D>
StrainMap<D> strain_map(const Eigen::MatrixXd& G) {
  StrainMap<D> B = StrainMap<D>::Zero();
  for (int a = 0; a <= D; ++a)
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) B(i * D + j, a * D + i) = G(a, j);
  return B;
}

template <int D>
void signed_svd(const Mat<D>& F, Mat<D>& U, Vec<D>& sigma, Mat<D>& V) {
  Eigen::JacobiSVD<Mat<D>> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  U = svd.matrixU();
  V = svd.matrixV();
  sigma = svd.singularValues();
  if (U.determinant() < 0) {
    U.col(D - 1) *= -1.0;
    sigma[D - 1] *= -1.0;
  }
  if (V.determinant() < 0) {
    V.col(D - 1) *= -1.0;
    sigma[D - 1] *= -1.0;
  }
}

struct LinearDensity {
  double mu, lambda;

  template <int D> double energy(const Mat<D>& F) const {
    const Mat<D> eps = 0.5 * (F + F.transpose()) - Mat<D>::Identity();
    const double tr = eps.trace();
    return mu * eps.squaredNorm() + 0.5 * lambda * tr * tr;
  }
  template <int D> Mat<D> stress(const Mat<D>& F) const {
    const Mat<D> eps = 0.5 * (F + F.transpose()) - Mat<D>::Identity();
    return 2.0 * mu * eps + lambda * eps.trace() * Mat<D>::Identity();
  }
  template <int D> Tangent<D> tangent(const Mat<D>&) const {
    Tangent<D> A = Tangent<D>::Zero();
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j)
        for (int k = 0; k < D; ++k)
          for (int l = 0; l < D; ++l) {
            double v = mu * ((i == k && j == l) + (i == l && j == k));
            if (i == j && k == l) v += lambda;
            A(i * D + j, k * D + l) = v;
          }
    return A;
  }
};

struct NeoHookeanDensity {
  double mu, lambda;

  template <int D> double energy(const Mat<D>& F) const {
    const double J = F.determinant();
    if (!(J > 0.0)) return kInf;
    const double logJ = std::log(J);
    return 0.5 * mu * (F.squaredNorm() - D) - mu * logJ + 0.5 * lambda * logJ * logJ;
  }
  template <int D> Mat<D> stress(const Mat<D>& F) const {
    const double J = F.determinant();
    if (!(J > 0.0)) throw SolverError("neo-Hookean stress requested for an inverted element");
    const Mat<D> FinvT = F.inverse().transpose();
    return mu * (F - FinvT) + lambda * std::log(J) * FinvT;
  }
  template <int D> Tangent<D> tangent(const Mat<D>& F) const {
    const double J = F.determinant();
    if (!(J > 0.0)) throw SolverError("neo-Hookean Hessian requested for an inverted element");
    const Mat<D> Fit = F.inverse().transpose();
    const double c = mu - lambda * std::log(J);
    Tangent<D> A;
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j)
        for (int k = 0; k < D; ++k)
          for (int l = 0; l < D; ++l)
            A(i * D + j, k * D + l) =
                mu * (i == k && j == l) + c * Fit(i, l) * Fit(k, j) + lambda * Fit(i, j) * Fit(k, l);
    return A;
  }
};

struct ArapDensity {
  double stiffness;

  template <int D> double energy(const Mat<D>& F) const {
    Mat<D> U, V;
    Vec<D> s;
    signed_svd<D>(F, U, s, V);
    return stiffness * (F - U * V.transpose()).squaredNorm();
  }
  template <int D> Mat<D> stress(const Mat<D>& F) const {
    Mat<D> U, V;
    Vec<D> s;
    signed_svd<D>(F, U, s, V);
    return 2.0 * stiffness * (F - U * V.transpose());
  }
  // 2k (I - dR/dF); dR/dF has rank D(D-1)/2 spanned by the twist modes
  // U (e_a e_b' - e_b e_a') V' / sqrt(2) with eigenvalues 2 / (s_a + s_b).
  template <int D> Tangent<D> tangent(const Mat<D>& F) const {
    Mat<D> U, V;
    Vec<D> s;
    signed_svd<D>(F, U, s, V);
    Tangent<D> dR = Tangent<D>::Zero();
    for (int a = 0; a < D; ++a)
      for (int b = a + 1; b < D; ++b) {
        Mat<D> skew = Mat<D>::Zero();
        skew(a, b) = 1.0;
        skew(b, a) = -1.0;
        const auto t = vec<D>(Mat<D>(U * skew * V.transpose() / std::sqrt(2.0)));
        double denom = s[a] + s[b];
        if (std::abs(denom) < 1e-12) denom = denom < 0 ? -1e-12 : 1e-12;
        dR += (2.0 / denom) * t * t.transpose();
      }
    return 2.0 * stiffness * (Tangent<D>::Identity() - dR);
  }
};

template <int D, class Density>
double fem_energy(const ElementGeometry& g, const Density& density, const Eigen::VectorXd& u) {
  std::vector<double> per(g.elements.rows());
  parallel_for(g.elements.rows(), [&](Eigen::Index b, Eigen::Index e) {
    for (Eigen::Index k = b; k < e; ++k)
      per[k] = g.measures[k] * density.template energy<D>(deformation_gradient<D>(g, k, u));
  });
  double total = 0.0;
  for (double v : per) total += v;
  return total;
}

template <int D, class Density>
Eigen::VectorXd fem_gradient(const ElementGeometry& g, const Density& density, const Eigen::VectorXd& u) {
  std::vector<ElemVec<D>> per(g.elements.rows());
  parallel_for(g.elements.rows(), [&](Eigen::Index b, Eigen::Index e) {
    for (Eigen::Index k = b; k < e; ++k) {
      const Mat<D> P = density.template stress<D>(deformation_gradient<D>(g, k, u));
      per[k] = g.measures[k] * strain_map<D>(g.grads[k]).transpose() * vec<D>(P);
    }
  });
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(g.vertex_count * D);
  for (Eigen::Index k = 0; k < g.elements.rows(); ++k)
    for (int a = 0; a <= D; ++a)
      for (int i = 0; i < D; ++i) grad[g.global_dof(k, a, i)] += per[k][a * D + i];
  return grad;
}

template <int D, class Density>
std::vector<ElementBlock> fem_hessians(const ElementGeometry& g, const Density& density,
                                       const Eigen::VectorXd& u) {
  std::vector<ElementBlock> blocks(g.elements.rows());
  parallel_for(g.elements.rows(), [&](Eigen::Index b, Eigen::Index e) {
    for (Eigen::Index k = b; k < e; ++k) {
      const Mat<D> F = deformation_gradient<D>(g, k, u);
      const StrainMap<D> B = strain_map<D>(g.grads[k]);
      const ElemMat<D> H = g.measures[k] * (B.transpose() * density.template tangent<D>(F) * B);
      ElementBlock& blk = blocks[k];
      blk.hessian = 0.5 * (H + H.transpose());
      blk.dofs.resize(D * (D + 1));
      for (int a = 0; a <= D; ++a)
        for (int i = 0; i < D; ++i) blk.dofs[a * D + i] = g.global_dof(k, a, i);
    }
  });
  return blocks;
}

template <class Density>
double energy_dispatch(const ElementGeometry& g, const Density& d, const Eigen::VectorXd& u) {
  return g.dim == 2 ? fem_energy<2>(g, d, u) : fem_energy<3>(g, d, u);
}
template <class Density>
Eigen::VectorXd gradient_dispatch(const ElementGeometry& g, const Density& d, const Eigen::VectorXd& u) {
  return g.dim == 2 ? fem_gradient<2>(g, d, u) : fem_gradient<3>(g, d, u);
}
template <class Density>
std::vector<ElementBlock> hessian_dispatch(const ElementGeometry& g, const Density& d, const Eigen::VectorXd& u) {
  return g.dim == 2 ? fem_hessians<2>(g, d, u) : fem_hessians<3>(g, d, u);
}

void check_size(const Eigen::VectorXd& u, Eigen::Index expected) {
  if (u.size() != expected)
    throw InvalidArgument("displacement has length " + std::to_string(u.size()) + ", expected " +
                          std::to_string(expected));
}

void check_material(const Material& m) {
  if (!(m.youngs > 0.0)) throw InvalidArgument("Young's modulus must be positive");
  if (!(m.poisson > -1.0 && m.poisson < 0.5))
    throw InvalidArgument("Poisson ratio must lie in (-1, 0.5), got " + std::to_string(m.poisson));
}

}  // namespace

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Linear: return "linear";
    case ModelKind::NeoHookean: return "neohookean";
    case ModelKind::Arap: return "arap";
    case ModelKind::MassSpring: return "mass_spring";
  }
  return "unknown";
}

void set_assembly_threads(int threads) { g_threads.store(std::max(1, threads)); }
int assembly_threads() { return g_threads.load(); }

SparseMatrix assemble_blocks(const std::vector<ElementBlock>& blocks, Eigen::Index dof_count) {
  std::vector<Triplet> t;
  std::size_t nnz = 0;
  for (const auto& b : blocks) nnz += b.dofs.size() * b.dofs.size();
  t.reserve(nnz);
  for (const auto& b : blocks)
    for (std::size_t r = 0; r < b.dofs.size(); ++r)
      for (std::size_t c = 0; c < b.dofs.size(); ++c)
        t.emplace_back(b.dofs[r], b.dofs[c], b.hessian(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
  SparseMatrix H(dof_count, dof_count);
  H.setFromTriplets(t.begin(), t.end());
  return H;
}

SparseMatrix ElasticModel::hessian(const Eigen::VectorXd& u) const {
  return assemble_blocks(element_hessians(u), dof_count());
}

double LocalGlobalModel::surrogate_energy(const Eigen::VectorXd& u, const LocalVariables& aux) const {
  return 0.5 * u.dot(global_matrix() * u) + u.dot(global_linear_term(aux)) + global_constant(aux);
}

ElementGeometry::ElementGeometry(const Mesh& mesh)
    : dim(mesh.dim()),
      vertex_count(mesh.vertex_count()),
      elements(mesh.elements()),
      measures(mesh.measures()),
      grads(shape_gradients(mesh)) {}

Eigen::MatrixXd polar_rotation(const Eigen::MatrixXd& F) {
  if (F.rows() != F.cols()) throw InvalidArgument("polar_rotation needs a square matrix");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::MatrixXd U = svd.matrixU();
  Eigen::MatrixXd V = svd.matrixV();
  const auto last = F.cols() - 1;
  if (U.determinant() < 0) U.col(last) *= -1.0;
  if (V.determinant() < 0) V.col(last) *= -1.0;
  return U * V.transpose();
}

// ---- linear ---------------------------------------------------------------

LinearModel::LinearModel(const Mesh& mesh, Material material) : geometry_(mesh), material_(material) {
  check_material(material_);
  const LinearDensity density{material_.lame_mu(), material_.lame_lambda()};
  blocks_ = hessian_dispatch(geometry_, density, Eigen::VectorXd::Zero(mesh.dof_count()));
  stiffness_ = assemble_blocks(blocks_, mesh.dof_count());
}

double LinearModel::energy(const Eigen::VectorXd& u) const {
  check_size(u, dof_count());
  return 0.5 * u.dot(stiffness_ * u);
}

Eigen::VectorXd LinearModel::gradient(const Eigen::VectorXd& u) const {
  check_size(u, dof_count());
  return stiffness_ * u;
}

std::vector<ElementBlock> LinearModel::element_hessians(const Eigen::VectorXd&) const { return blocks_; }

// ---- neo-Hookean ------------------------------------------------------------

NeoHookeanModel::NeoHookeanModel(const Mesh& mesh, Material material) : geometry_(mesh), material_(material) {
  check_material(material_);
}

double NeoHookeanModel::energy(const Eigen::VectorXd& u) const {
  check_size(u, dof_count());
  return energy_dispatch(geometry_, NeoHookeanDensity{material_.lame_mu(), material_.lame_lambda()}, u);
}

Eigen::VectorXd NeoHookeanModel::gradient(const Eigen::VectorXd& u) const {
  check_size(u, dof_count());
  return gradient_dispatch(geometry_, NeoHookeanDensity{material_.lame_mu(), material_.lame_lambda()}, u);
}

std::vector<ElementBlock> NeoHookeanModel::element_hessians(const Eigen::VectorXd& u) const {
  check_size(u, dof_count());
  return hessian_dispatch(geometry_, NeoHookeanDensity{material_.lame_mu(), material_.lame_lambda()}, u);
}

// ---- ARAP -----------------------------------------------------------------

ArapModel::ArapModel(const Mesh& mesh, double stiffness) : geometry_(mesh), stiffness_(stiffness) {
  if (!(stiffness > 0.0)) throw InvalidArgument("ARAP stiffness must be positive");
  const int D = geometry_.dim;
  const auto n = geometry_.vertex_count;
  std::vector<Triplet> t;
  for (Eigen::Index e = 0; e < geometry_.elements.rows(); ++e) {
    const double w = stiffness_ * geometry_.measures[e];
    const Eigen::MatrixXd& G = geometry_.grads[e];
    for (int a = 0; a <= D; ++a)
      for (int b = 0; b <= D; ++b) {
        const double v = 2.0 * w * G.row(a).dot(G.row(b));
        for (int c = 0; c < D; ++c)
          t.emplace_back(c * n + geometry_.elements(e, a), c * n + geometry_.elements(e, b), v);
      }
  }
  global_.resize(n * D, n * D);
  global_.setFromTriplets(t.begin(), t.end());
}

double ArapModel::energy(const Eigen::VectorXd& u) const {
  check_size(u, dof_count());
  return energy_dispatch(geometry_, ArapDensity{stiffness_}, u);
}

Eigen::VectorXd ArapModel::gradient(const Eigen::VectorXd& u) const {
  check_size(u, dof_count());
  return gradient_dispatch(geometry_, ArapDensity{stiffness_}, u);
}

std::vector<ElementBlock> ArapModel::element_hessians(const Eigen::VectorXd& u) const {
  check_size(u, dof_count());
  return hessian_dispatch(geometry_, ArapDensity{stiffness_}, u);
}

LocalVariables ArapModel::local_step(const Eigen::VectorXd& u, const LocalVariables*) const {
  check_size(u, dof_count());
  LocalVariables rotations(geometry_.elements.rows());
  parallel_for(geometry_.elements.rows(), [&](Eigen::Index b, Eigen::Index e) {
    for (Eigen::Index k = b; k < e; ++k) {
      if (geometry_.dim == 2)
        rotations[k] = polar_rotation(deformation_gradient<2>(geometry_, k, u));
      else
        rotations[k] = polar_rotation(deformation_gradient<3>(geometry_, k, u));
    }
  });
  return rotations;
}

Eigen::VectorXd ArapModel::global_linear_term(const LocalVariables& rotations) const {
  const int D = geometry_.dim;
  if (static_cast<Eigen::Index>(rotations.size()) != geometry_.elements.rows())
    throw InvalidArgument("one rotation per element expected");
  Eigen::VectorXd c = Eigen::VectorXd::Zero(dof_count());
  for (Eigen::Index e = 0; e < geometry_.elements.rows(); ++e) {
    const double w = stiffness_ * geometry_.measures[e];
    const Eigen::MatrixXd IminusR = Eigen::MatrixXd::Identity(D, D) - rotations[e];
    const Eigen::MatrixXd& G = geometry_.grads[e];
    for (int a = 0; a <= D; ++a) {
      const Eigen::VectorXd v = 2.0 * w * IminusR * G.row(a).transpose();
      for (int i = 0; i < D; ++i) c[geometry_.global_dof(e, a, i)] += v[i];
    }
  }
  return c;
}

double ArapModel::global_constant(const LocalVariables& rotations) const {
  const int D = geometry_.dim;
  double k = 0.0;
  for (Eigen::Index e = 0; e < geometry_.elements.rows(); ++e)
    k += stiffness_ * geometry_.measures[e] * (Eigen::MatrixXd::Identity(D, D) - rotations[e]).squaredNorm();
  return k;
}

// ---- mass-spring -------------------------------------------------------------

SpringSet edge_springs(const Mesh& mesh, double stiffness) {
  std::set<std::pair<int, int>> edges;
  const auto& T = mesh.elements();
  for (Eigen::Index e = 0; e < T.rows(); ++e)
    for (int a = 0; a < T.cols(); ++a)
      for (int b = a + 1; b < T.cols(); ++b) edges.emplace(std::minmax(T(e, a), T(e, b)));
  SpringSet springs;
  springs.reserve(edges.size());
  for (const auto& [i, j] : edges)
    springs.push_back({i, j, (mesh.vertices().row(i) - mesh.vertices().row(j)).norm(), stiffness});
  return springs;
}

MassSpringModel::MassSpringModel(Eigen::MatrixXd rest, SpringSet springs)
    : rest_(std::move(rest)), springs_(std::move(springs)) {
  if (springs_.empty()) throw InvalidArgument("mass-spring model needs at least one spring");
  const auto n = rest_.rows();
  const int D = dim();
  std::vector<Triplet> t;
  for (std::size_t s = 0; s < springs_.size(); ++s) {
    const Spring& sp = springs_[s];
    if (sp.i < 0 || sp.j < 0 || sp.i >= n || sp.j >= n || sp.i == sp.j)
      throw InvalidArgument("spring " + std::to_string(s) + " has invalid endpoints");
    if (!(sp.rest_length > 0.0)) throw InvalidArgument("spring " + std::to_string(s) + " has zero rest length");
    if (!(sp.stiffness > 0.0)) throw InvalidArgument("spring " + std::to_string(s) + " has non-positive stiffness");
    for (int c = 0; c < D; ++c) {
      t.emplace_back(c * n + sp.i, c * n + sp.i, sp.stiffness);
      t.emplace_back(c * n + sp.j, c * n + sp.j, sp.stiffness);
      t.emplace_back(c * n + sp.i, c * n + sp.j, -sp.stiffness);
      t.emplace_back(c * n + sp.j, c * n + sp.i, -sp.stiffness);
    }
  }
  global_.resize(rest_.size(), rest_.size());
  global_.setFromTriplets(t.begin(), t.end());
}

Eigen::VectorXd MassSpringModel::spring_vector(const Eigen::VectorXd& u, const Spring& s) const {
  const auto n = rest_.rows();
  Eigen::VectorXd v(dim());
  for (int c = 0; c < dim(); ++c)
    v[c] = rest_(s.i, c) + u[c * n + s.i] - rest_(s.j, c) - u[c * n + s.j];
  return v;
}

double MassSpringModel::energy(const Eigen::VectorXd& u) const {
  check_size(u, dof_count());
  double e = 0.0;
  for (const Spring& s : springs_) {
    const double stretch = spring_vector(u, s).norm() - s.rest_length;
    e += 0.5 * s.stiffness * stretch * stretch;
  }
  return e;
}

Eigen::VectorXd MassSpringModel::gradient(const Eigen::VectorXd& u) const {
  check_size(u, dof_count());
  const auto n = rest_.rows();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dof_count());
  for (const Spring& s : springs_) {
    const Eigen::VectorXd v = spring_vector(u, s);
    const double l = v.norm();
    Eigen::VectorXd dir;
    if (l > 0.0)
      dir = v / l;
    else
      dir = (rest_.row(s.i) - rest_.row(s.j)).transpose().normalized();
    const Eigen::VectorXd f = s.stiffness * (l - s.rest_length) * dir;
    for (int c = 0; c < dim(); ++c) {
      g[c * n + s.i] += f[c];
      g[c * n + s.j] -= f[c];
    }
  }
  return g;
}

std::vector<ElementBlock> MassSpringModel::element_hessians(const Eigen::VectorXd& u) const {
  check_size(u, dof_count());
  const auto n = rest_.rows();
  const int D = dim();
  std::vector<ElementBlock> blocks;
  blocks.reserve(springs_.size());
  for (const Spring& s : springs_) {
    const Eigen::VectorXd v = spring_vector(u, s);
    const double l = v.norm();
    Eigen::MatrixXd Hs;
    if (l > 0.0) {
      const Eigen::VectorXd d = v / l;
      Hs = s.stiffness * ((1.0 - s.rest_length / l) * Eigen::MatrixXd::Identity(D, D) +
                          (s.rest_length / l) * d * d.transpose());
    } else {
      const Eigen::VectorXd d = (rest_.row(s.i) - rest_.row(s.j)).transpose().normalized();
      Hs = s.stiffness * d * d.transpose();
    }
    ElementBlock b;
    b.hessian.resize(2 * D, 2 * D);
    b.hessian << Hs, -Hs, -Hs, Hs;
    for (int c = 0; c < D; ++c) b.dofs.push_back(c * n + s.i);
    for (int c = 0; c < D; ++c) b.dofs.push_back(c * n + s.j);
    blocks.push_back(std::move(b));
  }
  return blocks;
}

LocalVariables MassSpringModel::local_step(const Eigen::VectorXd& u, const LocalVariables* previous) const {
  check_size(u, dof_count());
  if (previous && previous->size() != springs_.size())
    throw InvalidArgument("previous local variables do not match the spring count");
  LocalVariables targets(springs_.size());
  for (std::size_t k = 0; k < springs_.size(); ++k) {
    const Spring& s = springs_[k];
    const Eigen::VectorXd v = spring_vector(u, s);
    const double l = v.norm();
    if (l > 0.0)
      targets[k] = s.rest_length * v / l;
    else if (previous)
      targets[k] = (*previous)[k];
    else
      targets[k] = s.rest_length * (rest_.row(s.i) - rest_.row(s.j)).transpose().normalized();
  }
  return targets;
}

Eigen::VectorXd MassSpringModel::global_linear_term(const LocalVariables& targets) const {
  if (targets.size() != springs_.size()) throw InvalidArgument("one target per spring expected");
  const auto n = rest_.rows();
  Eigen::VectorXd c = Eigen::VectorXd::Zero(dof_count());
  for (std::size_t k = 0; k < springs_.size(); ++k) {
    const Spring& s = springs_[k];
    for (int a = 0; a < dim(); ++a) {
      const double r = s.stiffness * (rest_(s.i, a) - rest_(s.j, a) - targets[k](a, 0));
      c[a * n + s.i] += r;
      c[a * n + s.j] -= r;
    }
  }
  return c;
}

double MassSpringModel::global_constant(const LocalVariables& targets) const {
  double k = 0.0;
  for (std::size_t s = 0; s < springs_.size(); ++s) {
    const Spring& sp = springs_[s];
    const Eigen::VectorXd e = (rest_.row(sp.i) - rest_.row(sp.j)).transpose() - targets[s];
    k += 0.5 * sp.stiffness * e.squaredNorm();
  }
  return k;
}

// ---- factories ---------------------------------------------------------------

std::unique_ptr<LinearModel> linear_model(const Mesh& mesh, double youngs, double poisson) {
  return std::make_unique<LinearModel>(mesh, Material{youngs, poisson});
}

std::unique_ptr<NeoHookeanModel> neohookean_model(const Mesh& mesh, double youngs, double poisson) {
  return std::make_unique<NeoHookeanModel>(mesh, Material{youngs, poisson});
}

std::unique_ptr<ArapModel> arap_model(const Mesh& mesh, double stiffness) {
  return std::make_unique<ArapModel>(mesh, stiffness);
}

std::unique_ptr<MassSpringModel> mass_spring_model(const Mesh& mesh, double stiffness) {
  if (!(stiffness > 0.0)) throw InvalidArgument("spring stiffness must be positive");
  return std::make_unique<MassSpringModel>(mesh.vertices(), edge_springs(mesh, stiffness));
}

std::unique_ptr<MassSpringModel> mass_spring_model(const Eigen::MatrixXd& rest, SpringSet springs) {
  return std::make_unique<MassSpringModel>(rest, std::move(springs));
}

}  // namespace compdyn
