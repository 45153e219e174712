#include "compdyn/rig.hpp"

#include <unistd.h>

#include <Eigen/QR>
#include <Eigen/SparseCholesky>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <queue>
#include <sstream>

#include "compdyn/error.hpp"

namespace compdyn {
namespace {

// [v_i 1] block of the affine Jacobian written into columns col0 .. col0+dim.
void affine_block(Eigen::MatrixXd& J, const Eigen::MatrixXd& V, Eigen::Index i, int c, Eigen::Index col0,
                  double weight) {
  const auto n = V.rows();
  const int dim = static_cast<int>(V.cols());
  for (int a = 0; a < dim; ++a) J(c * n + i, col0 + a) = weight * V(i, a);
  J(c * n + i, col0 + dim) = weight;
}

Eigen::VectorXd identity_transforms(int dim, Eigen::Index bones) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(bones * dim * (dim + 1));
  for (Eigen::Index j = 0; j < bones; ++j)
    for (int c = 0; c < dim; ++c) p[j * dim * (dim + 1) + c * (dim + 1) + c] = 1.0;
  return p;
}

std::vector<std::string> row_sum_warnings(const Eigen::MatrixXd& W, const char* what) {
  std::vector<std::string> out;
  Eigen::Index bad = 0;
  Eigen::Index first = -1;
  for (Eigen::Index i = 0; i < W.rows(); ++i)
    if (std::abs(W.row(i).sum() - 1.0) > 1e-6) {
      if (first < 0) first = i;
      ++bad;
    }
  if (bad > 0)
    out.push_back(std::string(what) + " rows do not sum to 1 at " + std::to_string(bad) +
                  " vertices (first: " + std::to_string(first) + ")");
  return out;
}

void check_finite(const Eigen::MatrixXd& A, const char* what) {
  if (!A.allFinite()) throw InvalidArgument(std::string(what) + " contains non-finite values");
}

}  // namespace

const char* rig_kind_name(RigKind kind) {
  switch (kind) {
    case RigKind::Affine: return "affine";
    case RigKind::Lbs: return "lbs";
    case RigKind::Cage: return "cage";
    case RigKind::Blendshape: return "blendshape";
    case RigKind::External: return "external";
  }
  return "unknown";
}

void Rig::check_pose(const Eigen::VectorXd& p) const {
  if (p.size() != parameter_count())
    throw InvalidArgument("rig pose has length " + std::to_string(p.size()) + ", expected " +
                          std::to_string(parameter_count()));
}

// ---- linear rigs ---------------------------------------------------------------

LinearRig::LinearRig(RigKind kind, Eigen::MatrixXd J, Eigen::VectorXd offset,
                     std::optional<Eigen::VectorXd> rest, std::vector<std::string> warnings)
    : kind_(kind), J_(std::move(J)), offset_(std::move(offset)), rest_(std::move(rest)) {
  if (offset_.size() != J_.rows()) throw InvalidArgument("rig offset length does not match the Jacobian");
  if (rest_ && rest_->size() != J_.cols()) throw InvalidArgument("rest pose length does not match the Jacobian");
  check_finite(J_, "rig Jacobian");
  warnings_ = std::move(warnings);
}

Eigen::VectorXd LinearRig::eval(const Eigen::VectorXd& p) const {
  check_pose(p);
  return J_ * p + offset_;
}

RigJacobian LinearRig::jacobian(const Eigen::VectorXd& p) const {
  check_pose(p);
  return {J_, p};
}

std::unique_ptr<LinearRig> affine_rig(const Mesh& mesh) {
  const auto n = mesh.vertex_count();
  const int dim = mesh.dim();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n * dim, dim * (dim + 1));
  for (Eigen::Index i = 0; i < n; ++i)
    for (int c = 0; c < dim; ++c) affine_block(J, mesh.vertices(), i, c, c * (dim + 1), 1.0);
  return std::make_unique<LinearRig>(RigKind::Affine, std::move(J), -mesh.rest_vector(),
                                     identity_transforms(dim, 1));
}

std::unique_ptr<LinearRig> lbs_rig(const Mesh& mesh, const Eigen::MatrixXd& weights) {
  const auto n = mesh.vertex_count();
  const int dim = mesh.dim();
  if (weights.rows() != n)
    throw InvalidArgument("LBS weights have " + std::to_string(weights.rows()) + " rows, mesh has " +
                          std::to_string(n) + " vertices");
  if (weights.cols() < 1) throw InvalidArgument("LBS weights need at least one bone");
  check_finite(weights, "LBS weights");
  const auto k = weights.cols();
  const Eigen::Index per_bone = dim * (dim + 1);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n * dim, k * per_bone);
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      if (weights(i, j) == 0.0) continue;
      for (int c = 0; c < dim; ++c) affine_block(J, mesh.vertices(), i, c, j * per_bone + c * (dim + 1), weights(i, j));
    }
  return std::make_unique<LinearRig>(RigKind::Lbs, std::move(J), -mesh.rest_vector(), identity_transforms(dim, k),
                                     row_sum_warnings(weights, "LBS weight"));
}

std::unique_ptr<LinearRig> cage_rig(const Mesh& mesh, const Eigen::MatrixXd& cage_weights,
                                    const Eigen::MatrixXd& rest_cage) {
  const auto n = mesh.vertex_count();
  const int dim = mesh.dim();
  const auto k = cage_weights.cols();
  if (cage_weights.rows() != n)
    throw InvalidArgument("cage weights have " + std::to_string(cage_weights.rows()) + " rows, mesh has " +
                          std::to_string(n) + " vertices");
  if (rest_cage.rows() != k || rest_cage.cols() != dim)
    throw InvalidArgument("rest cage must be " + std::to_string(k) + " x " + std::to_string(dim));
  check_finite(cage_weights, "cage weights");
  check_finite(rest_cage, "rest cage");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n * dim, k * dim);
  for (int c = 0; c < dim; ++c) J.block(c * n, c * k, n, k) = cage_weights;
  auto warnings = row_sum_warnings(cage_weights, "cage weight");
  const double reproduction = (cage_weights * rest_cage - mesh.vertices()).cwiseAbs().maxCoeff();
  if (reproduction > 1e-6 * std::max(1.0, mesh.bbox_diagonal()))
    warnings.push_back("cage weights do not reproduce the rest mesh from the rest cage (max error " +
                       std::to_string(reproduction) + ")");
  return std::make_unique<LinearRig>(RigKind::Cage, std::move(J), -mesh.rest_vector(), flatten(rest_cage),
                                     std::move(warnings));
}

std::unique_ptr<LinearRig> blendshape_rig(const Eigen::MatrixXd& rest, const std::vector<Eigen::MatrixXd>& poses) {
  if (poses.empty()) throw InvalidArgument("blendshape rig needs at least one pose");
  Eigen::MatrixXd J(rest.size(), static_cast<Eigen::Index>(poses.size()));
  for (std::size_t j = 0; j < poses.size(); ++j) {
    if (poses[j].rows() != rest.rows() || poses[j].cols() != rest.cols())
      throw InvalidArgument("blendshape pose " + std::to_string(j) + " has " + std::to_string(poses[j].rows()) +
                            " vertices, rest has " + std::to_string(rest.rows()));
    J.col(static_cast<Eigen::Index>(j)) = flatten(poses[j]);
  }
  return std::make_unique<LinearRig>(RigKind::Blendshape, std::move(J), -flatten(rest));
}

// ---- external rigs ---------------------------------------------------------------

ExternalRig::ExternalRig(Eigen::Index parameter_count, Eigen::Index dof_count, Evaluator evaluator, double fd_step,
                         std::optional<Eigen::VectorXd> rest)
    : m_(parameter_count), dn_(dof_count), evaluator_(std::move(evaluator)), fd_step_(fd_step), rest_(std::move(rest)) {
  if (m_ < 0 || dn_ <= 0) throw InvalidArgument("external rig sizes must be positive");
  if (!(fd_step_ > 0.0)) throw InvalidArgument("finite-difference step must be positive");
  if (!evaluator_) throw InvalidArgument("external rig needs an evaluator");
}

Eigen::VectorXd ExternalRig::eval(const Eigen::VectorXd& p) const {
  check_pose(p);
  Eigen::VectorXd u = evaluator_(p);
  if (u.size() != dn_)
    throw InvalidArgument("external rig returned " + std::to_string(u.size()) + " values, expected " +
                          std::to_string(dn_));
  return u;
}

RigJacobian ExternalRig::jacobian(const Eigen::VectorXd& p) const { return fd_jacobian(*this, p, fd_step_); }

std::unique_ptr<ExternalRig> command_rig(std::string command, Eigen::Index parameter_count, Eigen::Index dof_count,
                                         double fd_step) {
  auto evaluator = [command = std::move(command), dof_count](const Eigen::VectorXd& p) {
    static std::atomic<long> counter{0};
    const auto stem = std::filesystem::temp_directory_path() /
                      ("compdyn_rig_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    const auto pose_path = stem.string() + ".pose";
    const auto out_path = stem.string() + ".out";
    {
      std::ofstream f(pose_path);
      f.precision(17);
      for (Eigen::Index j = 0; j < p.size(); ++j) f << p[j] << '\n';
    }
    const std::string call = command + " '" + pose_path + "' '" + out_path + "'";
    const int status = std::system(call.c_str());
    std::filesystem::remove(pose_path);
    if (status != 0) {
      std::filesystem::remove(out_path);
      throw Error("external rig command failed (status " + std::to_string(status) + "): " + command);
    }
    std::ifstream in(out_path);
    std::vector<double> values;
    for (double v; in >> v;) values.push_back(v);
    in.close();
    std::filesystem::remove(out_path);
    if (static_cast<Eigen::Index>(values.size()) != dof_count)
      throw ParseError("external rig command wrote " + std::to_string(values.size()) + " values, expected " +
                       std::to_string(dof_count));
    return Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(values.data(), dof_count));
  };
  return std::make_unique<ExternalRig>(parameter_count, dof_count, std::move(evaluator), fd_step);
}

RigJacobian fd_jacobian(const Rig& rig, const Eigen::VectorXd& p, double eps) {
  if (!(eps > 0.0)) throw InvalidArgument("finite-difference step must be positive");
  if (p.size() != rig.parameter_count()) throw InvalidArgument("pose length does not match the rig");
  RigJacobian out{Eigen::MatrixXd(rig.dof_count(), p.size()), p};
  Eigen::VectorXd q = p;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    q[j] = p[j] + eps;
    const Eigen::VectorXd plus = rig.eval(q);
    q[j] = p[j] - eps;
    const Eigen::VectorXd minus = rig.eval(q);
    q[j] = p[j];
    if (!plus.allFinite() || !minus.allFinite())
      throw SolverError("rig evaluation is not finite near parameter " + std::to_string(j));
    out.J.col(j) = (plus - minus) / (2.0 * eps);
  }
  return out;
}

RecoveredPose recover_rig_params(const Rig& rig, const LumpedMassMatrix& M, const Eigen::VectorXd& u) {
  if (!rig.is_linear()) throw InvalidArgument("rig parameter recovery needs a linear rig");
  if (u.size() != rig.dof_count() || M.size() != rig.dof_count())
    throw InvalidArgument("displacement / mass size does not match the rig");
  Eigen::MatrixXd J;
  Eigen::VectorXd b;
  if (const auto* lin = dynamic_cast<const LinearRig*>(&rig)) {
    J = lin->matrix();
    b = lin->offset();
  } else {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(rig.parameter_count());
    J = rig.jacobian(zero).J;
    b = rig.eval(zero);
  }
  // Weighted least squares through QR of M^(1/2) J; better conditioned than
  // the normal equations J'MJ.
  const Eigen::VectorXd sqrt_m = M.diag.cwiseSqrt();
  const Eigen::MatrixXd W = sqrt_m.asDiagonal() * J;
  const Eigen::VectorXd rhs = sqrt_m.cwiseProduct(u - b);
  RecoveredPose out;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(W);
  if (qr.rank() == W.cols()) {
    out.p = qr.solve(rhs);
  } else {
    out.rank_deficient = true;
    out.p = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(W).solve(rhs);
  }
  return out;
}

// ---- harmonic extension --------------------------------------------------------

struct HarmonicExtension::Impl {
  Eigen::SimplicialLDLT<SparseMatrix> solver;
  SparseMatrix L_ib;  // interior x boundary block
};

HarmonicExtension::~HarmonicExtension() = default;
HarmonicExtension::HarmonicExtension(HarmonicExtension&&) noexcept = default;
HarmonicExtension& HarmonicExtension::operator=(HarmonicExtension&&) noexcept = default;

HarmonicExtension::HarmonicExtension(const Mesh& mesh)
    : n_(mesh.vertex_count()), boundary_(boundary_vertices(mesh)), impl_(std::make_unique<Impl>()) {
  std::vector<int> slot(n_, -1);
  std::vector<char> on_boundary(n_, 0);
  for (int b : boundary_) on_boundary[b] = 1;
  for (Eigen::Index i = 0; i < n_; ++i)
    if (!on_boundary[i]) {
      slot[i] = static_cast<int>(interior_.size());
      interior_.push_back(static_cast<int>(i));
    }
  if (interior_.empty()) return;

  // Every interior vertex must reach the boundary through element edges,
  // otherwise the Dirichlet problem is singular.
  std::vector<std::vector<int>> adjacency(n_);
  const auto& T = mesh.elements();
  for (Eigen::Index e = 0; e < T.rows(); ++e)
    for (int a = 0; a < T.cols(); ++a)
      for (int b = 0; b < T.cols(); ++b)
        if (a != b) adjacency[T(e, a)].push_back(T(e, b));
  std::vector<char> reached(n_, 0);
  std::queue<int> frontier;
  for (int b : boundary_) {
    reached[b] = 1;
    frontier.push(b);
  }
  while (!frontier.empty()) {
    const int v = frontier.front();
    frontier.pop();
    for (int w : adjacency[v])
      if (!reached[w]) {
        reached[w] = 1;
        frontier.push(w);
      }
  }
  for (int i : interior_)
    if (!reached[i])
      throw InvalidArgument("interior vertex " + std::to_string(i) + " is in a component without boundary");

  std::vector<int> bslot(n_, -1);
  for (std::size_t k = 0; k < boundary_.size(); ++k) bslot[boundary_[k]] = static_cast<int>(k);
  const SparseMatrix L = cotan_laplacian(mesh);
  std::vector<Triplet> ii, ib;
  for (int col = 0; col < L.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(L, col); it; ++it) {
      const int r = slot[it.row()];
      if (r < 0) continue;
      if (slot[col] >= 0)
        ii.emplace_back(r, slot[col], -it.value());
      else
        ib.emplace_back(r, bslot[col], it.value());
    }
  const auto ni = static_cast<Eigen::Index>(interior_.size());
  SparseMatrix A(ni, ni);
  A.setFromTriplets(ii.begin(), ii.end());
  impl_->L_ib.resize(ni, static_cast<Eigen::Index>(boundary_.size()));
  impl_->L_ib.setFromTriplets(ib.begin(), ib.end());
  impl_->solver.compute(A);
  if (impl_->solver.info() != Eigen::Success)
    throw SolverError("harmonic extension: interior Laplacian block could not be factorized");
}

Eigen::MatrixXd HarmonicExtension::extend(const Eigen::MatrixXd& boundary_values) const {
  if (boundary_values.rows() != static_cast<Eigen::Index>(boundary_.size()))
    throw InvalidArgument("expected values on " + std::to_string(boundary_.size()) + " boundary vertices, got " +
                          std::to_string(boundary_values.rows()));
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_, boundary_values.cols());
  for (std::size_t k = 0; k < boundary_.size(); ++k)
    out.row(boundary_[k]) = boundary_values.row(static_cast<Eigen::Index>(k));
  if (interior_.empty()) return out;
  const Eigen::MatrixXd rhs = impl_->L_ib * boundary_values;
  const Eigen::MatrixXd xi = impl_->solver.solve(rhs);
  for (std::size_t k = 0; k < interior_.size(); ++k) out.row(interior_[k]) = xi.row(static_cast<Eigen::Index>(k));
  return out;
}

Eigen::MatrixXd harmonic_extension(const Mesh& mesh, const Eigen::MatrixXd& boundary_values) {
  return HarmonicExtension(mesh).extend(boundary_values);
}

HarmonicallyExtendedRig::HarmonicallyExtendedRig(const Mesh& mesh, std::shared_ptr<const Rig> surface_rig)
    : n_(mesh.vertex_count()), dim_(mesh.dim()), extension_(mesh), surface_(std::move(surface_rig)) {
  if (!surface_) throw InvalidArgument("surface rig is null");
  const auto expected = static_cast<Eigen::Index>(extension_.boundary().size()) * dim_;
  if (surface_->dof_count() != expected)
    throw InvalidArgument("surface rig has " + std::to_string(surface_->dof_count()) + " dofs, boundary has " +
                          std::to_string(expected));
}

Eigen::MatrixXd HarmonicallyExtendedRig::extend_columns(const Eigen::MatrixXd& surface_columns) const {
  const auto nb = static_cast<Eigen::Index>(extension_.boundary().size());
  const auto cols = surface_columns.cols();
  // Stack every (column, coordinate) pair as one right-hand side.
  Eigen::MatrixXd values(nb, cols * dim_);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (int c = 0; c < dim_; ++c) values.col(j * dim_ + c) = surface_columns.col(j).segment(c * nb, nb);
  const Eigen::MatrixXd ext = extension_.extend(values);
  Eigen::MatrixXd out(n_ * dim_, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (int c = 0; c < dim_; ++c) out.col(j).segment(c * n_, n_) = ext.col(j * dim_ + c);
  return out;
}

Eigen::VectorXd HarmonicallyExtendedRig::eval(const Eigen::VectorXd& p) const {
  check_pose(p);
  return extend_columns(surface_->eval(p));
}

RigJacobian HarmonicallyExtendedRig::jacobian(const Eigen::VectorXd& p) const {
  check_pose(p);
  return {extend_columns(surface_->jacobian(p).J), p};
}

}  // namespace compdyn
