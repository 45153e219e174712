#include "compdyn/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SparseLU>
#include <cmath>

#include "compdyn/error.hpp"

namespace compdyn {
namespace {

double inf_norm(const SparseMatrix& A) {
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(A.rows());
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A, k); it; ++it) rows[it.row()] += std::abs(it.value());
  return rows.size() ? rows.maxCoeff() : 0.0;
}

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

void check_symmetric(const SparseMatrix& Q) {
  if (Q.rows() != Q.cols()) throw InvalidArgument("Q must be square");
  const SparseMatrix Qt = Q.transpose();
  const SparseMatrix diff = Q - Qt;
  double worst = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(diff, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
  if (worst > 1e-10 * std::max(inf_norm(Q), 1e-300))
    throw InvalidArgument("Q is not symmetric (max asymmetry " + std::to_string(worst) + ")");
}

}  // namespace

struct KktFactorization::Impl {
  SparseMatrix Q;
  Eigen::MatrixXd C;             // original rows
  std::vector<Eigen::Index> active;
  Eigen::VectorXd scale;         // per active row
  Eigen::MatrixXd Cs;            // scaled active rows
  SparseMatrix K;
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  bool regularized = false;

  bool factor(double eps) {
    const Eigen::Index n = Q.rows();
    const auto ma = Cs.rows();
    std::vector<Triplet> t;
    t.reserve(Q.nonZeros() + 2 * Cs.size() + ma);
    for (int k = 0; k < Q.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(Q, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    for (Eigen::Index r = 0; r < ma; ++r) {
      for (Eigen::Index c = 0; c < n; ++c) {
        const double v = Cs(r, c);
        if (v == 0.0) continue;
        t.emplace_back(n + r, c, v);
        t.emplace_back(c, n + r, v);
      }
      if (eps > 0.0) t.emplace_back(n + r, n + r, -eps);
    }
    K.resize(n + ma, n + ma);
    K.setFromTriplets(t.begin(), t.end());
    K.makeCompressed();
    lu.compute(K);
    return lu.info() == Eigen::Success;
  }

  KKTSolution solve(const Eigen::VectorXd& rhs) const {
    const Eigen::Index n = Q.rows();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(K.rows());
    b.head(n) = rhs;
    Eigen::VectorXd z = lu.solve(b);
    const Eigen::VectorXd r = b - K * z;
    z += lu.solve(r);
    KKTSolution out;
    out.x = z.head(n);
    out.lambda = Eigen::VectorXd::Zero(C.rows());
    for (std::size_t k = 0; k < active.size(); ++k)
      out.lambda[active[k]] = scale[static_cast<Eigen::Index>(k)] * z[n + static_cast<Eigen::Index>(k)];
    out.regularized = regularized;
    Eigen::VectorXd stat = Q * out.x - rhs;
    if (C.rows() > 0) stat += C.transpose() * out.lambda;
    out.stationarity_residual = inf_norm(stat);
    out.constraint_residual = C.rows() > 0 ? inf_norm(Eigen::VectorXd(C * out.x)) : 0.0;
    return out;
  }

  // Residuals far above rounding level mean the factorization is unusable.
  bool acceptable(const KKTSolution& s, const Eigen::VectorXd& rhs) const {
    if (!s.x.allFinite() || !s.lambda.allFinite()) return false;
    const double qn = inf_norm(Q);
    const double cn = C.size() ? C.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
    const double ctl = C.rows() ? inf_norm(Eigen::VectorXd(C.transpose() * s.lambda)) : 0.0;
    const double stat_scale = inf_norm(rhs) + qn * inf_norm(s.x) + ctl + 1e-300;
    const double cons_scale = cn * inf_norm(s.x) + 1e-300;
    return s.stationarity_residual <= 1e-6 * stat_scale && s.constraint_residual <= 1e-6 * cons_scale;
  }
};

KktFactorization::~KktFactorization() = default;
KktFactorization::KktFactorization(KktFactorization&&) noexcept = default;
KktFactorization& KktFactorization::operator=(KktFactorization&&) noexcept = default;

KktFactorization::KktFactorization(const SparseMatrix& Q, const Eigen::MatrixXd& C, double regularization)
    : n_(Q.rows()), m_(C.rows()), impl_(std::make_unique<Impl>()) {
  check_symmetric(Q);
  if (m_ > 0 && C.cols() != n_)
    throw InvalidArgument("C has " + std::to_string(C.cols()) + " columns, Q is " + std::to_string(n_) + " square");
  if (!C.allFinite()) throw InvalidArgument("constraint matrix contains non-finite values");
  Impl& im = *impl_;
  im.Q = Q;
  im.Q.makeCompressed();
  im.C = C;

  const Eigen::VectorXd qdiag = Q.diagonal().cwiseAbs();
  const double qscale = (qdiag.size() && qdiag.maxCoeff() > 0.0) ? qdiag.maxCoeff() : 1.0;
  for (Eigen::Index r = 0; r < m_; ++r) {
    const double rn = C.row(r).cwiseAbs().maxCoeff();
    if (rn > 0.0) im.active.push_back(r);
  }
  const auto ma = static_cast<Eigen::Index>(im.active.size());
  im.scale.resize(ma);
  im.Cs.resize(ma, n_);
  for (Eigen::Index k = 0; k < ma; ++k) {
    const auto r = im.active[k];
    im.scale[k] = qscale / C.row(r).cwiseAbs().maxCoeff();
    im.Cs.row(k) = im.scale[k] * C.row(r);
  }

  const double eps = regularization > 0.0 ? regularization : 1e-10 * std::max(inf_norm(Q), 1e-300);
  bool deficient = false;
  if (ma > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(im.Cs.transpose());
    deficient = qr.rank() < ma;
  }

  bool ok = false;
  if (!deficient && im.factor(0.0)) {
    const Eigen::VectorXd probe = Eigen::VectorXd::Ones(n_);
    ok = im.acceptable(im.solve(probe), probe);
  }
  if (!ok) {
    im.regularized = true;
    if (!im.factor(eps)) throw SolverError("rank-deficient rig Jacobian");
    const Eigen::VectorXd probe = Eigen::VectorXd::Ones(n_);
    if (!im.acceptable(im.solve(probe), probe)) throw SolverError("rank-deficient rig Jacobian");
  }
}

bool KktFactorization::regularized() const { return impl_->regularized; }

KKTSolution KktFactorization::solve(const Eigen::VectorXd& rhs) const {
  if (rhs.size() != n_) throw InvalidArgument("KKT right-hand side has the wrong length");
  KKTSolution s = impl_->solve(rhs);
  if (!impl_->acceptable(s, rhs)) throw SolverError("rank-deficient rig Jacobian");
  return s;
}

KKTSolution solve_kkt(const KKTSystem& sys) {
  if (sys.rhs.size() != sys.Q.rows()) throw InvalidArgument("KKT right-hand side has the wrong length");
  return KktFactorization(sys.Q, sys.C, sys.regularization).solve(sys.rhs);
}

Eigen::MatrixXd null_space_basis(const Eigen::MatrixXd& C) {
  const auto n = C.cols();
  if (C.rows() == 0) return Eigen::MatrixXd::Identity(n, n);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(C.transpose());
  const auto r = qr.rank();
  const Eigen::MatrixXd Qfull = qr.householderQ();
  return Qfull.rightCols(n - r);
}

Eigen::VectorXd null_space_solve(const KKTSystem& sys) {
  const auto n = sys.Q.rows();
  check_symmetric(sys.Q);
  if (sys.rhs.size() != n) throw InvalidArgument("KKT right-hand side has the wrong length");
  if (sys.C.rows() > 0 && sys.C.cols() != n) throw InvalidArgument("C does not match Q");
  const Eigen::MatrixXd N = sys.C.rows() > 0 ? null_space_basis(sys.C) : Eigen::MatrixXd::Identity(n, n);
  if (N.cols() == 0) return Eigen::VectorXd::Zero(n);
  const Eigen::MatrixXd QN = sys.Q * N;
  const Eigen::MatrixXd A = N.transpose() * QN;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw SolverError("reduced system could not be factorized");
  const Eigen::VectorXd y = ldlt.solve(N.transpose() * sys.rhs);
  return N * y;
}

ConstraintProjector::ConstraintProjector(const Eigen::MatrixXd& C) {
  const auto n = C.cols();
  if (C.rows() == 0) {
    Y_.resize(n, 0);
    return;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(C.transpose());
  const auto r = qr.rank();
  Y_ = qr.householderQ() * Eigen::MatrixXd::Identity(n, r);
}

Eigen::VectorXd ConstraintProjector::project(const Eigen::VectorXd& v) const {
  if (Y_.cols() == 0) return v;
  return v - Y_ * (Y_.transpose() * v);
}

Eigen::MatrixXd psd_project(const Eigen::MatrixXd& block) {
  if (block.rows() != block.cols()) throw InvalidArgument("psd_project needs a square block");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(block);
  if (eig.info() != Eigen::Success) throw SolverError("element Hessian eigendecomposition failed");
  const Eigen::VectorXd& lam = eig.eigenvalues();
  if (lam.size() == 0) return block;
  const double floor = 1e-10 * std::max(lam.cwiseAbs().maxCoeff(), 1.0);
  if (lam.minCoeff() >= floor) return block;
  const Eigen::VectorXd clamped = lam.cwiseMax(floor);
  const Eigen::MatrixXd& V = eig.eigenvectors();
  const Eigen::MatrixXd H = V * clamped.asDiagonal() * V.transpose();
  return 0.5 * (H + H.transpose());
}

std::vector<ElementBlock> psd_project(std::vector<ElementBlock> blocks) {
  for (auto& b : blocks) b.hessian = psd_project(b.hessian);
  return blocks;
}

LineSearchResult armijo_search(const std::function<double(const Eigen::VectorXd&)>& E, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& dx, double slope, const ArmijoParams& params,
                               double energy_at_x) {
  if (!(params.c1 > 0.0 && params.c1 < 1.0)) throw InvalidArgument("Armijo c1 must lie in (0, 1)");
  if (!(params.shrink > 0.0 && params.shrink < 1.0)) throw InvalidArgument("line-search shrink must lie in (0, 1)");
  if (params.max_backtracks < 1) throw InvalidArgument("line search needs at least one trial");
  LineSearchResult out;
  const double e0 = std::isnan(energy_at_x) ? E(x) : energy_at_x;
  out.energy = e0;
  if (!std::isfinite(e0) || !(slope < 0.0)) {
    out.failed = true;
    return out;
  }
  bool any_finite = false;
  double s = 1.0;
  for (int k = 0; k < params.max_backtracks; ++k, s *= params.shrink) {
    ++out.trials;
    const double e = E(x + s * dx);
    if (!std::isfinite(e)) continue;
    any_finite = true;
    if (e <= e0 + params.c1 * s * slope) {
      out.step = s;
      out.energy = e;
      return out;
    }
  }
  out.failed = true;
  out.all_infinite = !any_finite;
  return out;
}

}  // namespace compdyn
