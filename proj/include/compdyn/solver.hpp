#pragma once

// Equality-constrained quadratic solves
//
//   [ Q  C' ] [ x      ]   [ rhs ]
//   [ C  0  ] [ lambda ] = [ 0   ]
//
// plus the QR null-space reference solver, per-element PSD projection and a
// backtracking Armijo line search.

#include <Eigen/Core>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "compdyn/elastic.hpp"
#include "compdyn/mesh.hpp"

namespace compdyn {

struct KKTSystem {
  SparseMatrix Q;        // n x n symmetric
  Eigen::MatrixXd C;     // m x n (m may be 0)
  Eigen::VectorXd rhs;   // n
  // Used by the fallback path on the (2,2) block; 0 means 1e-10 * ||Q||_inf.
  double regularization = 0.0;
};

struct KKTSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;
  bool regularized = false;       // the -eps I fallback was needed
  double stationarity_residual = 0.0;  // ||Q x + C' lambda - rhs||_inf
  double constraint_residual = 0.0;    // ||C x||_inf
};

// Factorization of one bordered matrix, reusable for many right-hand sides.
// Constraint rows are equilibrated before factorization and all-zero rows are
// dropped (their multipliers are reported as 0). Rank-deficient C, or a
// factorization whose residuals are unacceptable, triggers one retry with
// -eps I in the (2,2) block; if that also fails the constructor or solve()
// throws SolverError("rank-deficient rig Jacobian").
class KktFactorization {
 public:
  KktFactorization(const SparseMatrix& Q, const Eigen::MatrixXd& C, double regularization = 0.0);
  ~KktFactorization();
  KktFactorization(KktFactorization&&) noexcept;
  KktFactorization& operator=(KktFactorization&&) noexcept;

  KKTSolution solve(const Eigen::VectorXd& rhs) const;

  Eigen::Index size() const { return n_; }
  Eigen::Index constraint_count() const { return m_; }
  bool regularized() const;

 private:
  struct Impl;
  Eigen::Index n_ = 0;
  Eigen::Index m_ = 0;
  std::unique_ptr<Impl> impl_;
};

KKTSolution solve_kkt(const KKTSystem& sys);

// Orthonormal basis of ker(C) from a column-pivoted QR of C'.
Eigen::MatrixXd null_space_basis(const Eigen::MatrixXd& C);

// Reference solve: x = N y with (N'QN) y = N' rhs.
Eigen::VectorXd null_space_solve(const KKTSystem& sys);

// Euclidean projector onto ker(C), P = I - Y Y' with Y an orthonormal basis
// of range(C').
class ConstraintProjector {
 public:
  explicit ConstraintProjector(const Eigen::MatrixXd& C);
  Eigen::VectorXd project(const Eigen::VectorXd& v) const;
  Eigen::Index rank() const { return Y_.cols(); }

 private:
  Eigen::MatrixXd Y_;
};

// Eigenvalues clamped to >= 1e-10 * max(max |eig|, 1). Blocks that are
// already above the floor are returned unchanged.
Eigen::MatrixXd psd_project(const Eigen::MatrixXd& block);
std::vector<ElementBlock> psd_project(std::vector<ElementBlock> blocks);

struct ArmijoParams {
  double c1 = 1e-4;
  double shrink = 0.5;
  int max_backtracks = 30;  // trial steps 1, shrink, ..., shrink^(max_backtracks-1)
};

struct LineSearchResult {
  double step = 0.0;
  double energy = 0.0;   // E at the accepted point (E(x) when failed)
  int trials = 0;
  bool failed = false;
  bool all_infinite = false;  // every trial produced a non-finite energy
};

// Largest s in {1, shrink, shrink^2, ...} with E(x + s dx) <= E(x) + c1 s slope.
// Non-finite trial energies count as rejections. slope must be negative.
LineSearchResult armijo_search(const std::function<double(const Eigen::VectorXd&)>& E, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& dx, double slope, const ArmijoParams& params = {},
                               double energy_at_x = std::numeric_limits<double>::quiet_NaN());

}  // namespace compdyn
