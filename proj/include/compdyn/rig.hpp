#pragma once

// Rigs map a small parameter vector p (length m) to mesh displacements
// u_r(p) (length dim * n, coordinate-major).
//
// Parameter layouts:
//   affine / LBS  each bone transform T = [A | t] (d x (d+1)) stored row-major,
//                 bone j occupying p[j*d*(d+1) .. (j+1)*d*(d+1))
//   cage          posed cage vertices, all x first, then all y (, then z)
//   blendshape    one weight per sculpted pose

#include <Eigen/Core>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "compdyn/mesh.hpp"

namespace compdyn {

enum class RigKind { Affine, Lbs, Cage, Blendshape, External };

const char* rig_kind_name(RigKind kind);

struct RigJacobian {
  Eigen::MatrixXd J;     // dof_count x parameter_count
  Eigen::VectorXd pose;  // where it was evaluated
};

class Rig {
 public:
  virtual ~Rig() = default;

  virtual RigKind kind() const = 0;
  virtual Eigen::Index parameter_count() const = 0;
  virtual Eigen::Index dof_count() const = 0;
  virtual Eigen::VectorXd eval(const Eigen::VectorXd& p) const = 0;
  virtual RigJacobian jacobian(const Eigen::VectorXd& p) const = 0;
  virtual bool is_linear() const = 0;
  // Pose that reproduces the rest shape, when the rig has one.
  virtual std::optional<Eigen::VectorXd> rest_pose() const { return std::nullopt; }

  // Non-fatal construction diagnostics (e.g. weights not summing to one).
  const std::vector<std::string>& warnings() const { return warnings_; }

 protected:
  void check_pose(const Eigen::VectorXd& p) const;
  std::vector<std::string> warnings_;
};

// u_r(p) = J p + b with constant J and b.
class LinearRig final : public Rig {
 public:
  LinearRig(RigKind kind, Eigen::MatrixXd J, Eigen::VectorXd offset,
            std::optional<Eigen::VectorXd> rest = std::nullopt,
            std::vector<std::string> warnings = {});

  RigKind kind() const override { return kind_; }
  Eigen::Index parameter_count() const override { return J_.cols(); }
  Eigen::Index dof_count() const override { return J_.rows(); }
  Eigen::VectorXd eval(const Eigen::VectorXd& p) const override;
  RigJacobian jacobian(const Eigen::VectorXd& p) const override;
  bool is_linear() const override { return true; }
  std::optional<Eigen::VectorXd> rest_pose() const override { return rest_; }

  const Eigen::MatrixXd& matrix() const { return J_; }
  const Eigen::VectorXd& offset() const { return offset_; }

 private:
  RigKind kind_;
  Eigen::MatrixXd J_;
  Eigen::VectorXd offset_;
  std::optional<Eigen::VectorXd> rest_;
};

// Black-box rig. Its Jacobian is always the central-difference estimate.
class ExternalRig final : public Rig {
 public:
  using Evaluator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

  ExternalRig(Eigen::Index parameter_count, Eigen::Index dof_count, Evaluator evaluator,
              double fd_step = 1e-6, std::optional<Eigen::VectorXd> rest = std::nullopt);

  RigKind kind() const override { return RigKind::External; }
  Eigen::Index parameter_count() const override { return m_; }
  Eigen::Index dof_count() const override { return dn_; }
  Eigen::VectorXd eval(const Eigen::VectorXd& p) const override;
  RigJacobian jacobian(const Eigen::VectorXd& p) const override;
  bool is_linear() const override { return false; }
  std::optional<Eigen::VectorXd> rest_pose() const override { return rest_; }

 private:
  Eigen::Index m_;
  Eigen::Index dn_;
  Evaluator evaluator_;
  double fd_step_;
  std::optional<Eigen::VectorXd> rest_;
};

std::unique_ptr<LinearRig> affine_rig(const Mesh& mesh);
// weights: n x k. Rows that do not sum to one produce a warning.
std::unique_ptr<LinearRig> lbs_rig(const Mesh& mesh, const Eigen::MatrixXd& weights);
// cage_weights: n x k generalized barycentric coordinates; rest_cage: k x dim.
std::unique_ptr<LinearRig> cage_rig(const Mesh& mesh, const Eigen::MatrixXd& cage_weights,
                                    const Eigen::MatrixXd& rest_cage);
// rest and every pose: n x dim vertex positions.
std::unique_ptr<LinearRig> blendshape_rig(const Eigen::MatrixXd& rest,
                                          const std::vector<Eigen::MatrixXd>& poses);

// Runs `command <pose_file> <output_file>` for every evaluation. The pose file
// holds m numbers, one per line; the command must write dof_count numbers.
std::unique_ptr<ExternalRig> command_rig(std::string command, Eigen::Index parameter_count,
                                         Eigen::Index dof_count, double fd_step = 1e-6);

// Column j = (u_r(p + eps e_j) - u_r(p - eps e_j)) / (2 eps).
RigJacobian fd_jacobian(const Rig& rig, const Eigen::VectorXd& p, double eps);

struct RecoveredPose {
  Eigen::VectorXd p;
  bool rank_deficient = false;  // least-norm solution was used
};

// Closest rig pose to u in the M-norm: argmin_q ||J q + b - u||_M.
RecoveredPose recover_rig_params(const Rig& rig, const LumpedMassMatrix& M, const Eigen::VectorXd& u);

// Dirichlet harmonic interpolation with the cotangent Laplacian. Factorizes
// the interior block once; extend() can then be called for many right-hand
// sides.
class HarmonicExtension {
 public:
  explicit HarmonicExtension(const Mesh& mesh);
  ~HarmonicExtension();
  HarmonicExtension(HarmonicExtension&&) noexcept;
  HarmonicExtension& operator=(HarmonicExtension&&) noexcept;

  const std::vector<int>& boundary() const { return boundary_; }
  const std::vector<int>& interior() const { return interior_; }
  // boundary_values: |boundary| x c, rows in boundary() order. Returns n x c.
  Eigen::MatrixXd extend(const Eigen::MatrixXd& boundary_values) const;

 private:
  struct Impl;
  Eigen::Index n_ = 0;
  std::vector<int> boundary_;
  std::vector<int> interior_;
  std::unique_ptr<Impl> impl_;
};

Eigen::MatrixXd harmonic_extension(const Mesh& mesh, const Eigen::MatrixXd& boundary_values);

// Volume rig driven by a rig over the mesh boundary vertices (dofs ordered
// coordinate-major over boundary_vertices(mesh)); interior displacements are
// the harmonic extension.
class HarmonicallyExtendedRig final : public Rig {
 public:
  HarmonicallyExtendedRig(const Mesh& mesh, std::shared_ptr<const Rig> surface_rig);

  RigKind kind() const override { return surface_->kind(); }
  Eigen::Index parameter_count() const override { return surface_->parameter_count(); }
  Eigen::Index dof_count() const override { return n_ * dim_; }
  Eigen::VectorXd eval(const Eigen::VectorXd& p) const override;
  RigJacobian jacobian(const Eigen::VectorXd& p) const override;
  bool is_linear() const override { return surface_->is_linear(); }
  std::optional<Eigen::VectorXd> rest_pose() const override { return surface_->rest_pose(); }

 private:
  Eigen::MatrixXd extend_columns(const Eigen::MatrixXd& surface_columns) const;

  Eigen::Index n_;
  int dim_;
  HarmonicExtension extension_;
  std::shared_ptr<const Rig> surface_;
};

}  // namespace compdyn
