#pragma once

// Elastic potentials over displacements u (coordinate-major, length dim * n).
// Every model satisfies energy(0) == 0.

#include <Eigen/Core>
#include <memory>
#include <vector>

#include "compdyn/mesh.hpp"

namespace compdyn {

enum class ModelKind { Linear, NeoHookean, Arap, MassSpring };

const char* model_kind_name(ModelKind kind);

// One element's (or spring's) dense Hessian contribution and the global dofs
// its rows/columns map to.
struct ElementBlock {
  std::vector<Eigen::Index> dofs;
  Eigen::MatrixXd hessian;
};

SparseMatrix assemble_blocks(const std::vector<ElementBlock>& blocks, Eigen::Index dof_count);

// Per-element work is split over this many threads; results are reduced in
// element order so the output does not depend on the count. Default 1.
void set_assembly_threads(int threads);
int assembly_threads();

class LocalGlobalModel;

class ElasticModel {
 public:
  virtual ~ElasticModel() = default;

  virtual ModelKind kind() const = 0;
  virtual int dim() const = 0;
  virtual Eigen::Index dof_count() const = 0;

  // +infinity when the state is outside the model's domain (inverted element).
  virtual double energy(const Eigen::VectorXd& u) const = 0;
  virtual Eigen::VectorXd gradient(const Eigen::VectorXd& u) const = 0;
  virtual std::vector<ElementBlock> element_hessians(const Eigen::VectorXd& u) const = 0;
  virtual SparseMatrix hessian(const Eigen::VectorXd& u) const;

  // Linear elasticity has a constant PSD Hessian; everything else may need
  // projection before it is used as a Newton model.
  virtual bool hessian_may_be_indefinite() const { return true; }
  virtual const LocalGlobalModel* local_global() const { return nullptr; }
};

// Auxiliary ("local") variables: one d x 1 target vector per spring, or one
// d x d rotation per element.
using LocalVariables = std::vector<Eigen::MatrixXd>;

// Models that admit an alternating solver. For fixed local variables the
// potential becomes the quadratic  1/2 u'Au + u'c(aux) + k(aux)  in u, and it
// equals the true potential when aux = local_step(u).
class LocalGlobalModel {
 public:
  virtual ~LocalGlobalModel() = default;

  virtual LocalVariables local_step(const Eigen::VectorXd& u,
                                    const LocalVariables* previous = nullptr) const = 0;
  virtual const SparseMatrix& global_matrix() const = 0;
  virtual Eigen::VectorXd global_linear_term(const LocalVariables& aux) const = 0;
  virtual double global_constant(const LocalVariables& aux) const = 0;

  double surrogate_energy(const Eigen::VectorXd& u, const LocalVariables& aux) const;
};

struct Material {
  double youngs = 0.0;
  double poisson = 0.0;
  // Plane strain in 2D.
  double lame_lambda() const { return youngs * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson)); }
  double lame_mu() const { return youngs / (2.0 * (1.0 + poisson)); }
};

// Rest data shared by the element-based models.
struct ElementGeometry {
  int dim = 0;
  Eigen::Index vertex_count = 0;
  Eigen::MatrixXi elements;
  Eigen::VectorXd measures;
  std::vector<Eigen::MatrixXd> grads;  // (dim+1) x dim per element

  explicit ElementGeometry(const Mesh& mesh);
  Eigen::Index global_dof(Eigen::Index element, int corner, int coord) const {
    return coord * vertex_count + elements(element, corner);
  }
};

class LinearModel final : public ElasticModel {
 public:
  LinearModel(const Mesh& mesh, Material material);

  ModelKind kind() const override { return ModelKind::Linear; }
  int dim() const override { return geometry_.dim; }
  Eigen::Index dof_count() const override { return stiffness_.rows(); }
  double energy(const Eigen::VectorXd& u) const override;
  Eigen::VectorXd gradient(const Eigen::VectorXd& u) const override;
  std::vector<ElementBlock> element_hessians(const Eigen::VectorXd& u) const override;
  SparseMatrix hessian(const Eigen::VectorXd&) const override { return stiffness_; }
  bool hessian_may_be_indefinite() const override { return false; }

  const SparseMatrix& stiffness() const { return stiffness_; }
  const Material& material() const { return material_; }

 private:
  ElementGeometry geometry_;
  Material material_;
  std::vector<ElementBlock> blocks_;
  SparseMatrix stiffness_;
};

// psi(F) = mu/2 (tr(F'F) - d) - mu log J + lambda/2 (log J)^2
class NeoHookeanModel final : public ElasticModel {
 public:
  NeoHookeanModel(const Mesh& mesh, Material material);

  ModelKind kind() const override { return ModelKind::NeoHookean; }
  int dim() const override { return geometry_.dim; }
  Eigen::Index dof_count() const override { return geometry_.vertex_count * geometry_.dim; }
  double energy(const Eigen::VectorXd& u) const override;
  // Throws SolverError on an inverted element.
  Eigen::VectorXd gradient(const Eigen::VectorXd& u) const override;
  std::vector<ElementBlock> element_hessians(const Eigen::VectorXd& u) const override;

  const Material& material() const { return material_; }

 private:
  ElementGeometry geometry_;
  Material material_;
};

// Element ARAP: sum_e stiffness * |e| * ||F_e - R(F_e)||_F^2 with R the polar
// rotation (reflections corrected). hessian() is the exact Hessian, including
// the derivative of the rotation; the local-global form freezes R.
class ArapModel final : public ElasticModel, public LocalGlobalModel {
 public:
  ArapModel(const Mesh& mesh, double stiffness);

  ModelKind kind() const override { return ModelKind::Arap; }
  int dim() const override { return geometry_.dim; }
  Eigen::Index dof_count() const override { return geometry_.vertex_count * geometry_.dim; }
  double energy(const Eigen::VectorXd& u) const override;
  Eigen::VectorXd gradient(const Eigen::VectorXd& u) const override;
  std::vector<ElementBlock> element_hessians(const Eigen::VectorXd& u) const override;
  const LocalGlobalModel* local_global() const override { return this; }

  LocalVariables local_step(const Eigen::VectorXd& u, const LocalVariables* previous = nullptr) const override;
  const SparseMatrix& global_matrix() const override { return global_; }
  Eigen::VectorXd global_linear_term(const LocalVariables& rotations) const override;
  double global_constant(const LocalVariables& rotations) const override;

  double stiffness() const { return stiffness_; }

 private:
  ElementGeometry geometry_;
  double stiffness_;
  SparseMatrix global_;
};

struct Spring {
  int i = 0;
  int j = 0;
  double rest_length = 0.0;
  double stiffness = 0.0;
};
using SpringSet = std::vector<Spring>;

// One spring per unique mesh edge at its rest length.
SpringSet edge_springs(const Mesh& mesh, double stiffness);

// sum k/2 (|x_i - x_j| - r)^2 over springs, x = rest + u.
class MassSpringModel final : public ElasticModel, public LocalGlobalModel {
 public:
  // rest: n x dim rest positions the springs connect.
  MassSpringModel(Eigen::MatrixXd rest, SpringSet springs);

  ModelKind kind() const override { return ModelKind::MassSpring; }
  int dim() const override { return static_cast<int>(rest_.cols()); }
  Eigen::Index dof_count() const override { return rest_.size(); }
  double energy(const Eigen::VectorXd& u) const override;
  Eigen::VectorXd gradient(const Eigen::VectorXd& u) const override;
  std::vector<ElementBlock> element_hessians(const Eigen::VectorXd& u) const override;
  const LocalGlobalModel* local_global() const override { return this; }

  // Per-spring target r * (x_i - x_j) / |x_i - x_j|. Coincident endpoints keep
  // the previous target (or the rest direction when there is none).
  LocalVariables local_step(const Eigen::VectorXd& u, const LocalVariables* previous = nullptr) const override;
  const SparseMatrix& global_matrix() const override { return global_; }
  Eigen::VectorXd global_linear_term(const LocalVariables& targets) const override;
  double global_constant(const LocalVariables& targets) const override;

  const SpringSet& springs() const { return springs_; }

 private:
  Eigen::VectorXd spring_vector(const Eigen::VectorXd& u, const Spring& s) const;

  Eigen::MatrixXd rest_;
  SpringSet springs_;
  SparseMatrix global_;
};

std::unique_ptr<LinearModel> linear_model(const Mesh& mesh, double youngs, double poisson);
std::unique_ptr<NeoHookeanModel> neohookean_model(const Mesh& mesh, double youngs, double poisson);
std::unique_ptr<ArapModel> arap_model(const Mesh& mesh, double stiffness);
std::unique_ptr<MassSpringModel> mass_spring_model(const Mesh& mesh, double stiffness);
std::unique_ptr<MassSpringModel> mass_spring_model(const Eigen::MatrixXd& rest, SpringSet springs);

// Polar rotation of a square matrix with reflection correction (det R = +1).
Eigen::MatrixXd polar_rotation(const Eigen::MatrixXd& F);

}  // namespace compdyn
