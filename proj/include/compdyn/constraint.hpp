#pragma once

// The linear orthogonality constraint C u_c = 0 with C = J' M D, the
// momentum-leak diagonal D, and the surface-only variant.

#include <Eigen/Core>

#include "compdyn/mesh.hpp"
#include "compdyn/rig.hpp"

namespace compdyn {

// Diagonal of D, one entry per dof (the per-vertex field replicated per
// coordinate). Entries lie in [0, 1].
struct MomentumLeak {
  Eigen::VectorXd d;

  static MomentumLeak identity(Eigen::Index dof_count);
  static MomentumLeak constant(Eigen::Index dof_count, double value);
  bool is_identity() const;
};

enum class LeakMode { Identity, Poisson, Constant };

struct LeakSettings {
  LeakMode mode = LeakMode::Identity;
  // Poisson: value d takes at the deepest interior point (boundary stays 1).
  // Constant: the constant itself.
  double value = 0.0;
};

// Poisson mode: phi solves -L phi = mass on the interior with phi = 0 on the
// boundary, and d = 1 - (1 - value) * phi / max(phi), clamped to [0, 1]. A
// mesh without interior vertices gets d = 1.
MomentumLeak build_momentum_leak(const Mesh& mesh, const LeakSettings& settings);

struct ConstraintMatrix {
  Eigen::MatrixXd C;       // m x dof_count
  Eigen::VectorXd lambda;  // multipliers from the last solve using C
};

ConstraintMatrix assemble_constraint(const RigJacobian& jacobian, const LumpedMassMatrix& M,
                                     const MomentumLeak& D);

// Surface points embedded in the volume mesh by barycentric interpolation.
struct EmbeddedSurface {
  SparseMatrix S;         // (dim * s) x (dim * n), coordinate-major on both sides
  Eigen::VectorXd M_sur;  // dim * s lumped surface mass
};

// points: s x dim; facets: segments (2D) or triangles (3D) over points.
// Every point must lie inside (or within 1e-9 relative of) some element.
EmbeddedSurface embed_surface(const Mesh& mesh, const Eigen::MatrixXd& points,
                              const Eigen::MatrixXi& facets, double density);

enum class SurfaceMassMode {
  SurfaceMass,  // C = J_sur' M_sur S
  VolumeMass,   // C = J_sur' S M
};

// J_sur: (dim * s) x m. D (optional, volume dofs) multiplies u_c first. M is
// required for VolumeMass.
ConstraintMatrix build_surface_constraint(const EmbeddedSurface& surface, const Eigen::MatrixXd& J_sur,
                                          const MomentumLeak* D = nullptr,
                                          SurfaceMassMode mode = SurfaceMassMode::SurfaceMass,
                                          const LumpedMassMatrix* M = nullptr);

}  // namespace compdyn
