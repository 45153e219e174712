#include <cmath>
#include <numbers>

#include "compdyn/dynamics.hpp"
#include "compdyn/error.hpp"

namespace compdyn {
namespace {

Eigen::VectorXd unit(const Eigen::VectorXd& v, int dim, const char* what) {
  if (v.size() != dim) throw InvalidArgument(std::string(what) + " must have " + std::to_string(dim) + " components");
  if (!v.allFinite()) throw InvalidArgument(std::string(what) + " is not finite");
  const double len = v.norm();
  if (!(len > 0.0)) throw InvalidArgument(std::string(what) + " must be non-zero");
  return v / len;
}

// M times the same acceleration at every vertex.
Eigen::VectorXd mass_times(const LumpedMassMatrix& M, const Eigen::VectorXd& accel) {
  const auto n = M.size() / accel.size();
  Eigen::VectorXd f(M.size());
  for (Eigen::Index c = 0; c < accel.size(); ++c) f.segment(c * n, n) = M.diag.segment(c * n, n) * accel[c];
  return f;
}

}  // namespace

ExternalForce external_force(ForceKind kind, const ForceParams& params, const Mesh& mesh, const LumpedMassMatrix& M) {
  const int dim = mesh.dim();
  if (M.size() != mesh.dof_count()) throw InvalidArgument("mass matrix does not match the mesh");
  ExternalForce out;
  out.kind = kind;
  switch (kind) {
    case ForceKind::Gravity: {
      if (params.vector.size() != dim || !params.vector.allFinite())
        throw InvalidArgument("gravity needs a finite vector with " + std::to_string(dim) + " components");
      const Eigen::VectorXd f = mass_times(M, params.vector);
      out.eval = [f](double, const Eigen::VectorXd&) { return f; };
      break;
    }
    case ForceKind::Wind: {
      const Eigen::VectorXd dir = unit(params.vector, dim, "wind direction");
      if (!std::isfinite(params.amplitude) || !std::isfinite(params.frequency) || !std::isfinite(params.phase))
        throw InvalidArgument("wind parameters must be finite");
      const Eigen::VectorXd unit_force = mass_times(M, dir);
      const double amp = params.amplitude;
      const double omega = 2.0 * std::numbers::pi * params.frequency;
      const double phase = params.phase;
      out.eval = [unit_force, amp, omega, phase](double t, const Eigen::VectorXd&) {
        return Eigen::VectorXd(amp * std::sin(omega * t + phase) * unit_force);
      };
      break;
    }
    case ForceKind::GroundPenalty: {
      const Eigen::VectorXd normal = unit(params.normal, dim, "ground normal");
      if (!(params.stiffness > 0.0)) throw InvalidArgument("ground penalty stiffness must be positive");
      if (!std::isfinite(params.offset)) throw InvalidArgument("ground offset must be finite");
      const Eigen::VectorXd rest = mesh.rest_vector();
      const auto n = mesh.vertex_count();
      const double k = params.stiffness;
      const double offset = params.offset;
      out.eval = [rest, normal, n, k, offset](double, const Eigen::VectorXd& u) {
        const int d = static_cast<int>(normal.size());
        Eigen::VectorXd f = Eigen::VectorXd::Zero(rest.size());
        for (Eigen::Index i = 0; i < n; ++i) {
          double height = 0.0;
          for (int c = 0; c < d; ++c) height += normal[c] * (rest[c * n + i] + u[c * n + i]);
          const double depth = offset - height;
          if (depth > 0.0)
            for (int c = 0; c < d; ++c) f[c * n + i] = k * depth * normal[c];
        }
        return f;
      };
      break;
    }
  }
  return out;
}

Eigen::VectorXd total_force(const std::vector<ExternalForce>& forces, double t, const Eigen::VectorXd& u,
                            Eigen::Index dof_count) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(dof_count);
  for (const auto& force : forces) {
    const Eigen::VectorXd fi = force.eval(t, u);
    if (fi.size() != dof_count) throw InvalidArgument("external force returned the wrong length");
    f += fi;
  }
  return f;
}

}  // namespace compdyn
