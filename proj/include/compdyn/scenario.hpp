#pragma once

// Scenario files: one JSON document naming the mesh, material, rig, animation,
// time-stepping settings, momentum-leak mode and external forces. Relative
// paths are resolved against the directory holding the config.
//
// {
//   "name": "amoeba",
//   "mesh": {"obj": "disc.obj"}            or {"node": "bar.node", "ele": "bar.ele"},
//   "density": 1.0,
//   "model": {"kind": "linear" | "neohookean" | "arap" | "mass_spring",
//             "youngs": 1e4, "poisson": 0.3, "stiffness": 10.0},
//   "rig": {"kind": "affine" | "lbs" | "cage" | "blendshape" | "external",
//           "weights": "w.dmat", "rest_cage": "cage.obj" or [[x, y], ...],
//           "poses": ["a.obj", ...], "command": "...", "parameters": 6},
//   "animation": "anim.json",               // {"m": 6, "frames": [{"t": 0, "p": [...]}, ...]}
//   "sim": {"h": 0.0166667, "newton_tol": 1e-6, "newton_max_iters": 50, "armijo_c1": 1e-4,
//           "shrink": 0.5, "max_backtracks": 30, "cancellation": true, "substeps": 1,
//           "local_global_iters": 20, "local_global_rel_tol": 0,
//           "solver": "auto" | "linear" | "newton" | "local_global"},
//   "momentum_leak": {"mode": "identity" | "poisson" | "constant", "value": 0.0},
//   "forces": [{"kind": "gravity", "g": [0, -9.8]},
//              {"kind": "wind", "direction": [1, 0], "amplitude": 2, "frequency": 1, "phase": 0},
//              {"kind": "ground", "normal": [0, 1], "offset": -1, "stiffness": 1e4}],
//   "output": "out"
// }

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "compdyn/constraint.hpp"
#include "compdyn/dynamics.hpp"
#include "compdyn/elastic.hpp"
#include "compdyn/mesh.hpp"
#include "compdyn/rig.hpp"
#include "compdyn/solver.hpp"

namespace compdyn {

struct Scenario {
  std::string name;
  std::filesystem::path config_path;
  std::unique_ptr<Mesh> mesh;
  LumpedMassMatrix mass;
  std::unique_ptr<ElasticModel> model;
  std::unique_ptr<Rig> rig;
  Animation animation;
  SimConfig sim;
  LeakSettings leak;
  MomentumLeak D;
  std::vector<ExternalForce> forces;
  std::filesystem::path output_dir;

  // Faces written to OBJ frames: the triangles in 2D, boundary triangles in 3D.
  Eigen::MatrixXi output_faces() const;
};

// Throws ParseError for malformed or missing files, InvalidArgument for
// values that violate a precondition.
Scenario load_scenario(const std::filesystem::path& config_path);
Animation load_animation(const std::filesystem::path& path);

std::string frame_filename(std::size_t frame);

// Runs the scenario, writing frame_NNNNN.obj files and report.json to out_dir.
SimulationResult run_scenario(const Scenario& scenario, const std::filesystem::path& out_dir,
                              const SimulateOptions& options = {});
void write_report(const std::filesystem::path& path, const Scenario& scenario, const std::vector<FrameRecord>& records);

// ---- diagnostics shared by the CLI and the tests -----------------------------

struct DerivativeCheck {
  double gradient_error = 0.0;       // max over states of ||g_fd - g||_inf / ||g||_inf
  double hessian_error = 0.0;        // max over states of ||Hv_fd - Hv||_inf / ||Hv||_inf
  Eigen::Index worst_gradient_entry = -1;
  Eigen::Index worst_hessian_entry = -1;
  int worst_gradient_state = -1;
  int worst_hessian_state = -1;
};

// Central differences at `states` random displacements of amplitude
// `amplitude` (shrunk until the energy is finite). gradient_hook, when set,
// may alter the analytic gradient before comparison.
DerivativeCheck check_derivatives(const ElasticModel& model, double amplitude, int states, std::uint64_t seed,
                                  const std::function<void(Eigen::VectorXd&)>& gradient_hook = {});

// ||x - x_ref||_inf relative to max(||x_ref||_inf, ||rhs||_inf / ||Q||_inf).
double kkt_discrepancy(const KKTSystem& sys, const Eigen::VectorXd& x, const Eigen::VectorXd& x_ref);

// Scaled orthogonality bound used for audits: 1e-8 * max(1, ||M||_inf ||u_c||_inf).
double orthogonality_bound(const LumpedMassMatrix& M, const Eigen::VectorXd& uc);

}  // namespace compdyn
