#pragma once

// Time stepping for secondary motion on rigged meshes. The simulated displacement is split as
// u = u_r + u_c: u_r comes from the rig, u_c is found by minimizing the
// implicit-Euler objective
//
//   E_t(u_c) = Phi_eff + 1/(2h^2) ||u_r + u_c - y||_M^2 - (u_r + u_c)' f,
//   y = u_prev + h udot_prev,
//
// subject to C u_c = 0 with C = J' M D. With rig-force cancellation enabled,
// Phi_eff = Phi(u_r + u_c) - u_c' grad Phi(u_r), so that u_c = 0 is stationary
// whenever the rig is static and unforced; without it Phi_eff = Phi(u_r + u_c).

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "compdyn/constraint.hpp"
#include "compdyn/elastic.hpp"
#include "compdyn/mesh.hpp"
#include "compdyn/rig.hpp"
#include "compdyn/solver.hpp"

namespace compdyn {

// ---- external forces ----------------------------------------------------------

enum class ForceKind { Gravity, Wind, GroundPenalty };

struct ForceParams {
  Eigen::VectorXd vector;     // gravity: acceleration g; wind: direction (normalized internally)
  double amplitude = 0.0;     // wind acceleration amplitude
  double frequency = 0.0;     // wind, Hz
  double phase = 0.0;         // wind, radians
  Eigen::VectorXd normal;     // ground: plane normal (normalized internally)
  double offset = 0.0;        // ground: plane is n . x = offset
  double stiffness = 0.0;     // ground penalty stiffness (> 0)
};

struct ExternalForce {
  ForceKind kind = ForceKind::Gravity;
  // (t, u) -> f, length dof_count.
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> eval;
};

// gravity:  f = M g
// wind:     f(t) = M (amplitude sin(2 pi frequency t + phase) direction)
// ground:   f_i = k max(0, offset - n . x_i) n, with x = rest + u
ExternalForce external_force(ForceKind kind, const ForceParams& params, const Mesh& mesh,
                             const LumpedMassMatrix& M);

Eigen::VectorXd total_force(const std::vector<ExternalForce>& forces, double t, const Eigen::VectorXd& u,
                            Eigen::Index dof_count);

// ---- configuration and state -------------------------------------------------

enum class SolverChoice { Auto, Linear, Newton, LocalGlobal };

struct SimConfig {
  double h = 1.0 / 60.0;
  // Newton stops when ||P grad E_t||_2 <= newton_tol * sqrt(dof_count), P the
  // projector onto ker C.
  double newton_tol = 1e-6;
  int newton_max_iters = 50;
  ArmijoParams line_search;
  bool cancellation = true;
  int substeps = 1;
  int local_global_iters = 20;
  // Stop local-global early when the objective decreases by less than this
  // fraction; 0 runs the full iteration count.
  double local_global_rel_tol = 0.0;
  SolverChoice solver = SolverChoice::Auto;

  void validate() const;  // throws InvalidArgument
};

struct SimState {
  Eigen::VectorXd u_prev;     // u at t - h
  Eigen::VectorXd udot_prev;  // velocity at t - h
  Eigen::VectorXd uc_prev;    // complementary displacement at t - h
  double t = 0.0;

  // Rest history: u_prev = u_r(p0), zero velocity, zero u_c.
  static SimState initial(const Eigen::VectorXd& ur0, double t0 = 0.0);
};

struct StepResult {
  SimState state;             // history after the step
  Eigen::VectorXd u;          // u_r + u_c
  Eigen::VectorXd ur;
  Eigen::VectorXd uc;
  Eigen::VectorXd lambda;
  int iterations = 0;         // Newton iterations / global solves (1 for the linear step)
  bool flagged = false;       // line search gave up or iteration cap reached
  std::string note;
  double energy = 0.0;        // E_t at u_c
  double orthogonality_residual = 0.0;  // ||C u_c||_inf
  std::vector<double> objective_trace;  // E_t after every Newton / global iteration, starting at the initial guess
};

// Called for every KKT solve a step performs.
using KktObserver = std::function<void(const KKTSystem&, const KKTSolution&)>;

// Cached bordered factorization for steps whose KKT matrix does not change
// (constant rig Jacobian, constant D, fixed h, quadratic global matrix).
struct FactorizationCache {
  std::unique_ptr<KktFactorization> factorization;
  double h = 0.0;
  bool enabled = false;  // set by the caller only when C is known to be constant
};

struct StepOptions {
  KktObserver observer;
  FactorizationCache* cache = nullptr;
};

// Evaluates E_t for one step; shared by the steppers and tests.
class StepObjective {
 public:
  StepObjective(const ElasticModel& model, const LumpedMassMatrix& M, const SimState& state, Eigen::VectorXd ur,
                Eigen::VectorXd f, double h, bool cancellation);

  double energy(const Eigen::VectorXd& uc) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& uc) const;

  const Eigen::VectorXd& ur() const { return ur_; }
  const Eigen::VectorXd& rig_gradient() const { return g_r_; }  // grad Phi(u_r), zero when cancellation is off
  const Eigen::VectorXd& inertia_target() const { return y_; }
  double h() const { return h_; }

 private:
  const ElasticModel& model_;
  const LumpedMassMatrix& M_;
  Eigen::VectorXd ur_, f_, y_, g_r_;
  double h_;
  bool cancellation_;
};

// h is config.h. forces are evaluated once per step at (t + h, u_r + uc_prev).
StepResult step_linear(const SimState& state, const Rig& rig, const Eigen::VectorXd& p, const LinearModel& model,
                       const LumpedMassMatrix& M, ConstraintMatrix& C, const std::vector<ExternalForce>& forces,
                       const SimConfig& config, const StepOptions& options = {});

StepResult step_newton(const SimState& state, const Rig& rig, const Eigen::VectorXd& p, const ElasticModel& model,
                       const LumpedMassMatrix& M, ConstraintMatrix& C, const std::vector<ExternalForce>& forces,
                       const SimConfig& config, const StepOptions& options = {});

StepResult step_local_global(const SimState& state, const Rig& rig, const Eigen::VectorXd& p,
                             const ElasticModel& model, const LumpedMassMatrix& M, ConstraintMatrix& C,
                             const std::vector<ExternalForce>& forces, const SimConfig& config,
                             const StepOptions& options = {});

// ---- animation driving --------------------------------------------------------

struct AnimationFrame {
  double t = 0.0;
  Eigen::VectorXd p;
};

struct Animation {
  Eigen::Index m = 0;
  std::vector<AnimationFrame> frames;

  void validate() const;  // strictly increasing times, every pose of length m
};

struct FrameRecord {
  std::size_t frame = 0;
  double t = 0.0;
  int iterations = 0;
  double orthogonality_residual = 0.0;
  double energy = 0.0;
  double wall_time = 0.0;  // seconds
  bool flagged = false;
  std::string note;
};

struct SimulateOptions {
  KktObserver observer;
  // Receives every output frame as soon as it is computed.
  std::function<void(std::size_t frame, const Eigen::VectorXd& u, const FrameRecord&)> on_frame;
  bool keep_frames = true;
};

struct SimulationResult {
  std::vector<Eigen::VectorXd> frames;  // u_t per animation frame (empty if keep_frames is false)
  std::vector<FrameRecord> records;
  std::vector<ConstraintMatrix> constraints;  // C used for the last substep of each frame
  std::vector<Eigen::VectorXd> complementary;  // u_c per frame
};

// Frame 0 outputs u_r(p0). Each later frame k advances (t_k - t_{k-1}) in
// config.substeps equal steps with linearly interpolated poses. Stepper errors
// are rethrown with the frame index prepended.
SimulationResult simulate(const Mesh& mesh, const Rig& rig, const Animation& animation, const ElasticModel& model,
                          const SimConfig& config, const std::vector<ExternalForce>& forces, const MomentumLeak& D,
                          const LumpedMassMatrix& M, const SimulateOptions& options = {});

}  // namespace compdyn
