#include "compdyn/dynamics.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "compdyn/error.hpp"
#include "compdyn/kernels.hpp"

namespace compdyn {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::span<const double> view(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
std::span<double> view(Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

SparseMatrix plus_mass(const SparseMatrix& A, const LumpedMassMatrix& M, double h) {
  SparseMatrix mh(M.size(), M.size());
  std::vector<Triplet> t;
  t.reserve(M.size());
  for (Eigen::Index i = 0; i < M.size(); ++i) t.emplace_back(i, i, M.diag[i] / (h * h));
  mh.setFromTriplets(t.begin(), t.end());
  SparseMatrix Q = A + mh;
  Q.makeCompressed();
  return Q;
}

void check_step_inputs(const SimState& state, const Rig& rig, const Eigen::VectorXd& p, const ElasticModel& model,
                       const LumpedMassMatrix& M, const ConstraintMatrix& C, const SimConfig& config) {
  config.validate();
  const auto dn = model.dof_count();
  if (rig.dof_count() != dn || M.size() != dn)
    throw InvalidArgument("rig, model and mass matrix disagree on the number of dofs");
  if (p.size() != rig.parameter_count()) throw InvalidArgument("pose length does not match the rig");
  if (state.u_prev.size() != dn || state.udot_prev.size() != dn || state.uc_prev.size() != dn)
    throw InvalidArgument("simulation state does not match the number of dofs");
  if (C.C.cols() != dn && C.C.rows() > 0) throw InvalidArgument("constraint matrix does not match the number of dofs");
}

double constraint_residual(const ConstraintMatrix& C, const Eigen::VectorXd& uc) {
  if (C.C.rows() == 0) return 0.0;
  const Eigen::VectorXd r = C.C * uc;
  return kernels::max_abs(view(r));
}

StepResult finish(const SimState& state, Eigen::VectorXd ur, Eigen::VectorXd uc, const ConstraintMatrix& C,
                  double h) {
  StepResult out;
  out.u.resize(ur.size());
  kernels::axpby(view(out.u), 1.0, view(ur), 1.0, view(uc));
  out.state.u_prev = out.u;
  out.state.udot_prev.resize(ur.size());
  kernels::axpby(view(out.state.udot_prev), 1.0 / h, view(out.u), -1.0 / h, view(state.u_prev));
  out.state.uc_prev = uc;
  out.state.t = state.t + h;
  out.orthogonality_residual = constraint_residual(C, uc);
  out.ur = std::move(ur);
  out.uc = std::move(uc);
  out.lambda = C.lambda;
  return out;
}

// Factorization of Q with the step's constraint, reused when the cache allows.
const KktFactorization& factorization_for(const SparseMatrix& Q, const ConstraintMatrix& C, double h,
                                          const StepOptions& options, std::unique_ptr<KktFactorization>& local) {
  FactorizationCache* cache = options.cache;
  if (cache && cache->enabled) {
    if (!cache->factorization || cache->h != h) {
      cache->factorization = std::make_unique<KktFactorization>(Q, C.C);
      cache->h = h;
    }
    return *cache->factorization;
  }
  local = std::make_unique<KktFactorization>(Q, C.C);
  return *local;
}

}  // namespace

// ---- config / state -------------------------------------------------------------

void SimConfig::validate() const {
  if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument("time step h must be positive");
  if (!(newton_tol > 0.0)) throw InvalidArgument("newton_tol must be positive");
  if (newton_max_iters < 1) throw InvalidArgument("newton_max_iters must be at least 1");
  if (!(line_search.c1 > 0.0 && line_search.c1 < 1.0)) throw InvalidArgument("Armijo c1 must lie in (0, 1)");
  if (!(line_search.shrink > 0.0 && line_search.shrink < 1.0))
    throw InvalidArgument("line-search shrink must lie in (0, 1)");
  if (line_search.max_backtracks < 1) throw InvalidArgument("max_backtracks must be at least 1");
  if (substeps < 1) throw InvalidArgument("substeps must be at least 1");
  if (local_global_iters < 1) throw InvalidArgument("local_global_iters must be at least 1");
  if (!(local_global_rel_tol >= 0.0)) throw InvalidArgument("local_global_rel_tol must be non-negative");
}

SimState SimState::initial(const Eigen::VectorXd& ur0, double t0) {
  return {ur0, Eigen::VectorXd::Zero(ur0.size()), Eigen::VectorXd::Zero(ur0.size()), t0};
}

// ---- objective ------------------------------------------------------------------

StepObjective::StepObjective(const ElasticModel& model, const LumpedMassMatrix& M, const SimState& state,
                             Eigen::VectorXd ur, Eigen::VectorXd f, double h, bool cancellation)
    : model_(model), M_(M), ur_(std::move(ur)), f_(std::move(f)), h_(h), cancellation_(cancellation) {
  y_.resize(ur_.size());
  kernels::axpby(view(y_), 1.0, view(state.u_prev), h_, view(state.udot_prev));
  g_r_ = cancellation_ ? model_.gradient(ur_) : Eigen::VectorXd::Zero(ur_.size());
}

double StepObjective::energy(const Eigen::VectorXd& uc) const {
  Eigen::VectorXd u(ur_.size());
  kernels::axpby(view(u), 1.0, view(ur_), 1.0, view(uc));
  const double phi = model_.energy(u);
  if (!std::isfinite(phi)) return kInf;
  Eigen::VectorXd r(u.size());
  kernels::axpby(view(r), 1.0, view(u), -1.0, view(y_));
  const double inertia = 0.5 / (h_ * h_) * kernels::weighted_dot(view(r), view(M_.diag), view(r));
  double e = phi + inertia - kernels::dot(view(u), view(f_));
  if (cancellation_) e -= kernels::dot(view(uc), view(g_r_));
  return e;
}

Eigen::VectorXd StepObjective::gradient(const Eigen::VectorXd& uc) const {
  Eigen::VectorXd u(ur_.size());
  kernels::axpby(view(u), 1.0, view(ur_), 1.0, view(uc));
  Eigen::VectorXd g = model_.gradient(u);
  Eigen::VectorXd inertia(u.size());
  kernels::inertia_residual(view(inertia), view(M_.diag), view(u), view(y_), 1.0 / (h_ * h_));
  g += inertia - f_;
  if (cancellation_) g -= g_r_;
  return g;
}

// ---- steppers -------------------------------------------------------------------

StepResult step_linear(const SimState& state, const Rig& rig, const Eigen::VectorXd& p, const LinearModel& model,
                       const LumpedMassMatrix& M, ConstraintMatrix& C, const std::vector<ExternalForce>& forces,
                       const SimConfig& config, const StepOptions& options) {
  check_step_inputs(state, rig, p, model, M, C, config);
  const double h = config.h;
  const auto dn = model.dof_count();
  Eigen::VectorXd ur = rig.eval(p);
  const Eigen::VectorXd f = total_force(forces, state.t + h, ur + state.uc_prev, dn);
  const StepObjective objective(model, M, state, ur, f, h, config.cancellation);

  const SparseMatrix& K = model.stiffness();
  Eigen::VectorXd rhs(dn);
  // -M/h^2 (u_r - y)
  kernels::inertia_residual(view(rhs), view(M.diag), view(objective.inertia_target()), view(ur), 1.0 / (h * h));
  rhs += f;
  if (!config.cancellation) rhs -= K * ur;

  const SparseMatrix Q = plus_mass(K, M, h);
  std::unique_ptr<KktFactorization> local;
  const KktFactorization& fact = factorization_for(Q, C, h, options, local);
  const KKTSolution sol = fact.solve(rhs);
  if (options.observer) options.observer(KKTSystem{Q, C.C, rhs, 0.0}, sol);
  C.lambda = sol.lambda;

  StepResult out = finish(state, ur, sol.x, C, h);
  out.iterations = 1;
  out.energy = objective.energy(out.uc);
  out.objective_trace = {objective.energy(Eigen::VectorXd::Zero(dn)), out.energy};
  return out;
}

StepResult step_newton(const SimState& state, const Rig& rig, const Eigen::VectorXd& p, const ElasticModel& model,
                       const LumpedMassMatrix& M, ConstraintMatrix& C, const std::vector<ExternalForce>& forces,
                       const SimConfig& config, const StepOptions& options) {
  check_step_inputs(state, rig, p, model, M, C, config);
  const double h = config.h;
  const auto dn = model.dof_count();
  Eigen::VectorXd ur = rig.eval(p);
  const Eigen::VectorXd f = total_force(forces, state.t + h, ur + state.uc_prev, dn);
  const StepObjective objective(model, M, state, ur, f, h, config.cancellation);
  ConstraintProjector projector(C.C.rows() ? C.C : Eigen::MatrixXd(0, dn));

  Eigen::VectorXd uc = projector.project(state.uc_prev);
  double e = objective.energy(uc);
  if (!std::isfinite(e)) {
    uc.setZero();
    e = objective.energy(uc);
    if (!std::isfinite(e)) throw SolverError("the rig pose alone inverts an element; no finite starting point");
  }

  StepResult out;
  out.objective_trace.push_back(e);
  const double tol = config.newton_tol * std::sqrt(static_cast<double>(dn));
  int iterations = 0;
  bool flagged = false;
  std::string note;
  while (true) {
    const Eigen::VectorXd g = objective.gradient(uc);
    if (projector.project(g).norm() <= tol) break;
    if (iterations >= config.newton_max_iters) {
      note = "iteration cap reached";
      break;
    }
    SparseMatrix H;
    if (model.hessian_may_be_indefinite())
      H = assemble_blocks(psd_project(model.element_hessians(ur + uc)), dn);
    else
      H = model.hessian(ur + uc);
    const SparseMatrix Q = plus_mass(H, M, h);
    const KKTSystem sys{Q, C.C, -g, 0.0};
    const KKTSolution sol = solve_kkt(sys);
    if (options.observer) options.observer(sys, sol);
    const double slope = g.dot(sol.x);
    if (!(slope < 0.0)) {
      note = "search direction is not a descent direction";
      flagged = true;
      break;
    }
    const auto energy_fn = [&objective](const Eigen::VectorXd& x) { return objective.energy(x); };
    const LineSearchResult ls = armijo_search(energy_fn, uc, sol.x, slope, config.line_search, e);
    if (ls.all_infinite)
      throw SolverError("energy is infinite at every line-search trial (element inversion along the step)");
    if (ls.failed) {
      note = "line search failed; zero step accepted";
      flagged = true;
      break;
    }
    uc += ls.step * sol.x;
    e = ls.energy;
    C.lambda = sol.lambda;
    ++iterations;
    out.objective_trace.push_back(e);
  }

  auto trace = std::move(out.objective_trace);
  out = finish(state, ur, uc, C, h);
  out.objective_trace = std::move(trace);
  out.iterations = iterations;
  out.flagged = flagged;
  out.note = note;
  out.energy = e;
  return out;
}

StepResult step_local_global(const SimState& state, const Rig& rig, const Eigen::VectorXd& p,
                             const ElasticModel& model, const LumpedMassMatrix& M, ConstraintMatrix& C,
                             const std::vector<ExternalForce>& forces, const SimConfig& config,
                             const StepOptions& options) {
  check_step_inputs(state, rig, p, model, M, C, config);
  const LocalGlobalModel* lg = model.local_global();
  if (!lg) throw InvalidArgument(std::string(model_kind_name(model.kind())) + " model has no local-global form");
  const double h = config.h;
  const auto dn = model.dof_count();
  Eigen::VectorXd ur = rig.eval(p);
  const Eigen::VectorXd f = total_force(forces, state.t + h, ur + state.uc_prev, dn);
  const StepObjective objective(model, M, state, ur, f, h, config.cancellation);
  ConstraintProjector projector(C.C.rows() ? C.C : Eigen::MatrixXd(0, dn));

  const SparseMatrix& A = lg->global_matrix();
  const SparseMatrix Q = plus_mass(A, M, h);
  std::unique_ptr<KktFactorization> local;
  const KktFactorization& fact = factorization_for(Q, C, h, options, local);

  // Constant part of the global right-hand side: -A u_r + g_r - M/h^2 (u_r - y) + f.
  Eigen::VectorXd base(dn);
  kernels::inertia_residual(view(base), view(M.diag), view(objective.inertia_target()), view(ur), 1.0 / (h * h));
  base += f - A * ur;
  if (config.cancellation) base += objective.rig_gradient();

  Eigen::VectorXd uc = projector.project(state.uc_prev);
  double e = objective.energy(uc);
  StepResult out;
  out.objective_trace.push_back(e);
  LocalVariables aux;
  bool have_aux = false;
  int iterations = 0;
  for (int k = 0; k < config.local_global_iters; ++k) {
    aux = lg->local_step(ur + uc, have_aux ? &aux : nullptr);
    have_aux = true;
    const Eigen::VectorXd rhs = base - lg->global_linear_term(aux);
    const KKTSolution sol = fact.solve(rhs);
    if (options.observer) options.observer(KKTSystem{Q, C.C, rhs, 0.0}, sol);
    uc = sol.x;
    C.lambda = sol.lambda;
    const double e_new = objective.energy(uc);
    out.objective_trace.push_back(e_new);
    ++iterations;
    const double decrease = e - e_new;
    e = e_new;
    if (config.local_global_rel_tol > 0.0 && decrease <= config.local_global_rel_tol * std::max(1.0, std::abs(e)))
      break;
  }

  auto trace = std::move(out.objective_trace);
  out = finish(state, ur, uc, C, h);
  out.objective_trace = std::move(trace);
  out.iterations = iterations;
  out.energy = e;
  return out;
}

// ---- simulate -------------------------------------------------------------------

void Animation::validate() const {
  if (m < 0) throw InvalidArgument("animation parameter count must be non-negative");
  for (std::size_t k = 0; k < frames.size(); ++k) {
    if (frames[k].p.size() != m)
      throw InvalidArgument("animation frame " + std::to_string(k) + " has " + std::to_string(frames[k].p.size()) +
                            " parameters, expected " + std::to_string(m));
    if (!frames[k].p.allFinite() || !std::isfinite(frames[k].t))
      throw InvalidArgument("animation frame " + std::to_string(k) + " is not finite");
    if (k > 0 && !(frames[k].t > frames[k - 1].t))
      throw InvalidArgument("animation times must be strictly increasing (frame " + std::to_string(k) + ")");
  }
}

SimulationResult simulate(const Mesh& mesh, const Rig& rig, const Animation& animation, const ElasticModel& model,
                          const SimConfig& config, const std::vector<ExternalForce>& forces, const MomentumLeak& D,
                          const LumpedMassMatrix& M, const SimulateOptions& options) {
  config.validate();
  animation.validate();
  const auto dn = mesh.dof_count();
  if (rig.dof_count() != dn || model.dof_count() != dn || M.size() != dn || D.d.size() != dn)
    throw InvalidArgument("mesh, rig, model, mass and momentum leak disagree on the number of dofs");
  if (animation.m != rig.parameter_count())
    throw InvalidArgument("animation has " + std::to_string(animation.m) + " parameters, rig expects " +
                          std::to_string(rig.parameter_count()));

  SimulationResult result;
  if (animation.frames.empty()) return result;

  enum class Stepper { Linear, Newton, LocalGlobal } stepper = Stepper::Newton;
  const auto* linear = dynamic_cast<const LinearModel*>(&model);
  switch (config.solver) {
    case SolverChoice::Auto:
      stepper = linear ? Stepper::Linear : model.local_global() ? Stepper::LocalGlobal : Stepper::Newton;
      break;
    case SolverChoice::Linear:
      if (!linear) throw InvalidArgument("the linear solver needs the linear elasticity model");
      stepper = Stepper::Linear;
      break;
    case SolverChoice::Newton: stepper = Stepper::Newton; break;
    case SolverChoice::LocalGlobal:
      if (!model.local_global())
        throw InvalidArgument(std::string(model_kind_name(model.kind())) + " model has no local-global form");
      stepper = Stepper::LocalGlobal;
      break;
  }

  FactorizationCache cache;
  cache.enabled = rig.is_linear() && stepper != Stepper::Newton;
  StepOptions step_options;
  step_options.observer = options.observer;
  step_options.cache = &cache;

  const auto emit = [&](std::size_t k, Eigen::VectorXd u, Eigen::VectorXd uc, ConstraintMatrix C, FrameRecord rec) {
    if (options.on_frame) options.on_frame(k, u, rec);
    if (options.keep_frames) {
      result.frames.push_back(std::move(u));
      result.complementary.push_back(std::move(uc));
      result.constraints.push_back(std::move(C));
    }
    result.records.push_back(std::move(rec));
  };

  using Clock = std::chrono::steady_clock;
  {
    const auto start = Clock::now();
    const auto& p0 = animation.frames.front().p;
    Eigen::VectorXd ur0 = rig.eval(p0);
    ConstraintMatrix C0 = assemble_constraint(rig.jacobian(p0), M, D);
    FrameRecord rec;
    rec.t = animation.frames.front().t;
    rec.energy = model.energy(ur0);
    rec.wall_time = std::chrono::duration<double>(Clock::now() - start).count();
    emit(0, ur0, Eigen::VectorXd::Zero(dn), std::move(C0), rec);
  }

  SimState state = SimState::initial(rig.eval(animation.frames.front().p), animation.frames.front().t);
  SimConfig step_config = config;
  for (std::size_t k = 1; k < animation.frames.size(); ++k) {
    const auto start = Clock::now();
    const auto& a = animation.frames[k - 1];
    const auto& b = animation.frames[k];
    step_config.h = (b.t - a.t) / config.substeps;
    FrameRecord rec;
    rec.frame = k;
    rec.t = b.t;
    StepResult step;
    ConstraintMatrix C;
    try {
      for (int s = 1; s <= config.substeps; ++s) {
        const double alpha = static_cast<double>(s) / config.substeps;
        const Eigen::VectorXd p = s == config.substeps ? b.p : Eigen::VectorXd((1.0 - alpha) * a.p + alpha * b.p);
        C = assemble_constraint(rig.jacobian(p), M, D);
        switch (stepper) {
          case Stepper::Linear:
            step = step_linear(state, rig, p, *linear, M, C, forces, step_config, step_options);
            break;
          case Stepper::Newton:
            step = step_newton(state, rig, p, model, M, C, forces, step_config, step_options);
            break;
          case Stepper::LocalGlobal:
            step = step_local_global(state, rig, p, model, M, C, forces, step_config, step_options);
            break;
        }
        state = step.state;
        rec.iterations += step.iterations;
        rec.orthogonality_residual = std::max(rec.orthogonality_residual, step.orthogonality_residual);
        rec.flagged = rec.flagged || step.flagged;
        if (!step.note.empty()) rec.note = step.note;
      }
    } catch (const SolverError& e) {
      throw SolverError("frame " + std::to_string(k) + ": " + e.what());
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("frame " + std::to_string(k) + ": " + e.what());
    }
    state.t = b.t;
    rec.energy = step.energy;
    rec.wall_time = std::chrono::duration<double>(Clock::now() - start).count();
    emit(k, step.u, step.uc, std::move(C), rec);
  }
  return result;
}

}  // namespace compdyn
