// compdyn: simulate rigged secondary-motion scenarios and audit the results.
//
// Exit codes: 0 ok, 1 config/parse error, 2 solver failure, 3 check breach.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "compdyn/constraint.hpp"
#include "compdyn/error.hpp"
#include "compdyn/scenario.hpp"
#include "compdyn/solver.hpp"

namespace fs = std::filesystem;
using namespace compdyn;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kSolverError = 2;
constexpr int kCheckFailed = 3;

Scenario load_or_die(const fs::path& path) {
  Scenario s = load_scenario(path);
  for (const auto& w : s.rig->warnings()) std::fprintf(stderr, "warning: %s\n", w.c_str());
  return s;
}

int cmd_simulate(const fs::path& config, const fs::path& out, int substeps, int threads) {
  Scenario s = load_or_die(config);
  if (substeps > 0) s.sim.substeps = substeps;
  set_assembly_threads(threads);
  const SimulationResult r = run_scenario(s, out.empty() ? s.output_dir : out, {.keep_frames = false});
  double worst = 0.0;
  double total = 0.0;
  int flagged = 0;
  for (const auto& rec : r.records) {
    worst = std::max(worst, rec.orthogonality_residual);
    if (rec.frame > 0) total += rec.wall_time;
    flagged += rec.flagged;
  }
  const auto stepped = r.records.size() > 1 ? r.records.size() - 1 : 1;
  std::printf("%s: %zu frames, mean frame time %.4g s, max orthogonality residual %.3g, %d flagged\n",
              s.name.c_str(), r.records.size(), total / static_cast<double>(stepped), worst, flagged);
  return kOk;
}

int cmd_check_gradients(const fs::path& config, bool corrupt) {
  const Scenario s = load_or_die(config);
  std::function<void(Eigen::VectorXd&)> hook;
  if (corrupt) hook = [](Eigen::VectorXd& g) { g[0] += 1e-2 * std::max(g.cwiseAbs().maxCoeff(), 1.0); };
  const double amplitude = 0.02 * s.mesh->bbox_diagonal();
  const DerivativeCheck c = check_derivatives(*s.model, amplitude, 10, 20240611u, hook);
  std::printf("model %s: max relative gradient error %.3e, max relative Hessian-vector error %.3e\n",
              model_kind_name(s.model->kind()), c.gradient_error, c.hessian_error);
  bool ok = true;
  if (!(c.gradient_error < 1e-5)) {
    std::printf("gradient check failed: worst dof %ld at state %d\n", static_cast<long>(c.worst_gradient_entry),
                c.worst_gradient_state);
    ok = false;
  }
  if (!(c.hessian_error < 1e-4)) {
    std::printf("Hessian-vector check failed: worst dof %ld at state %d\n", static_cast<long>(c.worst_hessian_entry),
                c.worst_hessian_state);
    ok = false;
  }
  return ok ? kOk : kCheckFailed;
}

int cmd_verify_constraint(const fs::path& config, const fs::path& frames_dir) {
  const Scenario s = load_or_die(config);
  const Mesh& mesh = *s.mesh;
  const auto& anim = s.animation;
  const bool uniform_leak = (s.D.d.array() == s.D.d[0]).all();
  const bool pose_check = s.rig->is_linear() && uniform_leak;
  if (s.rig->is_linear() && !uniform_leak)
    std::printf("note: momentum leak varies over the mesh, recovered-pose check skipped\n");
  std::size_t count = 0;
  double worst_orth = 0.0;
  double worst_pose = 0.0;
  for (std::size_t k = 0;; ++k) {
    const fs::path file = frames_dir / frame_filename(k);
    if (!fs::exists(file)) break;
    if (k >= anim.frames.size()) {
      std::printf("frame %zu: no matching animation frame\n", k);
      return kCheckFailed;
    }
    const Eigen::MatrixXd X = load_obj_vertices(file);
    if (X.rows() != mesh.vertex_count() || X.cols() < mesh.dim())
      throw ParseError(file.string() + " does not match the scenario mesh");
    const Eigen::VectorXd u = flatten(X.leftCols(mesh.dim()) - mesh.vertices());
    const Eigen::VectorXd& p = anim.frames[k].p;
    const Eigen::VectorXd uc = u - s.rig->eval(p);
    const ConstraintMatrix C = assemble_constraint(s.rig->jacobian(p), s.mass, s.D);
    const double orth = C.C.rows() ? (C.C * uc).cwiseAbs().maxCoeff() : 0.0;
    const double bound = orthogonality_bound(s.mass, uc);
    worst_orth = std::max(worst_orth, orth);
    if (orth > bound) {
      std::printf("frame %zu: orthogonality residual %.3e exceeds %.3e\n", k, orth, bound);
      return kCheckFailed;
    }
    if (pose_check) {
      const RecoveredPose q = recover_rig_params(*s.rig, s.mass, u);
      const double err = (q.p - p).cwiseAbs().maxCoeff();
      worst_pose = std::max(worst_pose, err);
      if (err > 1e-8) {
        std::printf("frame %zu: recovered rig parameters differ from the animation by %.3e\n", k, err);
        return kCheckFailed;
      }
    }
    ++count;
  }
  std::printf("%zu frames verified: max orthogonality residual %.3e", count, worst_orth);
  if (pose_check) std::printf(", max recovered-pose error %.3e", worst_pose);
  std::printf("\n");
  return kOk;
}

int cmd_oracle(const fs::path& config) {
  const Scenario s = load_or_die(config);
  const auto dn = s.mesh->dof_count();
  if (dn > 300) {
    std::fprintf(stderr, "error: oracle needs a scenario with at most 300 dofs (this one has %ld)\n",
                 static_cast<long>(dn));
    return kConfigError;
  }
  double worst = 0.0;
  std::size_t solves = 0;
  SimulateOptions opts;
  opts.keep_frames = false;
  opts.observer = [&](const KKTSystem& sys, const KKTSolution& sol) {
    worst = std::max(worst, kkt_discrepancy(sys, sol.x, null_space_solve(sys)));
    ++solves;
  };
  simulate(*s.mesh, *s.rig, s.animation, *s.model, s.sim, s.forces, s.D, s.mass, opts);
  std::printf("%zu KKT solves compared with the null-space solve: max relative discrepancy %.3e\n", solves, worst);
  return worst <= 1e-8 ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Secondary motion on rigged meshes"};
  app.require_subcommand(1);

  std::string config, out, frames;
  int substeps = 0, threads = 1;
  bool corrupt = false;

  auto* sim = app.add_subcommand("simulate", "Run a scenario and write OBJ frames plus report.json");
  sim->add_option("--config", config, "Scenario JSON")->required();
  sim->add_option("--out", out, "Output directory (default: the config's \"output\")");
  sim->add_option("--substeps", substeps, "Substeps per animation frame")->check(CLI::PositiveNumber);
  sim->add_option("--threads", threads, "Threads for per-element assembly")->check(CLI::PositiveNumber);

  auto* grad = app.add_subcommand("check-gradients", "Compare model derivatives with finite differences");
  grad->add_option("--config", config, "Scenario JSON")->required();
  grad->add_flag("--corrupt-gradient", corrupt, "Perturb the analytic gradient (negative control)")
      ->group("");

  auto* verify = app.add_subcommand("verify-constraint", "Audit simulated frames against the constraint");
  verify->add_option("--config", config, "Scenario JSON")->required();
  verify->add_option("--frames", frames, "Directory with frame_NNNNN.obj files")->required();

  auto* oracle = app.add_subcommand("oracle", "Cross-check every KKT solve against the null-space solve");
  oracle->add_option("--config", config, "Scenario JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return cmd_simulate(config, out, substeps, threads);
    if (*grad) return cmd_check_gradients(config, corrupt);
    if (*verify) return cmd_verify_constraint(config, frames);
    if (*oracle) return cmd_oracle(config);
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return kSolverError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigError;
  }
  return kConfigError;
}
