// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "compdyn/constraint.hpp"
#include "compdyn/dynamics.hpp"
#include "compdyn/elastic.hpp"
#include "compdyn/error.hpp"
#include "compdyn/mesh.hpp"
#include "compdyn/rig.hpp"
#include "compdyn/scenario.hpp"
#include "compdyn/solver.hpp"

using namespace compdyn;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = COMPDYN_SCENARIO_DIR;

double inf(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }
double inf(const Eigen::MatrixXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// ---- small meshes and poses ---------------------------------------------------

Mesh grid(int nx, int ny, double w, double h) {
  Eigen::MatrixXd V((nx + 1) * (ny + 1), 2);
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) V.row(j * (nx + 1) + i) << w * i / nx, h * j / ny;
  Eigen::MatrixXi F(2 * nx * ny, 3);
  int f = 0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int a = j * (nx + 1) + i, b = a + 1, c = a + nx + 1, d = c + 1;
      F.row(f++) << a, b, d;
      F.row(f++) << a, d, c;
    }
  return Mesh(V, F);
}

Eigen::VectorXd affine_pose(const Eigen::MatrixXd& A, const Eigen::VectorXd& t) {
  const auto d = A.rows();
  Eigen::VectorXd p(d * (d + 1));
  for (Eigen::Index r = 0; r < d; ++r) {
    p.segment(r * (d + 1), d) = A.row(r).transpose();
    p[r * (d + 1) + d] = t[r];
  }
  return p;
}

template <class F>
Animation make_animation(Eigen::Index m, int frames, F pose) {
  Animation a;
  a.m = m;
  for (int k = 0; k < frames; ++k) a.frames.push_back({k / 60.0, pose(k)});
  return a;
}

Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = uni(rng);
  return v;
}

// ---- criteria -------------------------------------------------------------------

Outcome orthogonality_suite() {
  const auto start = std::chrono::steady_clock::now();
  double worst_ratio = 0.0;
  std::size_t frames = 0;
  for (const char* name : {"amoeba", "lbs_2d", "carpet", "bar_3d"}) {
    const Scenario s = load_scenario(kScenarios / name / "config.json");
    const SimulationResult r = simulate(*s.mesh, *s.rig, s.animation, *s.model, s.sim, s.forces, s.D, s.mass);
    for (std::size_t k = 0; k < r.frames.size(); ++k) {
      const Eigen::VectorXd& uc = r.complementary[k];
      // recompute C from the pose rather than trusting the stepper's copy
      const ConstraintMatrix C = assemble_constraint(s.rig->jacobian(s.animation.frames[k].p), s.mass, s.D);
      const double res = C.C.rows() ? inf(Eigen::VectorXd(C.C * uc)) : 0.0;
      worst_ratio = std::max(worst_ratio, res / orthogonality_bound(s.mass, uc));
      ++frames;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst_ratio <= 1.0 && secs < 120.0,
          fmt("%.0f frames, worst residual / bound %.3g, %.1f s", double(frames), worst_ratio, secs)};
}

Outcome quiescence() {
  const Mesh m2 = grid(6, 3, 2.0, 1.0);
  const Mesh bar = load_tet_mesh(kScenarios / "bar_3d" / "bar.node", kScenarios / "bar_3d" / "bar.ele");
  struct Case {
    const char* label;
    const Mesh* mesh;
    std::unique_ptr<ElasticModel> model;
  };
  std::vector<Case> cases;
  cases.push_back({"linear", &m2, linear_model(m2, 1000.0, 0.3)});
  cases.push_back({"neohookean", &m2, neohookean_model(m2, 1000.0, 0.3)});
  cases.push_back({"neohookean-3d", &bar, neohookean_model(bar, 1000.0, 0.3)});
  cases.push_back({"arap", &m2, arap_model(m2, 100.0)});
  cases.push_back({"mass_spring", &m2, mass_spring_model(m2, 100.0)});

  SimConfig cfg;
  cfg.cancellation = true;
  std::string detail;
  bool ok = true;
  for (const auto& c : cases) {
    const int d = c.mesh->dim();
    const auto rig = affine_rig(*c.mesh);
    // static, visibly deformed pose
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(d, d);
    A(0, 0) = 1.3;
    A(0, 1) = 0.2;
    const Eigen::VectorXd p = affine_pose(A, Eigen::VectorXd::Constant(d, 0.1));
    const Animation anim = make_animation(p.size(), 121, [&](int) { return p; });
    const LumpedMassMatrix M = lumped_mass(*c.mesh, 1.0);
    const SimulationResult r = simulate(*c.mesh, *rig, anim, *c.model, cfg, {}, MomentumLeak::identity(c.mesh->dof_count()), M);
    double worst = 0.0;
    for (const auto& uc : r.complementary) worst = std::max(worst, inf(uc));
    ok = ok && worst <= 1e-10;
    detail += std::string(detail.empty() ? "" : ", ") + c.label + fmt(" %.2g", worst);
  }
  return {ok, "max |u_c| over 120 frames: " + detail};
}

Outcome momentum_annihilation() {
  const Mesh mesh = grid(8, 4, 2.0, 1.0);
  const LumpedMassMatrix M = lumped_mass(mesh, 1.0);
  const auto rig = affine_rig(mesh);
  const auto model = linear_model(mesh, 500.0, 0.3);
  const auto pose = [](int k) {
    const double t = k / 60.0;
    Eigen::Matrix2d A = Eigen::Matrix2d::Identity();
    A(0, 1) = 0.5 * t * t;
    A(1, 1) = 1.0 + 0.3 * std::sin(4.0 * t);
    return affine_pose(A, Eigen::Vector2d(3.0 * t * t, std::sin(5.0 * t)));
  };
  const Animation anim = make_animation(6, 90, pose);
  SimConfig cfg;
  cfg.cancellation = true;

  const auto run = [&](const MomentumLeak& D, double& worst_ratio, double& peak) {
    const SimulationResult r = simulate(mesh, *rig, anim, *model, cfg, {}, D, M);
    worst_ratio = 0.0;
    peak = 0.0;
    double ur_scale = 0.0;
    for (std::size_t k = 0; k < r.frames.size(); ++k) {
      const Eigen::VectorXd ur = rig->eval(anim.frames[k].p);
      const double ucn = inf(r.complementary[k]);
      ur_scale = std::max(ur_scale, inf(ur));
      if (inf(ur) > 0.0) worst_ratio = std::max(worst_ratio, ucn / inf(ur));
      peak = std::max(peak, ucn);
    }
    return ur_scale;
  };
  double ratio_i = 0.0, peak_i = 0.0, ratio_p = 0.0, peak_p = 0.0;
  run(MomentumLeak::identity(mesh.dof_count()), ratio_i, peak_i);
  LeakSettings poisson;
  poisson.mode = LeakMode::Poisson;
  poisson.value = 0.0;
  const double ur_scale = run(build_momentum_leak(mesh, poisson), ratio_p, peak_p);
  const double leak = peak_p / ur_scale;
  return {ratio_i <= 1e-8 && leak > 1e-3,
          fmt("D = I: max |u_c|/|u_r| %.3g; Poisson D: max |u_c| / max |u_r| %.3g", ratio_i, leak)};
}

Outcome undo_prevention() {
  const Mesh mesh = grid(8, 4, 2.0, 1.0);
  const LumpedMassMatrix M = lumped_mass(mesh, 1.0);
  const auto rig = affine_rig(mesh);
  const auto model = linear_model(mesh, 500.0, 0.3);
  Eigen::Matrix2d A;
  A << 1.6, 0.0, 0.0, 1.3;
  const Eigen::VectorXd p = affine_pose(A, Eigen::Vector2d(0.2, -0.1));
  const Animation anim = make_animation(6, 60, [&](int) { return p; });
  SimConfig cfg;
  cfg.cancellation = false;
  const auto drift = [&](const MomentumLeak& D) {
    double worst = 0.0;
    for (const auto& u : simulate(mesh, *rig, anim, *model, cfg, {}, D, M).frames)
      worst = std::max(worst, inf(Eigen::VectorXd(recover_rig_params(*rig, M, u).p - p)));
    return worst;
  };
  const double zero = drift(MomentumLeak::constant(mesh.dof_count(), 0.0));
  const double ident = drift(MomentumLeak::identity(mesh.dof_count()));
  return {zero > 0.1 * p.norm() && ident <= 1e-8,
          fmt("D = 0 drift %.3g (|p| = %.3g); D = I drift %.3g", zero, p.norm(), ident)};
}

Outcome derivative_checks() {
  const Mesh bar = load_tet_mesh(kScenarios / "bar_3d" / "bar.node", kScenarios / "bar_3d" / "bar.ele");
  const Mesh plate = load_tri_obj(kScenarios / "lbs_2d" / "bar.obj");
  struct Case {
    const char* label;
    std::unique_ptr<ElasticModel> model;
    double amplitude;
  };
  std::vector<Case> cases;
  cases.push_back({"neohookean-3d", neohookean_model(bar, 2000.0, 0.3), 0.02 * bar.bbox_diagonal()});
  cases.push_back({"neohookean-2d", neohookean_model(plate, 2000.0, 0.3), 0.02 * plate.bbox_diagonal()});
  cases.push_back({"arap-3d", arap_model(bar, 200.0), 0.05 * bar.bbox_diagonal()});
  cases.push_back({"arap-2d", arap_model(plate, 200.0), 0.05 * plate.bbox_diagonal()});
  bool ok = true;
  std::string detail;
  std::uint64_t seed = 7;
  for (const auto& c : cases) {
    const DerivativeCheck r = check_derivatives(*c.model, c.amplitude, 10, seed++);
    ok = ok && r.gradient_error < 1e-5 && r.hessian_error < 1e-4;
    detail += std::string(detail.empty() ? "" : ", ") + c.label + fmt(" grad %.2g Hv %.2g", r.gradient_error, r.hessian_error);
  }
  return {ok, detail};
}

Outcome solver_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(6, 80);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = size(rng);
    const int m = std::uniform_int_distribution<int>(1, std::max(1, n / 3))(rng);
    // sparse SPD Q: random symmetric band plus a dominant diagonal
    std::vector<Triplet> t;
    Eigen::VectorXd rowsum = Eigen::VectorXd::Zero(n);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < std::min(n, i + 4); ++j) {
        const double v = uni(rng);
        t.emplace_back(i, j, v);
        t.emplace_back(j, i, v);
        rowsum[i] += std::abs(v);
        rowsum[j] += std::abs(v);
      }
    for (int i = 0; i < n; ++i) t.emplace_back(i, i, rowsum[i] + 0.1 + std::abs(uni(rng)) * 10.0);
    KKTSystem sys;
    sys.Q.resize(n, n);
    sys.Q.setFromTriplets(t.begin(), t.end());
    sys.C = Eigen::MatrixXd(m, n);
    for (auto& x : sys.C.reshaped()) x = uni(rng);
    sys.rhs = random_vector(n, rng);
    worst = std::max(worst, kkt_discrepancy(sys, solve_kkt(sys).x, null_space_solve(sys)));
  }

  // every solve of a small simulation
  const Mesh mesh = grid(5, 3, 1.5, 1.0);
  const LumpedMassMatrix M = lumped_mass(mesh, 1.0);
  const auto rig = affine_rig(mesh);
  const auto model = neohookean_model(mesh, 300.0, 0.3);
  LeakSettings leak;
  leak.mode = LeakMode::Poisson;
  leak.value = 0.3;
  const auto anim = make_animation(6, 20, [](int k) {
    const double t = k / 60.0;
    Eigen::Matrix2d A = Eigen::Matrix2d::Identity();
    A(0, 1) = 0.4 * t;
    return affine_pose(A, Eigen::Vector2d(t * t, 0.0));
  });
  ForceParams g;
  g.vector = Eigen::Vector2d(0.0, -9.8);
  const std::vector<ExternalForce> forces{external_force(ForceKind::Gravity, g, mesh, M)};
  double worst_sim = 0.0;
  std::size_t solves = 0;
  SimulateOptions opts;
  opts.observer = [&](const KKTSystem& sys, const KKTSolution& sol) {
    worst_sim = std::max(worst_sim, kkt_discrepancy(sys, sol.x, null_space_solve(sys)));
    ++solves;
  };
  simulate(mesh, *rig, anim, *model, SimConfig{}, forces, build_momentum_leak(mesh, leak), M, opts);
  return {worst <= 1e-8 && worst_sim <= 1e-8 && solves > 0,
          fmt("random instances %.3g; simulation (%.0f solves) %.3g", worst, double(solves), worst_sim)};
}

Outcome single_newton() {
  const Mesh mesh = grid(6, 3, 2.0, 1.0);
  const LumpedMassMatrix M = lumped_mass(mesh, 1.0);
  const auto rig = affine_rig(mesh);
  const auto model = linear_model(mesh, 800.0, 0.3);
  ForceParams g;
  g.vector = Eigen::Vector2d(0.0, -9.8);
  const std::vector<ExternalForce> forces{external_force(ForceKind::Gravity, g, mesh, M)};
  SimConfig cfg;
  cfg.cancellation = false;
  cfg.newton_max_iters = 1;
  const MomentumLeak I = MomentumLeak::identity(mesh.dof_count());
  SimState s = SimState::initial(rig->eval(affine_pose(Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero())));
  double worst = 0.0;
  for (int k = 1; k <= 20; ++k) {
    const double t = k / 60.0;
    Eigen::Matrix2d A = Eigen::Matrix2d::Identity();
    A(1, 0) = 0.3 * std::sin(3.0 * t);
    const Eigen::VectorXd p = affine_pose(A, Eigen::Vector2d(t * t, 0.5 * t));
    ConstraintMatrix C1 = assemble_constraint(rig->jacobian(p), M, I), C2 = C1;
    const StepResult a = step_linear(s, *rig, p, *model, M, C1, forces, cfg);
    const StepResult b = step_newton(s, *rig, p, *model, M, C2, forces, cfg);
    worst = std::max(worst, inf(Eigen::VectorXd(a.u - b.u)) / std::max(1.0, inf(a.u)));
    s = a.state;
  }
  return {worst <= 1e-10, fmt("max relative difference over 20 steps %.3g", worst)};
}

Outcome rig_jacobians() {
  const Mesh mesh = grid(4, 4, 1.0, 1.0);
  const auto n = mesh.vertex_count();
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  Eigen::MatrixXd W(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    W.row(i) << u01(rng), u01(rng), u01(rng);
    W.row(i) /= W.row(i).sum();
  }
  Eigen::MatrixXd cage(4, 2);
  cage << -0.5, -0.5, 1.5, -0.5, 1.5, 1.5, -0.5, 1.5;
  Eigen::MatrixXd B(n, 4);  // bilinear coordinates in the square cage
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = (mesh.vertices()(i, 0) + 0.5) / 2.0, t = (mesh.vertices()(i, 1) + 0.5) / 2.0;
    B.row(i) << (1 - s) * (1 - t), s * (1 - t), s * t, (1 - s) * t;
  }
  std::vector<Eigen::MatrixXd> shapes;
  for (int k = 0; k < 3; ++k) shapes.push_back(mesh.vertices() + 0.2 * Eigen::MatrixXd::Random(n, 2));

  struct Case {
    const char* label;
    std::unique_ptr<LinearRig> rig;
  };
  std::vector<Case> cases;
  cases.push_back({"affine", affine_rig(mesh)});
  cases.push_back({"lbs", lbs_rig(mesh, W)});
  cases.push_back({"cage", cage_rig(mesh, B, cage)});
  cases.push_back({"blendshape", blendshape_rig(mesh.vertices(), shapes)});
  bool ok = true;
  std::string detail;
  for (const auto& c : cases) {
    const Eigen::VectorXd p = random_vector(c.rig->parameter_count(), rng);
    const double err = inf(Eigen::MatrixXd(fd_jacobian(*c.rig, p, 1e-5).J - c.rig->jacobian(p).J));
    ok = ok && err <= 1e-6;
    detail += std::string(detail.empty() ? "" : ", ") + c.label + fmt(" %.2g", err);
  }
  const auto one = lbs_rig(mesh, Eigen::MatrixXd::Ones(n, 1));
  const auto aff = affine_rig(mesh);
  const Eigen::VectorXd p = random_vector(6, rng);
  const bool same = one->matrix() == aff->matrix() && one->offset() == aff->offset() && one->eval(p) == aff->eval(p);
  ok = ok && same;
  return {ok, detail + (same ? "; single-handle LBS equals affine" : "; single-handle LBS differs from affine")};
}

Outcome local_global() {
  const Scenario s = load_scenario(kScenarios / "carpet" / "config.json");
  const auto dn = s.mesh->dof_count();
  SimConfig cfg = s.sim;
  cfg.solver = SolverChoice::LocalGlobal;
  cfg.local_global_iters = 25;
  SimState state = SimState::initial(s.rig->eval(s.animation.frames[0].p), s.animation.frames[0].t);
  double worst_rise = 0.0, worst_feasibility = 0.0;
  std::size_t globals = 0;
  const std::size_t frames = std::min<std::size_t>(s.animation.frames.size(), 60);
  for (std::size_t k = 1; k < frames; ++k) {
    const Eigen::VectorXd& p = s.animation.frames[k].p;
    ConstraintMatrix C = assemble_constraint(s.rig->jacobian(p), s.mass, s.D);
    StepOptions opt;
    opt.observer = [&](const KKTSystem& sys, const KKTSolution& sol) {
      worst_feasibility =
          std::max(worst_feasibility, inf(Eigen::VectorXd(sys.C * sol.x)) / orthogonality_bound(s.mass, sol.x));
      ++globals;
    };
    const StepResult r = step_local_global(state, *s.rig, p, *s.model, s.mass, C, s.forces, cfg, opt);
    const auto& tr = r.objective_trace;
    for (std::size_t i = 1; i < tr.size(); ++i)
      worst_rise = std::max(worst_rise, (tr[i] - tr[i - 1]) / std::max(1.0, std::abs(tr[i - 1])));
    worst_feasibility = std::max(worst_feasibility, r.orthogonality_residual / orthogonality_bound(s.mass, r.uc));
    state = r.state;
  }
  (void)dn;
  return {worst_rise <= 1e-12 && worst_feasibility <= 1.0,
          fmt("%.0f global solves, max relative increase %.3g, worst residual / bound %.3g", double(globals),
              worst_rise, worst_feasibility)};
}

Outcome performance() {
  const Scenario s = load_scenario(kScenarios / "worm" / "config.json");
  SimulateOptions opts;
  opts.keep_frames = false;
  const SimulationResult r = simulate(*s.mesh, *s.rig, s.animation, *s.model, s.sim, s.forces, s.D, s.mass, opts);
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& rec : r.records)
    if (rec.frame > 0) {
      total += rec.wall_time;
      ++count;
    }
  const double mean = count ? total / double(count) : 0.0;
  return {count > 0 && mean <= 0.5,
          fmt("n = %.0f, m = %.0f, mean frame time %.4g s", double(s.mesh->vertex_count()),
              double(s.rig->parameter_count()), mean)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"orthogonality on shipped scenarios", orthogonality_suite},
      {"quiescence", quiescence},
      {"momentum annihilation and leak", momentum_annihilation},
      {"undo prevention", undo_prevention},
      {"gradient and Hessian checks", derivative_checks},
      {"KKT solver vs null-space oracle", solver_oracle},
      {"single Newton step equals linear step", single_newton},
      {"rig Jacobians", rig_jacobians},
      {"local-global monotonicity and feasibility", local_global},
      {"worm-scale frame time", performance},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
