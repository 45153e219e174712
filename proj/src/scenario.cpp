#include "compdyn/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <random>
#include <set>

#include "compdyn/error.hpp"

namespace compdyn {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

void allow_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw ParseError("unknown key '" + key + "' in " + where);
}

Eigen::VectorXd vector_of(const json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + " must be an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) throw ParseError(where + " must be an array of numbers");
    v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
  }
  return v;
}

Eigen::MatrixXd matrix_of(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ParseError(where + " must be a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::VectorXd first = vector_of(j[0], where);
  Eigen::MatrixXd M(rows, first.size());
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::VectorXd row = vector_of(j[static_cast<std::size_t>(r)], where);
    if (row.size() != first.size()) throw ParseError(where + " rows differ in length");
    M.row(r) = row.transpose();
  }
  return M;
}

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  return obj.at(key).get<T>();
}

std::unique_ptr<Mesh> load_mesh(const json& j, const fs::path& base) {
  allow_keys(j, {"obj", "node", "ele"}, "mesh");
  if (j.contains("obj")) return std::make_unique<Mesh>(load_tri_obj(resolve(base, j.at("obj").get<std::string>())));
  if (j.contains("node") && j.contains("ele"))
    return std::make_unique<Mesh>(load_tet_mesh(resolve(base, j.at("node").get<std::string>()),
                                                resolve(base, j.at("ele").get<std::string>())));
  throw ParseError("mesh needs either \"obj\" or both \"node\" and \"ele\"");
}

std::unique_ptr<ElasticModel> load_model(const json& j, const Mesh& mesh) {
  allow_keys(j, {"kind", "youngs", "poisson", "stiffness"}, "model");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "linear")
    return linear_model(mesh, j.at("youngs").get<double>(), j.at("poisson").get<double>());
  if (kind == "neohookean")
    return neohookean_model(mesh, j.at("youngs").get<double>(), j.at("poisson").get<double>());
  if (kind == "arap") return arap_model(mesh, j.at("stiffness").get<double>());
  if (kind == "mass_spring") return mass_spring_model(mesh, j.at("stiffness").get<double>());
  throw ParseError("unknown model kind '" + kind + "'");
}

std::unique_ptr<Rig> load_rig(const json& j, const Mesh& mesh, const fs::path& base) {
  allow_keys(j, {"kind", "weights", "rest_cage", "poses", "command", "parameters", "fd_step"}, "rig");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "affine") return affine_rig(mesh);
  if (kind == "lbs") return lbs_rig(mesh, read_dmat(resolve(base, j.at("weights").get<std::string>())));
  if (kind == "cage") {
    const Eigen::MatrixXd W = read_dmat(resolve(base, j.at("weights").get<std::string>()));
    const json& rc = j.at("rest_cage");
    const Eigen::MatrixXd cage =
        rc.is_string() ? load_obj_vertices(resolve(base, rc.get<std::string>())) : matrix_of(rc, "rig.rest_cage");
    return cage_rig(mesh, W, cage.leftCols(std::min<Eigen::Index>(cage.cols(), mesh.dim())));
  }
  if (kind == "blendshape") {
    std::vector<Eigen::MatrixXd> poses;
    for (const auto& p : j.at("poses")) {
      const fs::path path = resolve(base, p.get<std::string>());
      Eigen::MatrixXd V = load_obj_vertices(path);
      if (V.rows() != mesh.vertex_count())
        throw ParseError(path.string() + " has " + std::to_string(V.rows()) + " vertices, mesh has " +
                         std::to_string(mesh.vertex_count()));
      if (V.cols() < mesh.dim()) throw ParseError(path.string() + " has fewer coordinates than the mesh");
      poses.push_back(V.leftCols(mesh.dim()));
    }
    return blendshape_rig(mesh.vertices(), poses);
  }
  if (kind == "external")
    return command_rig(j.at("command").get<std::string>(), j.at("parameters").get<Eigen::Index>(), mesh.dof_count(),
                       get_or(j, "fd_step", 1e-6));
  throw ParseError("unknown rig kind '" + kind + "'");
}

Animation parse_animation(const json& j, const std::string& where) {
  allow_keys(j, {"m", "frames", "rig"}, where);
  Animation a;
  a.m = j.at("m").get<Eigen::Index>();
  for (const auto& f : j.at("frames")) {
    allow_keys(f, {"t", "p"}, where + " frame");
    a.frames.push_back({f.at("t").get<double>(), vector_of(f.at("p"), where + " frame pose")});
  }
  a.validate();
  return a;
}

SimConfig parse_sim(const json& j) {
  allow_keys(j,
             {"h", "newton_tol", "newton_max_iters", "armijo_c1", "shrink", "max_backtracks", "cancellation",
              "substeps", "local_global_iters", "local_global_rel_tol", "solver"},
             "sim");
  SimConfig c;
  c.h = get_or(j, "h", c.h);
  c.newton_tol = get_or(j, "newton_tol", c.newton_tol);
  c.newton_max_iters = get_or(j, "newton_max_iters", c.newton_max_iters);
  c.line_search.c1 = get_or(j, "armijo_c1", c.line_search.c1);
  c.line_search.shrink = get_or(j, "shrink", c.line_search.shrink);
  c.line_search.max_backtracks = get_or(j, "max_backtracks", c.line_search.max_backtracks);
  c.cancellation = get_or(j, "cancellation", c.cancellation);
  c.substeps = get_or(j, "substeps", c.substeps);
  c.local_global_iters = get_or(j, "local_global_iters", c.local_global_iters);
  c.local_global_rel_tol = get_or(j, "local_global_rel_tol", c.local_global_rel_tol);
  const std::string solver = get_or<std::string>(j, "solver", "auto");
  if (solver == "auto") c.solver = SolverChoice::Auto;
  else if (solver == "linear") c.solver = SolverChoice::Linear;
  else if (solver == "newton") c.solver = SolverChoice::Newton;
  else if (solver == "local_global") c.solver = SolverChoice::LocalGlobal;
  else throw ParseError("unknown solver '" + solver + "'");
  return c;
}

LeakSettings parse_leak(const json& j) {
  allow_keys(j, {"mode", "value"}, "momentum_leak");
  LeakSettings s;
  const std::string mode = get_or<std::string>(j, "mode", "identity");
  if (mode == "identity") s.mode = LeakMode::Identity;
  else if (mode == "poisson") s.mode = LeakMode::Poisson;
  else if (mode == "constant") s.mode = LeakMode::Constant;
  else throw ParseError("unknown momentum_leak mode '" + mode + "'");
  s.value = get_or(j, "value", 0.0);
  return s;
}

ExternalForce parse_force(const json& j, const Mesh& mesh, const LumpedMassMatrix& M) {
  const std::string kind = j.at("kind").get<std::string>();
  ForceParams p;
  if (kind == "gravity") {
    allow_keys(j, {"kind", "g"}, "gravity force");
    p.vector = vector_of(j.at("g"), "gravity.g");
    return external_force(ForceKind::Gravity, p, mesh, M);
  }
  if (kind == "wind") {
    allow_keys(j, {"kind", "direction", "amplitude", "frequency", "phase"}, "wind force");
    p.vector = vector_of(j.at("direction"), "wind.direction");
    p.amplitude = j.at("amplitude").get<double>();
    p.frequency = j.at("frequency").get<double>();
    p.phase = get_or(j, "phase", 0.0);
    return external_force(ForceKind::Wind, p, mesh, M);
  }
  if (kind == "ground") {
    allow_keys(j, {"kind", "normal", "offset", "stiffness"}, "ground force");
    p.normal = vector_of(j.at("normal"), "ground.normal");
    p.offset = j.at("offset").get<double>();
    p.stiffness = j.at("stiffness").get<double>();
    return external_force(ForceKind::GroundPenalty, p, mesh, M);
  }
  throw ParseError("unknown force kind '" + kind + "'");
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

Eigen::MatrixXi Scenario::output_faces() const {
  return mesh->dim() == 2 ? mesh->elements() : boundary_facets(*mesh);
}

Animation load_animation(const fs::path& path) { return parse_animation(read_json(path), path.string()); }

Scenario load_scenario(const fs::path& config_path) {
  const json j = read_json(config_path);
  const fs::path base = config_path.parent_path();
  Scenario s;
  s.config_path = config_path;
  try {
    allow_keys(j, {"name", "mesh", "density", "model", "rig", "animation", "sim", "momentum_leak", "forces", "output"},
               "config " + config_path.string());
    s.name = get_or<std::string>(j, "name", config_path.stem().string());
    s.mesh = load_mesh(j.at("mesh"), base);
    s.mass = lumped_mass(*s.mesh, get_or(j, "density", 1.0));
    s.model = load_model(j.at("model"), *s.mesh);
    s.rig = load_rig(j.at("rig"), *s.mesh, base);
    const json& anim = j.at("animation");
    s.animation = anim.is_string() ? load_animation(resolve(base, anim.get<std::string>()))
                                   : parse_animation(anim, "animation");
    if (s.animation.m != s.rig->parameter_count())
      throw ParseError("animation has " + std::to_string(s.animation.m) + " parameters, the " +
                       rig_kind_name(s.rig->kind()) + " rig expects " + std::to_string(s.rig->parameter_count()));
    s.sim = parse_sim(j.contains("sim") ? j.at("sim") : json::object());
    s.sim.validate();
    s.leak = parse_leak(j.contains("momentum_leak") ? j.at("momentum_leak") : json::object());
    s.D = build_momentum_leak(*s.mesh, s.leak);
    if (j.contains("forces"))
      for (const auto& f : j.at("forces")) s.forces.push_back(parse_force(f, *s.mesh, s.mass));
    s.output_dir = resolve(base, get_or<std::string>(j, "output", "out"));
  } catch (const json::exception& e) {
    throw ParseError(config_path.string() + ": " + e.what());
  }
  return s;
}

std::string frame_filename(std::size_t frame) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%05zu.obj", frame);
  return buf;
}

SimulationResult run_scenario(const Scenario& scenario, const fs::path& out_dir, const SimulateOptions& options) {
  fs::create_directories(out_dir);
  for (const auto& entry : fs::directory_iterator(out_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("frame_", 0) == 0 && entry.path().extension() == ".obj") fs::remove(entry.path());
  }
  const Eigen::MatrixXi faces = scenario.output_faces();
  const Eigen::MatrixXd& V = scenario.mesh->vertices();
  SimulateOptions opts = options;
  opts.on_frame = [&](std::size_t k, const Eigen::VectorXd& u, const FrameRecord& rec) {
    write_obj(out_dir / frame_filename(k), V + unflatten(u, scenario.mesh->dim()), faces);
    if (options.on_frame) options.on_frame(k, u, rec);
  };
  SimulationResult result = simulate(*scenario.mesh, *scenario.rig, scenario.animation, *scenario.model, scenario.sim,
                                     scenario.forces, scenario.D, scenario.mass, opts);
  write_report(out_dir / "report.json", scenario, result.records);
  return result;
}

void write_report(const fs::path& path, const Scenario& scenario, const std::vector<FrameRecord>& records) {
  json frames = json::array();
  double total = 0.0;
  double worst = 0.0;
  std::size_t stepped = 0;
  for (const auto& r : records) {
    json f = {{"frame", r.frame},
              {"t", r.t},
              {"iterations", r.iterations},
              {"orthogonality_residual", r.orthogonality_residual},
              {"energy", finite_or_null(r.energy)},
              {"wall_time", r.wall_time},
              {"flagged", r.flagged}};
    if (!r.note.empty()) f["note"] = r.note;
    frames.push_back(std::move(f));
    worst = std::max(worst, r.orthogonality_residual);
    if (r.frame > 0) {
      total += r.wall_time;
      ++stepped;
    }
  }
  const json report = {{"scenario", scenario.name},
                       {"model", model_kind_name(scenario.model->kind())},
                       {"rig", rig_kind_name(scenario.rig->kind())},
                       {"vertices", scenario.mesh->vertex_count()},
                       {"dof_count", scenario.mesh->dof_count()},
                       {"parameters", scenario.rig->parameter_count()},
                       {"substeps", scenario.sim.substeps},
                       {"cancellation", scenario.sim.cancellation},
                       {"frames", frames},
                       {"mean_frame_time", stepped ? total / static_cast<double>(stepped) : 0.0},
                       {"max_orthogonality_residual", worst}};
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << report.dump(2) << '\n';
}

DerivativeCheck check_derivatives(const ElasticModel& model, double amplitude, int states, std::uint64_t seed,
                                  const std::function<void(Eigen::VectorXd&)>& gradient_hook) {
  if (!(amplitude > 0.0)) throw InvalidArgument("derivative check amplitude must be positive");
  const auto dn = model.dof_count();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const auto random_vector = [&](Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = uni(rng);
    return v;
  };
  const double eps = 1e-4 * amplitude;
  // Component-wise differences on at most this many dofs per state.
  const Eigen::Index max_entries = 200;

  DerivativeCheck out;
  for (int s = 0; s < states; ++s) {
    Eigen::VectorXd u = amplitude * random_vector(dn);
    for (int tries = 0; !std::isfinite(model.energy(u)) && tries < 60; ++tries) u *= 0.5;
    Eigen::VectorXd g = model.gradient(u);
    if (gradient_hook) gradient_hook(g);

    std::vector<Eigen::Index> entries;
    if (dn <= max_entries) {
      for (Eigen::Index i = 0; i < dn; ++i) entries.push_back(i);
    } else {
      std::uniform_int_distribution<Eigen::Index> pick(0, dn - 1);
      for (Eigen::Index k = 0; k < max_entries; ++k) entries.push_back(pick(rng));
    }
    const double gscale = std::max(g.cwiseAbs().maxCoeff(), 1e-300);
    for (Eigen::Index i : entries) {
      Eigen::VectorXd up = u, um = u;
      up[i] += eps;
      um[i] -= eps;
      const double fd = (model.energy(up) - model.energy(um)) / (2.0 * eps);
      const double err = std::abs(fd - g[i]) / gscale;
      if (!(err <= out.gradient_error)) {
        out.gradient_error = std::isnan(err) ? std::numeric_limits<double>::infinity() : err;
        out.worst_gradient_entry = i;
        out.worst_gradient_state = s;
      }
    }

    const Eigen::VectorXd v = random_vector(dn);
    const Eigen::VectorXd Hv = model.hessian(u) * v;
    const Eigen::VectorXd fd = (model.gradient(u + eps * v) - model.gradient(u - eps * v)) / (2.0 * eps);
    const double hscale = std::max(Hv.cwiseAbs().maxCoeff(), 1e-300);
    Eigen::Index worst = 0;
    const double err = (fd - Hv).cwiseAbs().maxCoeff(&worst) / hscale;
    if (!(err <= out.hessian_error)) {
      out.hessian_error = std::isnan(err) ? std::numeric_limits<double>::infinity() : err;
      out.worst_hessian_entry = worst;
      out.worst_hessian_state = s;
    }
  }
  return out;
}

double kkt_discrepancy(const KKTSystem& sys, const Eigen::VectorXd& x, const Eigen::VectorXd& x_ref) {
  double qn = 0.0;
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(sys.Q.rows());
  for (int k = 0; k < sys.Q.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(sys.Q, k); it; ++it) rows[it.row()] += std::abs(it.value());
  if (rows.size()) qn = rows.maxCoeff();
  const double ref = x_ref.size() ? x_ref.cwiseAbs().maxCoeff() : 0.0;
  const double natural = (qn > 0.0 && sys.rhs.size()) ? sys.rhs.cwiseAbs().maxCoeff() / qn : 0.0;
  const double den = std::max({ref, natural, 1e-300});
  return (x.size() ? (x - x_ref).cwiseAbs().maxCoeff() : 0.0) / den;
}

double orthogonality_bound(const LumpedMassMatrix& M, const Eigen::VectorXd& uc) {
  const double ucn = uc.size() ? uc.cwiseAbs().maxCoeff() : 0.0;
  return 1e-8 * std::max(1.0, M.max() * ucn);
}

}  // namespace compdyn
