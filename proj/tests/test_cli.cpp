#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const fs::path kScenarios = COMPDYN_SCENARIO_DIR;

struct Run {
  int code = -1;
  std::string output;  // stdout and stderr together
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "compdyn_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Run cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + COMPDYN_BIN + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = slurp(log);
  return r;
}

// Copies a shipped scenario, keeps the first `frames` animation frames and
// applies edits to the config.
fs::path prepare(const std::string& name, const std::string& tag, std::size_t frames,
                 const std::function<void(json&)>& edit = {}) {
  const fs::path dir = scratch(tag);
  for (const auto& e : fs::directory_iterator(kScenarios / name))
    if (e.is_regular_file()) fs::copy_file(e.path(), dir / e.path().filename());
  json anim = json::parse(slurp(dir / "animation.json"));
  if (anim["frames"].size() > frames) anim["frames"].erase(anim["frames"].begin() + frames, anim["frames"].end());
  std::ofstream(dir / "animation.json") << anim.dump();
  json cfg = json::parse(slurp(dir / "config.json"));
  if (edit) edit(cfg);
  std::ofstream(dir / "config.json") << cfg.dump(2);
  return dir / "config.json";
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("simulate then verify") {
  const fs::path cfg = prepare("amoeba", "sim", 10);
  const fs::path out = cfg.parent_path() / "frames";
  const Run sim = cli("simulate --config " + q(cfg) + " --out " + q(out), cfg.parent_path() / "sim.log");
  CHECK(sim.code == 0);
  CHECK(sim.output.find("10 frames") != std::string::npos);
  CHECK(fs::exists(out / "frame_00009.obj"));
  CHECK(fs::exists(out / "report.json"));

  const Run ok = cli("verify-constraint --config " + q(cfg) + " --frames " + q(out), cfg.parent_path() / "v.log");
  CHECK(ok.code == 0);
  CHECK(ok.output.find("10 frames verified") != std::string::npos);
  CHECK(ok.output.find("recovered-pose") != std::string::npos);

  const fs::path empty = cfg.parent_path() / "empty";
  fs::create_directories(empty);
  const Run none = cli("verify-constraint --config " + q(cfg) + " --frames " + q(empty), cfg.parent_path() / "e.log");
  CHECK(none.code == 0);
  CHECK(none.output.find("0 frames verified") != std::string::npos);

  // A run without the constraint leaves frames that violate it.
  const fs::path bad_cfg = prepare("amoeba", "sag", 30, [](json& j) {
    j["momentum_leak"] = {{"mode", "constant"}, {"value", 0.0}};
    j["forces"] = json::array({{{"kind", "gravity"}, {"g", {0.0, -9.8}}}});
  });
  const fs::path sag = bad_cfg.parent_path() / "frames";
  REQUIRE(cli("simulate --config " + q(bad_cfg) + " --out " + q(sag), bad_cfg.parent_path() / "s.log").code == 0);
  const Run breach = cli("verify-constraint --config " + q(cfg) + " --frames " + q(sag), bad_cfg.parent_path() / "b.log");
  CHECK(breach.code == 3);
  CHECK(breach.output.find("exceeds") != std::string::npos);
}

TEST_CASE("config errors exit with 1") {
  const fs::path cfg = prepare("lbs_2d", "noweights", 5, [](json& j) { j["rig"]["weights"] = "absent.dmat"; });
  const Run r = cli("simulate --config " + q(cfg), cfg.parent_path() / "r.log");
  CHECK(r.code == 1);
  CHECK(r.output.find("absent.dmat") != std::string::npos);

  const Run missing = cli("simulate --config " + q(cfg.parent_path() / "nope.json"), cfg.parent_path() / "m.log");
  CHECK(missing.code == 1);
}

TEST_CASE("gradient check and its negative control") {
  const fs::path cfg = prepare("bar_3d", "grad", 2);
  const Run ok = cli("check-gradients --config " + q(cfg), cfg.parent_path() / "ok.log");
  CHECK(ok.code == 0);
  CHECK(ok.output.find("neohookean") != std::string::npos);
  const Run bad = cli("check-gradients --corrupt-gradient --config " + q(cfg), cfg.parent_path() / "bad.log");
  CHECK(bad.code == 3);
  CHECK(bad.output.find("gradient check failed") != std::string::npos);
}

TEST_CASE("oracle") {
  // A coarse 2D scenario well under the dof cap.
  const fs::path dir = scratch("oracle");
  std::ofstream obj(dir / "sq.obj");
  obj << "v 0 0 0\nv 1 0 0\nv 2 0 0\nv 0 1 0\nv 1 1 0\nv 2 1 0\nv 0 2 0\nv 1 2 0\nv 2 2 0\n"
         "f 1 2 5\nf 1 5 4\nf 2 3 6\nf 2 6 5\nf 4 5 8\nf 4 8 7\nf 5 6 9\nf 5 9 8\n";
  obj.close();
  json frames = json::array();
  for (int k = 0; k < 8; ++k) {
    const double t = k / 60.0;
    frames.push_back({{"t", t}, {"p", {1.0 + 0.1 * t, 0.0, 0.5 * t * t, 0.0, 1.0, 0.0}}});
  }
  std::ofstream(dir / "anim.json") << json{{"m", 6}, {"frames", frames}}.dump();
  json cfg = {{"name", "small"},
              {"mesh", {{"obj", "sq.obj"}}},
              {"model", {{"kind", "neohookean"}, {"youngs", 100.0}, {"poisson", 0.3}}},
              {"rig", {{"kind", "affine"}}},
              {"animation", "anim.json"},
              {"momentum_leak", {{"mode", "poisson"}, {"value", 0.2}}},
              {"forces", json::array({{{"kind", "gravity"}, {"g", {0.0, -9.8}}}})}};
  std::ofstream(dir / "config.json") << cfg.dump(2);
  const Run ok = cli("oracle --config " + q(dir / "config.json"), dir / "o.log");
  CHECK(ok.code == 0);
  CHECK(ok.output.find("KKT solves compared") != std::string::npos);

  const fs::path big = prepare("worm", "oracle_big", 3);
  const Run cap = cli("oracle --config " + q(big), big.parent_path() / "c.log");
  CHECK(cap.code == 1);
  CHECK(cap.output.find("at most 300 dofs") != std::string::npos);
}

TEST_CASE("usage errors") {
  const fs::path dir = scratch("usage");
  CHECK(cli("", dir / "a.log").code != 0);
  CHECK(cli("simulate", dir / "b.log").code != 0);
}
