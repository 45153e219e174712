#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "compdyn/error.hpp"
#include "compdyn/mesh.hpp"

namespace compdyn {
namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

// Strips comments and returns the next non-empty line; false at EOF.
bool next_data_line(std::istream& in, std::string& line, int& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
  }
  return false;
}

int parse_obj_index(const std::string& token, Eigen::Index vertex_count, const std::string& where) {
  const std::string head = token.substr(0, token.find('/'));
  int idx = 0;
  try {
    std::size_t used = 0;
    idx = std::stoi(head, &used);
    if (used != head.size()) throw std::invalid_argument(head);
  } catch (const std::exception&) {
    throw ParseError("bad face index '" + token + "' " + where);
  }
  // negative OBJ indices count back from the most recent vertex
  const long resolved = idx < 0 ? static_cast<long>(vertex_count) + idx : static_cast<long>(idx) - 1;
  if (resolved < 0 || resolved >= vertex_count)
    throw ParseError("face index " + token + " out of range " + where);
  return static_cast<int>(resolved);
}

struct ObjData {
  std::vector<std::array<double, 3>> vertices;
  std::vector<std::array<int, 3>> faces;
};

ObjData parse_obj(const std::filesystem::path& path, bool want_faces) {
  auto in = open_input(path);
  ObjData data;
  std::string line;
  int line_no = 0;
  while (next_data_line(in, line, line_no)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    const std::string where = "at line " + std::to_string(line_no) + " of " + path.string();
    if (tag == "v") {
      std::array<double, 3> p{0.0, 0.0, 0.0};
      if (!(ls >> p[0] >> p[1])) throw ParseError("bad vertex record " + where);
      if (!(ls >> p[2])) p[2] = 0.0;
      data.vertices.push_back(p);
    } else if (tag == "f" && want_faces) {
      std::vector<std::string> tokens;
      for (std::string tok; ls >> tok;) tokens.push_back(tok);
      if (tokens.size() != 3) throw ParseError("non-triangle face " + where);
      std::array<int, 3> f{};
      const auto n = static_cast<Eigen::Index>(data.vertices.size());
      for (int k = 0; k < 3; ++k) f[k] = parse_obj_index(tokens[k], n, where);
      data.faces.push_back(f);
    }
  }
  return data;
}

Eigen::MatrixXd to_matrix(const std::vector<std::array<double, 3>>& pts) {
  bool planar = true;
  for (const auto& p : pts) planar = planar && p[2] == 0.0;
  const int dim = planar ? 2 : 3;
  Eigen::MatrixXd V(static_cast<Eigen::Index>(pts.size()), dim);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (int c = 0; c < dim; ++c) V(static_cast<Eigen::Index>(i), c) = pts[i][c];
  return V;
}

}  // namespace

Mesh load_tri_obj(const std::filesystem::path& path) {
  const ObjData data = parse_obj(path, true);
  if (data.vertices.empty()) throw ParseError("no vertices in " + path.string());
  if (data.faces.empty()) throw ParseError("no faces in " + path.string());
  Eigen::MatrixXd V = to_matrix(data.vertices);
  if (V.cols() != 2)
    throw ParseError("triangle mesh " + path.string() + " is not planar (z != 0); 3D input needs .node/.ele");
  Eigen::MatrixXi F(static_cast<Eigen::Index>(data.faces.size()), 3);
  for (std::size_t f = 0; f < data.faces.size(); ++f)
    for (int k = 0; k < 3; ++k) F(static_cast<Eigen::Index>(f), k) = data.faces[f][k];
  return Mesh(std::move(V), std::move(F));
}

Eigen::MatrixXd load_obj_vertices(const std::filesystem::path& path) {
  const ObjData data = parse_obj(path, false);
  if (data.vertices.empty()) throw ParseError("no vertices in " + path.string());
  return to_matrix(data.vertices);
}

Mesh load_tet_mesh(const std::filesystem::path& node_path, const std::filesystem::path& ele_path) {
  std::string line;
  int line_no = 0;

  auto node_in = open_input(node_path);
  if (!next_data_line(node_in, line, line_no)) throw ParseError("empty node file " + node_path.string());
  long n = 0, dim = 0;
  {
    std::istringstream hs(line);
    if (!(hs >> n >> dim) || n <= 0) throw ParseError("bad .node header in " + node_path.string());
    if (dim != 3) throw ParseError(".node dimension must be 3 in " + node_path.string());
  }
  Eigen::MatrixXd V(n, 3);
  int base = -1;
  for (long i = 0; i < n; ++i) {
    if (!next_data_line(node_in, line, line_no))
      throw ParseError(node_path.string() + ": header declares " + std::to_string(n) +
                       " nodes but only " + std::to_string(i) + " present");
    std::istringstream ls(line);
    long idx = 0;
    if (!(ls >> idx >> V(i, 0) >> V(i, 1) >> V(i, 2)))
      throw ParseError("bad node record at line " + std::to_string(line_no) + " of " + node_path.string());
    if (i == 0) {
      if (idx != 0 && idx != 1) throw ParseError("first node index must be 0 or 1 in " + node_path.string());
      base = static_cast<int>(idx);
    }
    if (idx != i + base)
      throw ParseError("node index " + std::to_string(idx) + " out of sequence at line " +
                       std::to_string(line_no) + " of " + node_path.string());
  }
  if (next_data_line(node_in, line, line_no))
    throw ParseError(node_path.string() + ": more node records than the header count " + std::to_string(n));

  line_no = 0;
  auto ele_in = open_input(ele_path);
  if (!next_data_line(ele_in, line, line_no)) throw ParseError("empty ele file " + ele_path.string());
  long m = 0, per = 0;
  {
    std::istringstream hs(line);
    if (!(hs >> m >> per) || m <= 0) throw ParseError("bad .ele header in " + ele_path.string());
    if (per != 4) throw ParseError(".ele must list 4 nodes per tetrahedron in " + ele_path.string());
  }
  Eigen::MatrixXi T(m, 4);
  for (long e = 0; e < m; ++e) {
    if (!next_data_line(ele_in, line, line_no))
      throw ParseError(ele_path.string() + ": header declares " + std::to_string(m) +
                       " elements but only " + std::to_string(e) + " present");
    std::istringstream ls(line);
    long idx = 0;
    long v[4];
    if (!(ls >> idx >> v[0] >> v[1] >> v[2] >> v[3]))
      throw ParseError("bad element record at line " + std::to_string(line_no) + " of " + ele_path.string());
    for (int k = 0; k < 4; ++k) {
      const long local = v[k] - base;
      if (local < 0 || local >= n)
        throw ParseError("element " + std::to_string(idx) + " references vertex " + std::to_string(v[k]) +
                         " out of range at line " + std::to_string(line_no) + " of " + ele_path.string());
      T(e, k) = static_cast<int>(local);
    }
  }
  if (next_data_line(ele_in, line, line_no))
    throw ParseError(ele_path.string() + ": more element records than the header count " + std::to_string(m));
  return Mesh(std::move(V), std::move(T));
}

void write_obj(const std::filesystem::path& path, const Eigen::MatrixXd& vertices,
               const Eigen::MatrixXi& faces) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw Error("cannot write " + path.string());
  for (Eigen::Index i = 0; i < vertices.rows(); ++i) {
    const double z = vertices.cols() > 2 ? vertices(i, 2) : 0.0;
    std::fprintf(f, "v %.17g %.17g %.17g\n", vertices(i, 0), vertices(i, 1), z);
  }
  for (Eigen::Index i = 0; i < faces.rows(); ++i) {
    std::fputc('f', f);
    for (Eigen::Index k = 0; k < faces.cols(); ++k) std::fprintf(f, " %d", faces(i, k) + 1);
    std::fputc('\n', f);
  }
  if (std::fclose(f) != 0) throw Error("failed writing " + path.string());
}

Eigen::MatrixXd read_dmat(const std::filesystem::path& path) {
  auto in = open_input(path);
  long cols = 0, rows = 0;
  if (!(in >> cols >> rows) || cols < 0 || rows < 0) throw ParseError("bad DMAT header in " + path.string());
  Eigen::MatrixXd M(rows, cols);
  for (long c = 0; c < cols; ++c)
    for (long r = 0; r < rows; ++r)
      if (!(in >> M(r, c)))
        throw ParseError(path.string() + ": expected " + std::to_string(rows * cols) + " DMAT values");
  return M;
}

void write_dmat(const std::filesystem::path& path, const Eigen::MatrixXd& matrix) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw Error("cannot write " + path.string());
  std::fprintf(f, "%ld %ld\n", static_cast<long>(matrix.cols()), static_cast<long>(matrix.rows()));
  for (Eigen::Index c = 0; c < matrix.cols(); ++c)
    for (Eigen::Index r = 0; r < matrix.rows(); ++r) std::fprintf(f, "%.17g\n", matrix(r, c));
  if (std::fclose(f) != 0) throw Error("failed writing " + path.string());
}

}  // namespace compdyn
