#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <vector>

#include "compdyn/mesh.hpp"

namespace testing {

// nx x ny grid of unit-less squares over [0, w] x [0, h], two triangles each.
inline compdyn::Mesh grid2d(int nx, int ny, double w = 1.0, double h = 1.0) {
  Eigen::MatrixXd V((nx + 1) * (ny + 1), 2);
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) V.row(j * (nx + 1) + i) << w * i / nx, h * j / ny;
  Eigen::MatrixXi F(2 * nx * ny, 3);
  int f = 0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int a = j * (nx + 1) + i, b = a + 1, c = a + nx + 2, d = a + nx + 1;
      F.row(f++) << a, b, c;
      F.row(f++) << a, c, d;
    }
  return compdyn::Mesh(V, F);
}

// n^3 cubes of side h, six tetrahedra per cube around the main diagonal.
inline compdyn::Mesh cube_grid(int n, double h = 1.0) {
  const int m = n + 1;
  Eigen::MatrixXd V(m * m * m, 3);
  auto idx = [m](int i, int j, int k) { return (k * m + j) * m + i; };
  for (int k = 0; k < m; ++k)
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) V.row(idx(i, j, k)) << h * i, h * j, h * k;
  const int paths[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  Eigen::MatrixXi T(6 * n * n * n, 4);
  int t = 0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        for (const auto& path : paths) {
          int cur[3] = {i, j, k};
          T(t, 0) = idx(cur[0], cur[1], cur[2]);
          for (int s = 0; s < 3; ++s) {
            ++cur[path[s]];
            T(t, s + 1) = idx(cur[0], cur[1], cur[2]);
          }
          ++t;
        }
  return compdyn::Mesh(V, T);  // orientation is fixed by the constructor
}

inline compdyn::Mesh unit_tet() {
  Eigen::MatrixXd V(4, 3);
  V << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1;
  Eigen::MatrixXi T(1, 4);
  T << 0, 1, 2, 3;
  return compdyn::Mesh(V, T);
}

inline Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> uni(-scale, scale);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = uni(rng);
  return v;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> uni(-scale, scale);
  Eigen::MatrixXd M(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) M(i, j) = uni(rng);
  return M;
}

inline double max_abs(const Eigen::MatrixXd& A) { return A.size() ? A.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace testing
