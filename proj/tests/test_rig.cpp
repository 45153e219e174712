#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "compdyn/constraint.hpp"
#include "compdyn/error.hpp"
#include "compdyn/rig.hpp"
#include "helpers.hpp"

using namespace compdyn;

namespace {

Eigen::VectorXd affine_pose(const Eigen::MatrixXd& A, const Eigen::VectorXd& t) {
  const auto d = A.rows();
  Eigen::VectorXd p(d * (d + 1));
  for (Eigen::Index r = 0; r < d; ++r) {
    p.segment(r * (d + 1), d) = A.row(r).transpose();
    p[r * (d + 1) + d] = t[r];
  }
  return p;
}

// Per-vertex LBS written directly: x_i = sum_j w_ij T_j [v_i; 1].
Eigen::VectorXd lbs_oracle(const Mesh& m, const Eigen::MatrixXd& W, const Eigen::VectorXd& p) {
  const int d = m.dim();
  const auto n = m.vertex_count();
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, d);
  for (Eigen::Index j = 0; j < W.cols(); ++j) {
    Eigen::MatrixXd T(d, d + 1);
    for (int r = 0; r < d; ++r) T.row(r) = p.segment(j * d * (d + 1) + r * (d + 1), d + 1).transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd vh(d + 1);
      vh << m.vertices().row(i).transpose(), 1.0;
      X.row(i) += W(i, j) * (T * vh).transpose();
    }
  }
  return flatten(X - m.vertices());
}

Eigen::MatrixXd row_normalized(Eigen::MatrixXd W) {
  for (Eigen::Index i = 0; i < W.rows(); ++i) W.row(i) /= W.row(i).sum();
  return W;
}

}  // namespace

TEST_CASE("affine rig") {
  SUBCASE("single vertex Jacobian") {
    Eigen::MatrixXd V(3, 2);
    V << 3, 4, 5, 4, 3, 6;
    Eigen::MatrixXi F(1, 3);
    F << 0, 1, 2;
    const Mesh m(V, F);
    const auto rig = affine_rig(m);
    const Eigen::MatrixXd& J = rig->matrix();
    CHECK(J.rows() == 6);
    CHECK(J.cols() == 6);
    Eigen::RowVectorXd rx(6), ry(6);
    rx << 3, 4, 1, 0, 0, 0;
    ry << 0, 0, 0, 3, 4, 1;
    CHECK(J.row(0) == rx);  // vertex 0, x
    CHECK(J.row(3) == ry);  // vertex 0, y
  }
  const Mesh m = testing::grid2d(3, 2);
  const auto rig = affine_rig(m);
  SUBCASE("identity and translation") {
    REQUIRE(rig->rest_pose());
    CHECK(rig->eval(*rig->rest_pose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::VectorXd t(2);
    t << 0.25, -1.5;
    const Eigen::VectorXd u = rig->eval(affine_pose(Eigen::MatrixXd::Identity(2, 2), t));
    const auto n = m.vertex_count();
    CHECK((u.head(n).array() - 0.25).abs().maxCoeff() < 1e-15);
    CHECK((u.tail(n).array() + 1.5).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("linear consistency") {
    std::mt19937_64 rng(1);
    const Eigen::VectorXd p = testing::random_vector(6, rng), q = testing::random_vector(6, rng);
    CHECK((rig->eval(p) - rig->eval(q) - rig->matrix() * (p - q)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("wrong pose length") { CHECK_THROWS_AS(rig->eval(Eigen::VectorXd::Zero(5)), InvalidArgument); }
}

TEST_CASE("LBS rig") {
  const Mesh m = testing::grid2d(4, 2, 2.0, 1.0);
  std::mt19937_64 rng(2);
  SUBCASE("one bone with unit weights is the affine rig") {
    const auto lbs = lbs_rig(m, Eigen::MatrixXd::Ones(m.vertex_count(), 1));
    CHECK(lbs->matrix() == affine_rig(m)->matrix());
    CHECK(lbs->offset() == affine_rig(m)->offset());
    CHECK(lbs->warnings().empty());
  }
  SUBCASE("bones translated together") {
    const Eigen::MatrixXd W = row_normalized(testing::random_matrix(m.vertex_count(), 3, rng).array().abs() + 0.1);
    const auto lbs = lbs_rig(m, W);
    CHECK(lbs->warnings().empty());
    Eigen::VectorXd t(2);
    t << -0.7, 0.2;
    const Eigen::VectorXd one = affine_pose(Eigen::MatrixXd::Identity(2, 2), t);
    Eigen::VectorXd p(18);
    p << one, one, one;
    const Eigen::VectorXd u = lbs->eval(p);
    const auto n = m.vertex_count();
    CHECK((u.head(n).array() + 0.7).abs().maxCoeff() < 1e-12);
    CHECK((u.tail(n).array() - 0.2).abs().maxCoeff() < 1e-12);
    CHECK(lbs->eval(*lbs->rest_pose()).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("random weights and pose against the per-vertex sum") {
    const Eigen::MatrixXd W = testing::random_matrix(m.vertex_count(), 2, rng);
    const auto lbs = lbs_rig(m, W);
    CHECK(lbs->warnings().size() == 1);
    const Eigen::VectorXd p = testing::random_vector(12, rng);
    CHECK((lbs->eval(p) - lbs_oracle(m, W, p)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("shape mismatch") { CHECK_THROWS_AS(lbs_rig(m, Eigen::MatrixXd::Ones(3, 2)), InvalidArgument); }
}

TEST_CASE("cage rig") {
  // unit square cage, mesh vertex at the center with bilinear weights
  Eigen::MatrixXd cage(4, 2);
  cage << 0, 0, 1, 0, 1, 1, 0, 1;
  Eigen::MatrixXd V(4, 2);
  V << 0.5, 0.5, 0.25, 0.25, 0.75, 0.25, 0.5, 0.75;
  Eigen::MatrixXi F(2, 3);
  F << 1, 2, 0, 1, 0, 3;
  const Mesh m(V, F);
  Eigen::MatrixXd W(4, 4);
  for (Eigen::Index i = 0; i < 4; ++i) {
    const double x = V(i, 0), y = V(i, 1);
    W.row(i) << (1 - x) * (1 - y), x * (1 - y), x * y, (1 - x) * y;
  }
  const auto rig = cage_rig(m, W, cage);
  CHECK(rig->warnings().empty());
  CHECK(rig->parameter_count() == 8);
  const Eigen::VectorXd rest = flatten(cage);
  CHECK(rig->eval(rest).cwiseAbs().maxCoeff() < 1e-15);
  SUBCASE("translated cage") {
    Eigen::MatrixXd moved = cage;
    moved.col(0).array() += 2.0;
    moved.col(1).array() -= 1.0;
    const Eigen::VectorXd u = rig->eval(flatten(moved));
    CHECK((u.head(4).array() - 2.0).abs().maxCoeff() < 1e-14);
    CHECK((u.tail(4).array() + 1.0).abs().maxCoeff() < 1e-14);
  }
  SUBCASE("one corner moved by (1, 0)") {
    Eigen::MatrixXd moved = cage;
    moved(2, 0) += 1.0;
    const Eigen::VectorXd u = rig->eval(flatten(moved));
    CHECK(u[0] == doctest::Approx(0.25));
    CHECK(u[4] == doctest::Approx(0.0));
  }
  SUBCASE("bad weights warn") {
    Eigen::MatrixXd Wb = W;
    Wb(0, 0) += 0.1;
    CHECK_FALSE(cage_rig(m, Wb, cage)->warnings().empty());
  }
}

TEST_CASE("blendshape rig") {
  const Mesh m = testing::grid2d(2, 2);
  std::mt19937_64 rng(5);
  std::vector<Eigen::MatrixXd> poses;
  for (int j = 0; j < 3; ++j) poses.push_back(m.vertices() + testing::random_matrix(m.vertex_count(), 2, rng, 0.2));
  const auto rig = blendshape_rig(m.vertices(), poses);
  const Eigen::VectorXd v = m.rest_vector();
  CHECK((rig->eval(Eigen::VectorXd::Unit(3, 1)) - (flatten(poses[1]) - v)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((rig->eval(Eigen::VectorXd::Zero(3)) + v).cwiseAbs().maxCoeff() == 0.0);
  Eigen::VectorXd w(3);
  w << 0.5, 0.5, 0.0;
  CHECK((rig->eval(w) - (0.5 * (flatten(poses[0]) + flatten(poses[1])) - v)).cwiseAbs().maxCoeff() < 1e-15);
  poses.push_back(Eigen::MatrixXd::Zero(2, 2));
  CHECK_THROWS_AS(blendshape_rig(m.vertices(), poses), InvalidArgument);
}

TEST_CASE("finite-difference Jacobians") {
  const Mesh m = testing::grid2d(3, 3);
  std::mt19937_64 rng(8);
  const auto lbs = lbs_rig(m, testing::random_matrix(m.vertex_count(), 2, rng));
  const Eigen::VectorXd p = testing::random_vector(12, rng);
  CHECK(testing::max_abs(fd_jacobian(*lbs, p, 1e-5).J - lbs->matrix()) < 1e-6);
  const Eigen::MatrixXd J3 = fd_jacobian(*lbs, p, 1e-3).J;
  for (double eps : {1e-5, 1e-7}) CHECK(testing::max_abs(fd_jacobian(*lbs, p, eps).J - J3) < 1e-6);

  // u(p) = p0^2 g: column 0 = 2 p0 g, second-order accurate
  std::mt19937_64 rng2(9);
  const Eigen::VectorXd g = testing::random_vector(10, rng2);
  ExternalRig quad(2, 10, [g](const Eigen::VectorXd& q) { return Eigen::VectorXd(q[0] * q[0] * g + q[1] * g); });
  Eigen::VectorXd q(2);
  q << 0.7, 0.1;
  const Eigen::MatrixXd J = fd_jacobian(quad, q, 1e-4).J;
  CHECK(((J.col(0) - 1.4 * g).cwiseAbs().maxCoeff()) < 1e-10);
  CHECK(((J.col(1) - g).cwiseAbs().maxCoeff()) < 1e-10);
  CHECK(testing::max_abs(quad.jacobian(q).J - J) < 1e-6);
  CHECK_FALSE(quad.is_linear());

  ExternalRig broken(1, 2, [](const Eigen::VectorXd& q) {
    return Eigen::VectorXd::Constant(2, q[0] > 0 ? std::nan("") : 0.0);
  });
  CHECK_THROWS_AS(fd_jacobian(broken, Eigen::VectorXd::Zero(1), 1e-3), SolverError);
}

TEST_CASE("command rig") {
  const auto dir = std::filesystem::temp_directory_path() / "compdyn_test_rig";
  std::filesystem::create_directories(dir);
  const auto script = dir / "double.sh";
  {
    std::ofstream out(script);
    out << "#!/bin/sh\nawk '{ print 2 * $1; print -$1 }' \"$1\" > \"$2\"\n";
  }
  std::filesystem::permissions(script, std::filesystem::perms::owner_all);
  const auto rig = command_rig(script.string(), 2, 4);
  Eigen::VectorXd p(2);
  p << 1.5, -0.25;
  Eigen::VectorXd expect(4);
  expect << 3.0, -1.5, -0.5, 0.25;
  CHECK((rig->eval(p) - expect).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(rig->jacobian(p).J.cols() == 2);
  CHECK_THROWS(command_rig(script.string(), 3, 4)->eval(Eigen::VectorXd::Zero(3)));
}

TEST_CASE("rig parameter recovery") {
  const Mesh m = testing::grid2d(4, 3);
  const LumpedMassMatrix M = lumped_mass(m, 1.7);
  std::mt19937_64 rng(10);
  const auto lbs = lbs_rig(m, row_normalized(testing::random_matrix(m.vertex_count(), 2, rng).array().abs() + 0.2));
  const Eigen::VectorXd p = testing::random_vector(12, rng);
  const Eigen::MatrixXd& J = lbs->matrix();

  CHECK((recover_rig_params(*lbs, M, lbs->eval(p)).p - p).cwiseAbs().maxCoeff() < 1e-10);

  // project a random vector onto ker(J'M) with the M-orthogonal projector
  const Eigen::MatrixXd JtM = J.transpose() * M.diag.asDiagonal();
  const Eigen::VectorXd r = testing::random_vector(m.dof_count(), rng);
  const Eigen::VectorXd uc = r - J * (JtM * J).ldlt().solve(JtM * r);
  REQUIRE((JtM * uc).cwiseAbs().maxCoeff() < 1e-12);
  const RecoveredPose q = recover_rig_params(*lbs, M, lbs->eval(p) + uc);
  CHECK((q.p - p).cwiseAbs().maxCoeff() < 1e-8);
  CHECK_FALSE(q.rank_deficient);

  const Eigen::VectorXd delta = testing::random_vector(12, rng, 0.1);
  CHECK((recover_rig_params(*lbs, M, lbs->eval(p) + J * delta).p - (p + delta)).cwiseAbs().maxCoeff() < 1e-10);

  SUBCASE("rank-deficient Jacobian takes the least-norm path") {
    // two bones with identical weights: columns repeat
    const auto dup = lbs_rig(m, Eigen::MatrixXd::Constant(m.vertex_count(), 2, 0.5));
    const RecoveredPose rq = recover_rig_params(*dup, M, dup->eval(p));
    CHECK(rq.rank_deficient);
    CHECK((dup->eval(rq.p) - dup->eval(p)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("harmonic extension") {
  const Mesh m = testing::grid2d(5, 4, 1.0, 1.0);
  const HarmonicExtension ext(m);
  const auto& b = ext.boundary();
  Eigen::MatrixXd B(b.size(), 2);
  for (std::size_t k = 0; k < b.size(); ++k) B.row(static_cast<Eigen::Index>(k)) << 0.3, -2.0;
  const Eigen::MatrixXd U = ext.extend(B);
  CHECK(((U.col(0).array() - 0.3).abs().maxCoeff()) < 1e-12);
  CHECK(((U.col(1).array() + 2.0).abs().maxCoeff()) < 1e-12);

  // linear precision on a structured grid
  Eigen::Matrix2d A;
  A << 1.2, 0.4, -0.3, 0.9;
  const Eigen::Vector2d t(0.5, -0.1);
  const Eigen::MatrixXd lin = (m.vertices() * A.transpose()).rowwise() + t.transpose();
  for (std::size_t k = 0; k < b.size(); ++k) B.row(static_cast<Eigen::Index>(k)) = lin.row(b[k]);
  CHECK(testing::max_abs(ext.extend(B) - lin) < 1e-8);

  // no interior vertices: identity
  const Mesh strip = testing::grid2d(3, 1);
  Eigen::MatrixXd S = strip.vertices();
  CHECK(testing::max_abs(harmonic_extension(strip, S) - S) == 0.0);

  CHECK_THROWS_AS(ext.extend(Eigen::MatrixXd::Zero(3, 2)), InvalidArgument);
}

TEST_CASE("harmonically extended rig") {
  const Mesh m = testing::cube_grid(2, 0.5);
  const auto b = boundary_vertices(m);
  Eigen::MatrixXd Vb(b.size(), 3);
  for (std::size_t k = 0; k < b.size(); ++k) Vb.row(static_cast<Eigen::Index>(k)) = m.vertices().row(b[k]);
  // affine rig over the boundary vertices, written out by hand
  const auto nb = static_cast<Eigen::Index>(b.size());
  Eigen::MatrixXd Jb = Eigen::MatrixXd::Zero(3 * nb, 12);
  for (Eigen::Index i = 0; i < nb; ++i)
    for (int c = 0; c < 3; ++c) {
      Jb.block(c * nb + i, c * 4, 1, 3) = Vb.row(i);
      Jb(c * nb + i, c * 4 + 3) = 1.0;
    }
  auto surface = std::make_shared<LinearRig>(RigKind::Affine, Jb, -flatten(Vb));
  const HarmonicallyExtendedRig rig(m, surface);
  std::mt19937_64 rng(12);
  const Eigen::VectorXd p = testing::random_vector(12, rng);
  // affine motion is harmonic, so the extension equals the volume affine rig
  CHECK((rig.eval(p) - affine_rig(m)->eval(p)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(testing::max_abs(rig.jacobian(p).J - affine_rig(m)->matrix()) < 1e-10);
  CHECK(rig.is_linear());
}

TEST_CASE("momentum leak") {
  SUBCASE("identity and constant") {
    CHECK(MomentumLeak::identity(6).is_identity());
    CHECK_FALSE(MomentumLeak::constant(6, 0.5).is_identity());
    CHECK_THROWS_AS(MomentumLeak::constant(6, 1.5), InvalidArgument);
  }
  SUBCASE("no interior vertices gives D = I") {
    const Mesh tri = testing::grid2d(2, 1);
    CHECK(build_momentum_leak(tri, {LeakMode::Poisson, 0.0}).is_identity());
  }
  SUBCASE("one interior vertex takes the configured value") {
    const Mesh m = testing::cube_grid(2, 1.0);
    const MomentumLeak D = build_momentum_leak(m, {LeakMode::Poisson, 0.25});
    const auto n = m.vertex_count();
    for (int c = 0; c < 3; ++c)
      for (Eigen::Index i = 0; i < n; ++i) CHECK(D.d[c * n + i] == doctest::Approx(i == 13 ? 0.25 : 1.0));
  }
  SUBCASE("Poisson field on a grid lies in [value, 1] and peaks inside") {
    const Mesh m = testing::grid2d(8, 8);
    const MomentumLeak D = build_momentum_leak(m, {LeakMode::Poisson, 0.0});
    CHECK(D.d.minCoeff() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(D.d.maxCoeff() == 1.0);
    Eigen::Index arg;
    D.d.head(m.vertex_count()).minCoeff(&arg);
    CHECK(arg == 4 * 9 + 4);  // grid center
  }
}

TEST_CASE("constraint assembly") {
  SUBCASE("J = M = D = I") {
    Eigen::MatrixXd V(3, 2);
    V << 0, 0, 1, 0, 0, 1;
    Eigen::MatrixXi F(1, 3);
    F << 0, 1, 2;
    const Mesh m(V, F);
    LumpedMassMatrix M{Eigen::VectorXd::Ones(6), 1.0};
    RigJacobian J{Eigen::MatrixXd::Identity(6, 6), Eigen::VectorXd::Zero(6)};
    CHECK(assemble_constraint(J, M, MomentumLeak::identity(6)).C == Eigen::MatrixXd::Identity(6, 6));
    CHECK(testing::max_abs(assemble_constraint(J, M, MomentumLeak::constant(6, 0.0)).C) == 0.0);
  }
  SUBCASE("random J, lumped M, Poisson D") {
    const Mesh m = testing::grid2d(4, 4);
    const LumpedMassMatrix M = lumped_mass(m, 0.8);
    const MomentumLeak D = build_momentum_leak(m, {LeakMode::Poisson, 0.3});
    std::mt19937_64 rng(13);
    RigJacobian J{testing::random_matrix(m.dof_count(), 5, rng), Eigen::VectorXd::Zero(5)};
    const Eigen::MatrixXd C = assemble_constraint(J, M, D).C;
    REQUIRE(C.rows() == 5);
    double worst = 0.0;
    for (Eigen::Index r = 0; r < 5; ++r)
      for (Eigen::Index k = 0; k < m.dof_count(); ++k)
        worst = std::max(worst, std::abs(C(r, k) - J.J(k, r) * M.diag[k] * D.d[k]));
    CHECK(worst < 1e-15);
  }
}

TEST_CASE("embedded surface constraint") {
  const Mesh m = testing::grid2d(4, 4);
  const auto bf = boundary_facets(m);
  // surface = the boundary vertices of the mesh itself
  const auto b = boundary_vertices(m);
  Eigen::MatrixXd P(b.size(), 2);
  std::map<int, int> local;
  for (std::size_t k = 0; k < b.size(); ++k) {
    P.row(static_cast<Eigen::Index>(k)) = m.vertices().row(b[k]);
    local[b[k]] = static_cast<int>(k);
  }
  Eigen::MatrixXi facets(bf.rows(), 2);
  for (Eigen::Index f = 0; f < bf.rows(); ++f) facets.row(f) << local[bf(f, 0)], local[bf(f, 1)];
  const EmbeddedSurface surf = embed_surface(m, P, facets, 1.0);
  const Eigen::MatrixXd S = Eigen::MatrixXd(surf.S);
  CHECK(S.minCoeff() >= 0.0);
  CHECK((S.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK(surf.M_sur.sum() == doctest::Approx(2 * 4.0));  // perimeter, per coordinate

  std::mt19937_64 rng(14);
  const Eigen::MatrixXd Jsur = testing::random_matrix(S.rows(), 4, rng);
  const LumpedMassMatrix M = lumped_mass(m, 1.0);
  for (auto mode : {SurfaceMassMode::SurfaceMass, SurfaceMassMode::VolumeMass}) {
    const Eigen::MatrixXd C = build_surface_constraint(surf, Jsur, nullptr, mode, &M).C;
    const Eigen::MatrixXd N = C.fullPivLu().kernel();
    const Eigen::VectorXd uc = N * testing::random_vector(N.cols(), rng);
    CHECK((C * uc).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("S = identity reduces to the standard constraint") {
    const Eigen::MatrixXd all = m.vertices();
    const EmbeddedSurface id = embed_surface(m, all, Eigen::MatrixXi(0, 2), 1.0);
    CHECK(testing::max_abs(Eigen::MatrixXd(id.S) - Eigen::MatrixXd::Identity(m.dof_count(), m.dof_count())) < 1e-12);
    const Eigen::MatrixXd J = testing::random_matrix(m.dof_count(), 3, rng);
    const Eigen::MatrixXd Cv = build_surface_constraint(id, J, nullptr, SurfaceMassMode::VolumeMass, &M).C;
    const Eigen::MatrixXd Cs = assemble_constraint({J, Eigen::VectorXd::Zero(3)}, M, MomentumLeak::identity(m.dof_count())).C;
    CHECK(testing::max_abs(Cv - Cs) < 1e-15);
  }
  Eigen::MatrixXd outside(1, 2);
  outside << 3.0, 3.0;
  CHECK_THROWS_AS(embed_surface(m, outside, Eigen::MatrixXi(0, 2), 1.0), InvalidArgument);
}
