#include "bestmat/assembly.hpp"
#include "bestmat/elliptic.hpp"
#include "bestmat/fe_ops.hpp"
#include "bestmat/laplace_solver.hpp"
#include "bestmat/linear_solver.hpp"
#include "bestmat/mesh.hpp"
#include "bestmat/rhs_basis.hpp"

#include <Eigen/Sparse>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace bestmat;

namespace {

const double pi = std::numbers::pi;

// Element stiffness from barycentric gradients of arbitrary vertex coordinates.
Eigen::Matrix3d element_stiffness(const std::array<Point2, 3> &v, const Sym2 &a) {
  Eigen::Matrix3d B;
  for (int k = 0; k < 3; ++k) B.row(k) << 1.0, v[k].x, v[k].y;
  const Eigen::Matrix3d C = B.inverse();  // column k: coefficients of phi_k
  const double area = 0.5 * std::abs(B.determinant());
  Eigen::Matrix2d A;
  A << a.xx, a.xy, a.xy, a.yy;
  Eigen::Matrix3d K;
  for (int r = 0; r < 3; ++r)
    for (int s = 0; s < 3; ++s) {
      const Eigen::Vector2d gr(C(1, r), C(2, r)), gs(C(1, s), C(2, s));
      K(r, s) = area * gr.dot(A * gs);
    }
  return K;
}

// Dense global stiffness over all nodes, no boundary treatment.
Eigen::MatrixXd dense_stiffness(const Mesh &mesh, const CoefficientField &field) {
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(mesh.node_count(), mesh.node_count());
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto idx = mesh.triangle(t);
    const std::array<Point2, 3> v{mesh.node(idx[0]), mesh.node(idx[1]), mesh.node(idx[2])};
    const Eigen::Matrix3d Ke = element_stiffness(v, field(mesh.barycenter(t)));
    for (int r = 0; r < 3; ++r)
      for (int s = 0; s < 3; ++s) K(idx[r], idx[s]) += Ke(r, s);
  }
  return K;
}

CoefficientField wavy_field() {
  return CoefficientField::custom(
      [](Point2 x) {
        const double s = std::sin(3.0 * x.x + 1.0) * std::cos(2.0 * x.y);
        return Sym2{2.0 + s, 0.3 * std::cos(x.x * x.y), 1.5 + 0.5 * s};
      },
      {0.5, 3.5}, 1.0);
}

}  // namespace

TEST(Mesh, CountsAndBoundary) {
  for (int n : {2, 3, 10}) {
    const Mesh mesh(n);
    EXPECT_EQ(mesh.node_count(), std::size_t((n + 1) * (n + 1)));
    EXPECT_EQ(mesh.triangle_count(), std::size_t(2 * n * n));
    std::size_t boundary = 0;
    for (std::size_t k = 0; k < mesh.node_count(); ++k) boundary += mesh.is_boundary_node(k);
    EXPECT_EQ(boundary, std::size_t(4 * n));
    EXPECT_EQ(mesh.boundary_node_count(), boundary);
  }
}

TEST(Mesh, TrianglesCoverSquareWithPositiveOrientation) {
  const Mesh mesh(5, {-1.0, 2.0}, 3.0);
  double area = 0.0;
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto v = mesh.triangle(t);
    const Point2 a = mesh.node(v[0]), b = mesh.node(v[1]), c = mesh.node(v[2]);
    const double signed_area = 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
    EXPECT_NEAR(signed_area, mesh.triangle_area(), 1e-14);
    area += signed_area;
    EXPECT_EQ(mesh.locate(mesh.barycenter(t), false), t);
  }
  EXPECT_NEAR(area, 9.0, 1e-12);
}

TEST(Mesh, BoundaryTriangleFlag) {
  const Mesh mesh(4);
  std::size_t interior = 0;
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto v = mesh.triangle(t);
    const bool expected = mesh.is_boundary_node(v[0]) || mesh.is_boundary_node(v[1]) || mesh.is_boundary_node(v[2]);
    EXPECT_EQ(mesh.is_boundary_triangle(t), expected);
    interior += !expected;
  }
  EXPECT_EQ(interior, 8u);
}

TEST(Mesh, GradientAndInterpolationExactForLinear) {
  const Mesh mesh(7, {0.5, -0.25}, 2.0);
  const FeFunction u = interpolate(mesh, [](Point2 p) { return 3.0 * p.x - 2.0 * p.y + 0.5; });
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto g = mesh.gradient(u.values, t);
    EXPECT_NEAR(g[0], 3.0, 1e-12);
    EXPECT_NEAR(g[1], -2.0, 1e-12);
  }
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int s = 0; s < 200; ++s) {
    const Point2 p{0.5 + 2.0 * U(rng), -0.25 + 2.0 * U(rng)};
    EXPECT_NEAR(mesh.interpolate(u.values, p, false), 3.0 * p.x - 2.0 * p.y + 0.5, 1e-12);
  }
}

TEST(Assembly, IdentityGivesFivePointStencil) {
  const Mesh mesh(6);
  const StencilMatrix K = assemble_stiffness(mesh, Sym2::identity());
  for (int j = 0; j <= 6; ++j)
    for (int i = 0; i <= 6; ++i) {
      const StencilEntry &s = K.at(i, j);
      EXPECT_DOUBLE_EQ(s.c, 4.0);
      EXPECT_DOUBLE_EQ(s.e, -1.0);
      EXPECT_DOUBLE_EQ(s.n, -1.0);
      EXPECT_DOUBLE_EQ(s.ne, 0.0);
    }
}

TEST(Assembly, MatchesDenseElementAssembly) {
  const Mesh mesh(6, {0.1, 0.2}, 0.9);
  const CoefficientField field = wavy_field();
  const StencilMatrix K = assemble_stiffness(mesh, field);
  const Eigen::MatrixXd D = dense_stiffness(mesh, field);
  for (std::size_t r = 0; r < mesh.node_count(); ++r)
    for (std::size_t c = 0; c < mesh.node_count(); ++c) {
      if (mesh.is_boundary_node(r) || mesh.is_boundary_node(c)) continue;
      EXPECT_NEAR(K.entry(r, c), D(r, c), 1e-12) << r << " " << c;
    }
}

TEST(Assembly, SymmetricAndLinearInCoefficient) {
  const Mesh mesh(8);
  const CoefficientField f = wavy_field();
  const CoefficientField g = CoefficientField::custom([&](Point2 x) { return 2.5 * f(x); }, {1.0, 9.0}, 1.0);
  const StencilMatrix K = assemble_stiffness(mesh, f), K2 = assemble_stiffness(mesh, g);
  for (std::size_t r = 0; r < mesh.node_count(); ++r)
    for (std::size_t c = 0; c < mesh.node_count(); ++c) {
      EXPECT_DOUBLE_EQ(K.entry(r, c), K.entry(c, r));
      EXPECT_NEAR(K2.entry(r, c), 2.5 * K.entry(r, c), 1e-12);
    }
}

TEST(Assembly, TiledStorageMatchesFullStorage) {
  const double eps = 0.25;
  const Mesh mesh(24);
  const CoefficientField per = periodic_test_field(eps);
  const CoefficientField full = CoefficientField::custom([&](Point2 x) { return per(x); }, per.bounds(), eps);
  const StencilMatrix A = assemble_stiffness(mesh, per), B = assemble_stiffness(mesh, full);
  EXPECT_EQ(A.tile_x(), 6);
  EXPECT_EQ(B.tile_x(), 25);
  for (int j = 1; j < 24; ++j)
    for (int i = 1; i < 24; ++i) {
      EXPECT_NEAR(A.at(i, j).c, B.at(i, j).c, 1e-12);
      EXPECT_NEAR(A.at(i, j).e, B.at(i, j).e, 1e-12);
      EXPECT_NEAR(A.at(i, j).n, B.at(i, j).n, 1e-12);
      EXPECT_NEAR(A.at(i, j).ne, B.at(i, j).ne, 1e-12);
    }
}

TEST(Assembly, RejectsIndefiniteCoefficient) {
  const Mesh mesh(4);
  const CoefficientField bad =
      CoefficientField::custom([](Point2 x) { return Sym2{x.x - 0.5, 0.0, 1.0}; }, {0.1, 1.0}, 1.0);
  EXPECT_THROW(assemble_stiffness(mesh, bad), std::invalid_argument);
}

TEST(FeOps, MassMatchesElementMatrices) {
  const Mesh mesh(5, {0.0, 0.0}, 2.0);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> N(0.0, 1.0);
  std::vector<double> u(mesh.node_count()), v(mesh.node_count());
  for (auto &x : u) x = N(rng);
  for (auto &x : v) x = N(rng);
  double ref = 0.0;
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto idx = mesh.triangle(t);
    for (int r = 0; r < 3; ++r)
      for (int s = 0; s < 3; ++s) ref += mesh.triangle_area() / 12.0 * (r == s ? 2.0 : 1.0) * u[idx[r]] * v[idx[s]];
  }
  EXPECT_NEAR(mass_inner(mesh, u, v), ref, 1e-12);
  const auto Mv = mass_apply(mesh, v);
  double viaapply = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) viaapply += u[k] * Mv[k];
  EXPECT_NEAR(viaapply, ref, 1e-12);
}

TEST(FeOps, SeparableLoadMatchesGenericLoad) {
  const Mesh mesh(9);
  const RhsBasis basis(5);
  for (int k = 0; k < basis.size(); ++k) {
    const auto a = basis.load(mesh, k);
    const auto b = assemble_load(mesh, [&](Point2 x) { return basis(k, x); });
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
  }
}

TEST(FeOps, LoadIntegratesQuadraticsExactly) {
  // sum_a b_a = int f for f quadratic
  const Mesh mesh(4, {0.0, 0.0}, 1.0);
  const auto b = assemble_load(mesh, [](Point2 p) { return p.x * p.x + 3.0 * p.x * p.y - p.y; });
  double s = 0.0;
  for (double v : b) s += v;
  EXPECT_NEAR(s, 1.0 / 3.0 + 0.75 - 0.5, 1e-14);
}

TEST(FeOps, DivergenceLoadIsStiffnessTimesNodalGradient) {
  // F = A grad v for a P1 v gives b = K v
  const Mesh mesh(6);
  const CoefficientField field = wavy_field();
  FeFunction v(mesh);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N(0.0, 1.0);
  for (auto &x : v.values) x = N(rng);
  ElementVectorField F(mesh.triangle_count());
  for (std::size_t t = 0; t < F.size(); ++t) {
    const auto g = mesh.gradient(v.values, t);
    F[t] = field(mesh.barycenter(t)).apply(g[0], g[1]);
  }
  const auto b = assemble_divergence_load(mesh, F);
  const Eigen::MatrixXd K = dense_stiffness(mesh, field);
  const Eigen::VectorXd ref = K * Eigen::Map<Eigen::VectorXd>(v.values.data(), v.values.size());
  for (std::size_t a = 0; a < b.size(); ++a) EXPECT_NEAR(b[a], ref[a], 1e-12);
}

TEST(LinearSolver, MultigridJacobiAndDirectAgree) {
  const Mesh mesh(64);
  const CoefficientField field = wavy_field();
  const StencilMatrix K = assemble_stiffness(mesh, field);
  const auto load = assemble_load(mesh, [](Point2 p) { return 1.0 + p.x * p.y; });

  LinearSolver mg(K, {SolverKind::multigrid_cg, 1e-12, 0});
  LinearSolver jac(K, {SolverKind::jacobi_cg, 1e-12, 0});
  EXPECT_GT(mg.levels(), 1);
  SolveInfo imgi, ijac;
  const auto x1 = mg.solve(load, &imgi);
  const auto x2 = jac.solve(load, &ijac);
  EXPECT_LT(imgi.iterations, 30);

  // sparse direct solve on interior unknowns
  const int m = K.grid();
  std::vector<int> idx(K.dimension(), -1);
  int nf = 0;
  for (int j = 1; j < m - 1; ++j)
    for (int i = 1; i < m - 1; ++i) idx[std::size_t(j) * m + i] = nf++;
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd rhs(nf);
  for (std::size_t r = 0; r < K.dimension(); ++r) {
    if (idx[r] < 0) continue;
    rhs[idx[r]] = load[r];
    for (std::size_t c : {r - m - 1, r - m, r - 1, r, r + 1, r + m, r + m + 1})
      if (idx[c] >= 0 && K.entry(r, c) != 0.0) trips.emplace_back(idx[r], idx[c], K.entry(r, c));
  }
  Eigen::SparseMatrix<double> S(nf, nf);
  S.setFromTriplets(trips.begin(), trips.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(S);
  const Eigen::VectorXd ref = ldlt.solve(rhs);
  double scale = ref.cwiseAbs().maxCoeff();
  for (std::size_t r = 0; r < K.dimension(); ++r) {
    const double expect = idx[r] < 0 ? 0.0 : ref[idx[r]];
    EXPECT_NEAR(x1[r], expect, 1e-9 * scale);
    EXPECT_NEAR(x2[r], expect, 1e-9 * scale);
  }
}

TEST(LinearSolver, PeriodicTiledMultigridSolvesConsistentSystem) {
  const Mesh mesh(96);
  const CoefficientField field = periodic_test_field(0.25);
  const StencilMatrix K = assemble_stiffness(mesh, field, Boundary::periodic);
  EXPECT_EQ(K.tile_x(), 24);
  auto load = fold_periodic(mesh, assemble_load(mesh, [](Point2 p) { return std::cos(2 * pi * p.x) + p.y; }));
  LinearSolver solver(K, {});
  SolveInfo info;
  const auto x = solver.solve(load, &info);
  EXPECT_LT(info.iterations, 40);
  double mean = 0.0;
  for (double v : x) mean += v;
  EXPECT_NEAR(mean / x.size(), 0.0, 1e-12);
  std::vector<double> Kx(x.size());
  K.apply(x, Kx);
  double lmean = 0.0;
  for (double v : load) lmean += v;
  lmean /= load.size();
  double err = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    err += std::pow(Kx[k] - (load[k] - lmean), 2);
    nb += std::pow(load[k] - lmean, 2);
  }
  EXPECT_LT(std::sqrt(err / nb), 1e-9);
}

TEST(LinearSolver, ReportsNonConvergence) {
  const Mesh mesh(32);
  const StencilMatrix K = assemble_stiffness(mesh, Sym2::identity());
  LinearSolver solver(K, {SolverKind::jacobi_cg, 1e-14, 3});
  try {
    solver.solve(assemble_load(mesh, [](Point2) { return 1.0; }));
    FAIL() << "expected SolveError";
  } catch (const SolveError &e) {
    EXPECT_EQ(e.info().iterations, 3);
    EXPECT_GT(e.info().relative_residual, 1e-14);
  }
}

TEST(LaplaceSolver, MatchesMultigridOnSameSystem) {
  for (int n : {16, 45}) {
    const Mesh mesh(n);
    const auto load = assemble_load(mesh, [](Point2 p) { return std::exp(p.x) * (1.0 - p.y); });
    const FeFunction a = LaplaceSolver(mesh).solve(load);
    const FeFunction b = solve_dirichlet(assemble_stiffness(mesh, Sym2::identity()), load, mesh, 1e-13);
    for (std::size_t k = 0; k < a.values.size(); ++k) EXPECT_NEAR(a.values[k], b.values[k], 1e-11);
  }
}

TEST(Elliptic, SecondOrderL2Convergence) {
  // -div(A grad u) = f with A constant, u = sin(pi x) sin(2 pi y)
  const SymMatrix A = SymMatrix::from_sym2({2.0, 0.5, 1.0});
  auto exact = [](Point2 p) { return std::sin(pi * p.x) * std::sin(2 * pi * p.y); };
  auto f = [&](Point2 p) {
    const double sx = std::sin(pi * p.x), cx = std::cos(pi * p.x);
    const double sy = std::sin(2 * pi * p.y), cy = std::cos(2 * pi * p.y);
    const double uxx = -pi * pi * sx * sy, uyy = -4 * pi * pi * sx * sy, uxy = 2 * pi * pi * cx * cy;
    return -(2.0 * uxx + 2 * 0.5 * uxy + 1.0 * uyy);
  };
  std::vector<double> errs;
  for (int n : {16, 32, 64}) {
    const Mesh mesh(n);
    const FeFunction u = solve_constant(mesh, A, f);
    const FeFunction ue = interpolate(mesh, exact);
    FeFunction d(mesh);
    for (std::size_t k = 0; k < d.values.size(); ++k) d.values[k] = u.values[k] - ue.values[k];
    errs.push_back(l2_norm(d));
  }
  for (int k = 0; k + 1 < int(errs.size()); ++k) {
    const double ratio = errs[k] / errs[k + 1];
    EXPECT_GE(ratio, 3.0);
    EXPECT_LE(ratio, 5.0);
  }
}

TEST(Elliptic, ConstantFieldMatchesConstantSolver) {
  const Mesh mesh(20);
  const SymMatrix A = SymMatrix::from_sym2({1.5, -0.2, 0.8});
  auto f = [](Point2 p) { return p.x + 1.0; };
  const FeFunction a = solve_oscillatory(mesh, constant_field(A), f);
  const FeFunction b = solve_constant(mesh, A, f);
  for (std::size_t k = 0; k < a.values.size(); ++k) EXPECT_NEAR(a.values[k], b.values[k], 1e-12);
}

TEST(Elliptic, InverseLaplacianOfEigenfunction) {
  // discrete (-Laplace)^{-1} f_p ~ f_p / lambda_p
  const Mesh mesh(128);
  const RhsBasis basis(3);
  for (int k = 0; k < 3; ++k) {
    const FeFunction z = inverse_laplacian(mesh, [&](Point2 x) { return basis(k, x); });
    const FeFunction ref = interpolate(mesh, [&](Point2 x) { return basis(k, x) / basis.eigenvalue(k); });
    FeFunction d(mesh);
    for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] = z.values[i] - ref.values[i];
    EXPECT_LT(l2_norm(d) / l2_norm(ref), 2e-3);
  }
}
