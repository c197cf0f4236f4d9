#include "bestmat/elliptic.hpp"
#include "bestmat/reconstruction.hpp"
#include "bestmat/rhs_basis.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace bestmat;

namespace {

FeFunction affine(const Mesh &mesh, double gx, double gy, double c) {
  return interpolate(mesh, [=](Point2 p) { return gx * p.x + gy * p.y + c; });
}

double local_residual(std::span<const FeFunction> fine, std::span<const FeFunction> coarse, int R, std::size_t t,
                      const Mat2 &C) {
  double s = 0.0;
  for (int r = 0; r < R; ++r) {
    const auto f = fine[r].mesh.gradient(fine[r].values, t);
    const auto g = coarse[r].mesh.gradient(coarse[r].values, t);
    const double e0 = f[0] - (C[0] * g[0] + C[1] * g[1]);
    const double e1 = f[1] - (C[2] * g[0] + C[3] * g[1]);
    s += e0 * e0 + e1 * e1;
  }
  return s;
}

}  // namespace

TEST(CorrectorMatrix, ConstantFieldGivesIdentity) {
  const auto [set, est] = periodic_corrector_and_Astar(8, constant_field(SymMatrix::from_sym2({2, 0.5, 1})));
  const auto C = corrector_gradient_matrix(corrector_gradients(set), 0.25, {0, 0}, Mesh(32));
  for (std::size_t t = 0; t < C.values.size(); ++t) {
    EXPECT_EQ(bool(C.defined[t]), !C.mesh.is_boundary_triangle(t));
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(C.values[t][k], (k == 0 || k == 3) ? 1.0 : 0.0, 1e-12);
  }
}

TEST(CorrectorMatrix, AveragesToIdentityOverWholePeriods) {
  const auto [set, est] = periodic_corrector_and_Astar(16, periodic_test_field(1.0));
  const auto grads = corrector_gradients(set);
  const Mesh target(64);
  Mat2 mean{0, 0, 0, 0};
  for (std::size_t t = 0; t < target.triangle_count(); ++t) {
    const Mat2 c = corrector_matrix_at(grads, 0.25, {0, 0}, target.barycenter(t));
    for (int k = 0; k < 4; ++k) mean[k] += c[k] / target.triangle_count();
  }
  EXPECT_NEAR(mean[0], 1.0, 1e-12);
  EXPECT_NEAR(mean[1], 0.0, 1e-12);
  EXPECT_NEAR(mean[2], 0.0, 1e-12);
  EXPECT_NEAR(mean[3], 1.0, 1e-12);
}

TEST(CorrectorMatrix, LaminateClosedForm) {
  // a = 1 or 3 in layers across y1: C11 = harmonic mean / a = 1.5 / a
  const auto lam = CoefficientField::custom(
      [](Point2 y) { return Sym2::identity(y.x - std::floor(y.x) < 0.5 ? 1.0 : 3.0); }, {1.0, 3.0}, 1.0, 1.0);
  const auto [set, est] = periodic_corrector_and_Astar(16, lam);
  const Mesh target(40);
  const auto C = corrector_gradient_matrix(corrector_gradients(set), 0.125, {0, 0}, target);
  for (std::size_t t = 0; t < target.triangle_count(); ++t) {
    if (!C.defined[t]) continue;
    const Point2 b = target.barycenter(t);
    const double y = b.x / 0.125 - std::floor(b.x / 0.125);
    const double a = y < 0.5 ? 1.0 : 3.0;
    EXPECT_NEAR(C.values[t][0], 1.5 / a, 1e-10);
    EXPECT_NEAR(C.values[t][1], 0.0, 1e-10);
    EXPECT_NEAR(C.values[t][2], 0.0, 1e-10);
    EXPECT_NEAR(C.values[t][3], 1.0, 1e-10);
  }
}

TEST(CorrectorMatrix, ShiftMapsIntoTruncatedDomain) {
  auto cells = std::make_shared<CellGrid>();
  cells->k = 2;
  cells->values = {4.0, 16.0, 4.0, 16.0};
  CorrectorSet set;
  truncated_Astar(1, 8, cells, {}, {}, &set);
  const auto grads = corrector_gradients(set);
  // the unit square at eps = 1/2 holds the 2 x 2 cells; cell 0 has a = 4 so C11 = 6.4 / 4
  const Mat2 c0 = corrector_matrix_at(grads, 0.5, {-1, -1}, {0.1, 0.3});
  const Mat2 c1 = corrector_matrix_at(grads, 0.5, {-1, -1}, {0.6, 0.3});
  EXPECT_NEAR(c0[0], 1.6, 1e-10);
  EXPECT_NEAR(c1[0], 0.4, 1e-10);
}

TEST(FitCbar, IdentityWhenFineEqualsCoarse) {
  const Mesh mesh(12);
  std::vector<FeFunction> u{affine(mesh, 1, 0, 0), affine(mesh, 0.3, 2, 1), affine(mesh, -1, 1, 0)};
  const auto C = fit_Cbar(u, u, 3);
  EXPECT_EQ(C.degenerate_count, 0u);
  for (std::size_t t = 0; t < C.values.size(); ++t) {
    if (!C.defined[t]) continue;
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(C.values[t][k], (k == 0 || k == 3) ? 1.0 : 0.0, 1e-12);
  }
}

TEST(FitCbar, RecoversExactLinearModel) {
  const Mesh mesh(10);
  const Mat2 C0{1.3, -0.4, 0.25, 0.8};
  const double g[3][2] = {{1.0, 0.2}, {-0.5, 1.1}, {0.7, -0.9}};
  std::vector<FeFunction> coarse, fine;
  for (auto &v : g) {
    coarse.push_back(affine(mesh, v[0], v[1], 0.5));
    fine.push_back(affine(mesh, C0[0] * v[0] + C0[1] * v[1], C0[2] * v[0] + C0[3] * v[1], -0.2));
  }
  const auto C = fit_Cbar(fine, coarse, 3);
  for (std::size_t t = 0; t < C.values.size(); ++t) {
    if (!C.defined[t]) continue;
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(C.values[t][k], C0[k], 1e-10);
  }
}

TEST(FitCbar, DegenerateElementsFallBackToIdentity) {
  const Mesh mesh(6);
  std::vector<FeFunction> coarse{affine(mesh, 1, 1, 0), affine(mesh, 2, 2, 0)};
  std::vector<FeFunction> fine{affine(mesh, 1, 0, 0), affine(mesh, 0, 1, 0)};
  const auto C = fit_Cbar(fine, coarse, 2);
  std::size_t interior = 0;
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) interior += !mesh.is_boundary_triangle(t);
  EXPECT_EQ(C.degenerate_count, interior);
  for (std::size_t t = 0; t < C.values.size(); ++t)
    if (C.defined[t]) EXPECT_EQ(C.values[t], (Mat2{1, 0, 0, 1}));
  EXPECT_THROW(fit_Cbar(fine, coarse, 1), std::invalid_argument);
  EXPECT_THROW(fit_Cbar(fine, coarse, 3), std::invalid_argument);
}

TEST(FitCbar, FitIsLocallyOptimal) {
  const Mesh mesh(32);
  const RhsBasis basis(3);
  const EllipticSolver osc(mesh, periodic_test_field(0.25));
  const EllipticSolver hom(mesh, SymMatrix::from_sym2({1.98, -0.02, 0.98}));
  std::vector<FeFunction> fine, coarse;
  for (int r = 0; r < 3; ++r) {
    fine.push_back(osc.solve(basis.load(mesh, r)));
    coarse.push_back(hom.solve(basis.load(mesh, r)));
  }
  const auto C = fit_Cbar(fine, coarse, 3);
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> pick(0, mesh.triangle_count() - 1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t t = pick(rng);
    if (!C.defined[t]) continue;
    const double base = local_residual(fine, coarse, 3, t, C.values[t]);
    for (int k = 0; k < 4; ++k)
      for (double d : {-1e-6, 1e-6}) {
        Mat2 p = C.values[t];
        p[k] += d;
        EXPECT_GE(local_residual(fine, coarse, 3, t, p), base * (1.0 - 1e-12));
      }
  }
}

TEST(Reconstruct, IdentityAndConstantField) {
  const Mesh mesh(24);
  const RhsBasis basis(3);
  const EllipticSolver solver(mesh, SymMatrix::from_sym2({1.5, 0.2, 0.7}));
  std::vector<FeFunction> u;
  for (int r = 0; r < 3; ++r) u.push_back(solver.solve(basis.load(mesh, r)));
  const auto C = fit_Cbar(u, u, 3);
  const auto g = reconstruct_gradient(C, u[1]);
  for (std::size_t t = 0; t < g.size(); ++t) {
    if (!C.defined[t]) {
      EXPECT_EQ(g[t], (std::array<double, 2>{0.0, 0.0}));
      continue;
    }
    const auto ref = mesh.gradient(u[1].values, t);
    EXPECT_NEAR(g[t][0], ref[0], 1e-10 * (1 + std::abs(ref[0])));
    EXPECT_NEAR(g[t][1], ref[1], 1e-10 * (1 + std::abs(ref[1])));
  }
  std::ostringstream os;
  write_element_matrix_csv(os, C);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "element,x,y,C11,C12,C21,C22");
}
