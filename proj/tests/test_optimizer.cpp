#include "bestmat/optimizer.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

using namespace bestmat;
using namespace bestmat::testing;

namespace {

TensorCache permuted(const TensorCache &c, const std::vector<int> &perm) {
  const int d = c.d(), P = c.P();
  TensorCache out(d, P);
  for (int p = 0; p < P; ++p)
    for (int q = 0; q < P; ++q) {
      out.set_k2(p, q, c.k2(perm[p], perm[q]));
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          out.set_k4(i, j, p, q, c.k4(i, j, perm[p], perm[q]));
          for (int k = 0; k < d; ++k)
            for (int l = 0; l < d; ++l) out.set_k6(i, j, k, l, p, q, c.k6(i, j, k, l, perm[p], perm[q]));
        }
    }
  return out;
}

double phi_max_over_c(const SyntheticFields &f, const SymMatrix &A) {
  // independent oracle: top eigenvalue of the Gram matrix of the residual fields
  Eigen::MatrixXd R(f.N, f.P);
  for (int p = 0; p < f.P; ++p) R.col(p) = f.residual(A, Eigen::VectorXd::Unit(f.P, p));
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(R.transpose() * R).eigenvalues().maxCoeff();
}

}  // namespace

TEST(AssembleG, MatchesResidualNormOnSyntheticFields) {
  for (int d : {2, 3}) {
    const SyntheticFields f = synthetic_fields(d, 4, 11 + d);
    const TensorCache cache = f.cache();
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::MatrixXd X = Eigen::MatrixXd::Random(d, d);
      const SymMatrix A = SymMatrix::symmetrized(X * X.transpose() + Eigen::MatrixXd::Identity(d, d));
      const Eigen::VectorXd c = random_unit(rng, 4);
      const double expect = f.residual(A, c).squaredNorm();
      EXPECT_NEAR(c.dot(assemble_G(cache, A) * c), expect, 1e-12 * expect);
      EXPECT_NEAR(assemble_B(cache, c).value(A), expect, 1e-12 * expect);
    }
  }
}

TEST(AssembleG, SymmetricAndPositiveSemidefinite) {
  const TensorCache cache = synthetic_fields(2, 5, 3).cache();
  const Eigen::MatrixXd G = assemble_G(cache, SymMatrix::from_sym2({1.2, 0.1, 0.7}));
  EXPECT_EQ((G - G.transpose()).norm(), 0.0);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(G).eigenvalues().minCoeff(), -1e-12 * G.norm());
}

TEST(PowerMethod, SmallCases) {
  Eigen::MatrixXd D(2, 2);
  D << 3, 0, 0, 1;
  EigenPair e = power_method(D);
  EXPECT_NEAR(e.lambda, 3.0, 1e-12);
  EXPECT_NEAR(e.c(0), 1.0, 1e-6);
  EXPECT_NEAR(e.c(1), 0.0, 1e-6);

  Eigen::MatrixXd S(2, 2);
  S << 2, 1, 1, 2;
  e = power_method(S);
  EXPECT_NEAR(e.lambda, 3.0, 1e-14);
  EXPECT_NEAR(e.c(0), std::sqrt(0.5), 1e-14);
  EXPECT_NEAR(e.c(1), std::sqrt(0.5), 1e-14);
  EXPECT_FALSE(e.used_dense_fallback);

  e = power_method(Eigen::MatrixXd::Identity(4, 4));
  EXPECT_DOUBLE_EQ(e.lambda, 1.0);
  EXPECT_NEAR(e.c.norm(), 1.0, 1e-14);
}

TEST(PowerMethod, StartVectorOrthogonalToTopEigenvector) {
  Eigen::MatrixXd G(2, 2);
  G << 1, 0, 0, 1;
  Eigen::MatrixXd Q(2, 2);
  Q << std::sqrt(0.5), std::sqrt(0.5), -std::sqrt(0.5), std::sqrt(0.5);
  G = Q * Eigen::Vector2d(5.0, 1.0).asDiagonal() * Q.transpose();  // top vector (1, -1)/sqrt 2
  const EigenPair e = power_method(G);
  EXPECT_NEAR(e.lambda, 5.0, 1e-12);
  EXPECT_GT(e.c(0), 0.0);
  EXPECT_NEAR(std::abs(e.c(1)), std::sqrt(0.5), 1e-10);
}

TEST(PowerMethod, AgreesWithDenseSolverOnRandomGram) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const int P = 2 + trial % 5;
    const SyntheticFields f = synthetic_fields(2, P, 100 + trial);
    const Eigen::MatrixXd G = assemble_G(f.cache(), random_spd(rng));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    const EigenPair e = power_method(G);
    EXPECT_NEAR(e.lambda, es.eigenvalues()(P - 1), 1e-10 * es.eigenvalues()(P - 1));
    EXPECT_NEAR(std::abs(e.c.dot(es.eigenvectors().col(P - 1))), 1.0, 1e-8);
  }
}

TEST(InfStep, MatchesLeastSquaresOracle) {
  std::mt19937_64 rng(23);
  for (int d : {2, 3}) {
    const SyntheticFields f = synthetic_fields(d, 3, 40 + d);
    const TensorCache cache = f.cache();
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::VectorXd c = random_unit(rng, 3);
      const int V = SymMatrix::voigt_size(d);
      Eigen::MatrixXd X = Eigen::MatrixXd::Zero(f.N, V);
      Eigen::VectorXd y = Eigen::VectorXd::Zero(f.N);
      for (int p = 0; p < 3; ++p) {
        y -= c(p) * f.rhs[p];
        for (int i = 0; i < d; ++i)
          for (int j = i; j < d; ++j) {
            const int v = SymMatrix::voigt_index(d, i, j);
            X.col(v) += c(p) * (i == j ? 1.0 : 2.0) * f.second[v][p];
          }
      }
      const Eigen::VectorXd ref = X.completeOrthogonalDecomposition().solve(y);
      const InfStep s = solve_inf_step(assemble_B(cache, c));
      EXPECT_LT((s.A.voigt() - ref).norm(), 1e-12 * (1.0 + ref.norm()));
    }
  }
}

TEST(InfStep, SingularSystemThrows) {
  QuadraticParts parts;
  parts.d = 2;
  parts.BB.assign(16, 0.0);
  parts.B = SymMatrix(2);
  EXPECT_THROW(solve_inf_step(parts), std::runtime_error);
}

TEST(Gradient, MatchesFiniteDifferences) {
  const SyntheticFields f = synthetic_fields(2, 4, 71);
  const TensorCache cache = f.cache();
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const SymMatrix A = random_spd(rng);
    const GradientInfo g = objective_gradient(cache, A);
    ASSERT_TRUE(g.reliable);
    EXPECT_NEAR(g.value, phi_max_over_c(f, A), 1e-12 * g.value);
    const double h = 1e-6;
    for (int i = 0; i < 2; ++i)
      for (int j = i; j < 2; ++j) {
        SymMatrix E(2);
        E.set(i, j, h);
        const double fd = (objective(cache, A + E) - objective(cache, A - E)) / (2 * h);
        // a symmetric perturbation of an off-diagonal entry moves both (i, j) and (j, i)
        const double analytic = (i == j ? 1.0 : 2.0) * g.gradient(i, j);
        EXPECT_NEAR(fd, analytic, 1e-6 * (1.0 + std::abs(analytic)));
      }
  }
}

TEST(BestMatrix, IsLocalMinimaxOnSyntheticFields) {
  const SymMatrix anchor = SymMatrix::from_sym2({2.0, 0.3, 1.0});
  const SyntheticFields f = synthetic_fields(2, 3, 8, 40, &anchor);
  const TensorCache cache = f.cache();
  const BestMatrixResult r = best_matrix(cache, 0.5, SymMatrix::identity(2));
  EXPECT_NE(r.reason, StopReason::max_iterations);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1e-3);
  for (int k = 0; k < 50; ++k) {
    SymMatrix d(2);
    d.set(0, 0, g(rng));
    d.set(0, 1, g(rng));
    d.set(1, 1, g(rng));
    EXPECT_GE(phi_max_over_c(f, r.A + d), r.objective * (1.0 - 1e-12));
  }
}

TEST(BestMatrix, RecoversConstantField) {
  const Mesh mesh(32);
  const RhsBasis basis(3);
  const SymMatrix A = SymMatrix::from_sym2({1.6, -0.25, 0.8});
  const auto means = empirical_mean_solutions(mesh, FieldFamily::deterministic(constant_field(A)), basis, 3, 1,
                                              {SolverKind::multigrid_cg, 1e-13, 0});
  const TensorCache cache = assemble_tensor_cache(mesh, basis, means, 3).cache;
  const BestMatrixResult r = best_matrix(cache, 0.5, SymMatrix::identity(2));
  EXPECT_LT((r.A - A).norm(), 1e-8);
}

TEST(BestMatrix, InvariantUnderLoadPermutation) {
  const SymMatrix anchor = SymMatrix::from_sym2({1.5, -0.2, 0.9});
  const TensorCache cache = synthetic_fields(2, 4, 29, 40, &anchor).cache();
  const BestMatrixResult a = best_matrix(cache, 0.5, SymMatrix::identity(2));
  ASSERT_EQ(a.reason, StopReason::gradient);
  std::vector<int> perm{2, 0, 3, 1};
  const BestMatrixResult b = best_matrix(permuted(cache, perm), 0.5, SymMatrix::identity(2));
  EXPECT_LT((a.A - b.A).norm(), 1e-12 * a.A.norm());
  EXPECT_NEAR(a.objective, b.objective, 1e-12 * a.objective);
}

TEST(BestMatrix, TraceAndArgumentChecks) {
  const TensorCache cache = synthetic_fields(2, 2, 1).cache();
  EXPECT_THROW(best_matrix(cache, 0.0, SymMatrix::identity(2)), std::invalid_argument);
  EXPECT_THROW(best_matrix(cache, 1.5, SymMatrix::identity(2)), std::invalid_argument);
  EXPECT_THROW(best_matrix(cache, 0.5, SymMatrix::from_sym2({1, 2, 1})), std::invalid_argument);
  StopCriteria stop;
  stop.max_iterations = 3;
  stop.grad_tol_factor = 0.0;
  stop.step_tol = 0.0;
  const BestMatrixResult r = best_matrix(cache, 0.5, SymMatrix::identity(2), stop);
  EXPECT_EQ(r.reason, StopReason::max_iterations);
  ASSERT_EQ(r.trace.size(), 4u);
  EXPECT_EQ(r.trace[0].A, SymMatrix::identity(2));
  std::ostringstream os;
  write_trace_csv(os, r.trace);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "iteration,objective,grad_norm,step,A11,A12,A22");
}

TEST(BestMatrix, RefinementReachesTheMinimizerWhenIterationStalls) {
  const Mesh mesh(32);
  const RhsBasis basis(3);
  const auto means = empirical_mean_solutions(mesh, FieldFamily::deterministic(periodic_test_field(0.25)), basis, 3,
                                              1, {SolverKind::multigrid_cg, 1e-13, 0});
  const TensorCache cache = assemble_tensor_cache(mesh, basis, means, 3).cache;
  StopCriteria stop;
  stop.max_iterations = 5;

  stop.polish = false;
  const BestMatrixResult plain = best_matrix(cache, 0.1, SymMatrix::identity(2), stop);
  ASSERT_EQ(plain.reason, StopReason::max_iterations);
  EXPECT_TRUE(plain.polish_trace.empty());

  stop.polish = true;
  const BestMatrixResult r = best_matrix(cache, 0.1, SymMatrix::identity(2), stop);
  ASSERT_EQ(r.reason, StopReason::polished);
  EXPECT_EQ(r.trace.size(), plain.trace.size());
  EXPECT_EQ(r.best_iteration, r.polish_trace.back().iteration);
  EXPECT_LE(r.objective, plain.objective);
  EXPECT_NEAR(objective(cache, r.A), r.objective, 1e-12 * r.objective);

  // Phi is convex, so a local minimum is the minimum
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 1e-4);
  for (int k = 0; k < 50; ++k) {
    SymMatrix d(2);
    d.set(0, 0, g(rng));
    d.set(0, 1, g(rng));
    d.set(1, 1, g(rng));
    EXPECT_GE(objective(cache, r.A + d), r.objective * (1.0 - 1e-12));
  }

  // a long relaxed run settles at the same matrix
  stop.max_iterations = 5000;
  stop.polish = false;
  const BestMatrixResult slow = best_matrix(cache, 0.1, SymMatrix::identity(2), stop);
  if (slow.reason != StopReason::max_iterations) EXPECT_LT((slow.A - r.A).norm(), 1e-6 * r.A.norm());

  std::ostringstream os;
  write_trace_csv(os, r);
  const std::string csv = os.str();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + long(r.trace.size() + r.polish_trace.size()));
}
