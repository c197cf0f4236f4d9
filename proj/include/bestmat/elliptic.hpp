#pragma once

#include "bestmat/coefficient_field.hpp"
#include "bestmat/fe_ops.hpp"
#include "bestmat/laplace_solver.hpp"
#include "bestmat/linear_solver.hpp"
#include "bestmat/mesh.hpp"

#include <functional>
#include <span>

namespace bestmat {

/// Dirichlet solver for -div(A grad u) = f with the operator assembled once.
class EllipticSolver {
 public:
  EllipticSolver(const Mesh &mesh, const CoefficientField &field, SolverOptions options = {});
  EllipticSolver(const Mesh &mesh, const SymMatrix &a, SolverOptions options = {});

  const Mesh &mesh() const { return mesh_; }
  const LinearSolver &linear_solver() const { return solver_; }
  FeFunction solve(std::vector<double> load, SolveInfo *info = nullptr) const;
  FeFunction solve(const std::function<double(Point2)> &f, SolveInfo *info = nullptr) const;

 private:
  Mesh mesh_;
  LinearSolver solver_;
};

FeFunction solve_oscillatory(const Mesh &mesh, const CoefficientField &field,
                             const std::function<double(Point2)> &f, SolverOptions options = {});
FeFunction solve_constant(const Mesh &mesh, const SymMatrix &a, const std::function<double(Point2)> &f,
                          SolverOptions options = {});

/// (-Laplace)^{-1} of an L2 function.
FeFunction inverse_laplacian(const Mesh &mesh, const std::function<double(Point2)> &f);
/// (-Laplace)^{-1} of -div F for a piecewise constant vector field F.
FeFunction inverse_laplacian_divergence(const Mesh &mesh, const ElementVectorField &F);

}  // namespace bestmat
