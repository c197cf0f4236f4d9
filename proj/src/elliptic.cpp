#include "bestmat/elliptic.hpp"

#include "bestmat/assembly.hpp"

#include <spdlog/spdlog.h>

#include <mutex>
#include <set>
#include <utility>

namespace bestmat {

namespace {

StencilMatrix checked_stiffness(const Mesh &mesh, const CoefficientField &field) {
  if (field.kind() != FieldKind::constant && mesh.h() > field.epsilon() / 10.0) {
    // once per (h, eps) pair; ensembles would repeat it per realization
    static std::mutex mutex;
    static std::set<std::pair<double, double>> warned;
    std::lock_guard lock(mutex);
    if (warned.emplace(mesh.h(), field.epsilon()).second)
      spdlog::warn("mesh size {} does not resolve eps = {} (h > eps/10)", mesh.h(), field.epsilon());
  }
  return assemble_stiffness(mesh, field, Boundary::dirichlet);
}

}  // namespace

EllipticSolver::EllipticSolver(const Mesh &mesh, const CoefficientField &field, SolverOptions options)
    : mesh_(mesh), solver_(checked_stiffness(mesh, field), options) {}

EllipticSolver::EllipticSolver(const Mesh &mesh, const SymMatrix &a, SolverOptions options)
    : mesh_(mesh), solver_(assemble_stiffness(mesh, a.to_sym2(), Boundary::dirichlet), options) {}

FeFunction EllipticSolver::solve(std::vector<double> load, SolveInfo *info) const {
  return FeFunction(mesh_, solver_.solve(std::move(load), info));
}

FeFunction EllipticSolver::solve(const std::function<double(Point2)> &f, SolveInfo *info) const {
  return solve(assemble_load(mesh_, f), info);
}

FeFunction solve_oscillatory(const Mesh &mesh, const CoefficientField &field,
                             const std::function<double(Point2)> &f, SolverOptions options) {
  return EllipticSolver(mesh, field, options).solve(f);
}

FeFunction solve_constant(const Mesh &mesh, const SymMatrix &a, const std::function<double(Point2)> &f,
                          SolverOptions options) {
  return EllipticSolver(mesh, a, options).solve(f);
}

FeFunction inverse_laplacian(const Mesh &mesh, const std::function<double(Point2)> &f) {
  return LaplaceSolver(mesh).solve(assemble_load(mesh, f));
}

FeFunction inverse_laplacian_divergence(const Mesh &mesh, const ElementVectorField &F) {
  return LaplaceSolver(mesh).solve(assemble_divergence_load(mesh, F));
}

}  // namespace bestmat
