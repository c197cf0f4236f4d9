#pragma once

#include "bestmat/mesh.hpp"
#include "bestmat/stencil_matrix.hpp"

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bestmat {

enum class SolverKind { multigrid_cg, jacobi_cg };

struct SolverOptions {
  SolverKind kind = SolverKind::multigrid_cg;
  /// Relative residual ||b - Ax|| / ||b||.
  double tol = 1e-10;
  /// 0 selects 500 for multigrid and 50 sqrt(dim) for Jacobi.
  int max_iterations = 0;
};

struct SolveInfo {
  int iterations = 0;
  double relative_residual = 0.0;
};

class SolveError : public std::runtime_error {
 public:
  SolveError(const std::string &what, SolveInfo info) : std::runtime_error(what), info_(info) {}
  SolveInfo info() const { return info_; }

 private:
  SolveInfo info_;
};

SolverKind parse_solver_kind(const std::string &name);
std::string to_string(SolverKind kind);

/// Preconditioned CG for a stencil operator; the preconditioner is built once.
///
/// Dirichlet right-hand sides use the (n+1)^2 node layout and boundary entries
/// are ignored. Periodic right-hand sides use the n^2 layout; the mean is
/// removed and the zero-mean solution is returned.
class LinearSolver {
 public:
  LinearSolver(StencilMatrix K, SolverOptions options = {});
  ~LinearSolver();
  LinearSolver(LinearSolver &&) noexcept;
  LinearSolver &operator=(LinearSolver &&) noexcept;

  std::vector<double> solve(std::vector<double> rhs, SolveInfo *info = nullptr) const;

  const StencilMatrix &matrix() const;
  const SolverOptions &options() const { return options_; }
  /// Number of multigrid levels (1 when only the direct or Jacobi path is used).
  int levels() const;

 private:
  struct Hierarchy;
  SolverOptions options_;
  std::unique_ptr<Hierarchy> mg_;
};

/// Solves K u = load on the mesh with zero boundary values.
FeFunction solve_dirichlet(const StencilMatrix &K, std::span<const double> load, const Mesh &mesh,
                           double tol = 1e-10, SolveInfo *info = nullptr);
/// Solves the periodic problem; `load` uses the (n+1)^2 node layout and is folded.
FeFunction solve_periodic(const StencilMatrix &K, std::span<const double> load, const Mesh &mesh,
                          double tol = 1e-10, SolveInfo *info = nullptr);

}  // namespace bestmat
