#pragma once

#include "bestmat/mesh.hpp"

#include <memory>
#include <span>
#include <vector>

namespace bestmat {

/// Exact solver for the P1 Dirichlet Laplacian on a structured mesh.
///
/// On this triangulation the Laplacian stiffness matrix is the 5-point
/// stencil, which a 2D sine transform diagonalizes.
class LaplaceSolver {
 public:
  explicit LaplaceSolver(const Mesh &mesh);
  ~LaplaceSolver();
  LaplaceSolver(const LaplaceSolver &) = delete;
  LaplaceSolver &operator=(const LaplaceSolver &) = delete;

  const Mesh &mesh() const { return mesh_; }
  /// Solves K u = load (node layout, boundary entries ignored).
  FeFunction solve(std::span<const double> load) const;
  /// In-place variant on an (n+1)^2 vector.
  void solve_in_place(std::span<double> v) const;

 private:
  Mesh mesh_;
  struct Plan;
  std::unique_ptr<Plan> plan_;
};

}  // namespace bestmat
