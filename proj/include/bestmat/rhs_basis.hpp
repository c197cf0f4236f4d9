#pragma once

#include "bestmat/mesh.hpp"

#include <span>
#include <vector>

namespace bestmat {

struct Mode {
  int p = 1;
  int q = 1;
};

/// First P Dirichlet eigenfunctions f(x,y) = 2 sin(p pi x) sin(q pi y) of -Laplace on the
/// unit square, ordered by eigenvalue pi^2 (p^2 + q^2), ties by p then q.
class RhsBasis {
 public:
  explicit RhsBasis(int P);

  int size() const { return int(modes_.size()); }
  const Mode &mode(int idx) const { return modes_.at(idx); }
  double eigenvalue(int idx) const;
  double operator()(int idx, Point2 x) const;

  /// Load vector of basis function idx; the mesh must cover the unit square.
  std::vector<double> load(const Mesh &mesh, int idx) const;
  /// Load vector of sum_k coeffs[k] f_k.
  std::vector<double> load(const Mesh &mesh, std::span<const double> coeffs) const;

 private:
  std::vector<Mode> modes_;
};

RhsBasis laplacian_eigenbasis(int P);

}  // namespace bestmat
