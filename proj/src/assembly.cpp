#include "bestmat/assembly.hpp"

#include <stdexcept>

namespace bestmat {

namespace {

// Element matrices with unit-scaled gradients; |T| / h^2 = 1/2.
// Lower triangle: a=(i,j), b=(i+1,j), c=(i+1,j+1), grads (-1,0), (1,-1), (0,1).
// Upper triangle: a=(i,j), b=(i+1,j+1), c=(i,j+1), grads (0,-1), (1,0), (-1,1).
struct CellContribution {
  double lower[3][3];
  double upper[3][3];
};

CellContribution cell_contribution(const Sym2 &a0, const Sym2 &a1) {
  static constexpr double g0[3][2] = {{-1, 0}, {1, -1}, {0, 1}};
  static constexpr double g1[3][2] = {{0, -1}, {1, 0}, {-1, 1}};
  CellContribution c{};
  for (int r = 0; r < 3; ++r)
    for (int s = 0; s < 3; ++s) {
      c.lower[r][s] = 0.5 * a0.quad(g0[r][0], g0[r][1], g0[s][0], g0[s][1]);
      c.upper[r][s] = 0.5 * a1.quad(g1[r][0], g1[r][1], g1[s][0], g1[s][1]);
    }
  return c;
}

Sym2 checked(const Sym2 &a) {
  if (!a.is_positive_definite()) throw std::invalid_argument("stiffness: coefficient not positive definite");
  return a;
}

// Adds the contributions of cell (ci, cj) to every node for which `slot`
// returns a storage entry.
template <class Slot>
void scatter_cell(int ci, int cj, const CellContribution &k, Slot &&slot) {
  auto add = [&](int i, int j, double StencilEntry::*field, double v) {
    if (StencilEntry *s = slot(i, j)) s->*field += v;
  };
  add(ci, cj, &StencilEntry::c, k.lower[0][0] + k.upper[0][0]);
  add(ci + 1, cj, &StencilEntry::c, k.lower[1][1]);
  add(ci + 1, cj + 1, &StencilEntry::c, k.lower[2][2] + k.upper[1][1]);
  add(ci, cj + 1, &StencilEntry::c, k.upper[2][2]);
  add(ci, cj, &StencilEntry::e, k.lower[0][1]);
  add(ci + 1, cj, &StencilEntry::n, k.lower[1][2]);
  add(ci, cj, &StencilEntry::ne, k.lower[0][2] + k.upper[0][1]);
  add(ci, cj + 1, &StencilEntry::e, k.upper[2][1]);
  add(ci, cj, &StencilEntry::n, k.upper[0][2]);
}

template <class Coef>
StencilMatrix assemble(const Mesh &mesh, Coef &&coef, Boundary bc, std::optional<int> period) {
  const int n = mesh.n_per_side();
  const int m = bc == Boundary::dirichlet ? n + 1 : n;
  int tile = 0;
  if (period && *period < m && (bc == Boundary::dirichlet || n % *period == 0)) tile = *period;
  StencilMatrix K(n, bc, tile, tile);
  if (K.tile_x() < m) {
    const int t = K.tile_x();
    for (int cj = -1; cj < t; ++cj)
      for (int ci = -1; ci < t; ++ci)
        scatter_cell(ci, cj, cell_contribution(coef(ci, cj, 0), coef(ci, cj, 1)), [&](int i, int j) {
          return (i >= 0 && j >= 0 && i < t && j < t) ? &K.tile(i, j) : nullptr;
        });
    return K;
  }
  for (int cj = 0; cj < n; ++cj)
    for (int ci = 0; ci < n; ++ci)
      scatter_cell(ci, cj, cell_contribution(coef(ci, cj, 0), coef(ci, cj, 1)), [&](int i, int j) {
        return &K.tile(i % m, j % m);
      });
  return K;
}

}  // namespace

StencilMatrix assemble_stiffness(const Mesh &mesh, const CoefficientField &field, Boundary bc) {
  const double h = mesh.h();
  const Point2 o = mesh.origin();
  const double third = 1.0 / 3.0;
  auto coef = [&](int ci, int cj, int upper) {
    const Point2 x = upper ? Point2{o.x + (ci + third) * h, o.y + (cj + 2 * third) * h}
                           : Point2{o.x + (ci + 2 * third) * h, o.y + (cj + third) * h};
    return checked(field(x));
  };
  return assemble(mesh, coef, bc, field.grid_period(mesh));
}

StencilMatrix assemble_stiffness(const Mesh &mesh, const Sym2 &a, Boundary bc) {
  checked(a);
  return assemble(mesh, [&](int, int, int) { return a; }, bc, 1);
}

}  // namespace bestmat
