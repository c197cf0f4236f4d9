#include "bestmat/rhs_basis.hpp"

#include "bestmat/fe_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bestmat {

RhsBasis::RhsBasis(int P) {
  if (P < 1) throw std::invalid_argument("RhsBasis: P must be positive");
  std::vector<Mode> all;
  for (int p = 1; p <= P; ++p)
    for (int q = 1; q <= P; ++q) all.push_back({p, q});
  std::sort(all.begin(), all.end(), [](const Mode &a, const Mode &b) {
    const int ea = a.p * a.p + a.q * a.q, eb = b.p * b.p + b.q * b.q;
    if (ea != eb) return ea < eb;
    if (a.p != b.p) return a.p < b.p;
    return a.q < b.q;
  });
  modes_.assign(all.begin(), all.begin() + P);
}

RhsBasis laplacian_eigenbasis(int P) { return RhsBasis(P); }

double RhsBasis::eigenvalue(int idx) const {
  const Mode &m = mode(idx);
  return std::numbers::pi * std::numbers::pi * double(m.p * m.p + m.q * m.q);
}

double RhsBasis::operator()(int idx, Point2 x) const {
  const Mode &m = mode(idx);
  return 2.0 * std::sin(m.p * std::numbers::pi * x.x) * std::sin(m.q * std::numbers::pi * x.y);
}

namespace {

std::vector<double> half_table(const Mesh &mesh, int k, double origin) {
  const int n = mesh.n_per_side();
  std::vector<double> t(2 * n + 1);
  for (int s = 0; s <= 2 * n; ++s) t[s] = std::sin(k * std::numbers::pi * (origin + 0.5 * s * mesh.h()));
  return t;
}

}  // namespace

std::vector<double> RhsBasis::load(const Mesh &mesh, int idx) const {
  const Mode &m = mode(idx);
  return assemble_separable_load(mesh, half_table(mesh, m.p, mesh.origin().x),
                                 half_table(mesh, m.q, mesh.origin().y), 2.0);
}

std::vector<double> RhsBasis::load(const Mesh &mesh, std::span<const double> coeffs) const {
  std::vector<double> b(mesh.node_count(), 0.0);
  for (int k = 0; k < int(coeffs.size()); ++k) {
    if (coeffs[k] == 0.0) continue;
    const auto bk = load(mesh, k);
    for (std::size_t a = 0; a < b.size(); ++a) b[a] += coeffs[k] * bk[a];
  }
  return b;
}

}  // namespace bestmat
