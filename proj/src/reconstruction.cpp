#include "bestmat/reconstruction.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace bestmat {

ElementMatrixField::ElementMatrixField(const Mesh &m)
    : mesh(m), values(m.triangle_count(), Mat2{1, 0, 0, 1}), defined(m.triangle_count(), 0) {}

Mat2 corrector_matrix_at(const CorrectorGradients &grads, double eps, Point2 shift, Point2 x) {
  const std::size_t s = grads.mesh.locate({x.x / eps + shift.x, x.y / eps + shift.y}, true);
  const auto &g = grads.values[s];  // d1 w1, d2 w1, d1 w2, d2 w2
  return {1.0 + g[0], g[2], g[1], 1.0 + g[3]};
}

ElementMatrixField corrector_gradient_matrix(const CorrectorGradients &grads, double eps, Point2 shift,
                                             const Mesh &target) {
  ElementMatrixField C(target);
  for (std::size_t t = 0; t < target.triangle_count(); ++t) {
    if (target.is_boundary_triangle(t)) continue;
    C.values[t] = corrector_matrix_at(grads, eps, shift, target.barycenter(t));
    C.defined[t] = 1;
  }
  return C;
}

std::optional<Mat2> fit_Cbar_element(std::span<const FeFunction> fine, std::span<const FeFunction> coarse, int R,
                                     std::size_t t) {
  double n00 = 0, n01 = 0, n11 = 0;
  double r[2][2] = {{0, 0}, {0, 0}};  // r[i][k] = sum_r d_i fine_r * d_k coarse_r
  for (int q = 0; q < R; ++q) {
    const auto &mesh = coarse[q].mesh;
    const auto g = mesh.gradient(coarse[q].values, t);
    const auto f = mesh.gradient(fine[q].values, t);
    n00 += g[0] * g[0];
    n01 += g[0] * g[1];
    n11 += g[1] * g[1];
    for (int i = 0; i < 2; ++i)
      for (int k = 0; k < 2; ++k) r[i][k] += f[i] * g[k];
  }
  const double tr = n00 + n11;
  const double disc = std::sqrt(0.25 * (n00 - n11) * (n00 - n11) + n01 * n01);
  const double lmax = 0.5 * tr + disc, lmin = 0.5 * tr - disc;
  if (!(lmax > 0.0) || lmin <= lmax * 1e-12) return std::nullopt;
  const double det = n00 * n11 - n01 * n01;
  Mat2 C;
  for (int i = 0; i < 2; ++i) {
    C[2 * i] = (n11 * r[i][0] - n01 * r[i][1]) / det;
    C[2 * i + 1] = (n00 * r[i][1] - n01 * r[i][0]) / det;
  }
  return C;
}

ElementMatrixField fit_Cbar(std::span<const FeFunction> fine, std::span<const FeFunction> coarse, int R) {
  if (R < 2) throw std::invalid_argument("fit_Cbar: need R >= d = 2");
  if (int(fine.size()) < R || int(coarse.size()) < R) throw std::invalid_argument("fit_Cbar: fewer than R functions");
  const Mesh &mesh = coarse[0].mesh;
  ElementMatrixField C(mesh);
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    if (mesh.is_boundary_triangle(t)) continue;
    C.defined[t] = 1;
    if (auto c = fit_Cbar_element(fine, coarse, R, t))
      C.values[t] = *c;
    else
      ++C.degenerate_count;
  }
  return C;
}

std::vector<std::array<double, 2>> reconstruct_gradient(const ElementMatrixField &C, const FeFunction &coarse) {
  std::vector<std::array<double, 2>> out(C.mesh.triangle_count(), {0.0, 0.0});
  for (std::size_t t = 0; t < out.size(); ++t) {
    if (!C.defined[t]) continue;
    const auto g = C.mesh.gradient(coarse.values, t);
    const Mat2 &c = C.values[t];
    out[t] = {c[0] * g[0] + c[1] * g[1], c[2] * g[0] + c[3] * g[1]};
  }
  return out;
}

void write_element_matrix_csv(std::ostream &os, const ElementMatrixField &C) {
  os << "element,x,y,C11,C12,C21,C22\n" << std::setprecision(17);
  for (std::size_t t = 0; t < C.values.size(); ++t) {
    if (!C.defined[t]) continue;
    const Point2 b = C.mesh.barycenter(t);
    const Mat2 &c = C.values[t];
    os << t << ',' << b.x << ',' << b.y << ',' << c[0] << ',' << c[1] << ',' << c[2] << ',' << c[3] << '\n';
  }
}

}  // namespace bestmat
