#pragma once

#include "bestmat/homogenization.hpp"
#include "bestmat/mesh.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace bestmat {

/// Row-major 2x2 matrix {C11, C12, C21, C22}.
using Mat2 = std::array<double, 4>;

/// Piecewise constant matrix on the interior (non-boundary) triangles of a mesh.
struct ElementMatrixField {
  Mesh mesh;
  std::vector<Mat2> values;
  std::vector<std::uint8_t> defined;
  std::size_t degenerate_count = 0;

  explicit ElementMatrixField(const Mesh &m);
  ElementMatrixField() = default;
};

/// C_ij(x) = delta_ij + d_i w_j(x/eps + shift), sampled at triangle barycenters.
/// `shift` maps the scaled domain onto the corrector mesh: zero for the unit
/// cell, (-N, -N) for Q^N.
Mat2 corrector_matrix_at(const CorrectorGradients &grads, double eps, Point2 shift, Point2 x);
ElementMatrixField corrector_gradient_matrix(const CorrectorGradients &grads, double eps, Point2 shift,
                                             const Mesh &target);

/// Least-squares fit on one triangle: row i of C minimizes
/// sum_r |d_i fine_r - c_i . grad coarse_r|^2 over the first R functions.
/// Returns nullopt when the 2x2 normal matrix has condition > 1e12.
std::optional<Mat2> fit_Cbar_element(std::span<const FeFunction> fine, std::span<const FeFunction> coarse, int R,
                                     std::size_t t);

/// Fit on every interior triangle; degenerate triangles get the identity and are counted.
ElementMatrixField fit_Cbar(std::span<const FeFunction> fine, std::span<const FeFunction> coarse, int R);

/// C grad u on interior triangles; zero elsewhere.
std::vector<std::array<double, 2>> reconstruct_gradient(const ElementMatrixField &C, const FeFunction &coarse);

/// element, x, y, C11, C12, C21, C22 for every interior triangle.
void write_element_matrix_csv(std::ostream &os, const ElementMatrixField &C);

}  // namespace bestmat
