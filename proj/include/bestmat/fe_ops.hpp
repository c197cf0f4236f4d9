#pragma once

#include "bestmat/mesh.hpp"
#include "bestmat/stencil_matrix.hpp"

#include <array>
#include <functional>
#include <span>
#include <vector>

namespace bestmat {

/// One 2-vector per triangle.
using ElementVectorField = std::vector<std::array<double, 2>>;

/// Load vector b_a = int f phi_a with the three-point edge-midpoint rule.
std::vector<double> assemble_load(const Mesh &mesh, const std::function<double(Point2)> &f);

/// Same rule for f(x, y) = scale * fx(x) * fy(y); fx_half[k] = fx(x0 + k h / 2), k = 0..2n.
std::vector<double> assemble_separable_load(const Mesh &mesh, std::span<const double> fx_half,
                                            std::span<const double> fy_half, double scale);

/// Load b_a = sum_T |T| F_T . grad phi_a of the functional -div F.
std::vector<double> assemble_divergence_load(const Mesh &mesh, const ElementVectorField &F);
/// Same with F_T produced per triangle, so no field needs to be stored.
std::vector<double> assemble_divergence_load(const Mesh &mesh,
                                             const std::function<std::array<double, 2>(std::size_t)> &F);

/// Folds an (n+1)^2 node vector onto the n^2 periodic unknowns by summing identified nodes.
std::vector<double> fold_periodic(const Mesh &mesh, std::span<const double> v);
/// Expands n^2 periodic unknowns to (n+1)^2 node values.
std::vector<double> unfold_periodic(const Mesh &mesh, std::span<const double> v);

/// int u v with the consistent P1 mass matrix.
double mass_inner(const Mesh &mesh, std::span<const double> u, std::span<const double> v);
/// y = M u with the consistent P1 mass matrix.
std::vector<double> mass_apply(const Mesh &mesh, std::span<const double> u);
/// int grad u . grad v over all triangles.
double stiffness_inner(const Mesh &mesh, std::span<const double> u, std::span<const double> v);

double l2_norm(const FeFunction &u);

/// Nodal interpolant of f.
FeFunction interpolate(const Mesh &mesh, const std::function<double(Point2)> &f);

}  // namespace bestmat
