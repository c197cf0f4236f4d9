#pragma once

#include "bestmat/coefficient_field.hpp"
#include "bestmat/mesh.hpp"
#include "bestmat/stencil_matrix.hpp"

namespace bestmat {

/// P1 stiffness matrix of -div(A grad .) with A evaluated at triangle barycenters.
/// Uses tiled storage when the field repeats on the grid. Throws if A is not
/// symmetric positive definite at some barycenter.
StencilMatrix assemble_stiffness(const Mesh &mesh, const CoefficientField &field,
                                 Boundary bc = Boundary::dirichlet);

/// Same with one constant matrix on every triangle.
StencilMatrix assemble_stiffness(const Mesh &mesh, const Sym2 &a, Boundary bc = Boundary::dirichlet);

}  // namespace bestmat
