#pragma once

#include "bestmat/coefficient_field.hpp"
#include "bestmat/linear_solver.hpp"
#include "bestmat/mesh.hpp"
#include "bestmat/sym_matrix.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace bestmat {

enum class CorrectorDomain { unit_cell, truncated };

/// Zero-mean periodic correctors w_1, w_2 on the unit cell or on Q^N = (-N, N)^2.
struct CorrectorSet {
  Mesh mesh;
  std::vector<FeFunction> correctors;
  CorrectorDomain domain = CorrectorDomain::unit_cell;
  int N = 0;
};

enum class Provenance { periodic_exact, truncated_N_omega, monte_carlo_N_M };
std::string to_string(Provenance p);

struct HomogenizedEstimate {
  SymMatrix matrix;
  Provenance provenance = Provenance::periodic_exact;
  int N = 0;
  int M = 0;
  std::uint64_t seed = 0;
  /// max |A_ij - A_ji| before symmetrization.
  double symmetry_defect = 0.0;
};

/// Per-triangle corrector gradients {d1 w1, d2 w1, d1 w2, d2 w2} on a periodic cell mesh.
struct CorrectorGradients {
  Mesh mesh;
  std::vector<std::array<double, 4>> values;
};

CorrectorGradients corrector_gradients(const CorrectorSet &set);

/// Solves the periodic corrector problems on `mesh` (treated as a torus) and
/// returns A*_ij = int (e_i + grad w_i)^T A (e_j + grad w_j) / |cell|.
std::pair<CorrectorSet, HomogenizedEstimate> solve_cell_problems(const Mesh &mesh, const CoefficientField &field,
                                                                 const SolverOptions &options = {});

/// Unit cell with `cell_n` mesh cells per side; `field` must be 1-periodic.
std::pair<CorrectorSet, HomogenizedEstimate> periodic_corrector_and_Astar(int cell_n, const CoefficientField &field,
                                                                          const SolverOptions &options = {});

/// Mesh of Q^N with n_per_side cells, so H = 2N / n_per_side.
Mesh truncated_mesh(int N, int n_per_side);

/// A*^N for one checkerboard realization whose unit cells tile Q^N (cells->k == 2N).
HomogenizedEstimate truncated_Astar(int N, int n_per_side, std::shared_ptr<const CellGrid> cells,
                                    RealizationSeed seed = {}, const SolverOptions &options = {},
                                    CorrectorSet *correctors = nullptr);

struct MonteCarloEstimate {
  HomogenizedEstimate mean;
  std::vector<HomogenizedEstimate> samples;
  /// Corrector gradients averaged over the realizations.
  CorrectorGradients mean_gradients;
  /// Realizations used, in order.
  std::vector<RealizationSeed> seeds;
};

/// A*^{N,M}: average of A*^N over the realizations of `family`, which must
/// have 2N cells per side. The average is accumulated in realization order.
MonteCarloEstimate monte_carlo_Astar(int N, int n_per_side, const FieldFamily &family, int M,
                                     const SolverOptions &options = {}, int threads = 1);

void write_estimate_csv_header(std::ostream &os);
void write_estimate_csv_row(std::ostream &os, const HomogenizedEstimate &e);

}  // namespace bestmat
