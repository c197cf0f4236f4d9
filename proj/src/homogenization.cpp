#include "bestmat/homogenization.hpp"

#include "bestmat/assembly.hpp"
#include "bestmat/fe_ops.hpp"
#include "bestmat/parallel.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace bestmat {

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::periodic_exact:
      return "periodic_exact";
    case Provenance::truncated_N_omega:
      return "truncated_N_omega";
    case Provenance::monte_carlo_N_M:
      return "monte_carlo_N_M";
  }
  return "unknown";
}

CorrectorGradients corrector_gradients(const CorrectorSet &set) {
  CorrectorGradients g{set.mesh, std::vector<std::array<double, 4>>(set.mesh.triangle_count())};
  for (std::size_t t = 0; t < g.values.size(); ++t) {
    const auto g1 = set.mesh.gradient(set.correctors[0].values, t);
    const auto g2 = set.mesh.gradient(set.correctors[1].values, t);
    g.values[t] = {g1[0], g1[1], g2[0], g2[1]};
  }
  return g;
}

std::pair<CorrectorSet, HomogenizedEstimate> solve_cell_problems(const Mesh &mesh, const CoefficientField &field,
                                                                 const SolverOptions &options) {
  const LinearSolver solver(assemble_stiffness(mesh, field, Boundary::periodic), options);
  const std::size_t nt = mesh.triangle_count();
  std::vector<Sym2> a(nt);
  for (std::size_t t = 0; t < nt; ++t) a[t] = field(mesh.barycenter(t));

  CorrectorSet set;
  set.mesh = mesh;
  for (int p = 0; p < 2; ++p) {
    // int A grad w . grad phi = -int A e_p . grad phi
    auto load = assemble_divergence_load(mesh, [&](std::size_t t) {
      const auto f = a[t].apply(p == 0 ? 1.0 : 0.0, p == 0 ? 0.0 : 1.0);
      return std::array<double, 2>{-f[0], -f[1]};
    });
    set.correctors.emplace_back(mesh, unfold_periodic(mesh, solver.solve(fold_periodic(mesh, load))));
  }

  double A[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t t = 0; t < nt; ++t) {
    const auto g1 = mesh.gradient(set.correctors[0].values, t);
    const auto g2 = mesh.gradient(set.correctors[1].values, t);
    const double v[2][2] = {{1.0 + g1[0], g1[1]}, {g2[0], 1.0 + g2[1]}};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) A[i][j] += a[t].quad(v[i][0], v[i][1], v[j][0], v[j][1]);
  }
  const double w = mesh.triangle_area() / (mesh.side_length() * mesh.side_length());
  HomogenizedEstimate e;
  e.symmetry_defect = std::abs(A[0][1] - A[1][0]) * w;
  e.matrix = SymMatrix::from_sym2({A[0][0] * w, 0.5 * (A[0][1] + A[1][0]) * w, A[1][1] * w});
  return {std::move(set), e};
}

std::pair<CorrectorSet, HomogenizedEstimate> periodic_corrector_and_Astar(int cell_n, const CoefficientField &field,
                                                                          const SolverOptions &options) {
  auto out = solve_cell_problems(Mesh(cell_n), field, options);
  out.first.domain = CorrectorDomain::unit_cell;
  out.second.provenance = Provenance::periodic_exact;
  return out;
}

Mesh truncated_mesh(int N, int n_per_side) {
  if (N < 1) throw std::invalid_argument("truncated_mesh: N must be positive");
  return Mesh(n_per_side, {-double(N), -double(N)}, 2.0 * N);
}

HomogenizedEstimate truncated_Astar(int N, int n_per_side, std::shared_ptr<const CellGrid> cells,
                                    RealizationSeed seed, const SolverOptions &options, CorrectorSet *correctors) {
  if (!cells || cells->k != 2 * N) throw std::invalid_argument("truncated_Astar: cell grid must have 2N cells per side");
  if (n_per_side % (2 * N) != 0)
    throw std::invalid_argument("truncated_Astar: unit cells must align with the mesh (2N | n_per_side)");
  const Mesh mesh = truncated_mesh(N, n_per_side);
  const CoefficientField field = CoefficientField::checkerboard(std::move(cells), 1.0, mesh.origin(), 1.0);
  auto [set, e] = solve_cell_problems(mesh, field, options);
  e.provenance = Provenance::truncated_N_omega;
  e.N = N;
  e.M = 1;
  e.seed = seed.base_seed;
  if (e.symmetry_defect > 1e-10) spdlog::warn("truncated_Astar: symmetry defect {}", e.symmetry_defect);
  if (correctors) {
    set.domain = CorrectorDomain::truncated;
    set.N = N;
    *correctors = std::move(set);
  }
  return e;
}

MonteCarloEstimate monte_carlo_Astar(int N, int n_per_side, const FieldFamily &family, int M,
                                     const SolverOptions &options, int threads) {
  if (M < 1) throw std::invalid_argument("monte_carlo_Astar: M must be positive");
  if (!family.stochastic() || family.cells_per_side() != 2 * N)
    throw std::invalid_argument("monte_carlo_Astar: family must be a checkerboard with 2N cells per side");
  const int count = family.realization_count(M);
  const Mesh mesh = truncated_mesh(N, n_per_side);
  MonteCarloEstimate out;
  out.mean_gradients.mesh = mesh;
  out.mean_gradients.values.assign(mesh.triangle_count(), {0, 0, 0, 0});
  out.samples.resize(count);

  threads = std::max(1, threads);
  std::vector<std::vector<std::array<double, 4>>> batch(threads);
  for (int start = 0; start < count; start += threads) {
    const int size = std::min(threads, count - start);
    parallel_for(size, threads, [&](int k) {
      const int m = start + k;
      CorrectorSet set;
      out.samples[m] = truncated_Astar(N, n_per_side, family.realization_grid(m), family.seed_of(m), options, &set);
      batch[k] = corrector_gradients(set).values;
    });
    for (int k = 0; k < size; ++k)
      for (std::size_t t = 0; t < mesh.triangle_count(); ++t)
        for (int c = 0; c < 4; ++c) out.mean_gradients.values[t][c] += batch[k][t][c];
  }

  SymMatrix sum(2);
  for (const auto &s : out.samples) sum = sum + s.matrix;
  out.mean.matrix = (1.0 / count) * sum;
  out.mean.provenance = Provenance::monte_carlo_N_M;
  out.mean.N = N;
  out.mean.M = count;
  out.mean.seed = family.base_seed();
  for (int m = 0; m < count; ++m) out.seeds.push_back(family.ledger_entry(m));
  for (const auto &s : out.samples) out.mean.symmetry_defect = std::max(out.mean.symmetry_defect, s.symmetry_defect);
  for (auto &g : out.mean_gradients.values)
    for (double &v : g) v /= count;
  return out;
}

void write_estimate_csv_header(std::ostream &os) { os << "provenance,N,M,seed,A11,A12,A22\n"; }

void write_estimate_csv_row(std::ostream &os, const HomogenizedEstimate &e) {
  os << to_string(e.provenance) << ',' << e.N << ',' << e.M << ',' << e.seed << std::setprecision(17) << ','
     << e.matrix(0, 0) << ',' << e.matrix(0, 1) << ',' << e.matrix(1, 1) << '\n';
}

}  // namespace bestmat
