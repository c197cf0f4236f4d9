#include "bestmat/linear_solver.hpp"

#include "bestmat/fe_ops.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <numeric>

namespace bestmat {

namespace {

constexpr std::size_t kCoarseLimit = 4096;
constexpr int kSweeps = 2;

int mod(int a, int m) { return ((a % m) + m) % m; }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

void remove_mean(std::span<double> v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  for (double &x : v) x -= mean;
}

// Fine entry A(f, f + (di, dj)) through tile indexing; works for any integer node.
double fine_entry(const StencilMatrix &A, int a, int b, int di, int dj) {
  auto s = [&](int i, int j) -> const StencilEntry & {
    return A.tile(mod(i, A.tile_x()), mod(j, A.tile_y()));
  };
  if (di == 0 && dj == 0) return s(a, b).c;
  if (di == 1 && dj == 0) return s(a, b).e;
  if (di == -1 && dj == 0) return s(a - 1, b).e;
  if (di == 0 && dj == 1) return s(a, b).n;
  if (di == 0 && dj == -1) return s(a, b - 1).n;
  if (di == 1 && dj == 1) return s(a, b).ne;
  if (di == -1 && dj == -1) return s(a - 1, b - 1).ne;
  return 0.0;
}

struct Weight {
  int I, J;
  double w;
};

// Coarse nodes and weights interpolating fine node (a, b).
int interpolation(int a, int b, Weight out[2]) {
  const bool ao = (a & 1) != 0, bo = (b & 1) != 0;
  if (!ao && !bo) {
    out[0] = {a / 2, b / 2, 1.0};
    return 1;
  }
  if (ao && !bo) {
    out[0] = {(a - 1) / 2, b / 2, 0.5};
    out[1] = {(a + 1) / 2, b / 2, 0.5};
  } else if (!ao && bo) {
    out[0] = {a / 2, (b - 1) / 2, 0.5};
    out[1] = {a / 2, (b + 1) / 2, 0.5};
  } else {
    out[0] = {(a - 1) / 2, (b - 1) / 2, 0.5};
    out[1] = {(a + 1) / 2, (b + 1) / 2, 0.5};
  }
  return 2;
}

constexpr int kSupport[7][2] = {{0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, -1}};

StencilEntry galerkin_entry(const StencilMatrix &A, int I, int J) {
  StencilEntry out{};
  for (const auto &d : kSupport) {
    const int a = 2 * I + d[0], b = 2 * J + d[1];
    const double pf = (d[0] == 0 && d[1] == 0) ? 1.0 : 0.5;
    for (const auto &o : kSupport) {
      const double v = fine_entry(A, a, b, o[0], o[1]);
      if (v == 0.0) continue;
      Weight w[2];
      const int nw = interpolation(a + o[0], b + o[1], w);
      for (int k = 0; k < nw; ++k) {
        const int dI = w[k].I - I, dJ = w[k].J - J;
        const double c = pf * v * w[k].w;
        if (dI == 0 && dJ == 0) out.c += c;
        else if (dI == 1 && dJ == 0) out.e += c;
        else if (dI == 0 && dJ == 1) out.n += c;
        else if (dI == 1 && dJ == 1) out.ne += c;
      }
    }
  }
  return out;
}

StencilMatrix coarsen(const StencilMatrix &A) {
  const int nc = A.cells() / 2;
  const int mf = A.grid();
  const int mc = A.boundary() == Boundary::dirichlet ? nc + 1 : nc;
  int tile = 0;
  if (A.tile_x() < mf) {
    tile = A.tile_x() % 2 == 0 ? A.tile_x() / 2 : A.tile_x();
    if (tile >= mc) tile = 0;
  }
  StencilMatrix C(nc, A.boundary(), tile, tile);
  if (C.tile_x() < mc) {
    for (int J = 0; J < C.tile_y(); ++J)
      for (int I = 0; I < C.tile_x(); ++I) C.tile(I, J) = galerkin_entry(A, I, J);
  } else if (A.boundary() == Boundary::dirichlet) {
    for (int J = 1; J < nc; ++J)
      for (int I = 1; I < nc; ++I) C.tile(I, J) = galerkin_entry(A, I, J);
  } else {
    for (int J = 0; J < mc; ++J)
      for (int I = 0; I < mc; ++I) C.tile(I, J) = galerkin_entry(A, I, J);
  }
  return C;
}

// One Gauss-Seidel sweep over the free unknowns.
void gauss_seidel(const StencilMatrix &A, std::span<const double> b, std::span<double> x, bool forward) {
  const int m = A.grid();
  const bool dir = A.boundary() == Boundary::dirichlet;
  const int lo = dir ? 1 : 0, hi = dir ? m - 1 : m;
  auto relax = [&](int i, int j) {
    const int ie = i + 1 == m ? 0 : i + 1, iw = i == 0 ? m - 1 : i - 1;
    const int jn = j + 1 == m ? 0 : j + 1, js = j == 0 ? m - 1 : j - 1;
    const std::size_t r = std::size_t(j) * m, rn = std::size_t(jn) * m, rs = std::size_t(js) * m;
    const StencilEntry &s = A.at(i, j);
    const double off = s.e * x[r + ie] + A.at(iw, j).e * x[r + iw] + s.n * x[rn + i] +
                       A.at(i, js).n * x[rs + i] + s.ne * x[rn + ie] + A.at(iw, js).ne * x[rs + iw];
    x[r + i] = (b[r + i] - off) / s.c;
  };
  if (forward) {
    for (int j = lo; j < hi; ++j)
      for (int i = lo; i < hi; ++i) relax(i, j);
  } else {
    for (int j = hi - 1; j >= lo; --j)
      for (int i = hi - 1; i >= lo; --i) relax(i, j);
  }
}

void restrict_residual(const StencilMatrix &fine, std::span<const double> r, const StencilMatrix &coarse,
                       std::span<double> rc) {
  const int mf = fine.grid(), mc = coarse.grid();
  const bool dir = coarse.boundary() == Boundary::dirichlet;
  std::fill(rc.begin(), rc.end(), 0.0);
  auto at = [&](int a, int b) { return r[std::size_t(mod(b, mf)) * mf + mod(a, mf)]; };
  const int lo = dir ? 1 : 0, hi = dir ? mc - 1 : mc;
  for (int J = lo; J < hi; ++J)
    for (int I = lo; I < hi; ++I) {
      const int a = 2 * I, b = 2 * J;
      rc[std::size_t(J) * mc + I] =
          at(a, b) + 0.5 * (at(a + 1, b) + at(a - 1, b) + at(a, b + 1) + at(a, b - 1) + at(a + 1, b + 1) +
                            at(a - 1, b - 1));
    }
}

void prolongate_add(const StencilMatrix &fine, std::span<const double> ec, const StencilMatrix &coarse,
                    std::span<double> x) {
  const int mf = fine.grid(), mc = coarse.grid();
  const bool dir = fine.boundary() == Boundary::dirichlet;
  auto e = [&](int I, int J) { return ec[std::size_t(mod(J, mc)) * mc + mod(I, mc)]; };
  const int lo = dir ? 1 : 0, hi = dir ? mf - 1 : mf;
  for (int b = lo; b < hi; ++b)
    for (int a = lo; a < hi; ++a) {
      Weight w[2];
      const int nw = interpolation(a, b, w);
      double v = 0.0;
      for (int k = 0; k < nw; ++k) v += w[k].w * e(w[k].I, w[k].J);
      x[std::size_t(b) * mf + a] += v;
    }
}

}  // namespace

struct LinearSolver::Hierarchy {
  std::vector<StencilMatrix> A;
  std::vector<std::vector<double>> jacobi;  // inverse diagonal, Jacobi path only
  // per level workspace (mutable: solve is logically const)
  mutable std::vector<std::vector<double>> x, b, r;
  // coarsest direct solve on free unknowns
  std::vector<int> free_index;  // grid index -> free index or -1
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  mutable Eigen::VectorXd rhs_free;
};

LinearSolver::LinearSolver(StencilMatrix K, SolverOptions options)
    : options_(options), mg_(std::make_unique<Hierarchy>()) {
  Hierarchy &h = *mg_;
  h.A.push_back(std::move(K));
  if (options_.kind == SolverKind::jacobi_cg) {
    auto d = h.A[0].diagonal();
    for (double &v : d) v = 1.0 / v;
    h.jacobi.push_back(std::move(d));
    return;
  }
  while (h.A.back().dimension() > kCoarseLimit && h.A.back().cells() % 2 == 0 && h.A.back().cells() >= 8)
    h.A.push_back(coarsen(h.A.back()));
  const std::size_t L = h.A.size();
  h.x.resize(L);
  h.b.resize(L);
  h.r.resize(L);
  for (std::size_t l = 1; l < L; ++l) {
    h.x[l].assign(h.A[l].dimension(), 0.0);
    h.b[l].assign(h.A[l].dimension(), 0.0);
  }
  for (std::size_t l = 1; l + 1 < L; ++l) h.r[l].assign(h.A[l].dimension(), 0.0);

  const StencilMatrix &C = h.A.back();
  const int m = C.grid();
  h.free_index.assign(C.dimension(), -1);
  int nfree = 0;
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) {
      const bool pinned = C.boundary() == Boundary::periodic && i == 0 && j == 0;
      if (!C.constrained(i, j) && !pinned) h.free_index[std::size_t(j) * m + i] = nfree++;
    }
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(std::size_t(nfree) * 7);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) {
      const int r = h.free_index[std::size_t(j) * m + i];
      if (r < 0) continue;
      for (const auto &o : kSupport) {
        const int k = mod(i + o[0], m), l = mod(j + o[1], m);
        if (C.boundary() == Boundary::dirichlet && (i + o[0] != k || j + o[1] != l)) continue;
        const int c = h.free_index[std::size_t(l) * m + k];
        if (c < 0) continue;
        const double v = C.entry(std::size_t(j) * m + i, std::size_t(l) * m + k);
        if (v != 0.0) trips.emplace_back(r, c, v);
      }
    }
  Eigen::SparseMatrix<double> S(nfree, nfree);
  S.setFromTriplets(trips.begin(), trips.end());
  h.ldlt.compute(S);
  if (h.ldlt.info() != Eigen::Success) throw std::runtime_error("LinearSolver: coarse factorization failed");
  h.rhs_free.resize(nfree);
}

LinearSolver::~LinearSolver() = default;
LinearSolver::LinearSolver(LinearSolver &&) noexcept = default;
LinearSolver &LinearSolver::operator=(LinearSolver &&) noexcept = default;

const StencilMatrix &LinearSolver::matrix() const { return mg_->A[0]; }

int LinearSolver::levels() const { return options_.kind == SolverKind::jacobi_cg ? 1 : int(mg_->A.size()); }

namespace {

struct VCycle {
  const std::vector<StencilMatrix> &A;
  std::vector<std::vector<double>> &x, &b, &r;
  const std::vector<int> &free_index;
  const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> &ldlt;
  Eigen::VectorXd &rhs_free;

  void direct(std::size_t l, std::span<const double> bl, std::span<double> xl) {
    for (std::size_t k = 0; k < free_index.size(); ++k)
      if (free_index[k] >= 0) rhs_free[free_index[k]] = bl[k];
    const Eigen::VectorXd sol = ldlt.solve(rhs_free);
    for (std::size_t k = 0; k < free_index.size(); ++k) xl[k] = free_index[k] >= 0 ? sol[free_index[k]] : 0.0;
    if (A[l].boundary() == Boundary::periodic) remove_mean(xl);
  }

  // Approximately solves A[l] x = b with zero initial guess; `res` is scratch.
  void run(std::size_t l, std::span<const double> bl, std::span<double> xl, std::span<double> res) {
    if (l + 1 == A.size()) {
      direct(l, bl, xl);
      return;
    }
    std::fill(xl.begin(), xl.end(), 0.0);
    for (int s = 0; s < kSweeps; ++s) gauss_seidel(A[l], bl, xl, true);
    A[l].apply(xl, res);
    for (std::size_t k = 0; k < res.size(); ++k) res[k] = bl[k] - res[k];
    if (A[l].boundary() == Boundary::dirichlet) zero_boundary(A[l], res);
    restrict_residual(A[l], res, A[l + 1], b[l + 1]);
    run(l + 1, b[l + 1], x[l + 1], r[l + 1]);
    prolongate_add(A[l], x[l + 1], A[l + 1], xl);
    for (int s = 0; s < kSweeps; ++s) gauss_seidel(A[l], bl, xl, false);
  }

  static void zero_boundary(const StencilMatrix &K, std::span<double> v) {
    const int m = K.grid();
    for (int i = 0; i < m; ++i) {
      v[i] = 0.0;
      v[std::size_t(m - 1) * m + i] = 0.0;
      v[std::size_t(i) * m] = 0.0;
      v[std::size_t(i) * m + m - 1] = 0.0;
    }
  }
};

}  // namespace

std::vector<double> LinearSolver::solve(std::vector<double> rhs, SolveInfo *info) const {
  Hierarchy &h = *mg_;
  const StencilMatrix &A = h.A[0];
  const std::size_t dim = A.dimension();
  if (rhs.size() != dim) throw std::invalid_argument("LinearSolver::solve: rhs size mismatch");
  const bool periodic = A.boundary() == Boundary::periodic;
  if (periodic) remove_mean(rhs);
  else VCycle::zero_boundary(A, rhs);

  const int cap = options_.max_iterations > 0 ? options_.max_iterations
                  : options_.kind == SolverKind::jacobi_cg
                      ? int(std::ceil(50.0 * std::sqrt(double(dim))))
                      : 500;

  std::vector<double> x(dim, 0.0);
  std::vector<double> &r = rhs;
  const double bnorm = std::sqrt(dot(r, r));
  SolveInfo stats;
  if (bnorm == 0.0) {
    if (info) *info = stats;
    return x;
  }
  std::vector<double> p(dim), w(dim);
  std::vector<double> scratch;
  if (options_.kind == SolverKind::multigrid_cg && h.A.size() > 1) scratch.assign(dim, 0.0);
  VCycle vc{h.A, h.x, h.b, h.r, h.free_index, h.ldlt, h.rhs_free};

  auto precondition = [&](std::span<const double> in, std::span<double> out) {
    if (options_.kind == SolverKind::jacobi_cg) {
      const auto &d = h.jacobi[0];
      for (std::size_t k = 0; k < dim; ++k) out[k] = d[k] * in[k];
      if (!periodic) VCycle::zero_boundary(A, out);
    } else {
      vc.run(0, in, out, scratch);
    }
    if (periodic) remove_mean(out);
  };

  precondition(r, w);
  p = w;
  double rz = dot(r, w);
  double rel = 1.0;
  int it = 0;
  while (it < cap) {
    A.apply(p, w);
    const double alpha = rz / dot(p, w);
    for (std::size_t k = 0; k < dim; ++k) {
      x[k] += alpha * p[k];
      r[k] -= alpha * w[k];
    }
    ++it;
    rel = std::sqrt(dot(r, r)) / bnorm;
    if (rel <= options_.tol) break;
    precondition(r, w);
    const double rz_new = dot(r, w);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t k = 0; k < dim; ++k) p[k] = w[k] + beta * p[k];
  }
  stats.iterations = it;
  stats.relative_residual = rel;
  if (info) *info = stats;
  if (rel > options_.tol)
    throw SolveError("CG did not converge: relative residual " + std::to_string(rel) + " after " +
                         std::to_string(it) + " iterations",
                     stats);
  if (periodic) remove_mean(x);
  return x;
}

SolverKind parse_solver_kind(const std::string &name) {
  if (name == "multigrid_cg" || name == "mg") return SolverKind::multigrid_cg;
  if (name == "jacobi_cg" || name == "jacobi") return SolverKind::jacobi_cg;
  throw std::invalid_argument("unknown solver kind: " + name);
}

std::string to_string(SolverKind kind) {
  return kind == SolverKind::jacobi_cg ? "jacobi_cg" : "multigrid_cg";
}

FeFunction solve_dirichlet(const StencilMatrix &K, std::span<const double> load, const Mesh &mesh, double tol,
                           SolveInfo *info) {
  if (K.boundary() != Boundary::dirichlet || K.cells() != mesh.n_per_side())
    throw std::invalid_argument("solve_dirichlet: operator does not match mesh");
  StencilMatrix copy = K;
  LinearSolver solver(std::move(copy), SolverOptions{SolverKind::multigrid_cg, tol, 0});
  return FeFunction(mesh, solver.solve(std::vector<double>(load.begin(), load.end()), info));
}

FeFunction solve_periodic(const StencilMatrix &K, std::span<const double> load, const Mesh &mesh, double tol,
                          SolveInfo *info) {
  if (K.boundary() != Boundary::periodic || K.cells() != mesh.n_per_side())
    throw std::invalid_argument("solve_periodic: operator does not match mesh");
  StencilMatrix copy = K;
  LinearSolver solver(std::move(copy), SolverOptions{SolverKind::multigrid_cg, tol, 0});
  return FeFunction(mesh, unfold_periodic(mesh, solver.solve(fold_periodic(mesh, load), info)));
}

}  // namespace bestmat
