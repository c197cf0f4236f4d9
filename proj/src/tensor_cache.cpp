#include "bestmat/tensor_cache.hpp"

#include "bestmat/elliptic.hpp"
#include "bestmat/laplace_solver.hpp"
#include "bestmat/parallel.hpp"
#include "bestmat/sym_matrix.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace bestmat {

namespace {

// Pairwise (binary cascade) summation of equally sized vectors.
class Cascade {
 public:
  void add(std::vector<double> v) {
    for (std::size_t k = 0;; ++k) {
      if (k == slots_.size()) slots_.emplace_back();
      if (slots_[k].empty()) {
        slots_[k] = std::move(v);
        return;
      }
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = slots_[k][i] + v[i];
      slots_[k].clear();
      slots_[k].shrink_to_fit();
    }
  }
  std::vector<double> total() {
    std::vector<double> out;
    for (auto &s : slots_) {
      if (s.empty()) continue;
      if (out.empty()) out = std::move(s);
      else
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += s[i];
    }
    slots_.clear();
    return out;
  }

 private:
  std::vector<std::vector<double>> slots_;
};

}  // namespace

std::vector<FeFunction> empirical_mean_solutions(const Mesh &mesh, const FieldFamily &family,
                                                 const RhsBasis &basis, int load_count, int M,
                                                 const SolverOptions &options, int threads,
                                                 MeanSolveReport *report) {
  if (load_count < 1 || load_count > basis.size()) throw std::invalid_argument("mean solutions: bad load count");
  const int count = family.realization_count(M);
  MeanSolveReport rep;
  rep.realizations = count;
  std::vector<FeFunction> out;

  if (!family.stochastic()) {
    const EllipticSolver solver(mesh, family.realization(0), options);
    for (int q = 0; q < load_count; ++q) {
      SolveInfo info;
      out.push_back(solver.solve(basis.load(mesh, q), &info));
      rep.total_iterations += info.iterations;
      rep.max_relative_residual = std::max(rep.max_relative_residual, info.relative_residual);
    }
    if (report) *report = std::move(rep);
    return out;
  }

  std::vector<Cascade> sums(load_count);
  const int batch = std::max(1, threads);
  for (int m0 = 0; m0 < count; m0 += batch) {
    const int nb = std::min(batch, count - m0);
    std::vector<std::vector<std::vector<double>>> sol(nb);
    std::vector<SolveInfo> worst(nb);
    std::vector<int> its(nb, 0);
    parallel_for(nb, threads, [&](int b) {
      const EllipticSolver solver(mesh, family.realization(m0 + b), options);
      for (int q = 0; q < load_count; ++q) {
        SolveInfo info;
        sol[b].push_back(solver.solve(basis.load(mesh, q), &info).values);
        its[b] += info.iterations;
        worst[b].relative_residual = std::max(worst[b].relative_residual, info.relative_residual);
      }
    });
    for (int b = 0; b < nb; ++b) {
      for (int q = 0; q < load_count; ++q) sums[q].add(std::move(sol[b][q]));
      rep.seeds.push_back(family.ledger_entry(m0 + b));
      rep.total_iterations += its[b];
      rep.max_relative_residual = std::max(rep.max_relative_residual, worst[b].relative_residual);
    }
  }
  for (int q = 0; q < load_count; ++q) {
    auto v = sums[q].total();
    for (double &x : v) x /= double(count);
    out.emplace_back(mesh, std::move(v));
  }
  if (report) *report = std::move(rep);
  return out;
}

std::vector<double> second_derivative_load(const FeFunction &u, int i, int j) {
  const Mesh &mesh = u.mesh;
  return assemble_divergence_load(mesh, [&](std::size_t t) {
    const auto g = mesh.gradient(u.values, t);
    std::array<double, 2> F{0.0, 0.0};
    F[i] -= 0.5 * g[j];
    F[j] -= 0.5 * g[i];
    return F;
  });
}

const FeFunction &ZFields::at(int i, int j, int p) const { return second[SymMatrix::voigt_index(d, i, j)][p]; }

ZFields z_second_derivatives(const Mesh &mesh, const RhsBasis &basis, std::span<const FeFunction> means) {
  const int P = int(means.size());
  const LaplaceSolver L(mesh);
  ZFields z;
  z.d = 2;
  for (int p = 0; p < P; ++p) z.rhs.push_back(L.solve(basis.load(mesh, p)));
  z.second.resize(SymMatrix::voigt_size(2));
  for (int i = 0; i < 2; ++i)
    for (int j = i; j < 2; ++j)
      for (int p = 0; p < P; ++p)
        z.second[SymMatrix::voigt_index(2, i, j)].push_back(L.solve(second_derivative_load(means[p], i, j)));
  return z;
}

TensorCache::TensorCache(int d, int P)
    : d_(d), P_(P), K6_(std::size_t(d) * d * d * d * P * P, 0.0), K4_(std::size_t(d) * d * P * P, 0.0),
      K2_(std::size_t(P) * P, 0.0) {
  if (d < 1 || P < 1) throw std::invalid_argument("TensorCache: d and P must be positive");
}

TensorCache TensorCache::truncated(int P) const {
  if (P < 1 || P > P_) throw std::invalid_argument("TensorCache::truncated: bad P");
  TensorCache c(d_, P);
  c.M = M;
  c.n_per_side = n_per_side;
  c.seed = seed;
  for (int p = 0; p < P; ++p)
    for (int q = 0; q < P; ++q) {
      c.set_k2(p, q, k2(p, q));
      for (int i = 0; i < d_; ++i)
        for (int j = 0; j < d_; ++j) {
          c.set_k4(i, j, p, q, k4(i, j, p, q));
          for (int k = 0; k < d_; ++k)
            for (int l = 0; l < d_; ++l) c.set_k6(i, j, k, l, p, q, k6(i, j, k, l, p, q));
        }
    }
  return c;
}

namespace {

constexpr char kMagic[4] = {'B', 'M', 'T', 'C'};

template <class T>
void put(std::ostream &os, T v) {
  os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <class T>
T get(std::istream &is) {
  T v{};
  is.read(reinterpret_cast<char *>(&v), sizeof(T));
  if (!is) throw std::runtime_error("TensorCache: truncated file");
  return v;
}

void put_array(std::ostream &os, const std::vector<double> &a) {
  put<std::uint64_t>(os, a.size());
  os.write(reinterpret_cast<const char *>(a.data()), std::streamsize(a.size() * sizeof(double)));
}

void get_array(std::istream &is, std::vector<double> &a) {
  const auto n = get<std::uint64_t>(is);
  if (n != a.size()) throw std::runtime_error("TensorCache: array length does not match header");
  is.read(reinterpret_cast<char *>(a.data()), std::streamsize(n * sizeof(double)));
  if (!is) throw std::runtime_error("TensorCache: truncated file");
}

}  // namespace

void TensorCache::save(std::ostream &os) const {
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kFormatVersion);
  put<std::int32_t>(os, d_);
  put<std::int32_t>(os, P_);
  put<std::int32_t>(os, M);
  put<std::int32_t>(os, n_per_side);
  put<std::uint64_t>(os, seed);
  put_array(os, K6_);
  put_array(os, K4_);
  put_array(os, K2_);
  if (!os) throw std::runtime_error("TensorCache: write failed");
}

TensorCache TensorCache::load(std::istream &is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("TensorCache: not a cache file");
  const auto version = get<std::uint32_t>(is);
  if (version != kFormatVersion) throw std::runtime_error("TensorCache: unsupported format version");
  const int d = get<std::int32_t>(is);
  const int P = get<std::int32_t>(is);
  TensorCache c(d, P);
  c.M = get<std::int32_t>(is);
  c.n_per_side = get<std::int32_t>(is);
  c.seed = get<std::uint64_t>(is);
  get_array(is, c.K6_);
  get_array(is, c.K4_);
  get_array(is, c.K2_);
  return c;
}

void TensorCache::save(const std::string &path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("TensorCache: cannot open " + path);
  save(os);
}

TensorCache TensorCache::load(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("TensorCache: cannot open " + path);
  return load(is);
}

TensorBuild assemble_tensor_cache(const Mesh &mesh, const RhsBasis &basis, std::span<const FeFunction> means,
                                  int P, FieldRetention retention) {
  if (P < 1 || P > int(means.size()) || P > basis.size())
    throw std::invalid_argument("assemble_tensor_cache: not enough mean solutions");
  const int d = 2;
  const int V = SymMatrix::voigt_size(d);
  const int nf = (1 + V) * P;  // field a < P: z(f_a); a = P + v P + p: z^{v}(f_p)
  Eigen::MatrixXd G(nf, nf);
  TensorBuild build;
  const auto sub = means.subspan(0, P);

  if (retention == FieldRetention::keep) {
    build.fields = z_second_derivatives(mesh, basis, sub);
    const ZFields &z = *build.fields;
    auto field = [&](int a) -> const FeFunction & { return a < P ? z.rhs[a] : z.second[(a - P) / P][(a - P) % P]; };
    for (int a = 0; a < nf; ++a)
      for (int b = a; b < nf; ++b) G(a, b) = G(b, a) = mass_inner(mesh, field(a).values, field(b).values);
  } else {
    const LaplaceSolver L(mesh);
    static constexpr int pair_i[3] = {0, 0, 1}, pair_j[3] = {0, 1, 1};
    auto load_of = [&](int a) {
      if (a < P) return basis.load(mesh, a);
      const int v = (a - P) / P, p = (a - P) % P;
      return second_derivative_load(sub[p], pair_i[v], pair_j[v]);
    };
    for (int b = 0; b < nf; ++b) {
      std::vector<double> y = load_of(b);
      L.solve_in_place(y);
      y = mass_apply(mesh, y);
      L.solve_in_place(y);
      for (int a = 0; a <= b; ++a) {
        const auto g = load_of(a);
        double s = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) s += g[k] * y[k];
        G(a, b) = G(b, a) = s;
      }
    }
  }

  TensorCache &c = build.cache = TensorCache(d, P);
  c.n_per_side = mesh.n_per_side();
  for (int p = 0; p < P; ++p)
    for (int q = 0; q < P; ++q) {
      c.set_k2(p, q, G(p, q));
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          const int a = P + SymMatrix::voigt_index(d, i, j) * P + p;
          c.set_k4(i, j, p, q, -G(a, q));
          for (int k = 0; k < d; ++k)
            for (int l = 0; l < d; ++l) {
              const int b = P + SymMatrix::voigt_index(d, k, l) * P + q;
              c.set_k6(i, j, k, l, p, q, 2.0 * G(a, b));
            }
        }
    }
  return build;
}

}  // namespace bestmat
