#pragma once

#include "bestmat/coefficient_field.hpp"
#include "bestmat/fe_ops.hpp"
#include "bestmat/linear_solver.hpp"
#include "bestmat/mesh.hpp"
#include "bestmat/rhs_basis.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bestmat {

struct MeanSolveReport {
  int realizations = 0;
  std::vector<RealizationSeed> seeds;
  int total_iterations = 0;
  double max_relative_residual = 0.0;
};

/// Empirical means over realizations of the oscillatory solutions u(f_q), q < load_count.
/// Realizations are solved in ascending index and accumulated by pairwise summation.
std::vector<FeFunction> empirical_mean_solutions(const Mesh &mesh, const FieldFamily &family,
                                                 const RhsBasis &basis, int load_count, int M,
                                                 const SolverOptions &options = {}, int threads = 1,
                                                 MeanSolveReport *report = nullptr);

/// Load of the problem int grad z . grad w = -1/2 int (d_j u d_i w + d_i u d_j w).
std::vector<double> second_derivative_load(const FeFunction &u, int i, int j);

/// z(f_p) = (-Laplace)^{-1} f_p and z^{ij}(f_p) for every unordered pair (i, j).
struct ZFields {
  int d = 2;
  std::vector<FeFunction> rhs;                 // [p]
  std::vector<std::vector<FeFunction>> second;  // [Voigt index][p]

  const FeFunction &at(int i, int j, int p) const;
};

ZFields z_second_derivatives(const Mesh &mesh, const RhsBasis &basis, std::span<const FeFunction> means);

/// Offline tensors, full index storage:
///   K6[i,j,k,l,p,q] = 2 <z^{ij}(f_p), z^{kl}(f_q)>
///   K4[i,j,p,q]     = -<z^{ij}(f_p), z(f_q)>
///   K2[p,q]         = <z(f_p), z(f_q)>
class TensorCache {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  TensorCache() = default;
  TensorCache(int d, int P);

  int d() const { return d_; }
  int P() const { return P_; }
  int M = 1;
  int n_per_side = 0;
  std::uint64_t seed = 0;

  double k6(int i, int j, int k, int l, int p, int q) const { return K6_[i6(i, j, k, l, p, q)]; }
  double k4(int i, int j, int p, int q) const { return K4_[i4(i, j, p, q)]; }
  double k2(int p, int q) const { return K2_[std::size_t(p) * P_ + q]; }
  void set_k6(int i, int j, int k, int l, int p, int q, double v) { K6_[i6(i, j, k, l, p, q)] = v; }
  void set_k4(int i, int j, int p, int q, double v) { K4_[i4(i, j, p, q)] = v; }
  void set_k2(int p, int q, double v) { K2_[std::size_t(p) * P_ + q] = v; }

  const std::vector<double> &K6() const { return K6_; }
  const std::vector<double> &K4() const { return K4_; }
  const std::vector<double> &K2() const { return K2_; }

  /// Cache restricted to the first P' loads.
  TensorCache truncated(int P) const;

  void save(std::ostream &os) const;
  static TensorCache load(std::istream &is);
  void save(const std::string &path) const;
  static TensorCache load(const std::string &path);

  friend bool operator==(const TensorCache &, const TensorCache &) = default;

 private:
  std::size_t i6(int i, int j, int k, int l, int p, int q) const {
    return ((((std::size_t(i) * d_ + j) * d_ + k) * d_ + l) * P_ + p) * P_ + q;
  }
  std::size_t i4(int i, int j, int p, int q) const { return ((std::size_t(i) * d_ + j) * P_ + p) * P_ + q; }

  int d_ = 0;
  int P_ = 0;
  std::vector<double> K6_, K4_, K2_;
};

enum class FieldRetention { keep, discard };

struct TensorBuild {
  TensorCache cache;
  /// Present with FieldRetention::keep.
  std::optional<ZFields> fields;
};

/// Builds the cache from the first P mean solutions. With `discard`, the z-fields are
/// never stored together: <z_a, z_b> is evaluated as g_a . (-Laplace)^{-1} M z_b.
TensorBuild assemble_tensor_cache(const Mesh &mesh, const RhsBasis &basis, std::span<const FeFunction> means,
                                  int P, FieldRetention retention = FieldRetention::keep);

}  // namespace bestmat
