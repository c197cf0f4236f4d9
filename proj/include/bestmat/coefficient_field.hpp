#pragma once

#include "bestmat/mesh.hpp"
#include "bestmat/sym_matrix.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

namespace bestmat {

struct EllipticityBounds {
  double alpha = 0.0;
  double beta = 0.0;
};

enum class FieldKind { constant, periodic_test, checkerboard, custom };

/// Identifies one realization of a random field: (base seed, realization index).
struct RealizationSeed {
  std::uint64_t base_seed = 0;
  std::uint64_t index = 0;
  friend bool operator==(const RealizationSeed &, const RealizationSeed &) = default;
};

/// k x k scalar cell values, row j stored contiguously.
struct CellGrid {
  int k = 0;
  std::vector<double> values;

  double operator()(int i, int j) const { return values[std::size_t(j) * k + i]; }
  double mean() const;
};

/// Matrix-valued coefficient a(x) with ellipticity bounds.
class CoefficientField {
 public:
  static CoefficientField constant(const Sym2 &a);
  /// A(x) = A_per(x/eps) with the smooth 1-periodic test coefficient.
  static CoefficientField periodic_test(double eps);
  /// Scalar field equal to the cell value of `cells` times the identity.
  /// Cell (i, j) covers origin + cell_size * [i, i+1) x [j, j+1); the grid repeats outside.
  static CoefficientField checkerboard(std::shared_ptr<const CellGrid> cells, double cell_size,
                                       Point2 origin, double eps);
  /// `period`, if set, is a spatial period in both directions.
  static CoefficientField custom(std::function<Sym2(Point2)> fn, EllipticityBounds bounds,
                                 double eps, std::optional<double> period = std::nullopt);

  FieldKind kind() const { return kind_; }
  double epsilon() const { return eps_; }
  EllipticityBounds bounds() const { return bounds_; }
  const CellGrid *cells() const { return cells_.get(); }
  std::shared_ptr<const CellGrid> shared_cells() const { return cells_; }
  double cell_size() const { return cell_size_; }
  Point2 cell_origin() const { return cell_origin_; }

  Sym2 operator()(Point2 x) const;

  /// Number of mesh cells after which the field repeats exactly on `mesh`, if any.
  std::optional<int> grid_period(const Mesh &mesh) const;

 private:
  FieldKind kind_ = FieldKind::constant;
  double eps_ = 1.0;
  EllipticityBounds bounds_{};
  Sym2 value_{};
  std::shared_ptr<const CellGrid> cells_;
  double cell_size_ = 1.0;
  Point2 cell_origin_{};
  std::function<Sym2(Point2)> fn_;
  std::optional<double> period_;
};

/// Unit-period test coefficient: [[2+s, s], [s, 1+s]], s = (sin 2 pi y1 + sin 2 pi y2) / (2 pi).
Sym2 periodic_test_cell(Point2 y);
CoefficientField periodic_test_field(double eps);
CoefficientField constant_field(const SymMatrix &a);

/// Cell values 4 or 16 with probability 1/2 each on a (1/eps) x (1/eps) grid.
std::shared_ptr<const CellGrid> checkerboard_cells(int k, RealizationSeed seed);
/// Realization `index` (0..2^(k*k)-1) of the exhaustive enumeration; bit b sets cell b to 16.
std::shared_ptr<const CellGrid> enumerated_checkerboard_cells(int k, std::uint64_t index);
CoefficientField sample_checkerboard(double eps, RealizationSeed seed);
/// Cells per side for a checkerboard of period eps; throws unless 1/eps is an integer.
int checkerboard_cells_per_side(double eps);

void write_cell_grid(std::ostream &os, const CellGrid &grid);
CellGrid read_cell_grid(std::istream &is);

/// Deterministic field or checkerboard ensemble; the source of realizations for every method.
class FieldFamily {
 public:
  static FieldFamily deterministic(CoefficientField field);
  static FieldFamily checkerboard(double eps, std::uint64_t base_seed);

  bool stochastic() const { return stochastic_; }
  /// True for the 2x2 checkerboard, whose 16 realizations are enumerated exactly.
  bool exhaustive() const { return stochastic_ && k_ == 2; }
  double epsilon() const { return eps_; }
  std::uint64_t base_seed() const { return base_seed_; }
  int cells_per_side() const { return k_; }
  /// Number of realizations actually used for a requested sample size M.
  int realization_count(int M) const;
  std::shared_ptr<const CellGrid> realization_grid(int m) const;
  CoefficientField realization(int m) const;
  RealizationSeed seed_of(int m) const { return {base_seed_, std::uint64_t(m)}; }
  /// Identifies realization m in seed ledgers; enumerated families record {0, m}.
  RealizationSeed ledger_entry(int m) const {
    return exhaustive() ? RealizationSeed{0, std::uint64_t(m)} : seed_of(m);
  }

 private:
  bool stochastic_ = false;
  double eps_ = 1.0;
  std::uint64_t base_seed_ = 0;
  int k_ = 0;
  std::optional<CoefficientField> field_;
};

/// Spatial mean over the unit square, averaged over the realizations used for M.
SymMatrix mean_field_matrix(const FieldFamily &family, int M);

}  // namespace bestmat
