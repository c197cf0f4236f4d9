#include "bestmat/coefficient_field.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace bestmat {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

EllipticityBounds sampled_bounds(const std::function<Sym2(Point2)> &fn, int samples) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (int j = 0; j < samples; ++j)
    for (int i = 0; i < samples; ++i) {
      const Sym2 a = fn({(i + 0.5) / samples, (j + 0.5) / samples});
      lo = std::min(lo, a.min_eigenvalue());
      hi = std::max(hi, a.max_eigenvalue());
    }
  return {0.95 * lo, 1.05 * hi};
}

std::optional<int> integer_ratio(double a, double b) {
  const double r = a / b;
  const double k = std::round(r);
  if (k >= 1.0 && std::abs(r - k) <= 1e-9 * r) return int(k);
  return std::nullopt;
}

double wrap_index(double s, int k) {
  const double f = std::floor(s);
  const long long i = static_cast<long long>(f) % k;
  return double(i < 0 ? i + k : i);
}

}  // namespace

double CellGrid::mean() const {
  double s = 0.0;
  for (double v : values) s += v;
  return values.empty() ? 0.0 : s / double(values.size());
}

Sym2 periodic_test_cell(Point2 y) {
  const double s = (std::sin(kTwoPi * y.x) + std::sin(kTwoPi * y.y)) / kTwoPi;
  return {2.0 + s, s, 1.0 + s};
}

CoefficientField CoefficientField::constant(const Sym2 &a) {
  if (!a.is_positive_definite()) throw std::invalid_argument("constant field must be positive definite");
  CoefficientField f;
  f.kind_ = FieldKind::constant;
  f.value_ = a;
  f.bounds_ = {a.min_eigenvalue(), a.max_eigenvalue()};
  return f;
}

CoefficientField CoefficientField::periodic_test(double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("periodic field: eps must be positive");
  static const EllipticityBounds bounds = sampled_bounds(periodic_test_cell, 512);
  CoefficientField f;
  f.kind_ = FieldKind::periodic_test;
  f.eps_ = eps;
  f.bounds_ = bounds;
  return f;
}

CoefficientField CoefficientField::checkerboard(std::shared_ptr<const CellGrid> cells, double cell_size,
                                                Point2 origin, double eps) {
  if (!cells || cells->k < 1 || cells->values.size() != std::size_t(cells->k) * cells->k)
    throw std::invalid_argument("checkerboard: malformed cell grid");
  const auto [lo, hi] = std::minmax_element(cells->values.begin(), cells->values.end());
  if (!(*lo > 0.0)) throw std::invalid_argument("checkerboard: values must be positive");
  CoefficientField f;
  f.kind_ = FieldKind::checkerboard;
  f.eps_ = eps;
  f.bounds_ = {*lo, *hi};
  f.cells_ = std::move(cells);
  f.cell_size_ = cell_size;
  f.cell_origin_ = origin;
  return f;
}

CoefficientField CoefficientField::custom(std::function<Sym2(Point2)> fn, EllipticityBounds bounds,
                                          double eps, std::optional<double> period) {
  if (!(bounds.alpha > 0.0) || bounds.beta < bounds.alpha)
    throw std::invalid_argument("custom field: invalid ellipticity bounds");
  CoefficientField f;
  f.kind_ = FieldKind::custom;
  f.eps_ = eps;
  f.bounds_ = bounds;
  f.fn_ = std::move(fn);
  f.period_ = period;
  return f;
}

Sym2 CoefficientField::operator()(Point2 x) const {
  switch (kind_) {
    case FieldKind::constant:
      return value_;
    case FieldKind::periodic_test:
      return periodic_test_cell({x.x / eps_, x.y / eps_});
    case FieldKind::checkerboard: {
      const int k = cells_->k;
      const int i = int(wrap_index((x.x - cell_origin_.x) / cell_size_, k));
      const int j = int(wrap_index((x.y - cell_origin_.y) / cell_size_, k));
      return Sym2::identity((*cells_)(i, j));
    }
    case FieldKind::custom:
      return fn_(x);
  }
  return {};
}

std::optional<int> CoefficientField::grid_period(const Mesh &mesh) const {
  switch (kind_) {
    case FieldKind::constant:
      return 1;
    case FieldKind::periodic_test:
      return integer_ratio(eps_, mesh.h());
    case FieldKind::checkerboard: {
      const auto c = integer_ratio(cell_size_, mesh.h());
      if (!c) return std::nullopt;
      // cell boundaries must fall on grid lines
      const double shift = (mesh.origin().x - cell_origin_.x) / mesh.h();
      const double shift_y = (mesh.origin().y - cell_origin_.y) / mesh.h();
      if (std::abs(shift - std::round(shift)) > 1e-9 || std::abs(shift_y - std::round(shift_y)) > 1e-9)
        return std::nullopt;
      return *c * cells_->k;
    }
    case FieldKind::custom:
      if (period_) return integer_ratio(*period_, mesh.h());
      return std::nullopt;
  }
  return std::nullopt;
}

CoefficientField periodic_test_field(double eps) { return CoefficientField::periodic_test(eps); }

CoefficientField constant_field(const SymMatrix &a) { return CoefficientField::constant(a.to_sym2()); }

int checkerboard_cells_per_side(double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("checkerboard: eps must be positive");
  const auto k = integer_ratio(1.0, eps);
  if (!k) throw std::invalid_argument("checkerboard: 1/eps must be an integer");
  return *k;
}

std::shared_ptr<const CellGrid> checkerboard_cells(int k, RealizationSeed seed) {
  std::seed_seq seq{std::uint32_t(seed.base_seed), std::uint32_t(seed.base_seed >> 32),
                    std::uint32_t(seed.index), std::uint32_t(seed.index >> 32)};
  std::mt19937_64 rng(seq);
  auto grid = std::make_shared<CellGrid>();
  grid->k = k;
  grid->values.resize(std::size_t(k) * k);
  for (double &v : grid->values) v = (rng() >> 63) ? 16.0 : 4.0;
  return grid;
}

std::shared_ptr<const CellGrid> enumerated_checkerboard_cells(int k, std::uint64_t index) {
  if (k * k > 63) throw std::invalid_argument("checkerboard: enumeration too large");
  if (index >> (k * k)) throw std::invalid_argument("checkerboard: enumeration index out of range");
  auto grid = std::make_shared<CellGrid>();
  grid->k = k;
  grid->values.resize(std::size_t(k) * k);
  for (int b = 0; b < k * k; ++b) grid->values[b] = ((index >> b) & 1u) ? 16.0 : 4.0;
  return grid;
}

CoefficientField sample_checkerboard(double eps, RealizationSeed seed) {
  const int k = checkerboard_cells_per_side(eps);
  return CoefficientField::checkerboard(checkerboard_cells(k, seed), eps, {0.0, 0.0}, eps);
}

void write_cell_grid(std::ostream &os, const CellGrid &grid) {
  for (int j = 0; j < grid.k; ++j) {
    for (int i = 0; i < grid.k; ++i) os << (i ? " " : "") << grid(i, j);
    os << '\n';
  }
}

CellGrid read_cell_grid(std::istream &is) {
  CellGrid grid;
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (row.empty()) continue;
    if (grid.k == 0) grid.k = int(row.size());
    if (int(row.size()) != grid.k) throw std::runtime_error("cell grid: ragged row");
    grid.values.insert(grid.values.end(), row.begin(), row.end());
  }
  if (grid.values.size() != std::size_t(grid.k) * grid.k) throw std::runtime_error("cell grid: not square");
  return grid;
}

FieldFamily FieldFamily::deterministic(CoefficientField field) {
  FieldFamily f;
  f.eps_ = field.epsilon();
  f.field_ = std::move(field);
  return f;
}

FieldFamily FieldFamily::checkerboard(double eps, std::uint64_t base_seed) {
  FieldFamily f;
  f.stochastic_ = true;
  f.eps_ = eps;
  f.base_seed_ = base_seed;
  f.k_ = checkerboard_cells_per_side(eps);
  return f;
}

int FieldFamily::realization_count(int M) const {
  if (!stochastic_) return 1;
  if (exhaustive()) return 16;
  if (M < 1) throw std::invalid_argument("FieldFamily: M must be positive");
  return M;
}

std::shared_ptr<const CellGrid> FieldFamily::realization_grid(int m) const {
  if (!stochastic_) throw std::logic_error("FieldFamily: deterministic family has no cell grid");
  if (exhaustive()) return enumerated_checkerboard_cells(k_, std::uint64_t(m));
  return checkerboard_cells(k_, seed_of(m));
}

CoefficientField FieldFamily::realization(int m) const {
  if (!stochastic_) return *field_;
  return CoefficientField::checkerboard(realization_grid(m), eps_, {0.0, 0.0}, eps_);
}

SymMatrix mean_field_matrix(const FieldFamily &family, int M) {
  if (family.stochastic()) {
    const int count = family.realization_count(M);
    double s = 0.0;
    for (int m = 0; m < count; ++m) s += family.realization_grid(m)->mean();
    return SymMatrix::identity(2, s / count);
  }
  const CoefficientField f = family.realization(0);
  if (f.kind() == FieldKind::constant) return SymMatrix::from_sym2(f({0.0, 0.0}));
  const int s = 512;
  Sym2 acc{};
  for (int j = 0; j < s; ++j)
    for (int i = 0; i < s; ++i) acc += f({(i + 0.5) / s, (j + 0.5) / s});
  return SymMatrix::from_sym2((1.0 / (double(s) * s)) * acc);
}

}  // namespace bestmat
