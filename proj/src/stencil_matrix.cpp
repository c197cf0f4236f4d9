#include "bestmat/stencil_matrix.hpp"

#include <stdexcept>

namespace bestmat {

StencilMatrix::StencilMatrix(int n_cells, Boundary bc, int tile_x, int tile_y)
    : n_(n_cells), m_(bc == Boundary::dirichlet ? n_cells + 1 : n_cells), bc_(bc) {
  if (n_cells < 2) throw std::invalid_argument("StencilMatrix: need at least 2 cells");
  tx_ = (tile_x <= 0 || tile_x >= m_) ? m_ : tile_x;
  ty_ = (tile_y <= 0 || tile_y >= m_) ? m_ : tile_y;
  if (bc == Boundary::periodic && (m_ % tx_ != 0 || m_ % ty_ != 0))
    throw std::invalid_argument("StencilMatrix: periodic tile must divide the grid");
  tix_.resize(m_);
  tiy_.resize(m_);
  for (int i = 0; i < m_; ++i) {
    tix_[i] = i % tx_;
    tiy_[i] = i % ty_;
  }
  st_.assign(std::size_t(tx_) * std::size_t(ty_), StencilEntry{});
}

void StencilMatrix::apply(std::span<const double> x, std::span<double> y) const {
  const std::size_t m = std::size_t(m_);
  if (x.size() != dimension() || y.size() != dimension())
    throw std::invalid_argument("StencilMatrix::apply: size mismatch");
  if (bc_ == Boundary::dirichlet) {
    for (std::size_t i = 0; i < m; ++i) {
      y[i] = 0.0;
      y[(m - 1) * m + i] = 0.0;
    }
    for (int j = 1; j < n_; ++j) {
      const StencilEntry *row = &st_[std::size_t(tiy_[j]) * tx_];
      const StencilEntry *below = &st_[std::size_t(tiy_[j - 1]) * tx_];
      const std::size_t base = std::size_t(j) * m;
      y[base] = 0.0;
      y[base + m - 1] = 0.0;
      for (int i = 1; i < n_; ++i) {
        const std::size_t k = base + i;
        const StencilEntry &s = row[tix_[i]];
        const int iw = tix_[i - 1];
        y[k] = s.c * x[k] + s.e * x[k + 1] + row[iw].e * x[k - 1] + s.n * x[k + m] +
               below[tix_[i]].n * x[k - m] + s.ne * x[k + m + 1] + below[iw].ne * x[k - m - 1];
      }
    }
    return;
  }
  for (int j = 0; j < m_; ++j) {
    const int jn = j + 1 == m_ ? 0 : j + 1;
    const int js = j == 0 ? m_ - 1 : j - 1;
    const StencilEntry *row = &st_[std::size_t(tiy_[j]) * tx_];
    const StencilEntry *below = &st_[std::size_t(tiy_[js]) * tx_];
    const double *xr = &x[std::size_t(j) * m];
    const double *xn = &x[std::size_t(jn) * m];
    const double *xs = &x[std::size_t(js) * m];
    double *yr = &y[std::size_t(j) * m];
    for (int i = 0; i < m_; ++i) {
      const int ie = i + 1 == m_ ? 0 : i + 1;
      const int iw = i == 0 ? m_ - 1 : i - 1;
      const StencilEntry &s = row[tix_[i]];
      yr[i] = s.c * xr[i] + s.e * xr[ie] + row[tix_[iw]].e * xr[iw] + s.n * xn[i] +
              below[tix_[i]].n * xs[i] + s.ne * xn[ie] + below[tix_[iw]].ne * xs[iw];
    }
  }
}

std::vector<double> StencilMatrix::diagonal() const {
  std::vector<double> d(dimension(), 0.0);
  for (int j = 0; j < m_; ++j)
    for (int i = 0; i < m_; ++i)
      d[std::size_t(j) * m_ + i] = constrained(i, j) ? 1.0 : at(i, j).c;
  return d;
}

double StencilMatrix::entry(std::size_t row, std::size_t col) const {
  const int i = int(row % m_), j = int(row / m_);
  const int k = int(col % m_), l = int(col / m_);
  if (constrained(i, j) || constrained(k, l)) return 0.0;
  int di = k - i, dj = l - j;
  if (bc_ == Boundary::periodic) {
    auto fold = [this](int d) {
      if (d > 1 && d == m_ - 1) return -1;
      if (d < -1 && d == -(m_ - 1)) return 1;
      return d;
    };
    di = fold(di);
    dj = fold(dj);
  }
  auto wrapped = [this](int a) { return ((a % m_) + m_) % m_; };
  if (di == 0 && dj == 0) return at(i, j).c;
  if (di == 1 && dj == 0) return at(i, j).e;
  if (di == -1 && dj == 0) return at(wrapped(i - 1), j).e;
  if (di == 0 && dj == 1) return at(i, j).n;
  if (di == 0 && dj == -1) return at(i, wrapped(j - 1)).n;
  if (di == 1 && dj == 1) return at(i, j).ne;
  if (di == -1 && dj == -1) return at(wrapped(i - 1), wrapped(j - 1)).ne;
  return 0.0;
}

}  // namespace bestmat
