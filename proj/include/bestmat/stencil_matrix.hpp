#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bestmat {

enum class Boundary { dirichlet, periodic };

/// Couplings of one node: diagonal, east (i+1), north (j+1), north-east (i+1,j+1).
struct StencilEntry {
  double c = 0.0;
  double e = 0.0;
  double n = 0.0;
  double ne = 0.0;
};

/// Symmetric P1 operator on a structured grid with the E/N/NE coupling pattern.
///
/// Dirichlet operators act on (n+1)^2 node vectors whose boundary entries are
/// zero; boundary rows of the result are set to zero. Periodic operators act on
/// n^2 vectors with wrap-around. Entries may be stored per tile of tx by ty
/// nodes when the coefficient repeats on the grid.
class StencilMatrix {
 public:
  StencilMatrix() = default;
  /// tile == 0 selects full storage in that direction.
  StencilMatrix(int n_cells, Boundary bc, int tile_x = 0, int tile_y = 0);

  int cells() const { return n_; }
  Boundary boundary() const { return bc_; }
  /// Nodes per side of the unknown vector layout.
  int grid() const { return m_; }
  std::size_t dimension() const { return std::size_t(m_) * std::size_t(m_); }
  int tile_x() const { return tx_; }
  int tile_y() const { return ty_; }
  std::size_t stored_entries() const { return st_.size(); }

  StencilEntry &tile(int ti, int tj) { return st_[std::size_t(tj) * tx_ + ti]; }
  const StencilEntry &tile(int ti, int tj) const { return st_[std::size_t(tj) * tx_ + ti]; }
  const StencilEntry &at(int i, int j) const { return st_[std::size_t(tiy_[j]) * tx_ + tix_[i]]; }
  int tile_index_x(int i) const { return tix_[i]; }
  int tile_index_y(int j) const { return tiy_[j]; }

  bool constrained(int i, int j) const {
    return bc_ == Boundary::dirichlet && (i == 0 || j == 0 || i == n_ || j == n_);
  }

  void apply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> diagonal() const;
  /// Matrix entry between two unknowns (grid indices), zero outside the pattern.
  double entry(std::size_t row, std::size_t col) const;

 private:
  int n_ = 0;
  int m_ = 0;
  Boundary bc_ = Boundary::dirichlet;
  int tx_ = 0;
  int ty_ = 0;
  std::vector<int> tix_;
  std::vector<int> tiy_;
  std::vector<StencilEntry> st_;
};

}  // namespace bestmat
