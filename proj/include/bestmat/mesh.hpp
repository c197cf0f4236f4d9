#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace bestmat {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Structured triangulation of a square with n cells per side.
///
/// Node (i, j) has index j*(n+1)+i. Cell (i, j) is split along its SW-NE
/// diagonal into triangle 2*(j*n+i) = [(i,j),(i+1,j),(i+1,j+1)] and triangle
/// 2*(j*n+i)+1 = [(i,j),(i+1,j+1),(i,j+1)]. Nothing is stored per node.
class Mesh {
 public:
  Mesh() = default;
  Mesh(int n_per_side, Point2 origin = {}, double side_length = 1.0);

  int n_per_side() const { return n_; }
  int nodes_per_side() const { return n_ + 1; }
  double h() const { return h_; }
  Point2 origin() const { return origin_; }
  double side_length() const { return side_; }

  std::size_t node_count() const { return std::size_t(n_ + 1) * std::size_t(n_ + 1); }
  std::size_t triangle_count() const { return 2 * std::size_t(n_) * std::size_t(n_); }
  double triangle_area() const { return 0.5 * h_ * h_; }

  std::size_t node_index(int i, int j) const { return std::size_t(j) * std::size_t(n_ + 1) + std::size_t(i); }
  Point2 node(std::size_t k) const;
  Point2 node(int i, int j) const { return {origin_.x + i * h_, origin_.y + j * h_}; }
  std::array<std::size_t, 3> triangle(std::size_t t) const;
  Point2 barycenter(std::size_t t) const;

  bool is_boundary_node(std::size_t k) const;
  /// A triangle is on the boundary iff one of its nodes is.
  bool is_boundary_triangle(std::size_t t) const;
  std::size_t boundary_node_count() const { return n_ < 1 ? 0 : 4 * std::size_t(n_); }

  /// Gradient of the P1 interpolant of `nodal` on triangle t.
  std::array<double, 2> gradient(std::span<const double> nodal, std::size_t t) const;

  /// Triangle containing p. With `periodic`, p is first wrapped into the square.
  std::size_t locate(Point2 p, bool periodic) const;
  /// Value at p of the P1 interpolant of `nodal`.
  double interpolate(std::span<const double> nodal, Point2 p, bool periodic) const;

 private:
  int n_ = 0;
  double h_ = 0.0;
  double side_ = 0.0;
  Point2 origin_{};
};

Mesh build_mesh(int n_per_side, Point2 origin = {}, double side_length = 1.0);

/// P1 function: one value per mesh node.
struct FeFunction {
  Mesh mesh;
  std::vector<double> values;

  FeFunction() = default;
  explicit FeFunction(const Mesh &m) : mesh(m), values(m.node_count(), 0.0) {}
  FeFunction(const Mesh &m, std::vector<double> v);
};

/// Per-triangle gradients of a P1 function.
std::vector<std::array<double, 2>> element_gradients(const FeFunction &u);

}  // namespace bestmat
