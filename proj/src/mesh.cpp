#include "bestmat/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bestmat {

Mesh::Mesh(int n_per_side, Point2 origin, double side_length)
    : n_(n_per_side), h_(side_length / n_per_side), side_(side_length), origin_(origin) {
  if (n_per_side < 2) throw std::invalid_argument("Mesh: need at least 2 cells per side");
  if (!(side_length > 0.0)) throw std::invalid_argument("Mesh: side length must be positive");
}

Mesh build_mesh(int n_per_side, Point2 origin, double side_length) {
  return Mesh(n_per_side, origin, side_length);
}

Point2 Mesh::node(std::size_t k) const {
  const std::size_t m = std::size_t(n_ + 1);
  return node(int(k % m), int(k / m));
}

std::array<std::size_t, 3> Mesh::triangle(std::size_t t) const {
  const std::size_t cell = t / 2;
  const int i = int(cell % std::size_t(n_));
  const int j = int(cell / std::size_t(n_));
  if (t % 2 == 0) return {node_index(i, j), node_index(i + 1, j), node_index(i + 1, j + 1)};
  return {node_index(i, j), node_index(i + 1, j + 1), node_index(i, j + 1)};
}

Point2 Mesh::barycenter(std::size_t t) const {
  const std::size_t cell = t / 2;
  const int i = int(cell % std::size_t(n_));
  const int j = int(cell / std::size_t(n_));
  const double third = 1.0 / 3.0;
  if (t % 2 == 0) return {origin_.x + (i + 2 * third) * h_, origin_.y + (j + third) * h_};
  return {origin_.x + (i + third) * h_, origin_.y + (j + 2 * third) * h_};
}

bool Mesh::is_boundary_node(std::size_t k) const {
  const std::size_t m = std::size_t(n_ + 1);
  const std::size_t i = k % m, j = k / m;
  return i == 0 || j == 0 || i == std::size_t(n_) || j == std::size_t(n_);
}

bool Mesh::is_boundary_triangle(std::size_t t) const {
  const std::size_t cell = t / 2;
  const int i = int(cell % std::size_t(n_));
  const int j = int(cell / std::size_t(n_));
  return i == 0 || j == 0 || i == n_ - 1 || j == n_ - 1;
}

std::array<double, 2> Mesh::gradient(std::span<const double> u, std::size_t t) const {
  const auto v = triangle(t);
  const double a = u[v[0]], b = u[v[1]], c = u[v[2]];
  if (t % 2 == 0) return {(b - a) / h_, (c - b) / h_};
  return {(b - c) / h_, (c - a) / h_};
}

namespace {

double wrap(double s, double len) {
  double r = std::fmod(s, len);
  if (r < 0.0) r += len;
  return r;
}

}  // namespace

std::size_t Mesh::locate(Point2 p, bool periodic) const {
  double sx = p.x - origin_.x, sy = p.y - origin_.y;
  if (periodic) {
    sx = wrap(sx, side_);
    sy = wrap(sy, side_);
  }
  sx /= h_;
  sy /= h_;
  const int i = std::clamp(int(std::floor(sx)), 0, n_ - 1);
  const int j = std::clamp(int(std::floor(sy)), 0, n_ - 1);
  const double fx = sx - i, fy = sy - j;
  const std::size_t cell = std::size_t(j) * std::size_t(n_) + std::size_t(i);
  return fx >= fy ? 2 * cell : 2 * cell + 1;
}

double Mesh::interpolate(std::span<const double> u, Point2 p, bool periodic) const {
  double sx = p.x - origin_.x, sy = p.y - origin_.y;
  if (periodic) {
    sx = wrap(sx, side_);
    sy = wrap(sy, side_);
  }
  sx /= h_;
  sy /= h_;
  const int i = std::clamp(int(std::floor(sx)), 0, n_ - 1);
  const int j = std::clamp(int(std::floor(sy)), 0, n_ - 1);
  const double fx = sx - i, fy = sy - j;
  const double u00 = u[node_index(i, j)], u11 = u[node_index(i + 1, j + 1)];
  if (fx >= fy) return u00 + fx * (u[node_index(i + 1, j)] - u00) + fy * (u11 - u[node_index(i + 1, j)]);
  return u00 + fx * (u11 - u[node_index(i, j + 1)]) + fy * (u[node_index(i, j + 1)] - u00);
}

FeFunction::FeFunction(const Mesh &m, std::vector<double> v) : mesh(m), values(std::move(v)) {
  if (values.size() != mesh.node_count()) throw std::invalid_argument("FeFunction: size mismatch");
}

std::vector<std::array<double, 2>> element_gradients(const FeFunction &u) {
  std::vector<std::array<double, 2>> g(u.mesh.triangle_count());
  for (std::size_t t = 0; t < g.size(); ++t) g[t] = u.mesh.gradient(u.values, t);
  return g;
}

}  // namespace bestmat
