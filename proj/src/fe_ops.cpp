#include "bestmat/fe_ops.hpp"

#include <cmath>
#include <stdexcept>

namespace bestmat {

namespace {

// Midpoint values of one row of cells: horizontal edges at rows j and j+1,
// vertical edges (n+1 of them) and diagonals of row j.
struct MidRow {
  std::vector<double> h_lo, h_hi, v, d;
  explicit MidRow(int n) : h_lo(n), h_hi(n), v(n + 1), d(n) {}
};

template <class Fill>
std::vector<double> midpoint_load(const Mesh &mesh, Fill &&fill) {
  const int n = mesh.n_per_side();
  const double w = mesh.triangle_area() / 6.0;
  std::vector<double> b(mesh.node_count(), 0.0);
  MidRow row(n);
  for (int j = 0; j < n; ++j) {
    fill(j, row);
    for (int i = 0; i < n; ++i) {
      const std::size_t a = mesh.node_index(i, j);
      const std::size_t e = a + 1, nn = mesh.node_index(i, j + 1), ne = nn + 1;
      const double fh0 = row.h_lo[i], fh1 = row.h_hi[i], fd = row.d[i];
      const double fv0 = row.v[i], fv1 = row.v[i + 1];
      // lower triangle (a, e, ne)
      b[a] += w * (fh0 + fd);
      b[e] += w * (fh0 + fv1);
      b[ne] += w * (fv1 + fd);
      // upper triangle (a, ne, nn)
      b[a] += w * (fd + fv0);
      b[ne] += w * (fd + fh1);
      b[nn] += w * (fh1 + fv0);
    }
  }
  return b;
}

}  // namespace

std::vector<double> assemble_load(const Mesh &mesh, const std::function<double(Point2)> &f) {
  const int n = mesh.n_per_side();
  const double h = mesh.h();
  const Point2 o = mesh.origin();
  return midpoint_load(mesh, [&](int j, MidRow &row) {
    const double y0 = o.y + j * h, ym = y0 + 0.5 * h, y1 = y0 + h;
    for (int i = 0; i < n; ++i) {
      const double xm = o.x + (i + 0.5) * h;
      row.h_lo[i] = f({xm, y0});
      row.h_hi[i] = f({xm, y1});
      row.d[i] = f({xm, ym});
    }
    for (int i = 0; i <= n; ++i) row.v[i] = f({o.x + i * h, ym});
  });
}

std::vector<double> assemble_separable_load(const Mesh &mesh, std::span<const double> fx,
                                            std::span<const double> fy, double scale) {
  const int n = mesh.n_per_side();
  if (fx.size() != std::size_t(2 * n + 1) || fy.size() != std::size_t(2 * n + 1))
    throw std::invalid_argument("assemble_separable_load: tables need 2n+1 entries");
  return midpoint_load(mesh, [&](int j, MidRow &row) {
    const double y0 = scale * fy[2 * j], ym = scale * fy[2 * j + 1], y1 = scale * fy[2 * j + 2];
    for (int i = 0; i < n; ++i) {
      const double xm = fx[2 * i + 1];
      row.h_lo[i] = xm * y0;
      row.h_hi[i] = xm * y1;
      row.d[i] = xm * ym;
    }
    for (int i = 0; i <= n; ++i) row.v[i] = fx[2 * i] * ym;
  });
}

std::vector<double> assemble_divergence_load(const Mesh &mesh, const ElementVectorField &F) {
  if (F.size() != mesh.triangle_count()) throw std::invalid_argument("divergence load: size mismatch");
  return assemble_divergence_load(mesh, [&](std::size_t t) { return F[t]; });
}

std::vector<double> assemble_divergence_load(const Mesh &mesh,
                                             const std::function<std::array<double, 2>(std::size_t)> &F) {
  const int n = mesh.n_per_side();
  const double s = mesh.triangle_area() / mesh.h();
  std::vector<double> b(mesh.node_count(), 0.0);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const std::size_t t = 2 * (std::size_t(j) * n + i);
      const std::size_t a = mesh.node_index(i, j);
      const std::size_t e = a + 1, nn = mesh.node_index(i, j + 1), ne = nn + 1;
      const auto f0 = F(t);
      const auto f1 = F(t + 1);
      // lower: grad a = (-1,0)/h, grad e = (1,-1)/h, grad ne = (0,1)/h
      b[a] += s * (-f0[0]);
      b[e] += s * (f0[0] - f0[1]);
      b[ne] += s * f0[1];
      // upper: grad a = (0,-1)/h, grad ne = (1,0)/h, grad nn = (-1,1)/h
      b[a] += s * (-f1[1]);
      b[ne] += s * f1[0];
      b[nn] += s * (f1[1] - f1[0]);
    }
  return b;
}

std::vector<double> fold_periodic(const Mesh &mesh, std::span<const double> v) {
  const int n = mesh.n_per_side();
  std::vector<double> out(std::size_t(n) * n, 0.0);
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) out[std::size_t(j % n) * n + (i % n)] += v[mesh.node_index(i, j)];
  return out;
}

std::vector<double> unfold_periodic(const Mesh &mesh, std::span<const double> v) {
  const int n = mesh.n_per_side();
  std::vector<double> out(mesh.node_count());
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) out[mesh.node_index(i, j)] = v[std::size_t(j % n) * n + (i % n)];
  return out;
}

double mass_inner(const Mesh &mesh, std::span<const double> u, std::span<const double> v) {
  const int n = mesh.n_per_side();
  const double w = mesh.triangle_area() / 12.0;
  double total = 0.0;
  for (int j = 0; j < n; ++j) {
    double row = 0.0;
    for (int i = 0; i < n; ++i) {
      const std::size_t a = mesh.node_index(i, j);
      const std::size_t e = a + 1, nn = mesh.node_index(i, j + 1), ne = nn + 1;
      const double su0 = u[a] + u[e] + u[ne], sv0 = v[a] + v[e] + v[ne];
      const double su1 = u[a] + u[ne] + u[nn], sv1 = v[a] + v[ne] + v[nn];
      const double d_ae = u[a] * v[a] + u[ne] * v[ne];
      row += su0 * sv0 + su1 * sv1 + 2.0 * d_ae + u[e] * v[e] + u[nn] * v[nn];
    }
    total += row;
  }
  return w * total;
}

std::vector<double> mass_apply(const Mesh &mesh, std::span<const double> u) {
  const int n = mesh.n_per_side();
  const double w = mesh.triangle_area() / 12.0;
  std::vector<double> y(mesh.node_count(), 0.0);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const std::size_t a = mesh.node_index(i, j);
      const std::size_t e = a + 1, nn = mesh.node_index(i, j + 1), ne = nn + 1;
      const double s0 = u[a] + u[e] + u[ne], s1 = u[a] + u[ne] + u[nn];
      y[a] += w * (s0 + u[a] + s1 + u[a]);
      y[e] += w * (s0 + u[e]);
      y[ne] += w * (s0 + u[ne] + s1 + u[ne]);
      y[nn] += w * (s1 + u[nn]);
    }
  return y;
}

double stiffness_inner(const Mesh &mesh, std::span<const double> u, std::span<const double> v) {
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto gu = mesh.gradient(u, t), gv = mesh.gradient(v, t);
    total += gu[0] * gv[0] + gu[1] * gv[1];
  }
  return mesh.triangle_area() * total;
}

double l2_norm(const FeFunction &u) { return std::sqrt(mass_inner(u.mesh, u.values, u.values)); }

FeFunction interpolate(const Mesh &mesh, const std::function<double(Point2)> &f) {
  FeFunction u(mesh);
  for (std::size_t k = 0; k < u.values.size(); ++k) u.values[k] = f(mesh.node(k));
  return u;
}

}  // namespace bestmat
