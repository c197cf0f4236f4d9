#include "bestmat/metrics.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bestmat {

double err_mat(const SymMatrix &candidate, const SymMatrix &reference) {
  if (candidate.dim() != reference.dim()) throw std::invalid_argument("err_mat: dimension mismatch");
  const double den = reference.norm();
  if (den == 0.0) throw std::invalid_argument("err_mat: zero reference matrix");
  return (candidate - reference).norm() / den;
}

namespace {

void add_outer(Eigen::MatrixXd &G, const Eigen::MatrixXd &V, double w) {
  const Eigen::Index Q = V.rows();
  for (Eigen::Index k = 0; k < V.cols(); ++k)
    for (Eigen::Index q = 0; q < Q; ++q) {
      const double a = w * V(q, k);
      for (Eigen::Index r = q; r < Q; ++r) G(q, r) += a * V(r, k);
    }
}

void symmetrize_upper(Eigen::MatrixXd &G) {
  for (Eigen::Index q = 0; q < G.rows(); ++q)
    for (Eigen::Index r = 0; r < q; ++r) G(q, r) = G(r, q);
}

std::array<Point2, 3> midpoints(const Mesh &mesh, std::size_t t) {
  const auto v = mesh.triangle(t);
  const Point2 a = mesh.node(v[0]), b = mesh.node(v[1]), c = mesh.node(v[2]);
  return {Point2{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)}, Point2{0.5 * (b.x + c.x), 0.5 * (b.y + c.y)},
          Point2{0.5 * (c.x + a.x), 0.5 * (c.y + a.y)}};
}

void check_sets(std::span<const FeFunction> a, std::span<const FeFunction> b) {
  if (a.empty() || a.size() != b.size()) throw std::invalid_argument("metrics: function sets differ in size");
  for (std::size_t q = 0; q < a.size(); ++q)
    if (a[q].values.size() != a[0].mesh.node_count() || b[q].values.size() != a[0].mesh.node_count())
      throw std::invalid_argument("metrics: functions live on different meshes");
}

}  // namespace

Eigen::MatrixXd l2_gram(const Mesh &mesh, int Q, const MidpointValues &values) {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(Q, Q);
  Eigen::MatrixXd V(Q, 3);
  const double w = mesh.triangle_area() / 3.0;
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    values(t, V);
    add_outer(G, V, w);
  }
  symmetrize_upper(G);
  return G;
}

Eigen::MatrixXd h1_gram(const Mesh &mesh, int Q, const ElementGradients &grads) {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(Q, Q);
  Eigen::MatrixXd V(Q, 2);
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    if (mesh.is_boundary_triangle(t)) continue;
    grads(t, V);
    add_outer(G, V, mesh.triangle_area());
  }
  symmetrize_upper(G);
  return G;
}

MidpointValues p1_midpoints(std::span<const FeFunction> u, std::span<const FeFunction> minus) {
  return [u, minus](std::size_t t, Eigen::Ref<Eigen::MatrixXd> out) {
    const auto v = u[0].mesh.triangle(t);
    for (std::size_t q = 0; q < u.size(); ++q) {
      double a = u[q].values[v[0]], b = u[q].values[v[1]], c = u[q].values[v[2]];
      if (!minus.empty()) {
        a -= minus[q].values[v[0]];
        b -= minus[q].values[v[1]];
        c -= minus[q].values[v[2]];
      }
      out(q, 0) = 0.5 * (a + b);
      out(q, 1) = 0.5 * (b + c);
      out(q, 2) = 0.5 * (c + a);
    }
  };
}

SupResult sup_ratio(const Eigen::MatrixXd &error_gram, const Eigen::MatrixXd &fine_gram) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(error_gram);
  const Eigen::Index Q = error_gram.rows();
  SupResult r;
  r.numerator = std::max(es.eigenvalues()(Q - 1), 0.0);
  r.f_hat = es.eigenvectors().col(Q - 1);
  for (Eigen::Index k = 0; k < Q; ++k)
    if (std::abs(r.f_hat(k)) > 1e-12) {
      if (r.f_hat(k) < 0) r.f_hat = -r.f_hat;
      break;
    }
  r.denominator = r.f_hat.dot(fine_gram * r.f_hat);
  if (!(r.denominator > 0.0)) throw std::runtime_error("sup_ratio: fine solution vanishes at the maximizing load");
  r.value = std::sqrt(r.numerator / r.denominator);
  return r;
}

Eigen::MatrixXd fine_l2_gram(std::span<const FeFunction> fine) {
  return l2_gram(fine[0].mesh, int(fine.size()), p1_midpoints(fine));
}

Eigen::MatrixXd fine_h1_gram(std::span<const FeFunction> fine) {
  const Mesh &mesh = fine[0].mesh;
  return h1_gram(mesh, int(fine.size()), [&](std::size_t t, Eigen::Ref<Eigen::MatrixXd> out) {
    for (std::size_t q = 0; q < fine.size(); ++q) {
      const auto g = mesh.gradient(fine[q].values, t);
      out(q, 0) = g[0];
      out(q, 1) = g[1];
    }
  });
}

SupResult sup_L2_error(std::span<const FeFunction> fine, std::span<const FeFunction> candidate,
                       const Eigen::MatrixXd *fine_gram) {
  check_sets(fine, candidate);
  const Eigen::MatrixXd Gf = fine_gram ? *fine_gram : fine_l2_gram(fine);
  return sup_ratio(l2_gram(fine[0].mesh, int(fine.size()), p1_midpoints(fine, candidate)), Gf);
}

SupResult sup_L2_error_two_scale(std::span<const FeFunction> fine, std::span<const FeFunction> ustar,
                                 const CorrectorSet &correctors, double eps, Point2 shift, ThetaMode mode,
                                 const Eigen::MatrixXd *fine_gram) {
  check_sets(fine, ustar);
  const Mesh &mesh = fine[0].mesh;
  const Mesh &cell = correctors.mesh;
  const int Q = int(fine.size());
  // e_q(theta) = a_q - sum_i theta_i b_iq, with b_iq = eps d_i u*_q constant per triangle
  Eigen::MatrixXd Gaa = Eigen::MatrixXd::Zero(Q, Q);
  std::array<Eigen::MatrixXd, 2> Gab{Eigen::MatrixXd::Zero(Q, Q), Eigen::MatrixXd::Zero(Q, Q)};
  Eigen::MatrixXd Gbb = Eigen::MatrixXd::Zero(2 * Q, 2 * Q);
  Eigen::MatrixXd A(Q, 3), B(2 * Q, 1);
  Eigen::VectorXd abar(Q);
  const double area = mesh.triangle_area();
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto v = mesh.triangle(t);
    const auto mids = midpoints(mesh, t);
    double w[3][2];
    for (int k = 0; k < 3; ++k) {
      const Point2 y{mids[k].x / eps + shift.x, mids[k].y / eps + shift.y};
      w[k][0] = cell.interpolate(correctors.correctors[0].values, y, true);
      w[k][1] = cell.interpolate(correctors.correctors[1].values, y, true);
    }
    for (int q = 0; q < Q; ++q) {
      const auto &F = fine[q].values;
      const auto &U = ustar[q].values;
      const auto g = mesh.gradient(U, t);
      B(q, 0) = eps * g[0];
      B(Q + q, 0) = eps * g[1];
      const double e0 = F[v[0]] - U[v[0]], e1 = F[v[1]] - U[v[1]], e2 = F[v[2]] - U[v[2]];
      const double base[3] = {0.5 * (e0 + e1), 0.5 * (e1 + e2), 0.5 * (e2 + e0)};
      for (int k = 0; k < 3; ++k) A(q, k) = base[k] - eps * (w[k][0] * g[0] + w[k][1] * g[1]);
      abar(q) = (A(q, 0) + A(q, 1) + A(q, 2)) / 3.0;
    }
    add_outer(Gaa, A, area / 3.0);
    add_outer(Gbb, B, area);
    for (int i = 0; i < 2; ++i) Gab[i].noalias() += area * abar * B.col(0).segment(i * Q, Q).transpose();
  }
  symmetrize_upper(Gaa);
  symmetrize_upper(Gbb);
  const Eigen::MatrixXd Gf = fine_gram ? *fine_gram : fine_l2_gram(fine);

  auto evaluate = [&](double t0, double t1) {
    const double th[2] = {t0, t1};
    Eigen::MatrixXd G = Gaa;
    for (int i = 0; i < 2; ++i) {
      G -= th[i] * (Gab[i] + Gab[i].transpose());
      for (int j = 0; j < 2; ++j) G += th[i] * th[j] * Gbb.block(i * Q, j * Q, Q, Q);
    }
    SupResult r = sup_ratio(0.5 * (G + G.transpose()), Gf);
    r.theta = std::array<double, 2>{t0, t1};
    return r;
  };

  SupResult best = evaluate(0.0, 0.0);
  if (mode == ThetaMode::none) return best;
  constexpr double lim = 2.0;
  for (int a = -2; a <= 2; ++a)
    for (int b = -2; b <= 2; ++b) {
      SupResult r = evaluate(a, b);
      if (r.value < best.value) best = r;
    }
  for (double step = 0.5; step >= 1e-4;) {
    bool moved = false;
    for (int dir = 0; dir < 4 && !moved; ++dir) {
      auto th = *best.theta;
      th[dir / 2] += (dir % 2 ? -step : step);
      th[dir / 2] = std::clamp(th[dir / 2], -lim, lim);
      SupResult r = evaluate(th[0], th[1]);
      if (r.value < best.value) {
        best = r;
        moved = true;
      }
    }
    if (!moved) step *= 0.5;
  }
  best.theta_on_boundary = std::abs((*best.theta)[0]) >= lim || std::abs((*best.theta)[1]) >= lim;
  if (best.theta_on_boundary)
    spdlog::warn("two-scale theta search reached the boundary of [-2, 2]^2 at ({}, {})", (*best.theta)[0],
                 (*best.theta)[1]);
  return best;
}

SupResult sup_H1_error(std::span<const FeFunction> fine, std::span<const FeFunction> coarse, const ElementMatrix &C,
                       const Eigen::MatrixXd *fine_gram) {
  check_sets(fine, coarse);
  const Mesh &mesh = fine[0].mesh;
  const Eigen::MatrixXd Gf = fine_gram ? *fine_gram : fine_h1_gram(fine);
  const Eigen::MatrixXd G = h1_gram(mesh, int(fine.size()), [&](std::size_t t, Eigen::Ref<Eigen::MatrixXd> out) {
    const Mat2 c = C(t);
    for (std::size_t q = 0; q < fine.size(); ++q) {
      const auto f = mesh.gradient(fine[q].values, t);
      const auto g = mesh.gradient(coarse[q].values, t);
      out(q, 0) = f[0] - (c[0] * g[0] + c[1] * g[1]);
      out(q, 1) = f[1] - (c[2] * g[0] + c[3] * g[1]);
    }
  });
  return sup_ratio(G, Gf);
}

}  // namespace bestmat
