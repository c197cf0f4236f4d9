#pragma once

#include "bestmat/homogenization.hpp"
#include "bestmat/mesh.hpp"
#include "bestmat/reconstruction.hpp"
#include "bestmat/sym_matrix.hpp"

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>

namespace bestmat {

/// (sum_ij |A_ij - R_ij|^2 / sum_ij |R_ij|^2)^(1/2) over all d^2 entries.
double err_mat(const SymMatrix &candidate, const SymMatrix &reference);

/// Fills out(q, k) with the value of function q at edge midpoint k of triangle t.
using MidpointValues = std::function<void(std::size_t t, Eigen::Ref<Eigen::MatrixXd> out)>;
/// Fills out(q, 0..1) with the gradient of function q on triangle t.
using ElementGradients = std::function<void(std::size_t t, Eigen::Ref<Eigen::MatrixXd> out)>;

/// L2 Gram matrix by the edge-midpoint rule, which is the consistent mass matrix for P1 functions.
Eigen::MatrixXd l2_gram(const Mesh &mesh, int Q, const MidpointValues &values);
/// Gradient Gram matrix over the triangles not touching the boundary.
Eigen::MatrixXd h1_gram(const Mesh &mesh, int Q, const ElementGradients &grads);

/// Midpoint values of P1 functions, optionally minus a second set.
MidpointValues p1_midpoints(std::span<const FeFunction> u, std::span<const FeFunction> minus = {});

struct SupResult {
  /// (lambda_max(G_err) / |fine(f_hat)|^2)^(1/2).
  double value = 0.0;
  /// Unit coefficient vector of the maximizing load.
  Eigen::VectorXd f_hat;
  double numerator = 0.0;
  double denominator = 0.0;
  std::optional<std::array<double, 2>> theta;
  bool theta_on_boundary = false;
};

SupResult sup_ratio(const Eigen::MatrixXd &error_gram, const Eigen::MatrixXd &fine_gram);

/// sup over unit c of |sum c_q (fine_q - candidate_q)|_L2 relative to |fine(f_hat)|_L2.
SupResult sup_L2_error(std::span<const FeFunction> fine, std::span<const FeFunction> candidate,
                       const Eigen::MatrixXd *fine_gram = nullptr);

enum class ThetaMode { none, infimize };

/// Two-scale candidate u* + eps sum_i (w_i(x/eps + shift) + theta_i) d_i u*, theta chosen by
/// a 5x5 grid on [-2, 2]^2 then compass refinement to 1e-4 when infimizing.
SupResult sup_L2_error_two_scale(std::span<const FeFunction> fine, std::span<const FeFunction> ustar,
                                 const CorrectorSet &correctors, double eps, Point2 shift, ThetaMode mode,
                                 const Eigen::MatrixXd *fine_gram = nullptr);

/// Per-triangle matrix applied to the coarse gradients.
using ElementMatrix = std::function<Mat2(std::size_t t)>;

/// sup over unit c of |grad fine_c - C grad coarse_c| over interior triangles, relative to |grad fine(f_hat)|.
SupResult sup_H1_error(std::span<const FeFunction> fine, std::span<const FeFunction> coarse, const ElementMatrix &C,
                       const Eigen::MatrixXd *fine_gram = nullptr);

Eigen::MatrixXd fine_l2_gram(std::span<const FeFunction> fine);
Eigen::MatrixXd fine_h1_gram(std::span<const FeFunction> fine);

}  // namespace bestmat
