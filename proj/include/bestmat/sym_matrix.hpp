#pragma once

#include <Eigen/Dense>

#include <array>
#include <iosfwd>

namespace bestmat {

/// 2x2 symmetric matrix used in element loops.
struct Sym2 {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;

  static Sym2 identity(double s = 1.0) { return {s, 0.0, s}; }

  double trace() const { return xx + yy; }
  double det() const { return xx * yy - xy * xy; }
  double min_eigenvalue() const;
  double max_eigenvalue() const;
  bool is_positive_definite() const { return xx > 0.0 && det() > 0.0; }

  std::array<double, 2> apply(double gx, double gy) const {
    return {xx * gx + xy * gy, xy * gx + yy * gy};
  }
  double quad(double ax, double ay, double bx, double by) const {
    return ax * (xx * bx + xy * by) + ay * (xy * bx + yy * by);
  }

  Sym2 &operator+=(const Sym2 &o) {
    xx += o.xx;
    xy += o.xy;
    yy += o.yy;
    return *this;
  }
  friend Sym2 operator*(double s, const Sym2 &a) { return {s * a.xx, s * a.xy, s * a.yy}; }
  friend bool operator==(const Sym2 &, const Sym2 &) = default;
};

/// Symmetric d x d matrix stored in Voigt order (i <= j, row major).
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(int d);

  static SymMatrix identity(int d, double s = 1.0);
  static SymMatrix from_voigt(int d, const Eigen::VectorXd &v);
  /// Throws if `m` is not exactly symmetric.
  static SymMatrix from_dense(const Eigen::MatrixXd &m);
  static SymMatrix symmetrized(const Eigen::MatrixXd &m);
  static SymMatrix from_sym2(const Sym2 &a);

  static int voigt_size(int d) { return d * (d + 1) / 2; }
  static int voigt_index(int d, int i, int j);

  int dim() const { return d_; }
  double operator()(int i, int j) const { return v_[voigt_index(d_, i, j)]; }
  void set(int i, int j, double value) { v_[voigt_index(d_, i, j)] = value; }
  const Eigen::VectorXd &voigt() const { return v_; }
  Eigen::VectorXd &voigt() { return v_; }

  Eigen::MatrixXd dense() const;
  Sym2 to_sym2() const;

  double min_eigenvalue() const;
  double max_eigenvalue() const;
  bool is_positive_definite() const;
  /// Frobenius norm over all d^2 entries.
  double norm() const;

  SymMatrix &operator+=(const SymMatrix &o);
  SymMatrix &operator-=(const SymMatrix &o);
  SymMatrix &operator*=(double s);
  friend SymMatrix operator+(SymMatrix a, const SymMatrix &b) { return a += b; }
  friend SymMatrix operator-(SymMatrix a, const SymMatrix &b) { return a -= b; }
  friend SymMatrix operator*(double s, SymMatrix a) { return a *= s; }
  friend bool operator==(const SymMatrix &a, const SymMatrix &b) {
    return a.d_ == b.d_ && a.v_ == b.v_;
  }

 private:
  int d_ = 0;
  Eigen::VectorXd v_;
};

std::ostream &operator<<(std::ostream &os, const SymMatrix &a);

}  // namespace bestmat
