#include "bestmat/sym_matrix.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace bestmat {

double Sym2::min_eigenvalue() const {
  const double m = 0.5 * (xx + yy);
  const double r = std::hypot(0.5 * (xx - yy), xy);
  return m - r;
}

double Sym2::max_eigenvalue() const {
  const double m = 0.5 * (xx + yy);
  const double r = std::hypot(0.5 * (xx - yy), xy);
  return m + r;
}

SymMatrix::SymMatrix(int d) : d_(d), v_(Eigen::VectorXd::Zero(voigt_size(d))) {
  if (d < 1) throw std::invalid_argument("SymMatrix: dimension must be positive");
}

SymMatrix SymMatrix::identity(int d, double s) {
  SymMatrix a(d);
  for (int i = 0; i < d; ++i) a.set(i, i, s);
  return a;
}

SymMatrix SymMatrix::from_voigt(int d, const Eigen::VectorXd &v) {
  if (v.size() != voigt_size(d)) throw std::invalid_argument("SymMatrix: bad Voigt length");
  SymMatrix a(d);
  a.v_ = v;
  return a;
}

SymMatrix SymMatrix::from_dense(const Eigen::MatrixXd &m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("SymMatrix: matrix not square");
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = i + 1; j < m.cols(); ++j)
      if (m(i, j) != m(j, i)) throw std::invalid_argument("SymMatrix: matrix not symmetric");
  return symmetrized(m);
}

SymMatrix SymMatrix::symmetrized(const Eigen::MatrixXd &m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("SymMatrix: matrix not square");
  const int d = static_cast<int>(m.rows());
  SymMatrix a(d);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) a.set(i, j, 0.5 * (m(i, j) + m(j, i)));
  return a;
}

SymMatrix SymMatrix::from_sym2(const Sym2 &s) {
  SymMatrix a(2);
  a.v_ << s.xx, s.xy, s.yy;
  return a;
}

int SymMatrix::voigt_index(int d, int i, int j) {
  if (i > j) std::swap(i, j);
  // rows 0..i-1 contribute d, d-1, ... entries
  return i * d - i * (i - 1) / 2 + (j - i);
}

Eigen::MatrixXd SymMatrix::dense() const {
  Eigen::MatrixXd m(d_, d_);
  for (int i = 0; i < d_; ++i)
    for (int j = 0; j < d_; ++j) m(i, j) = (*this)(i, j);
  return m;
}

Sym2 SymMatrix::to_sym2() const {
  if (d_ != 2) throw std::logic_error("SymMatrix: to_sym2 needs d = 2");
  return {v_[0], v_[1], v_[2]};
}

double SymMatrix::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense(), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double SymMatrix::max_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense(), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(d_ - 1);
}

bool SymMatrix::is_positive_definite() const { return d_ > 0 && min_eigenvalue() > 0.0; }

double SymMatrix::norm() const { return dense().norm(); }

SymMatrix &SymMatrix::operator+=(const SymMatrix &o) {
  if (o.d_ != d_) throw std::invalid_argument("SymMatrix: dimension mismatch");
  v_ += o.v_;
  return *this;
}

SymMatrix &SymMatrix::operator-=(const SymMatrix &o) {
  if (o.d_ != d_) throw std::invalid_argument("SymMatrix: dimension mismatch");
  v_ -= o.v_;
  return *this;
}

SymMatrix &SymMatrix::operator*=(double s) {
  v_ *= s;
  return *this;
}

std::ostream &operator<<(std::ostream &os, const SymMatrix &a) {
  os << "[";
  for (int i = 0; i < a.dim(); ++i) {
    os << (i ? "; " : "");
    for (int j = 0; j < a.dim(); ++j) os << (j ? " " : "") << a(i, j);
  }
  return os << "]";
}

}  // namespace bestmat
