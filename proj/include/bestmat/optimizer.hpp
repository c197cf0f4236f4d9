#pragma once

#include "bestmat/sym_matrix.hpp"
#include "bestmat/tensor_cache.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace bestmat {

/// G[p,q] = 1/2 sum K6 A A - sum (K4[ij,p,q] + K4[ij,q,p]) A + K2[p,q], so Phi(A, c) = c^T G c.
Eigen::MatrixXd assemble_G(const TensorCache &cache, const SymMatrix &A);

struct EigenPair {
  double lambda = 0.0;
  Eigen::VectorXd c;
  int iterations = 0;
  bool used_dense_fallback = false;
};

/// Top eigenpair of a symmetric positive semi-definite matrix by power iteration
/// from (1,...,1)/sqrt(P). Falls back to a dense eigensolver when the iteration
/// cap is hit or the iterate collapses. The first nonzero component of the
/// returned vector is positive.
EigenPair power_method(const Eigen::MatrixXd &G, double tol = 1e-13, int max_iterations = 20000);

/// Quadratic pieces for fixed c: BB[i,j,k,l] = sum K6 c c, B[i,j] = sum (K4[ijpq] + K4[ijqp]) c c, b = sum K2 c c.
struct QuadraticParts {
  int d = 0;
  std::vector<double> BB;  // d^4, full index
  SymMatrix B;
  double b = 0.0;

  double bb(int i, int j, int k, int l) const { return BB[((std::size_t(i) * d + j) * d + k) * d + l]; }
  /// 1/2 A:BB:A - B:A + b.
  double value(const SymMatrix &A) const;
};

QuadraticParts assemble_B(const TensorCache &cache, const Eigen::VectorXd &c);

struct InfStep {
  SymMatrix A;
  double condition = 0.0;
  bool positive_definite = true;
};

/// Minimizer over symmetric A of the quadratic: solves sum_kl BB[ijkl] A_kl = B_ij for i <= j.
/// Throws std::runtime_error when the Voigt system is singular (condition > 1e12).
InfStep solve_inf_step(const QuadraticParts &parts);

/// Phi(A) = max over unit c of c^T G(A) c.
double objective(const TensorCache &cache, const SymMatrix &A);

struct GradientInfo {
  double value = 0.0;
  /// d Phi / d A_ij with all d^2 entries treated as independent.
  SymMatrix gradient;
  double eigengap = 0.0;
  /// False when the top eigenvalue is (nearly) repeated.
  bool reliable = true;
};

GradientInfo objective_gradient(const TensorCache &cache, const SymMatrix &A);

struct StopCriteria {
  /// Stop when ||grad|| <= grad_tol_factor (||BB A|| + ||B||).
  double grad_tol_factor = 1e-9;
  double step_tol = 1e-10;
  int max_iterations = 500;
  /// Newton refinement of Phi when the relaxed iteration hits max_iterations.
  bool polish = true;
  int polish_iterations = 50;
};

struct TraceRecord {
  int iteration = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
  SymMatrix A;
};

/// `polished`: the relaxed iteration hit max_iterations and the Newton refinement met the gradient test.
enum class StopReason { gradient, step, max_iterations, polished };
std::string to_string(StopReason r);

struct BestMatrixResult {
  /// Final iterate when a tolerance was met, the refined matrix when the refinement
  /// converged, otherwise the relaxed iterate of smallest objective.
  SymMatrix A;
  double objective = 0.0;
  int best_iteration = 0;
  /// Final iterate.
  SymMatrix last;
  StopReason reason = StopReason::max_iterations;
  std::vector<TraceRecord> trace;
  /// Newton refinement steps, numbered after the relaxed iterations.
  std::vector<TraceRecord> polish_trace;
};

class OptimizerError : public std::runtime_error {
 public:
  OptimizerError(const std::string &what, std::vector<TraceRecord> trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const std::vector<TraceRecord> &trace() const { return trace_; }

 private:
  std::vector<TraceRecord> trace_;
};

/// Relaxed inf-sup iteration A <- (1 - mu) A + mu argmin_A c^T G(A) c, c the top eigenvector.
BestMatrixResult best_matrix(const TensorCache &cache, double mu, const SymMatrix &A0,
                             const StopCriteria &stop = {});

void write_trace_csv(std::ostream &os, const std::vector<TraceRecord> &trace);
/// Relaxed iterations followed by the refinement steps.
void write_trace_csv(std::ostream &os, const BestMatrixResult &result);

}  // namespace bestmat
