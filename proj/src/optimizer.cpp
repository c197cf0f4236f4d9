#include "bestmat/optimizer.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace bestmat {

Eigen::MatrixXd assemble_G(const TensorCache &cache, const SymMatrix &A) {
  const int d = cache.d(), P = cache.P();
  if (A.dim() != d) throw std::invalid_argument("assemble_G: dimension mismatch");
  Eigen::MatrixXd G(P, P);
  for (int p = 0; p < P; ++p)
    for (int q = 0; q < P; ++q) {
      double quad = 0.0, lin = 0.0;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          const double aij = A(i, j);
          lin += (cache.k4(i, j, p, q) + cache.k4(i, j, q, p)) * aij;
          for (int k = 0; k < d; ++k)
            for (int l = 0; l < d; ++l) quad += cache.k6(i, j, k, l, p, q) * aij * A(k, l);
        }
      G(p, q) = 0.5 * quad - lin + cache.k2(p, q);
    }
  return 0.5 * (G + G.transpose());
}

namespace {

EigenPair dense_top(const Eigen::MatrixXd &G) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  EigenPair e;
  const Eigen::Index P = G.rows();
  e.lambda = es.eigenvalues()(P - 1);
  e.c = es.eigenvectors().col(P - 1);
  e.used_dense_fallback = true;
  return e;
}

void fix_sign(Eigen::VectorXd &c) {
  const double floor = 1e-12 * c.cwiseAbs().maxCoeff();
  for (Eigen::Index k = 0; k < c.size(); ++k)
    if (std::abs(c(k)) > floor) {
      if (c(k) < 0.0) c = -c;
      return;
    }
}

}  // namespace

EigenPair power_method(const Eigen::MatrixXd &G, double tol, int max_iterations) {
  const Eigen::Index P = G.rows();
  if (P == 0 || G.cols() != P) throw std::invalid_argument("power_method: matrix must be square");
  const double scale = G.cwiseAbs().maxCoeff();
  EigenPair e;
  e.c = Eigen::VectorXd::Constant(P, 1.0 / std::sqrt(double(P)));
  bool converged = false;
  for (int it = 1; it <= max_iterations; ++it) {
    const Eigen::VectorXd w = G * e.c;
    e.lambda = e.c.dot(w);
    e.iterations = it;
    const double res = (w - e.lambda * e.c).norm();
    if (res <= tol * std::max(e.lambda, 0.0) || res == 0.0) {
      converged = true;
      break;
    }
    const double nw = w.norm();
    if (!(nw > 1e-14 * scale)) break;
    e.c = w / nw;
  }
  // The start vector can be orthogonal to the top eigenspace; the dense check catches that.
  if (converged) {
    const EigenPair ref = dense_top(G);
    if (e.lambda < ref.lambda - 1e-10 * std::max(std::abs(ref.lambda), 1.0)) converged = false;
  }
  if (!converged) {
    const int its = e.iterations;
    e = dense_top(G);
    e.iterations = its;
  }
  fix_sign(e.c);
  return e;
}

double QuadraticParts::value(const SymMatrix &A) const {
  double quad = 0.0, lin = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      lin += B(i, j) * A(i, j);
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) quad += bb(i, j, k, l) * A(i, j) * A(k, l);
    }
  return 0.5 * quad - lin + b;
}

QuadraticParts assemble_B(const TensorCache &cache, const Eigen::VectorXd &c) {
  const int d = cache.d(), P = cache.P();
  if (c.size() != P) throw std::invalid_argument("assemble_B: coefficient length mismatch");
  QuadraticParts out;
  out.d = d;
  out.BB.assign(std::size_t(d) * d * d * d, 0.0);
  out.B = SymMatrix(d);
  Eigen::MatrixXd Bfull = Eigen::MatrixXd::Zero(d, d);
  for (int p = 0; p < P; ++p)
    for (int q = 0; q < P; ++q) {
      const double cc = c(p) * c(q);
      out.b += cache.k2(p, q) * cc;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          Bfull(i, j) += (cache.k4(i, j, p, q) + cache.k4(i, j, q, p)) * cc;
          for (int k = 0; k < d; ++k)
            for (int l = 0; l < d; ++l)
              out.BB[((std::size_t(i) * d + j) * d + k) * d + l] += cache.k6(i, j, k, l, p, q) * cc;
        }
    }
  out.B = SymMatrix::symmetrized(Bfull);
  return out;
}

InfStep solve_inf_step(const QuadraticParts &parts) {
  const int d = parts.d;
  const int V = SymMatrix::voigt_size(d);
  Eigen::MatrixXd S(V, V);
  Eigen::VectorXd rhs(V);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      const int r = SymMatrix::voigt_index(d, i, j);
      rhs(r) = parts.B(i, j);
      for (int k = 0; k < d; ++k)
        for (int l = k; l < d; ++l) {
          const int s = SymMatrix::voigt_index(d, k, l);
          S(r, s) = parts.bb(i, j, k, l) * (k == l ? 1.0 : 2.0);
        }
    }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(S);
  const auto &sv = svd.singularValues();
  InfStep out;
  out.condition = sv(V - 1) > 0.0 ? sv(0) / sv(V - 1) : std::numeric_limits<double>::infinity();
  if (!(out.condition <= 1e12))
    throw std::runtime_error("inf step: singular quadratic form (condition " + std::to_string(out.condition) + ")");
  out.A = SymMatrix::from_voigt(d, S.fullPivLu().solve(rhs));
  out.positive_definite = out.A.is_positive_definite();
  return out;
}

double objective(const TensorCache &cache, const SymMatrix &A) {
  return power_method(assemble_G(cache, A)).lambda;
}

namespace {

SymMatrix gradient_of(const QuadraticParts &parts, const SymMatrix &A) {
  const int d = parts.d;
  SymMatrix g(d);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      double s = -parts.B(i, j);
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) s += parts.bb(i, j, k, l) * A(k, l);
      g.set(i, j, s);
    }
  return g;
}

}  // namespace

GradientInfo objective_gradient(const TensorCache &cache, const SymMatrix &A) {
  const Eigen::MatrixXd G = assemble_G(cache, A);
  const EigenPair e = power_method(G);
  GradientInfo out;
  out.value = e.lambda;
  out.gradient = gradient_of(assemble_B(cache, e.c), A);
  if (G.rows() > 1) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
    const auto &ev = es.eigenvalues();
    out.eigengap = ev(G.rows() - 1) - ev(G.rows() - 2);
    out.reliable = out.eigengap > 1e-8 * std::max(std::abs(ev(G.rows() - 1)), 1e-300);
  } else {
    out.eigengap = std::numeric_limits<double>::infinity();
  }
  return out;
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::gradient:
      return "gradient";
    case StopReason::step:
      return "step";
    case StopReason::max_iterations:
      return "max_iterations";
    case StopReason::polished:
      return "polished";
  }
  return "unknown";
}

namespace {

// Phi and its derivative with respect to the Voigt coordinates.
struct VoigtGradient {
  double value = 0.0;
  Eigen::VectorXd g;
  double gnorm = 0.0;
  double tolerance = 0.0;
  bool reliable = true;
};

VoigtGradient voigt_gradient(const TensorCache &cache, const SymMatrix &A, double factor) {
  const Eigen::MatrixXd G = assemble_G(cache, A);
  const EigenPair e = power_method(G);
  const QuadraticParts parts = assemble_B(cache, e.c);
  const SymMatrix grad = gradient_of(parts, A);
  const int d = A.dim();
  VoigtGradient out;
  out.value = e.lambda;
  out.g.resize(SymMatrix::voigt_size(d));
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) out.g(SymMatrix::voigt_index(d, i, j)) = (i == j ? 1.0 : 2.0) * grad(i, j);
  out.gnorm = grad.norm();
  out.tolerance = factor * ((grad + parts.B).norm() + parts.B.norm());
  if (G.rows() > 1) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
    const auto &ev = es.eigenvalues();
    out.reliable = ev(G.rows() - 1) - ev(G.rows() - 2) > 1e-8 * std::abs(ev(G.rows() - 1));
  }
  return out;
}

// Damped Newton on Phi from A with a central-difference Hessian of the analytic gradient.
// Returns true when the gradient test is met at a simple top eigenvalue.
bool newton_polish(const TensorCache &cache, SymMatrix &A, const StopCriteria &stop, int first_iteration,
                   std::vector<TraceRecord> &trace) {
  const int d = A.dim(), nv = SymMatrix::voigt_size(d);
  VoigtGradient cur = voigt_gradient(cache, A, stop.grad_tol_factor);
  double last_step = 0.0;
  for (int k = 0; k <= stop.polish_iterations; ++k) {
    trace.push_back({first_iteration + k, cur.value, cur.gnorm, last_step, A});
    if (!cur.reliable) return false;
    if (cur.gnorm <= cur.tolerance) return true;
    if (k == stop.polish_iterations) return false;

    const double h = 1e-6 * A.norm();
    Eigen::MatrixXd H(nv, nv);
    for (int m = 0; m < nv; ++m) {
      SymMatrix Ap = A, Am = A;
      Ap.voigt()(m) += h;
      Am.voigt()(m) -= h;
      H.col(m) = (voigt_gradient(cache, Ap, 0.0).g - voigt_gradient(cache, Am, 0.0).g) / (2 * h);
    }
    H = 0.5 * (H + H.transpose()).eval();
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) return false;
    const Eigen::VectorXd p = -llt.solve(cur.g);

    // Armijo on Phi; near the minimum Phi is flat to rounding, so a step that
    // reduces the gradient norm is accepted as well.
    double t = 1.0;
    bool accepted = false;
    VoigtGradient next;
    SymMatrix trial;
    for (int ls = 0; ls < 40 && !accepted; ++ls, t *= 0.5) {
      trial = A;
      trial.voigt() += t * p;
      if (!trial.is_positive_definite()) continue;
      next = voigt_gradient(cache, trial, stop.grad_tol_factor);
      accepted = next.value <= cur.value + 1e-4 * t * cur.g.dot(p) ||
                 (next.value <= cur.value * (1 + 1e-12) && next.gnorm < cur.gnorm);
    }
    if (!accepted) return false;
    last_step = (trial - A).norm();
    A = trial;
    cur = next;
  }
  return false;
}

}  // namespace

BestMatrixResult best_matrix(const TensorCache &cache, double mu, const SymMatrix &A0, const StopCriteria &stop) {
  if (!(mu > 0.0 && mu <= 1.0)) throw std::invalid_argument("best_matrix: mu must lie in (0, 1]");
  if (!A0.is_positive_definite()) throw std::invalid_argument("best_matrix: initial matrix not positive definite");
  BestMatrixResult res;
  SymMatrix A = A0;
  double last_step = 0.0;
  bool step_stop = false;
  for (int it = 0;; ++it) {
    const EigenPair e = power_method(assemble_G(cache, A));
    const QuadraticParts parts = assemble_B(cache, e.c);
    const SymMatrix grad = gradient_of(parts, A);
    const double gnorm = grad.norm();
    res.trace.push_back({it, e.lambda, gnorm, last_step, A});
    // grad + B = BB A, so the test is invariant under rescaling of the loads
    if (gnorm <= stop.grad_tol_factor * ((grad + parts.B).norm() + parts.B.norm())) {
      res.reason = StopReason::gradient;
      break;
    }
    if (step_stop) {
      res.reason = StopReason::step;
      break;
    }
    if (it >= stop.max_iterations) {
      res.reason = StopReason::max_iterations;
      break;
    }
    InfStep inf;
    try {
      inf = solve_inf_step(parts);
    } catch (const std::runtime_error &err) {
      std::ostringstream msg;
      msg << err.what() << " at iteration " << it << ", c = " << e.c.transpose();
      throw OptimizerError(msg.str(), res.trace);
    }
    SymMatrix next = (1.0 - mu) * A + mu * inf.A;
    if (!next.is_positive_definite())
      throw OptimizerError("best_matrix: iterate lost positive definiteness at iteration " + std::to_string(it + 1),
                           res.trace);
    last_step = (next - A).norm();
    A = next;
    step_stop = last_step <= stop.step_tol;
  }
  // The fixed-step iteration can orbit the minimizer without converging; keep the best iterate.
  res.last = A;
  res.best_iteration = res.trace.back().iteration;
  if (res.reason == StopReason::max_iterations)
    for (const auto &r : res.trace)
      if (r.objective < res.trace[res.best_iteration].objective) res.best_iteration = r.iteration;
  res.A = res.trace[res.best_iteration].A;
  res.objective = res.trace[res.best_iteration].objective;
  if (res.reason == StopReason::max_iterations && stop.polish) {
    SymMatrix P = res.A;
    const int first = res.trace.back().iteration + 1;
    if (newton_polish(cache, P, stop, first, res.polish_trace) &&
        res.polish_trace.back().objective <= res.objective * (1 + 1e-12)) {
      res.A = P;
      res.objective = res.polish_trace.back().objective;
      res.best_iteration = res.polish_trace.back().iteration;
      res.reason = StopReason::polished;
    } else {
      spdlog::warn("best_matrix: no convergence after {} iterations, Newton refinement failed; keeping the best iterate",
                   stop.max_iterations);
    }
  }
  if (res.trace.back().objective > res.trace.front().objective)
    spdlog::warn("best_matrix: final objective {} above initial {}", res.trace.back().objective,
                 res.trace.front().objective);
  return res;
}

void write_trace_csv(std::ostream &os, const std::vector<TraceRecord> &trace) {
  os << "iteration,objective,grad_norm,step";
  if (!trace.empty()) {
    const int d = trace.front().A.dim();
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) os << ",A" << i + 1 << j + 1;
  }
  os << '\n' << std::setprecision(17);
  for (const auto &r : trace) {
    os << r.iteration << ',' << r.objective << ',' << r.grad_norm << ',' << r.step;
    for (Eigen::Index k = 0; k < r.A.voigt().size(); ++k) os << ',' << r.A.voigt()(k);
    os << '\n';
  }
}

void write_trace_csv(std::ostream &os, const BestMatrixResult &result) {
  std::vector<TraceRecord> all = result.trace;
  all.insert(all.end(), result.polish_trace.begin(), result.polish_trace.end());
  write_trace_csv(os, all);
}

}  // namespace bestmat
