#include "bestmat/laplace_solver.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace bestmat {

namespace {
std::mutex &planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct LaplaceSolver::Plan {
  int N = 0;
  fftw_plan plan = nullptr;
  std::vector<double> c;  // 1D eigenvalues 2 - 2 cos(pi k / n)
  double scale = 0.0;     // inverse transform factor
};

LaplaceSolver::LaplaceSolver(const Mesh &mesh) : mesh_(mesh), plan_(std::make_unique<Plan>()) {
  const int n = mesh.n_per_side();
  const int N = n - 1;
  plan_->N = N;
  double *probe = fftw_alloc_real(std::size_t(N) * N);
  if (!probe) throw std::bad_alloc();
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan_->plan = fftw_plan_r2r_2d(N, N, probe, probe, FFTW_RODFT00, FFTW_RODFT00, FFTW_ESTIMATE);
  }
  fftw_free(probe);
  if (!plan_->plan) throw std::runtime_error("LaplaceSolver: FFTW planning failed");
  plan_->c.resize(N);
  for (int k = 0; k < N; ++k) plan_->c[k] = 2.0 - 2.0 * std::cos(std::numbers::pi * (k + 1) / n);
  plan_->scale = 1.0 / (4.0 * double(n) * double(n));
}

LaplaceSolver::~LaplaceSolver() {
  if (plan_ && plan_->plan) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan_->plan);
  }
}

void LaplaceSolver::solve_in_place(std::span<double> v) const {
  if (v.size() != mesh_.node_count()) throw std::invalid_argument("LaplaceSolver: size mismatch");
  const int N = plan_->N;
  const int m = N + 2;
  double *buf = fftw_alloc_real(std::size_t(N) * N);
  if (!buf) throw std::bad_alloc();
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N; ++i) buf[std::size_t(j) * N + i] = v[std::size_t(j + 1) * m + i + 1];
  fftw_execute_r2r(plan_->plan, buf, buf);
  const auto &c = plan_->c;
  for (int l = 0; l < N; ++l)
    for (int k = 0; k < N; ++k) buf[std::size_t(l) * N + k] *= plan_->scale / (c[k] + c[l]);
  fftw_execute_r2r(plan_->plan, buf, buf);
  std::fill(v.begin(), v.end(), 0.0);
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N; ++i) v[std::size_t(j + 1) * m + i + 1] = buf[std::size_t(j) * N + i];
  fftw_free(buf);
}

FeFunction LaplaceSolver::solve(std::span<const double> load) const {
  FeFunction u(mesh_, std::vector<double>(load.begin(), load.end()));
  solve_in_place(u.values);
  return u;
}

}  // namespace bestmat
