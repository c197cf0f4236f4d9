#include "bestmat/study.hpp"

#include "bestmat/elliptic.hpp"
#include "bestmat/rhs_basis.hpp"
#include "bestmat/tensor_cache.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>

#ifndef BESTMAT_VERSION
#define BESTMAT_VERSION "0.0.0"
#endif

namespace bestmat {

namespace {

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string eps_tag(double eps) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", eps);
  return buf;
}

MetricRecord make_record(const std::string &criterion, Setting setting, const std::string &candidate, double eps,
                         int N, int M, int P, int R, int Q, double ratio, int repeat) {
  MetricRecord r;
  r.criterion = criterion;
  r.setting = setting;
  r.candidate = candidate;
  r.epsilon = eps;
  r.N = N;
  r.M = M;
  r.P = P;
  r.R = R;
  r.Q = Q;
  r.ratio = ratio;
  r.repeat = repeat;
  return r;
}

MetricRecord with_sup(MetricRecord r, const SupResult &s) {
  r.value = s.value;
  r.f_hat = s.f_hat;
  r.theta = s.theta;
  return r;
}

std::ofstream open_csv(const std::string &dir, const std::string &name, RunManifest &manifest) {
  const std::string path = (std::filesystem::path(dir) / name).string();
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  manifest.outputs.push_back(name);
  return os;
}

const MetricRecord *find_record(const std::vector<MetricRecord> &v, const std::string &criterion,
                                const std::string &candidate) {
  for (const auto &r : v)
    if (r.criterion == criterion && r.candidate == candidate) return &r;
  return nullptr;
}

std::string value_or_blank(const MetricRecord *r) { return r ? num(r->value) : std::string(); }

void prepare(RunManifest &m, const ExperimentConfig &config, const std::string &command, const std::string &dir) {
  m.command = command;
  m.config_hash = config_hash(config);
  m.config_text = to_toml(config);
  m.output_dir = dir;
  m.threads = config.threads;
  std::filesystem::create_directories(dir);
}

}  // namespace

void write_metric_header(std::ostream &os) {
  os << "criterion,setting,candidate,epsilon,N,M,P,R,Q,ratio,repeat,value,f_hat,theta1,theta2\n";
}

void write_metric_row(std::ostream &os, const MetricRecord &r) {
  os << r.criterion << ',' << to_string(r.setting) << ',' << r.candidate << ',' << num(r.epsilon) << ',' << r.N << ','
     << r.M << ',' << r.P << ',' << r.R << ',' << r.Q << ',' << num(r.ratio) << ',' << r.repeat << ',' << num(r.value)
     << ',';
  for (Eigen::Index q = 0; q < r.f_hat.size(); ++q) os << (q ? ";" : "") << num(r.f_hat(q));
  os << ',';
  if (r.theta) os << num((*r.theta)[0]) << ',' << num((*r.theta)[1]);
  else os << ',';
  os << '\n';
}

void RunManifest::write_json(const std::string &path) const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["software_version"] = software_version();
  j["config_hash"] = config_hash;
  j["config"] = config_text;
  j["output_dir"] = output_dir;
  j["threads"] = threads;
  j["timings_seconds"] = nlohmann::ordered_json::array();
  for (const auto &[stage, t] : timings) j["timings_seconds"].push_back({{"stage", stage}, {"seconds", t}});
  j["solver_iterations"] = nlohmann::ordered_json::array();
  for (const auto &[stage, n] : solver_iterations) j["solver_iterations"].push_back({{"stage", stage}, {"iterations", n}});
  j["seed_ledger"] = nlohmann::ordered_json::array();
  for (const auto &s : seeds)
    j["seed_ledger"].push_back({{"use", s.use},
                                {"N", s.N},
                                {"repeat", s.repeat},
                                {"base_seed", s.base_seed},
                                {"realizations", s.realizations},
                                {"shared", s.shared}});
  j["outputs"] = outputs;
  j["failures"] = failures;
  j["skipped"] = skipped;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << j.dump(2) << '\n';
}

std::string software_version() { return BESTMAT_VERSION; }

StageTimer::StageTimer(RunManifest &manifest, std::string stage)
    : manifest_(manifest), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}

StageTimer::~StageTimer() { manifest_.add_time(stage_, elapsed()); }

double StageTimer::elapsed() const { return seconds_since(start_); }

std::string resolve_output_dir(const ExperimentConfig &config) {
  if (const char *env = std::getenv("BESTMAT_OUTPUT_DIR"); env && *env) return env;
  return config.output_dir;
}

SolverOptions solver_options(const ExperimentConfig &config) {
  SolverOptions o;
  o.kind = config.solver;
  o.tol = config.tol.solver;
  return o;
}

StopCriteria stop_criteria(const ExperimentConfig &config) {
  StopCriteria s;
  s.grad_tol_factor = config.tol.grad_factor;
  s.step_tol = config.tol.step;
  s.max_iterations = config.tol.max_iterations;
  s.polish = config.tol.polish;
  return s;
}

std::uint64_t repeat_seed(std::uint64_t base_seed, int repeat) {
  if (repeat == 0) return base_seed;
  // splitmix64 finalizer
  std::uint64_t z = base_seed + 0x9e3779b97f4a7c15ull * std::uint64_t(repeat);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::vector<FeFunction> solve_load_set(const EllipticSolver &solver, const RhsBasis &basis, int count,
                                       long long *iterations) {
  std::vector<FeFunction> out;
  out.reserve(count);
  for (int q = 0; q < count; ++q) {
    SolveInfo info;
    out.push_back(solver.solve(basis.load(solver.mesh(), q), &info));
    if (iterations) *iterations += info.iterations;
  }
  return out;
}

ElementMatrix element_matrix(const ElementMatrixField &C) {
  return [&C](std::size_t t) { return C.values[t]; };
}

CoefficientField periodic_case_field(const ExperimentConfig &config, std::size_t k) {
  if (config.field == FieldChoice::constant) return constant_field(config.constant_value);
  return periodic_test_field(config.epsilon_at(k));
}

PeriodicReference periodic_reference(const ExperimentConfig &config, RunManifest *manifest) {
  const auto t0 = std::chrono::steady_clock::now();
  const CoefficientField cell =
      config.field == FieldChoice::constant ? constant_field(config.constant_value) : periodic_test_field(1.0);
  auto [set, est] = periodic_corrector_and_Astar(config.cell_n, cell, solver_options(config));
  PeriodicReference ref;
  ref.gradients = corrector_gradients(set);
  ref.correctors = std::move(set);
  ref.estimate = est;
  ref.matrix = config.reference ? *config.reference : est.matrix;
  if (manifest) manifest->add_time("reference_correctors", seconds_since(t0));
  spdlog::info("reference A* = [{:.8f} {:.8f}; {:.8f} {:.8f}] on a {}^2 cell mesh", est.matrix(0, 0),
               est.matrix(0, 1), est.matrix(1, 0), est.matrix(1, 1), config.cell_n);
  return ref;
}

const MetricRecord *PeriodicCaseResult::find(const std::string &criterion, const std::string &candidate) const {
  return find_record(metrics, criterion, candidate);
}

const MetricRecord *StochasticCaseResult::find(const std::string &criterion, const std::string &candidate) const {
  return find_record(metrics, criterion, candidate);
}

PeriodicCaseResult run_periodic_case(const ExperimentConfig &config, std::size_t k, const PeriodicReference &ref,
                                     RunManifest &manifest) {
  PeriodicCaseResult res;
  res.epsilon = config.epsilon_at(k);
  res.n = config.mesh_n_at(k);
  res.P = config.P_at(k);
  res.R = config.R_at(k);
  const double eps = res.epsilon;
  const std::string tag = "eps=" + eps_tag(eps);
  const bool evaluate = config.criteria.l2 || config.criteria.h1;
  const int Q = config.Q;
  const int loads = evaluate ? std::max(Q, res.P) : res.P;
  const Mesh mesh(res.n);
  const RhsBasis basis(loads);
  const SolverOptions opts = solver_options(config);
  const CoefficientField field = periodic_case_field(config, k);
  spdlog::info("periodic case {}: n = {}, P = {}, {} loads", tag, res.n, res.P, loads);

  std::vector<FeFunction> fine;
  {
    StageTimer timer(manifest, tag + " fine_solves");
    long long its = 0;
    const EllipticSolver solver(mesh, field, opts);
    fine = solve_load_set(solver, basis, loads, &its);
    manifest.add_iterations(tag + " fine_solves", its);
  }
  {
    StageTimer timer(manifest, tag + " tensors");
    const TensorCache cache =
        assemble_tensor_cache(mesh, basis, std::span<const FeFunction>(fine).first(res.P), res.P,
                              FieldRetention::discard)
            .cache;
    StageTimer opt(manifest, tag + " optimizer");
    res.initial = mean_field_matrix(FieldFamily::deterministic(field), 1);
    res.best = best_matrix(cache, config.mu, res.initial, stop_criteria(config));
  }
  res.err_mat = err_mat(res.best.A, ref.matrix);
  {
    auto r = make_record("err_mat", Setting::periodic, "A_bar", eps, 0, 1, res.P, res.R, 0, config.ratio, 0);
    r.value = res.err_mat;
    res.metrics.push_back(r);
  }
  spdlog::info("{}: A_bar = [{:.8f} {:.8f} {:.8f}], err_mat = {:.4e}", tag, res.best.A(0, 0), res.best.A(0, 1),
               res.best.A(1, 1), res.err_mat);
  if (!evaluate) return res;

  fine.resize(Q);
  StageTimer timer(manifest, tag + " criteria");
  const auto rec = [&](const std::string &criterion, const std::string &candidate) {
    return make_record(criterion, Setting::periodic, candidate, eps, 0, 1, res.P, res.R, Q, config.ratio, 0);
  };
  Eigen::MatrixXd G_l2, G_h1;
  if (config.criteria.l2) G_l2 = fine_l2_gram(fine);
  if (config.criteria.h1) G_h1 = fine_h1_gram(fine);

  {
    long long its = 0;
    const auto ustar = solve_load_set(EllipticSolver(mesh, ref.matrix, opts), basis, Q, &its);
    manifest.add_iterations(tag + " u_star_solves", its);
    if (config.criteria.l2) {
      res.metrics.push_back(with_sup(rec("err_L2", "u_star"), sup_L2_error(fine, ustar, &G_l2)));
      res.metrics.push_back(with_sup(
          rec("err_L2", "two_scale"),
          sup_L2_error_two_scale(fine, ustar, ref.correctors, eps, {0.0, 0.0}, config.theta, &G_l2)));
    }
    if (config.criteria.h1) {
      const auto C = corrector_gradient_matrix(ref.gradients, eps, {0.0, 0.0}, mesh);
      res.metrics.push_back(with_sup(rec("err_H1", "C_grad_u_star"), sup_H1_error(fine, ustar, element_matrix(C), &G_h1)));
    }
  }
  {
    long long its = 0;
    const auto ubar = solve_load_set(EllipticSolver(mesh, res.best.A, opts), basis, Q, &its);
    manifest.add_iterations(tag + " u_bar_solves", its);
    if (config.criteria.l2) res.metrics.push_back(with_sup(rec("err_L2", "u_bar"), sup_L2_error(fine, ubar, &G_l2)));
    if (config.criteria.h1) {
      const auto Cbar = fit_Cbar(std::span<const FeFunction>(fine).first(res.R),
                                 std::span<const FeFunction>(ubar).first(res.R), res.R);
      res.degenerate_elements = Cbar.degenerate_count;
      res.metrics.push_back(with_sup(rec("err_H1", "Cbar_grad_u_bar"), sup_H1_error(fine, ubar, element_matrix(Cbar), &G_h1)));
    }
  }
  for (const auto &m : res.metrics)
    if (m.criterion != "err_mat") spdlog::info("{}: {} {} = {:.4e}", tag, m.criterion, m.candidate, m.value);
  return res;
}

StochasticCaseResult run_stochastic_case(const ExperimentConfig &config, std::size_t k, int repeat,
                                         RunManifest &manifest) {
  StochasticCaseResult res;
  res.epsilon = config.epsilon_at(k);
  res.N = config.N_at(k);
  res.n = config.mesh_n_at(k);
  res.P = config.P_at(k);
  res.R = config.R_at(k);
  res.repeat = repeat;
  res.seed = repeat_seed(config.base_seed, repeat);
  const double eps = res.epsilon;
  const int N = res.N;
  const std::string tag = "N=" + std::to_string(N) + " repeat=" + std::to_string(repeat);
  const bool evaluate = config.criteria.l2 || config.criteria.h1;
  const int Q = config.Q;
  const int loads = evaluate ? std::max(Q, res.P) : res.P;
  const Mesh mesh(res.n);
  const RhsBasis basis(loads);
  const SolverOptions opts = solver_options(config);
  const bool random = config.field == FieldChoice::checkerboard;
  const FieldFamily family = random ? FieldFamily::checkerboard(eps, res.seed)
                                    : FieldFamily::deterministic(constant_field(config.constant_value));
  res.M = family.realization_count(config.M);
  res.reference = config.reference ? *config.reference
                                   : (random ? SymMatrix::identity(2, 8.0) : config.constant_value);
  spdlog::info("stochastic case {}: eps = {}, n = {}, M = {}", tag, eps, res.n, res.M);

  std::vector<FeFunction> means;
  {
    StageTimer timer(manifest, tag + " mean_solves");
    MeanSolveReport rep;
    means = empirical_mean_solutions(mesh, family, basis, loads, config.M, opts, config.threads, &rep);
    res.fine_seeds = rep.seeds;
    manifest.add_iterations(tag + " mean_solves", rep.total_iterations);
  }
  {
    StageTimer timer(manifest, tag + " tensors");
    const TensorCache cache =
        assemble_tensor_cache(mesh, basis, std::span<const FeFunction>(means).first(res.P), res.P,
                              FieldRetention::discard)
            .cache;
    StageTimer opt(manifest, tag + " optimizer");
    res.initial = mean_field_matrix(family, config.M);
    res.best = best_matrix(cache, config.mu, res.initial, stop_criteria(config));
  }
  CorrectorGradients mean_gradients;
  {
    StageTimer timer(manifest, tag + " baseline_correctors");
    if (random) {
      auto mc = monte_carlo_Astar(N, res.n, family, config.M, opts, config.threads);
      res.baseline = mc.mean;
      res.baseline_seeds = mc.seeds;
      mean_gradients = std::move(mc.mean_gradients);
    } else {
      auto [set, est] = solve_cell_problems(truncated_mesh(N, res.n), constant_field(config.constant_value), opts);
      est.provenance = Provenance::truncated_N_omega;
      est.N = N;
      est.M = 1;
      res.baseline = est;
      mean_gradients = corrector_gradients(set);
    }
  }
  manifest.seeds.push_back({"mean_solutions+monte_carlo_Astar", N, repeat, res.seed, res.M, res.seeds_shared()});
  if (!res.seeds_shared()) throw std::logic_error("realization streams of the two estimators differ");

  res.err_mat_N = err_mat(res.baseline.matrix, res.reference);
  res.err_mat_optim = err_mat(res.best.A, res.reference);
  const auto rec = [&](const std::string &criterion, const std::string &candidate) {
    return make_record(criterion, Setting::stochastic, candidate, eps, N, res.M, res.P, res.R, Q, config.ratio, repeat);
  };
  {
    auto a = rec("err_mat", "A_star_NM");
    a.Q = 0;
    a.value = res.err_mat_N;
    res.metrics.push_back(a);
    auto b = rec("err_mat", "A_bar");
    b.Q = 0;
    b.value = res.err_mat_optim;
    res.metrics.push_back(b);
  }
  spdlog::info("{}: A_bar = [{:.6f} {:.6f} {:.6f}] err {:.4e}; A*_NM = [{:.6f} {:.6f} {:.6f}] err {:.4e}", tag,
               res.best.A(0, 0), res.best.A(0, 1), res.best.A(1, 1), res.err_mat_optim, res.baseline.matrix(0, 0),
               res.baseline.matrix(0, 1), res.baseline.matrix(1, 1), res.err_mat_N);
  if (!evaluate) return res;

  means.resize(Q);
  StageTimer timer(manifest, tag + " criteria");
  Eigen::MatrixXd G_l2, G_h1;
  if (config.criteria.l2) G_l2 = fine_l2_gram(means);
  if (config.criteria.h1) G_h1 = fine_h1_gram(means);
  std::optional<ElementMatrixField> C;
  if (config.criteria.h1) C = corrector_gradient_matrix(mean_gradients, eps, {-double(N), -double(N)}, mesh);

  const std::pair<const char *, SymMatrix> constant_candidates[] = {{"u_star", res.reference},
                                                                    {"u_star_NM", res.baseline.matrix}};
  for (const auto &[label, A] : constant_candidates) {
    long long its = 0;
    const auto u = solve_load_set(EllipticSolver(mesh, A, opts), basis, Q, &its);
    manifest.add_iterations(tag + " " + label + "_solves", its);
    if (config.criteria.l2) res.metrics.push_back(with_sup(rec("err_L2", label), sup_L2_error(means, u, &G_l2)));
    if (config.criteria.h1)
      res.metrics.push_back(
          with_sup(rec("err_H1", std::string("C_grad_") + label), sup_H1_error(means, u, element_matrix(*C), &G_h1)));
  }
  {
    long long its = 0;
    const auto ubar = solve_load_set(EllipticSolver(mesh, res.best.A, opts), basis, Q, &its);
    manifest.add_iterations(tag + " u_bar_solves", its);
    if (config.criteria.l2) res.metrics.push_back(with_sup(rec("err_L2", "u_bar"), sup_L2_error(means, ubar, &G_l2)));
    if (config.criteria.h1) {
      const auto Cbar = fit_Cbar(std::span<const FeFunction>(means).first(res.R),
                                 std::span<const FeFunction>(ubar).first(res.R), res.R);
      res.degenerate_elements = Cbar.degenerate_count;
      res.metrics.push_back(
          with_sup(rec("err_H1", "Cbar_grad_u_bar"), sup_H1_error(means, ubar, element_matrix(Cbar), &G_h1)));
    }
  }
  for (const auto &m : res.metrics)
    if (m.criterion != "err_mat") spdlog::info("{}: {} {} = {:.4e}", tag, m.criterion, m.candidate, m.value);
  return res;
}

StudyResult run_periodic_study(const ExperimentConfig &config, const std::string &output_dir) {
  if (config.setting != Setting::periodic) throw ConfigError("study-periodic needs setting = \"periodic\"");
  StudyResult out;
  RunManifest &man = out.manifest;
  prepare(man, config, "study-periodic", output_dir);
  const PeriodicReference ref = periodic_reference(config, &man);

  auto mat = open_csv(output_dir, "err_mat.csv", man);
  mat << "epsilon,ratio,n,P,A11,A12,A22,err_per_mat,objective,best_iteration,iterations,stop_reason\n";
  std::ofstream l2, h1;
  if (config.criteria.l2) {
    l2 = open_csv(output_dir, "err_l2.csv", man);
    l2 << "epsilon,err_l2_star,err_l2_star_corr,err_l2_bar,theta1,theta2\n";
  }
  if (config.criteria.h1) {
    h1 = open_csv(output_dir, "err_h1.csv", man);
    h1 << "epsilon,R,err_h1_star_corr,err_h1_bar,degenerate_elements\n";
  }
  auto metrics = open_csv(output_dir, "metrics.csv", man);
  write_metric_header(metrics);
  {
    auto refcsv = open_csv(output_dir, "reference.csv", man);
    write_estimate_csv_header(refcsv);
    write_estimate_csv_row(refcsv, ref.estimate);
  }

  for (std::size_t k = 0; k < config.case_count(); ++k) {
    const double eps = config.epsilon_at(k);
    if (!config.within_profile(k)) {
      const std::string msg = "eps=" + eps_tag(eps) + ": n = " + std::to_string(config.mesh_n_at(k)) +
                              " exceeds the desk profile cap " + std::to_string(config.desk_cap);
      spdlog::warn("skipping {}", msg);
      man.skipped.push_back(msg);
      continue;
    }
    try {
      PeriodicCaseResult r = run_periodic_case(config, k, ref, man);
      const auto &A = r.best.A;
      mat << num(eps) << ',' << num(config.ratio) << ',' << r.n << ',' << r.P << ',' << num(A(0, 0)) << ','
          << num(A(0, 1)) << ',' << num(A(1, 1)) << ',' << num(r.err_mat) << ',' << num(r.best.objective) << ','
          << r.best.best_iteration << ',' << r.best.trace.size() << ',' << to_string(r.best.reason) << '\n';
      if (config.criteria.l2) {
        const MetricRecord *ts = r.find("err_L2", "two_scale");
        l2 << num(eps) << ',' << value_or_blank(r.find("err_L2", "u_star")) << ',' << value_or_blank(ts) << ','
           << value_or_blank(r.find("err_L2", "u_bar")) << ',';
        if (ts && ts->theta) l2 << num((*ts->theta)[0]) << ',' << num((*ts->theta)[1]);
        else l2 << ',';
        l2 << '\n';
      }
      if (config.criteria.h1)
        h1 << num(eps) << ',' << r.R << ',' << value_or_blank(r.find("err_H1", "C_grad_u_star")) << ','
           << value_or_blank(r.find("err_H1", "Cbar_grad_u_bar")) << ',' << r.degenerate_elements << '\n';
      for (const auto &m : r.metrics) write_metric_row(metrics, m);
      auto trace = open_csv(output_dir, "trace_eps" + eps_tag(eps) + ".csv", man);
      write_trace_csv(trace, r.best);
      out.periodic.push_back(std::move(r));
    } catch (const std::exception &e) {
      spdlog::error("periodic case eps={} failed: {}", eps, e.what());
      man.failures.push_back("eps=" + eps_tag(eps) + ": " + e.what());
    }
  }
  man.write_json((std::filesystem::path(output_dir) / "manifest.json").string());
  return out;
}

StudyResult run_stochastic_study(const ExperimentConfig &config, const std::string &output_dir) {
  if (config.setting != Setting::stochastic) throw ConfigError("study-stochastic needs setting = \"stochastic\"");
  StudyResult out;
  RunManifest &man = out.manifest;
  prepare(man, config, "study-stochastic", output_dir);

  auto mat = open_csv(output_dir, "err_mat.csv", man);
  mat << "N,epsilon,repeat,seed,M,err_mat_N,err_mat_optim,AN11,AN12,AN22,Abar11,Abar12,Abar22\n";
  std::ofstream l2, h1;
  if (config.criteria.l2) {
    l2 = open_csv(output_dir, "err_l2.csv", man);
    l2 << "N,epsilon,repeat,err_l2_star,err_l2_staN,err_l2_bar\n";
  }
  if (config.criteria.h1) {
    h1 = open_csv(output_dir, "err_h1.csv", man);
    h1 << "N,epsilon,repeat,R,err_h1_star_corr,err_h1_staN_corr,err_h1_bar,degenerate_elements\n";
  }
  auto metrics = open_csv(output_dir, "metrics.csv", man);
  write_metric_header(metrics);
  auto estimates = open_csv(output_dir, "estimates.csv", man);
  write_estimate_csv_header(estimates);
  auto seeds = open_csv(output_dir, "seeds.csv", man);
  seeds << "N,repeat,m,base_seed,index,shared\n";

  for (std::size_t k = 0; k < config.case_count(); ++k) {
    const int N = config.N_at(k);
    if (!config.within_profile(k)) {
      const std::string msg = "N=" + std::to_string(N) + ": n = " + std::to_string(config.mesh_n_at(k)) +
                              " exceeds the desk profile cap " + std::to_string(config.desk_cap);
      spdlog::warn("skipping {}", msg);
      man.skipped.push_back(msg);
      continue;
    }
    for (int rep = 0; rep < config.repeats; ++rep) {
      try {
        StochasticCaseResult r = run_stochastic_case(config, k, rep, man);
        const auto &B = r.best.A;
        const auto &A = r.baseline.matrix;
        mat << N << ',' << num(r.epsilon) << ',' << rep << ',' << r.seed << ',' << r.M << ',' << num(r.err_mat_N)
            << ',' << num(r.err_mat_optim) << ',' << num(A(0, 0)) << ',' << num(A(0, 1)) << ',' << num(A(1, 1))
            << ',' << num(B(0, 0)) << ',' << num(B(0, 1)) << ',' << num(B(1, 1)) << '\n';
        if (config.criteria.l2)
          l2 << N << ',' << num(r.epsilon) << ',' << rep << ',' << value_or_blank(r.find("err_L2", "u_star")) << ','
             << value_or_blank(r.find("err_L2", "u_star_NM")) << ',' << value_or_blank(r.find("err_L2", "u_bar"))
             << '\n';
        if (config.criteria.h1)
          h1 << N << ',' << num(r.epsilon) << ',' << rep << ',' << r.R << ','
             << value_or_blank(r.find("err_H1", "C_grad_u_star")) << ','
             << value_or_blank(r.find("err_H1", "C_grad_u_star_NM")) << ','
             << value_or_blank(r.find("err_H1", "Cbar_grad_u_bar")) << ',' << r.degenerate_elements << '\n';
        for (const auto &m : r.metrics) write_metric_row(metrics, m);
        write_estimate_csv_row(estimates, r.baseline);
        for (std::size_t m = 0; m < r.fine_seeds.size(); ++m)
          seeds << N << ',' << rep << ',' << m << ',' << r.fine_seeds[m].base_seed << ',' << r.fine_seeds[m].index
                << ',' << (r.seeds_shared() ? 1 : 0) << '\n';
        out.stochastic.push_back(std::move(r));
      } catch (const std::exception &e) {
        spdlog::error("stochastic case N={} repeat={} failed: {}", N, rep, e.what());
        man.failures.push_back("N=" + std::to_string(N) + " repeat=" + std::to_string(rep) + ": " + e.what());
      }
    }
  }
  man.write_json((std::filesystem::path(output_dir) / "manifest.json").string());
  return out;
}

CostRow compare_cost_case(const ExperimentConfig &config, std::size_t k) {
  if (config.field != FieldChoice::checkerboard) throw ConfigError("compare-cost needs the checkerboard field");
  CostRow row;
  row.N = config.N_at(k);
  row.epsilon = config.epsilon_at(k);
  row.n = config.mesh_n_at(k);
  row.P = config.P_at(k);
  const FieldFamily family = FieldFamily::checkerboard(row.epsilon, config.base_seed);
  row.M = family.realization_count(config.M);
  const SolverOptions opts = solver_options(config);
  const Mesh mesh(row.n);
  const RhsBasis basis(row.P);

  // ours: M assemblies, P loads, M P solves
  auto t0 = std::chrono::steady_clock::now();
  {
    std::vector<std::vector<double>> loads;
    for (int p = 0; p < row.P; ++p) loads.push_back(basis.load(mesh, p));
    for (int m = 0; m < row.M; ++m) {
      const EllipticSolver solver(mesh, family.realization(m), opts);
      for (int p = 0; p < row.P; ++p) solver.solve(loads[p]);
    }
  }
  row.ours_seconds = seconds_since(t0);

  // classical: M assemblies, d M loads, d M solves on Q^N
  t0 = std::chrono::steady_clock::now();
  for (int m = 0; m < row.M; ++m) truncated_Astar(row.N, row.n, family.realization_grid(m), family.seed_of(m), opts);
  row.classical_seconds = seconds_since(t0);
  row.ratio = row.ours_seconds / row.classical_seconds;
  spdlog::info("cost N={}: ours {:.2f} s, classical {:.2f} s, ratio {:.3f}", row.N, row.ours_seconds,
               row.classical_seconds, row.ratio);
  return row;
}

std::vector<CostRow> compare_cost(const ExperimentConfig &config, const std::string &output_dir) {
  if (config.setting != Setting::stochastic) throw ConfigError("compare-cost needs setting = \"stochastic\"");
  RunManifest man;
  prepare(man, config, "compare-cost", output_dir);
  man.threads = 1;
  if (config.threads != 1) spdlog::warn("compare-cost runs single-threaded; ignoring threads = {}", config.threads);
  std::vector<CostRow> rows;
  auto os = open_csv(output_dir, "time.csv", man);
  os << "N,epsilon,n,M,P,optim_seconds,homo_seconds,optimdivbyhomo\n";
  for (std::size_t k = 0; k < config.case_count(); ++k) {
    if (!config.within_profile(k)) {
      man.skipped.push_back("N=" + std::to_string(config.N_at(k)) + ": beyond desk profile cap");
      continue;
    }
    const CostRow r = compare_cost_case(config, k);
    man.add_time("N=" + std::to_string(r.N) + " ours", r.ours_seconds);
    man.add_time("N=" + std::to_string(r.N) + " classical", r.classical_seconds);
    os << r.N << ',' << num(r.epsilon) << ',' << r.n << ',' << r.M << ',' << r.P << ',' << num(r.ours_seconds) << ','
       << num(r.classical_seconds) << ',' << num(r.ratio) << '\n';
    man.seeds.push_back({"compare_cost", r.N, 0, config.base_seed, r.M, true});
    rows.push_back(r);
  }
  man.write_json((std::filesystem::path(output_dir) / "manifest.json").string());
  return rows;
}

}  // namespace bestmat
