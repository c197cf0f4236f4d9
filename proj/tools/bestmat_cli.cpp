#include "bestmat/config.hpp"
#include "bestmat/elliptic.hpp"
#include "bestmat/study.hpp"
#include "bestmat/tensor_cache.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace bestmat;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> profile;
  std::size_t case_index = 0;
};

ExperimentConfig resolve(const GlobalOptions &g) {
  if (g.config_path.empty()) throw ConfigError("--config is required for this command");
  ExperimentConfig c = load_config(g.config_path);
  if (g.seed) c.base_seed = *g.seed;
  if (g.threads) c.threads = *g.threads;
  if (g.profile) c.profile = parse_profile(*g.profile);
  validate(c);
  if (g.case_index >= c.case_count()) throw ConfigError("--case is out of range");
  return c;
}

std::string prepare_dir(const ExperimentConfig &c) {
  const std::string dir = resolve_output_dir(c);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string path_in(const std::string &dir, const std::string &name) {
  return (std::filesystem::path(dir) / name).string();
}

RunManifest manifest_for(const ExperimentConfig &c, const std::string &command, const std::string &dir) {
  RunManifest m;
  m.command = command;
  m.config_hash = config_hash(c);
  m.config_text = to_toml(c);
  m.output_dir = dir;
  m.threads = c.threads;
  return m;
}

void require_profile(const ExperimentConfig &c, std::size_t k) {
  if (!c.within_profile(k))
    throw ConfigError("case mesh size " + std::to_string(c.mesh_n_at(k)) + " exceeds the desk cap " +
                      std::to_string(c.desk_cap) + "; pass --profile full");
}

FieldFamily case_family(const ExperimentConfig &c, std::size_t k) {
  if (c.setting == Setting::periodic) return FieldFamily::deterministic(periodic_case_field(c, k));
  if (c.field == FieldChoice::checkerboard) return FieldFamily::checkerboard(c.epsilon_at(k), c.base_seed);
  return FieldFamily::deterministic(constant_field(c.constant_value));
}

void print_matrix(const char *label, const SymMatrix &A) {
  std::printf("%s = [[%.10f, %.10f], [%.10f, %.10f]]\n", label, A(0, 0), A(0, 1), A(1, 0), A(1, 1));
}

int cmd_mesh_info(const GlobalOptions &g, int n) {
  const auto header = [] { std::printf("case,epsilon,N,n,h,nodes,triangles,interior_unknowns,boundary_triangles\n"); };
  auto row = [](std::size_t k, double eps, int N, int n) {
    const Mesh mesh(n);
    std::size_t boundary = 0;
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) boundary += mesh.is_boundary_triangle(t);
    std::printf("%zu,%g,%d,%d,%.10g,%zu,%zu,%zu,%zu\n", k, eps, N, n, 1.0 / n, mesh.node_count(),
                mesh.triangle_count(), std::size_t(n - 1) * std::size_t(n - 1), boundary);
  };
  if (n > 0) {
    header();
    row(0, 0.0, 0, n);
    return 0;
  }
  GlobalOptions all = g;
  all.case_index = 0;
  const ExperimentConfig c = resolve(all);
  header();
  for (std::size_t k = 0; k < c.case_count(); ++k) row(k, c.epsilon_at(k), c.N_at(k), c.mesh_n_at(k));
  return 0;
}

int cmd_solve(const GlobalOptions &g, int load, int realization) {
  const ExperimentConfig c = resolve(g);
  const std::size_t k = g.case_index;
  require_profile(c, k);
  const std::string dir = prepare_dir(c);
  RunManifest man = manifest_for(c, "solve", dir);
  const Mesh mesh(c.mesh_n_at(k));
  const RhsBasis basis(load + 1);
  const FieldFamily family = case_family(c, k);
  SolveInfo info;
  FeFunction u;
  {
    StageTimer t(man, "solve");
    const EllipticSolver solver(mesh, family.realization(realization), solver_options(c));
    u = solver.solve(basis.load(mesh, load), &info);
  }
  man.add_iterations("solve", info.iterations);
  if (family.stochastic()) man.seeds.push_back({"solve", c.N_at(k), 0, c.base_seed, 1, true});
  {
    std::ofstream os(path_in(dir, "solution.csv"));
    os << "node,x,y,u\n";
    char buf[96];
    for (std::size_t i = 0; i < mesh.node_count(); ++i) {
      const Point2 p = mesh.node(i);
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", i, p.x, p.y, u.values[i]);
      os << buf;
    }
    man.outputs.push_back("solution.csv");
  }
  man.write_json(path_in(dir, "manifest.json"));
  std::printf("n = %d, iterations = %d, relative residual = %.3e, |u|_L2 = %.10e\n", mesh.n_per_side(), info.iterations,
              info.relative_residual, l2_norm(u));
  return 0;
}

int cmd_best_matrix(const GlobalOptions &g, const std::string &cache_path) {
  const ExperimentConfig c = resolve(g);
  const std::size_t k = g.case_index;
  require_profile(c, k);
  const std::string dir = prepare_dir(c);
  RunManifest man = manifest_for(c, "best-matrix", dir);
  const int P = c.P_at(k);
  const Mesh mesh(c.mesh_n_at(k));
  const RhsBasis basis(P);
  const FieldFamily family = case_family(c, k);
  std::vector<FeFunction> means;
  {
    StageTimer t(man, "mean_solves");
    MeanSolveReport rep;
    means = empirical_mean_solutions(mesh, family, basis, P, c.M, solver_options(c), c.threads, &rep);
    man.add_iterations("mean_solves", rep.total_iterations);
    if (family.stochastic()) man.seeds.push_back({"mean_solutions", c.N_at(k), 0, c.base_seed, rep.realizations, true});
  }
  TensorCache cache;
  {
    StageTimer t(man, "tensors");
    cache = assemble_tensor_cache(mesh, basis, means, P, FieldRetention::discard).cache;
    cache.M = family.realization_count(c.M);
    cache.seed = c.base_seed;
  }
  if (!cache_path.empty()) cache.save(cache_path);
  BestMatrixResult res;
  {
    StageTimer t(man, "optimizer");
    res = best_matrix(cache, c.mu, mean_field_matrix(family, c.M), stop_criteria(c));
  }
  {
    std::ofstream os(path_in(dir, "best_matrix.csv"));
    char buf[256];
    std::snprintf(buf, sizeof buf, "%.17g,%d,%d,%.17g,%.17g,%.17g,%.17g,%d,%zu,%s\n", c.epsilon_at(k),
                  c.mesh_n_at(k), P, res.A(0, 0), res.A(0, 1), res.A(1, 1), res.objective, res.best_iteration,
                  res.trace.size(), to_string(res.reason).c_str());
    os << "epsilon,n,P,A11,A12,A22,objective,best_iteration,iterations,stop_reason\n" << buf;
    std::ofstream tr(path_in(dir, "trace.csv"));
    write_trace_csv(tr, res);
    man.outputs.insert(man.outputs.end(), {"best_matrix.csv", "trace.csv"});
  }
  man.write_json(path_in(dir, "manifest.json"));
  print_matrix("A_bar", res.A);
  std::printf("objective = %.6e after %zu iterations (%s)\n", res.objective, res.trace.size(),
              to_string(res.reason).c_str());
  return 0;
}

int cmd_homogenize(const GlobalOptions &g) {
  const ExperimentConfig c = resolve(g);
  const std::size_t k = g.case_index;
  const std::string dir = prepare_dir(c);
  RunManifest man = manifest_for(c, "homogenize", dir);
  std::ofstream os(path_in(dir, "estimates.csv"));
  write_estimate_csv_header(os);
  man.outputs.push_back("estimates.csv");
  if (c.setting == Setting::periodic) {
    const PeriodicReference ref = periodic_reference(c, &man);
    write_estimate_csv_row(os, ref.estimate);
    print_matrix("A_star", ref.estimate.matrix);
  } else {
    require_profile(c, k);
    if (c.field != FieldChoice::checkerboard) throw ConfigError("homogenize in the stochastic setting needs the checkerboard");
    const int N = c.N_at(k);
    const FieldFamily family = FieldFamily::checkerboard(c.epsilon_at(k), c.base_seed);
    MonteCarloEstimate mc;
    {
      StageTimer t(man, "monte_carlo_Astar");
      mc = monte_carlo_Astar(N, c.mesh_n_at(k), family, c.M, solver_options(c), c.threads);
    }
    man.seeds.push_back({"monte_carlo_Astar", N, 0, c.base_seed, int(mc.samples.size()), true});
    write_estimate_csv_row(os, mc.mean);
    for (const auto &s : mc.samples) write_estimate_csv_row(os, s);
    print_matrix("A_star_NM", mc.mean.matrix);
  }
  man.write_json(path_in(dir, "manifest.json"));
  return 0;
}

int cmd_reconstruct(const GlobalOptions &g) {
  ExperimentConfig c = resolve(g);
  const std::size_t k = g.case_index;
  require_profile(c, k);
  const std::string dir = prepare_dir(c);
  RunManifest man = manifest_for(c, "reconstruct", dir);
  const int P = c.P_at(k), R = c.R_at(k);
  const Mesh mesh(c.mesh_n_at(k));
  const RhsBasis basis(P);
  const FieldFamily family = case_family(c, k);
  const SolverOptions opts = solver_options(c);
  std::vector<FeFunction> means;
  {
    StageTimer t(man, "mean_solves");
    means = empirical_mean_solutions(mesh, family, basis, P, c.M, opts, c.threads);
  }
  BestMatrixResult best;
  {
    StageTimer t(man, "tensors_and_optimizer");
    const TensorCache cache = assemble_tensor_cache(mesh, basis, means, P, FieldRetention::discard).cache;
    best = best_matrix(cache, c.mu, mean_field_matrix(family, c.M), stop_criteria(c));
  }
  ElementMatrixField Cbar;
  {
    StageTimer t(man, "fit_Cbar");
    const auto ubar = solve_load_set(EllipticSolver(mesh, best.A, opts), basis, R);
    Cbar = fit_Cbar(std::span<const FeFunction>(means).first(R), ubar, R);
  }
  std::ofstream os(path_in(dir, "cbar.csv"));
  write_element_matrix_csv(os, Cbar);
  man.outputs.push_back("cbar.csv");
  man.write_json(path_in(dir, "manifest.json"));
  print_matrix("A_bar", best.A);
  std::printf("C_bar fitted on %zu interior elements, %zu degenerate\n",
              std::size_t(std::count(Cbar.defined.begin(), Cbar.defined.end(), 1)), Cbar.degenerate_count);
  return 0;
}

int cmd_evaluate(const GlobalOptions &g) {
  const ExperimentConfig c = resolve(g);
  const std::size_t k = g.case_index;
  require_profile(c, k);
  const std::string dir = prepare_dir(c);
  RunManifest man = manifest_for(c, "evaluate", dir);
  std::vector<MetricRecord> records;
  if (c.setting == Setting::periodic) {
    const PeriodicReference ref = periodic_reference(c, &man);
    records = run_periodic_case(c, k, ref, man).metrics;
  } else {
    records = run_stochastic_case(c, k, 0, man).metrics;
  }
  std::ofstream os(path_in(dir, "metrics.csv"));
  write_metric_header(os);
  for (const auto &r : records) {
    write_metric_row(os, r);
    std::printf("%-8s %-18s %.6e\n", r.criterion.c_str(), r.candidate.c_str(), r.value);
  }
  man.outputs.push_back("metrics.csv");
  man.write_json(path_in(dir, "manifest.json"));
  return 0;
}

void print_summary(const StudyResult &r, const std::string &dir) {
  std::printf("%zu periodic and %zu stochastic cases written to %s (%zu failed, %zu skipped)\n", r.periodic.size(),
              r.stochastic.size(), dir.c_str(), r.manifest.failures.size(), r.manifest.skipped.size());
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Best constant coefficient approximation of oscillatory elliptic problems"};
  app.require_subcommand(1);
  GlobalOptions g;
  std::string log_level = "info";
  app.add_option("-c,--config", g.config_path, "experiment configuration (TOML)");
  app.add_option("--seed", g.seed, "override the base seed");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--profile", g.profile, "desk or full")->check(CLI::IsMember({"desk", "full"}));
  app.add_option("--case", g.case_index, "case index within the configuration (default 0)");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error");

  int mesh_n = 0;
  auto *mesh_info = app.add_subcommand("mesh-info", "mesh sizes of the configured cases");
  mesh_info->add_option("--n", mesh_n, "describe a single n x n mesh instead");

  int load = 0, realization = 0;
  auto *solve = app.add_subcommand("solve", "one oscillatory solve; writes solution.csv");
  solve->add_option("--load", load, "index of the Laplacian eigenfunction load")->check(CLI::NonNegativeNumber);
  solve->add_option("--realization", realization, "realization index (stochastic)")->check(CLI::NonNegativeNumber);

  std::string cache_path;
  auto *best = app.add_subcommand("best-matrix", "offline tensors and the best constant matrix");
  best->add_option("--save-cache", cache_path, "write the tensor cache to this file");

  auto *homogenize = app.add_subcommand("homogenize", "corrector-based homogenized matrix");
  auto *reconstruct = app.add_subcommand("reconstruct", "H1 surrogate C_bar; writes cbar.csv");
  auto *evaluate = app.add_subcommand("evaluate", "all criteria for one case; writes metrics.csv");
  auto *study_per = app.add_subcommand("study-periodic", "periodic study over all epsilons");
  auto *study_sto = app.add_subcommand("study-stochastic", "stochastic study over all N");
  auto *cost = app.add_subcommand("compare-cost", "single-threaded cost ratio per N");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*mesh_info) return cmd_mesh_info(g, mesh_n);
    if (*solve) return cmd_solve(g, load, realization);
    if (*best) return cmd_best_matrix(g, cache_path);
    if (*homogenize) return cmd_homogenize(g);
    if (*reconstruct) return cmd_reconstruct(g);
    if (*evaluate) return cmd_evaluate(g);
    if (*study_per || *study_sto) {
      const ExperimentConfig c = resolve(g);
      const std::string dir = resolve_output_dir(c);
      const StudyResult r = *study_per ? run_periodic_study(c, dir) : run_stochastic_study(c, dir);
      print_summary(r, dir);
      return r.manifest.failures.empty() ? 0 : 3;
    }
    if (*cost) {
      ExperimentConfig c = resolve(g);
      c.threads = 1;
      const std::string dir = resolve_output_dir(c);
      for (const auto &r : compare_cost(c, dir))
        std::printf("N = %d: ours %.3f s, classical %.3f s, ratio %.4f\n", r.N, r.ours_seconds, r.classical_seconds,
                    r.ratio);
      return 0;
    }
  } catch (const ConfigError &e) {
    spdlog::error("configuration: {}", e.what());
    return 2;
  } catch (const std::exception &e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
