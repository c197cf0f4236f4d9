#pragma once

#include "bestmat/config.hpp"
#include "bestmat/elliptic.hpp"
#include "bestmat/homogenization.hpp"
#include "bestmat/metrics.hpp"
#include "bestmat/optimizer.hpp"
#include "bestmat/reconstruction.hpp"
#include "bestmat/rhs_basis.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace bestmat {

struct MetricRecord {
  std::string criterion;  // err_mat, err_L2, err_H1
  Setting setting = Setting::periodic;
  std::string candidate;
  double epsilon = 0.0;
  int N = 0;
  int M = 1;
  int P = 0;
  int R = 0;
  int Q = 0;
  double ratio = 0.0;
  int repeat = 0;
  double value = 0.0;
  /// Unit coefficient vector of the maximizing load (empty for err_mat).
  Eigen::VectorXd f_hat;
  std::optional<std::array<double, 2>> theta;
};

void write_metric_header(std::ostream &os);
void write_metric_row(std::ostream &os, const MetricRecord &r);

struct SeedLedgerEntry {
  std::string use;
  int N = 0;
  int repeat = 0;
  std::uint64_t base_seed = 0;
  int realizations = 0;
  /// Both estimators consumed the identical realization sequence.
  bool shared = true;
};

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::string config_text;
  std::string output_dir;
  int threads = 1;
  std::vector<std::pair<std::string, double>> timings;
  std::vector<std::pair<std::string, long long>> solver_iterations;
  std::vector<SeedLedgerEntry> seeds;
  std::vector<std::string> outputs;
  std::vector<std::string> failures;
  std::vector<std::string> skipped;

  void add_time(const std::string &stage, double seconds) { timings.emplace_back(stage, seconds); }
  void add_iterations(const std::string &stage, long long its) { solver_iterations.emplace_back(stage, its); }
  void write_json(const std::string &path) const;
};

std::string software_version();

/// Scoped wall-clock timer recording into a manifest.
class StageTimer {
 public:
  StageTimer(RunManifest &manifest, std::string stage);
  ~StageTimer();
  double elapsed() const;

 private:
  RunManifest &manifest_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

/// BESTMAT_OUTPUT_DIR overrides the configured directory.
std::string resolve_output_dir(const ExperimentConfig &config);

SolverOptions solver_options(const ExperimentConfig &config);
StopCriteria stop_criteria(const ExperimentConfig &config);

/// Seed of repetition `repeat`; repetition 0 uses the base seed itself.
std::uint64_t repeat_seed(std::uint64_t base_seed, int repeat);

/// Solutions for the first `count` basis loads with one factorization.
std::vector<FeFunction> solve_load_set(const EllipticSolver &solver, const RhsBasis &basis, int count,
                                       long long *iterations = nullptr);

ElementMatrix element_matrix(const ElementMatrixField &C);

struct PeriodicReference {
  CorrectorSet correctors;
  CorrectorGradients gradients;
  HomogenizedEstimate estimate;
  /// Matrix the criteria compare against: the configured reference or the corrector estimate.
  SymMatrix matrix;
};

PeriodicReference periodic_reference(const ExperimentConfig &config, RunManifest *manifest = nullptr);

/// Oscillatory field of case k at its epsilon.
CoefficientField periodic_case_field(const ExperimentConfig &config, std::size_t k);

struct PeriodicCaseResult {
  double epsilon = 0.0;
  int n = 0;
  int P = 0;
  int R = 0;
  SymMatrix initial;
  BestMatrixResult best;
  double err_mat = 0.0;
  std::vector<MetricRecord> metrics;
  std::size_t degenerate_elements = 0;

  const MetricRecord *find(const std::string &criterion, const std::string &candidate) const;
};

PeriodicCaseResult run_periodic_case(const ExperimentConfig &config, std::size_t k, const PeriodicReference &ref,
                                     RunManifest &manifest);

struct StochasticCaseResult {
  double epsilon = 0.0;
  int N = 0;
  int n = 0;
  int P = 0;
  int R = 0;
  int M = 0;
  int repeat = 0;
  std::uint64_t seed = 0;
  SymMatrix reference;
  SymMatrix initial;
  BestMatrixResult best;
  HomogenizedEstimate baseline;
  double err_mat_N = 0.0;
  double err_mat_optim = 0.0;
  std::vector<MetricRecord> metrics;
  std::size_t degenerate_elements = 0;
  std::vector<RealizationSeed> fine_seeds;
  std::vector<RealizationSeed> baseline_seeds;

  bool seeds_shared() const { return fine_seeds == baseline_seeds; }
  const MetricRecord *find(const std::string &criterion, const std::string &candidate) const;
};

StochasticCaseResult run_stochastic_case(const ExperimentConfig &config, std::size_t k, int repeat,
                                         RunManifest &manifest);

struct StudyResult {
  std::vector<PeriodicCaseResult> periodic;
  std::vector<StochasticCaseResult> stochastic;
  RunManifest manifest;
};

/// Runs every case, writes the CSV files and manifest.json into `output_dir`.
StudyResult run_periodic_study(const ExperimentConfig &config, const std::string &output_dir);
StudyResult run_stochastic_study(const ExperimentConfig &config, const std::string &output_dir);

struct CostRow {
  int N = 0;
  double epsilon = 0.0;
  int n = 0;
  int M = 0;
  int P = 0;
  double ours_seconds = 0.0;
  double classical_seconds = 0.0;
  double ratio = 0.0;
};

/// Single-threaded timing of M stiffness assemblies, P loads and M P solves against
/// M assemblies, d M loads and d M corrector solves.
CostRow compare_cost_case(const ExperimentConfig &config, std::size_t k);
std::vector<CostRow> compare_cost(const ExperimentConfig &config, const std::string &output_dir);

}  // namespace bestmat
