#pragma once

#include "bestmat/linear_solver.hpp"
#include "bestmat/metrics.hpp"
#include "bestmat/sym_matrix.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bestmat {

enum class Setting { periodic, stochastic };
enum class Profile { desk, full };
enum class FieldChoice { periodic_test, constant, checkerboard };

std::string to_string(Setting s);
std::string to_string(Profile p);
Profile parse_profile(const std::string &name);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Tolerances {
  double solver = 1e-10;
  double grad_factor = 1e-9;
  double step = 1e-10;
  int max_iterations = 500;
  /// Newton refinement after a max_iterations stop.
  bool polish = true;
};

struct Criteria {
  bool mat = true;
  bool l2 = true;
  bool h1 = true;
};

struct ExperimentConfig {
  Setting setting = Setting::periodic;
  FieldChoice field = FieldChoice::periodic_test;
  /// Used when field = constant.
  SymMatrix constant_value = SymMatrix::identity(2);

  std::vector<double> epsilons;
  /// eps / h.
  double ratio = 43.0;
  /// One entry per epsilon (or per N); a single configured value is broadcast.
  std::vector<int> P;
  std::vector<int> R;
  int M = 100;
  int Q = 16;
  double mu = 0.1;
  std::uint64_t base_seed = 0;
  /// Stochastic truncation sizes; with tied coupling eps = 1 / (2N).
  std::vector<int> N;
  bool tied_coupling = true;
  int repeats = 1;

  /// Periodic cell mesh for the reference A*.
  int cell_n = 512;
  ThetaMode theta = ThetaMode::infimize;
  Criteria criteria;
  /// Matrix the criteria are measured against; computed from the correctors when unset.
  std::optional<SymMatrix> reference;

  SolverKind solver = SolverKind::multigrid_cg;
  Tolerances tol;
  Profile profile = Profile::desk;
  int desk_cap = 1024;
  std::string output_dir = "results";
  int threads = 1;

  /// Number of cases (epsilons, or N values in the stochastic setting).
  std::size_t case_count() const;
  double epsilon_at(std::size_t k) const;
  int P_at(std::size_t k) const;
  int R_at(std::size_t k) const;
  int N_at(std::size_t k) const;
  int mesh_n_at(std::size_t k) const;
  bool within_profile(std::size_t k) const;
};

/// Parses a TOML document; throws ConfigError on unknown keys or invalid values.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string &path);

/// Checks the parameter constraints; throws ConfigError.
void validate(const ExperimentConfig &config);

/// Canonical TOML text of the resolved configuration.
std::string to_toml(const ExperimentConfig &config);

/// FNV-1a of the canonical text, as 16 hex digits.
std::string config_hash(const ExperimentConfig &config);

}  // namespace bestmat
