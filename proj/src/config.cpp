#include "bestmat/config.hpp"

#include <toml.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace bestmat {

std::string to_string(Setting s) { return s == Setting::periodic ? "periodic" : "stochastic"; }

std::string to_string(Profile p) { return p == Profile::desk ? "desk" : "full"; }

Profile parse_profile(const std::string &name) {
  if (name == "desk") return Profile::desk;
  if (name == "full") return Profile::full;
  throw ConfigError("unknown profile '" + name + "' (expected desk or full)");
}

namespace {

std::string field_name(FieldChoice f) {
  switch (f) {
    case FieldChoice::periodic_test: return "periodic_test";
    case FieldChoice::constant: return "constant";
    case FieldChoice::checkerboard: return "checkerboard";
  }
  return "?";
}

FieldChoice parse_field(const std::string &s) {
  if (s == "periodic_test") return FieldChoice::periodic_test;
  if (s == "constant") return FieldChoice::constant;
  if (s == "checkerboard") return FieldChoice::checkerboard;
  throw ConfigError("unknown field '" + s + "'");
}

template <class T>
T scalar(const toml::node &node, const std::string &key) {
  if constexpr (std::is_same_v<T, double>) {
    if (auto v = node.value<double>()) return *v;
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (auto v = node.value<std::string>()) return *v;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (auto v = node.value_exact<bool>()) return *v;
  } else {
    if (auto v = node.value_exact<std::int64_t>()) return T(*v);
  }
  throw ConfigError("invalid value for '" + key + "'");
}

template <class T>
std::vector<T> list(const toml::node &node, const std::string &key) {
  std::vector<T> out;
  if (const auto *arr = node.as_array()) {
    for (const auto &el : *arr) out.push_back(scalar<T>(el, key));
  } else {
    out.push_back(scalar<T>(node, key));
  }
  return out;
}

SymMatrix sym2(const toml::node &node, const std::string &key) {
  const auto v = list<double>(node, key);
  if (v.size() != 3) throw ConfigError("'" + key + "' needs three entries A11, A12, A22");
  return SymMatrix::from_sym2({v[0], v[1], v[2]});
}

std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

template <class T>
std::string fmt_list(const std::vector<T> &v) {
  std::string s = "[";
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) s += ", ";
    if constexpr (std::is_floating_point_v<T>)
      s += fmt_double(v[k]);
    else
      s += std::to_string(v[k]);
  }
  return s + "]";
}

std::string fmt_sym(const SymMatrix &A) {
  return fmt_list(std::vector<double>{A(0, 0), A(0, 1), A(1, 1)});
}

}  // namespace

std::size_t ExperimentConfig::case_count() const {
  if (setting == Setting::stochastic) return tied_coupling && !N.empty() ? N.size() : epsilons.size();
  return epsilons.size();
}

double ExperimentConfig::epsilon_at(std::size_t k) const {
  if (setting == Setting::stochastic && tied_coupling && !N.empty()) return 1.0 / (2.0 * N.at(k));
  return epsilons.at(k);
}

int ExperimentConfig::N_at(std::size_t k) const {
  if (setting != Setting::stochastic) return 0;
  if (!N.empty()) return N.at(k);
  return int(std::lround(1.0 / (2.0 * epsilons.at(k))));
}

static int broadcast(const std::vector<int> &v, std::size_t k, const char *name) {
  if (v.size() == 1) return v[0];
  if (k < v.size()) return v[k];
  throw ConfigError(std::string("no value of ") + name + " for case " + std::to_string(k));
}

int ExperimentConfig::P_at(std::size_t k) const { return broadcast(P, k, "P"); }
int ExperimentConfig::R_at(std::size_t k) const { return broadcast(R, k, "R"); }

int ExperimentConfig::mesh_n_at(std::size_t k) const { return int(std::lround(ratio / epsilon_at(k))); }

bool ExperimentConfig::within_profile(std::size_t k) const {
  return profile == Profile::full || mesh_n_at(k) <= desk_cap;
}

ExperimentConfig parse_config(std::string_view text) {
  toml::table tbl;
  try {
    tbl = toml::parse(text);
  } catch (const toml::parse_error &e) {
    std::ostringstream os;
    os << "config parse error: " << e.description() << " at line " << e.source().begin.line;
    throw ConfigError(os.str());
  }
  ExperimentConfig c;
  c.P = {3};
  c.R = {3};
  bool field_set = false;
  for (const auto &[k, node] : tbl) {
    const std::string key(k.str());
    if (key == "setting") {
      const auto s = scalar<std::string>(node, key);
      if (s == "periodic")
        c.setting = Setting::periodic;
      else if (s == "stochastic")
        c.setting = Setting::stochastic;
      else
        throw ConfigError("unknown setting '" + s + "'");
    } else if (key == "field") {
      c.field = parse_field(scalar<std::string>(node, key));
      field_set = true;
    } else if (key == "constant") {
      c.constant_value = sym2(node, key);
    } else if (key == "epsilon") {
      c.epsilons = list<double>(node, key);
    } else if (key == "ratio") {
      c.ratio = scalar<double>(node, key);
    } else if (key == "P") {
      c.P = list<int>(node, key);
    } else if (key == "R") {
      c.R = list<int>(node, key);
    } else if (key == "M") {
      c.M = scalar<int>(node, key);
    } else if (key == "Q") {
      c.Q = scalar<int>(node, key);
    } else if (key == "mu") {
      c.mu = scalar<double>(node, key);
    } else if (key == "seed") {
      c.base_seed = scalar<std::uint64_t>(node, key);
    } else if (key == "N") {
      c.N = list<int>(node, key);
    } else if (key == "coupling") {
      const auto s = scalar<std::string>(node, key);
      if (s != "tied" && s != "free") throw ConfigError("coupling must be 'tied' or 'free'");
      c.tied_coupling = s == "tied";
    } else if (key == "repeats") {
      c.repeats = scalar<int>(node, key);
    } else if (key == "cell_n") {
      c.cell_n = scalar<int>(node, key);
    } else if (key == "theta") {
      const auto s = scalar<std::string>(node, key);
      if (s == "infimize")
        c.theta = ThetaMode::infimize;
      else if (s == "none")
        c.theta = ThetaMode::none;
      else
        throw ConfigError("theta must be 'infimize' or 'none'");
    } else if (key == "criteria") {
      c.criteria = {false, false, false};
      for (const auto &s : list<std::string>(node, key)) {
        if (s == "mat")
          c.criteria.mat = true;
        else if (s == "l2")
          c.criteria.l2 = true;
        else if (s == "h1")
          c.criteria.h1 = true;
        else
          throw ConfigError("unknown criterion '" + s + "'");
      }
    } else if (key == "reference") {
      c.reference = sym2(node, key);
    } else if (key == "solver") {
      try {
        c.solver = parse_solver_kind(scalar<std::string>(node, key));
      } catch (const std::invalid_argument &e) {
        throw ConfigError(e.what());
      }
    } else if (key == "profile") {
      c.profile = parse_profile(scalar<std::string>(node, key));
    } else if (key == "desk_cap") {
      c.desk_cap = scalar<int>(node, key);
    } else if (key == "output_dir") {
      c.output_dir = scalar<std::string>(node, key);
    } else if (key == "threads") {
      c.threads = scalar<int>(node, key);
    } else if (key == "tolerances") {
      const auto *t = node.as_table();
      if (!t) throw ConfigError("'tolerances' must be a table");
      for (const auto &[tk, tn] : *t) {
        const std::string tkey(tk.str());
        if (tkey == "solver")
          c.tol.solver = scalar<double>(tn, tkey);
        else if (tkey == "grad_factor")
          c.tol.grad_factor = scalar<double>(tn, tkey);
        else if (tkey == "step")
          c.tol.step = scalar<double>(tn, tkey);
        else if (tkey == "max_iterations")
          c.tol.max_iterations = scalar<int>(tn, tkey);
        else if (tkey == "polish")
          c.tol.polish = scalar<bool>(tn, tkey);
        else
          throw ConfigError("unknown key 'tolerances." + tkey + "'");
      }
    } else {
      throw ConfigError("unknown key '" + key + "'");
    }
  }
  if (!field_set) c.field = c.setting == Setting::stochastic ? FieldChoice::checkerboard : FieldChoice::periodic_test;
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate(const ExperimentConfig &c) {
  constexpr int d = 2;
  const std::size_t cases = c.case_count();
  if (cases == 0) throw ConfigError("no cases: set 'epsilon' (or 'N' in the stochastic setting)");
  if (!(c.ratio > 0)) throw ConfigError("ratio must be positive");
  if (c.P.size() != 1 && c.P.size() != cases) throw ConfigError("P must be a single value or one per case");
  if (c.R.size() != 1 && c.R.size() != cases) throw ConfigError("R must be a single value or one per case");
  for (std::size_t k = 0; k < cases; ++k) {
    const double eps = c.epsilon_at(k);
    if (!(eps > 0 && eps <= 1)) throw ConfigError("epsilon must lie in (0, 1]");
    const int P = c.P_at(k), R = c.R_at(k);
    if (P < d * (d + 1) / 2) throw ConfigError("P must be at least d(d+1)/2 = 3");
    if (R < d) throw ConfigError("R must be at least d = 2");
    if (R > P) throw ConfigError("R must not exceed P");
    if (c.Q < P) throw ConfigError("Q must be at least P");
    if (c.mesh_n_at(k) < 2) throw ConfigError("mesh too coarse for epsilon " + std::to_string(eps));
  }
  if (c.M < 1) throw ConfigError("M must be positive");
  if (!(c.mu > 0 && c.mu < 1)) throw ConfigError("mu must lie in (0, 1)");
  if (c.repeats < 1) throw ConfigError("repeats must be positive");
  if (c.cell_n < 4) throw ConfigError("cell_n must be at least 4");
  if (c.threads < 1) throw ConfigError("threads must be positive");
  if (c.tol.max_iterations < 1) throw ConfigError("tolerances.max_iterations must be positive");
  if (c.setting == Setting::periodic) {
    if (c.field == FieldChoice::checkerboard) throw ConfigError("the periodic setting needs a periodic field");
  } else {
    if (c.field == FieldChoice::periodic_test) throw ConfigError("the stochastic setting needs field = checkerboard or constant");
    if (c.tied_coupling) {
      if (!c.N.empty() && !c.epsilons.empty()) {
        if (c.N.size() != c.epsilons.size()) throw ConfigError("N and epsilon lists differ in length");
        for (std::size_t k = 0; k < c.N.size(); ++k)
          if (std::abs(c.epsilons[k] * 2.0 * c.N[k] - 1.0) > 1e-12)
            throw ConfigError("tied coupling requires N = 1 / (2 epsilon)");
      }
      if (c.N.empty())
        for (double e : c.epsilons)
          if (std::abs(1.0 / (2.0 * e) - std::round(1.0 / (2.0 * e))) > 1e-9)
            throw ConfigError("tied coupling requires 1 / (2 epsilon) to be an integer");
    } else if (c.N.size() != c.epsilons.size()) {
      throw ConfigError("free coupling needs one N per epsilon");
    }
    for (std::size_t k = 0; k < cases; ++k) {
      const int N = c.N_at(k);
      if (N < 1) throw ConfigError("N must be positive");
      if (c.mesh_n_at(k) % (2 * N) != 0)
        throw ConfigError("mesh size " + std::to_string(c.mesh_n_at(k)) + " is not a multiple of 2N = " +
                          std::to_string(2 * N));
      if (std::abs(1.0 / c.epsilon_at(k) - std::round(1.0 / c.epsilon_at(k))) > 1e-9)
        throw ConfigError("checkerboard cells must tile the unit square (1 / epsilon integer)");
    }
  }
}

std::string to_toml(const ExperimentConfig &c) {
  std::ostringstream os;
  os << "setting = \"" << to_string(c.setting) << "\"\n";
  os << "field = \"" << field_name(c.field) << "\"\n";
  if (c.field == FieldChoice::constant) os << "constant = " << fmt_sym(c.constant_value) << "\n";
  if (!c.epsilons.empty()) os << "epsilon = " << fmt_list(c.epsilons) << "\n";
  if (!c.N.empty()) os << "N = " << fmt_list(c.N) << "\n";
  os << "coupling = \"" << (c.tied_coupling ? "tied" : "free") << "\"\n";
  os << "ratio = " << fmt_double(c.ratio) << "\n";
  os << "P = " << fmt_list(c.P) << "\nR = " << fmt_list(c.R) << "\n";
  os << "M = " << c.M << "\nQ = " << c.Q << "\nmu = " << fmt_double(c.mu) << "\nseed = " << c.base_seed << "\n";
  os << "repeats = " << c.repeats << "\ncell_n = " << c.cell_n << "\n";
  os << "theta = \"" << (c.theta == ThetaMode::infimize ? "infimize" : "none") << "\"\n";
  std::vector<std::string> crit;
  if (c.criteria.mat) crit.push_back("\"mat\"");
  if (c.criteria.l2) crit.push_back("\"l2\"");
  if (c.criteria.h1) crit.push_back("\"h1\"");
  os << "criteria = [";
  for (std::size_t k = 0; k < crit.size(); ++k) os << (k ? ", " : "") << crit[k];
  os << "]\n";
  if (c.reference) os << "reference = " << fmt_sym(*c.reference) << "\n";
  os << "solver = \"" << to_string(c.solver) << "\"\n";
  os << "profile = \"" << to_string(c.profile) << "\"\ndesk_cap = " << c.desk_cap << "\n";
  os << "\n[tolerances]\nsolver = " << fmt_double(c.tol.solver) << "\ngrad_factor = " << fmt_double(c.tol.grad_factor)
     << "\nstep = " << fmt_double(c.tol.step) << "\nmax_iterations = " << c.tol.max_iterations
     << "\npolish = " << (c.tol.polish ? "true" : "false") << "\n";
  return os.str();
}

std::string config_hash(const ExperimentConfig &c) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : to_toml(c)) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace bestmat
