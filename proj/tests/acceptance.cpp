// Acceptance run: one PASS/FAIL line per criterion, tolerances fixed below.
// Usage: acceptance [--criterion 1,3] [--cache results.json] [--verbose]

#include "bestmat/config.hpp"
#include "bestmat/homogenization.hpp"
#include "bestmat/metrics.hpp"
#include "bestmat/optimizer.hpp"
#include "bestmat/study.hpp"
#include "bestmat/tensor_cache.hpp"
#include "test_support.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace bestmat;
namespace fs = std::filesystem;

namespace {

// ---- pinned constants ----
constexpr std::uint64_t kSeed = 2024;
constexpr int kCellN = 512;
constexpr double kMu = 0.1;

// criterion 1
constexpr double kA11 = 1.9806, kA12 = -0.019345, kA22 = 0.98065;
constexpr double kTolDiag = 2e-3, kTolOff = 5e-4;
// criterion 2
constexpr double kErrMatEps005 = 1.0145e-3;
// criterion 3
constexpr double kErrMatEps04 = 3.8420e-2;
constexpr double kLargeEpsGap = 10.0;
// criterion 5
constexpr double kSurrogateH1Periodic = 7.6055e-3;
// criterion 6
constexpr double kVoigtReussLo = 6.4, kVoigtReussHi = 10.0, kOffDiagMax = 0.5;
// criterion 7
constexpr double kSurrogateH1Stochastic = 6.000e-2, kCorrectorH1Stochastic = 9.799e-2;
// criterion 9
constexpr double kCostRatioMax = 1.3;
const std::vector<int> kCostN = {2, 4, 8, 16};

constexpr double kFactor = 2.0;

bool within_factor(double value, double target, double factor = kFactor) {
  return value >= target / factor && value <= target * factor;
}

std::string fmt(const char *f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::string sci(double x) { return fmt("%.4e", x); }

// ---- memoized measurements ----

class Memo {
 public:
  explicit Memo(std::string path) : path_(std::move(path)) {
    if (path_.empty() || !fs::exists(path_)) return;
    std::ifstream in(path_);
    data_ = nlohmann::json::parse(in, nullptr, false);
    if (data_.is_discarded() || data_.value("version", "") != software_version()) data_ = nlohmann::json::object();
  }

  std::vector<double> get(const std::string &key, const std::function<std::vector<double>()> &compute) {
    if (data_.contains("values") && data_["values"].contains(key)) {
      spdlog::info("cached: {}", key);
      return data_["values"][key].get<std::vector<double>>();
    }
    const auto v = compute();
    data_["version"] = software_version();
    data_["values"][key] = v;
    if (!path_.empty()) std::ofstream(path_) << data_.dump(2) << '\n';
    return v;
  }

 private:
  std::string path_;
  nlohmann::json data_ = nlohmann::json::object();
};

struct Context {
  Memo memo;
  std::optional<PeriodicReference> reference;

  const PeriodicReference &periodic_ref() {
    if (!reference) reference = periodic_reference(periodic_config(0.05, 43, 3, 3, Criteria{true, false, false}));
    return *reference;
  }

  static ExperimentConfig periodic_config(double eps, double ratio, int P, int R, Criteria criteria) {
    ExperimentConfig c;
    c.setting = Setting::periodic;
    c.field = FieldChoice::periodic_test;
    c.epsilons = {eps};
    c.ratio = ratio;
    c.P = {P};
    c.R = {R};
    c.Q = 16;
    c.mu = kMu;
    c.cell_n = kCellN;
    c.criteria = criteria;
    c.profile = Profile::full;
    validate(c);
    return c;
  }

  // {err_mat, surrogate H1, corrector-based H1}; the H1 entries are 0 when not requested
  std::vector<double> periodic(double eps, double ratio, int P, int R, bool h1) {
    const std::string key = "periodic eps=" + fmt("%g", eps) + " ratio=" + fmt("%g", ratio) + " P=" +
                            std::to_string(P) + " R=" + std::to_string(R) + (h1 ? " h1" : "");
    return memo.get(key, [&] {
      const auto c = periodic_config(eps, ratio, P, R, Criteria{true, false, h1});
      RunManifest m;
      const auto r = run_periodic_case(c, 0, periodic_ref(), m);
      std::vector<double> v{r.err_mat, 0.0, 0.0};
      if (h1) {
        v[1] = r.find("err_H1", "Cbar_grad_u_bar")->value;
        v[2] = r.find("err_H1", "C_grad_u_star")->value;
      }
      return v;
    });
  }

  double periodic_mat(double eps, double ratio, int P) {
    return periodic(eps, ratio, P, std::min(P, 3), false)[0];
  }
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---- criteria ----

Outcome criterion1(Context &ctx) {
  const auto v = ctx.memo.get("Astar cell_n=512", [&] {
    const auto &A = ctx.periodic_ref().estimate.matrix;
    return std::vector<double>{A(0, 0), A(0, 1), A(1, 1)};
  });
  const double d11 = std::abs(v[0] - kA11), d12 = std::abs(v[1] - kA12), d22 = std::abs(v[2] - kA22);
  Outcome o;
  o.pass = d11 <= kTolDiag && d12 <= kTolOff && d22 <= kTolDiag;
  o.detail = "A* = [" + fmt("%.8f", v[0]) + " " + fmt("%.8f", v[1]) + " " + fmt("%.8f", v[2]) + "], deviations " +
             sci(d11) + " " + sci(d12) + " " + sci(d22) + " (tol 2e-3, 5e-4, 2e-3)";
  return o;
}

Outcome criterion2(Context &ctx) {
  const double e43 = ctx.periodic_mat(0.05, 43, 3);
  const double e86 = ctx.periodic(0.05, 86, 3, 3, false)[0];
  Outcome o;
  o.pass = within_factor(e43, kErrMatEps005) && e86 < e43;
  o.detail = "err_mat(eps=0.05, r=43) = " + sci(e43) + " vs 1.0145e-3 (factor 2); r=86 gives " + sci(e86) +
             (e86 < e43 ? " < " : " >= ") + "r=43";
  return o;
}

Outcome criterion3(Context &ctx) {
  const double large = ctx.periodic_mat(0.4, 43, 9);
  const double small = ctx.periodic_mat(0.05, 43, 3);
  Outcome o;
  o.pass = within_factor(large, kErrMatEps04) && large >= kLargeEpsGap * small;
  o.detail = "err_mat(eps=0.4, P=9) = " + sci(large) + " vs 3.8420e-2 (factor 2); ratio to eps=0.05: " +
             fmt("%.1f", large / small) + " (need >= 10)";
  return o;
}

Outcome criterion4(Context &ctx) {
  const double a = ctx.periodic(0.05, 86, 3, 3, false)[0];
  const double b = ctx.periodic(0.025, 86, 3, 3, true)[0];
  const double c = ctx.periodic(0.0125, 86, 3, 3, false)[0];
  Outcome o;
  o.pass = b < a && c < b;
  o.detail = "err_mat at r=86: eps=0.05 " + sci(a) + ", 0.025 " + sci(b) + ", 0.0125 " + sci(c);
  return o;
}

Outcome criterion5(Context &ctx) {
  const auto v = ctx.periodic(0.025, 86, 3, 3, true);
  Outcome o;
  o.pass = within_factor(v[1], kSurrogateH1Periodic) && v[1] < v[2];
  o.detail = "err_H1 surrogate = " + sci(v[1]) + " vs 7.6055e-3 (factor 2); corrector-based = " + sci(v[2]);
  return o;
}

std::vector<double> checkerboard_estimate(Context &ctx, int N) {
  const std::string key = "monte_carlo N=" + std::to_string(N) + " M=100 ratio=27 seed=" + std::to_string(kSeed);
  return ctx.memo.get(key, [&] {
    const double eps = 1.0 / (2.0 * N);
    const auto mc = monte_carlo_Astar(N, 27 * 2 * N, FieldFamily::checkerboard(eps, kSeed), 100);
    const auto &A = mc.mean.matrix;
    return std::vector<double>{A(0, 0), A(0, 1), A(1, 0), A(1, 1), mc.mean.symmetry_defect};
  });
}

Outcome criterion6(Context &ctx) {
  const auto a = checkerboard_estimate(ctx, 8);
  const auto b = checkerboard_estimate(ctx, 32);
  const SymMatrix A = SymMatrix::from_sym2({a[0], a[1], a[3]});
  const double lo = A.min_eigenvalue(), hi = A.max_eigenvalue();
  const auto dist = [](const std::vector<double> &v) {
    return std::sqrt((v[0] - 8) * (v[0] - 8) + v[1] * v[1] + v[2] * v[2] + (v[3] - 8) * (v[3] - 8));
  };
  const double d8 = dist(a), d32 = dist(b);
  Outcome o;
  o.pass = a[1] == a[2] && lo >= kVoigtReussLo && hi <= kVoigtReussHi &&
           std::abs(a[1]) <= kOffDiagMax && d32 < d8;
  o.detail = "N=8: eigenvalues " + fmt("%.4f", lo) + ", " + fmt("%.4f", hi) + " in [6.4, 10], |A12| = " +
             sci(std::abs(a[1])) + ", symmetry defect " + sci(a[4]) + "; |A - 8 Id|: N=8 " + sci(d8) + ", N=32 " + sci(d32);
  return o;
}

Outcome criterion7(Context &ctx) {
  const auto v = ctx.memo.get("stochastic N=8 M=100 ratio=27 seed=" + std::to_string(kSeed), [&] {
    ExperimentConfig c;
    c.setting = Setting::stochastic;
    c.field = FieldChoice::checkerboard;
    c.N = {8};
    c.ratio = 27;
    c.P = {3};
    c.R = {3};
    c.M = 100;
    c.Q = 16;
    c.mu = kMu;
    c.base_seed = kSeed;
    c.profile = Profile::full;
    validate(c);
    RunManifest m;
    const auto r = run_stochastic_case(c, 0, 0, m);
    return std::vector<double>{r.find("err_L2", "u_bar")->value, r.find("err_L2", "u_star_NM")->value,
                               r.find("err_H1", "Cbar_grad_u_bar")->value,
                               r.find("err_H1", "C_grad_u_star_NM")->value, r.seeds_shared() ? 1.0 : 0.0};
  });
  Outcome o;
  o.pass = v[0] <= v[1] && within_factor(v[2], kSurrogateH1Stochastic) && v[2] < v[3] && v[2] < kCorrectorH1Stochastic &&
           v[4] == 1.0;
  o.detail = "err_L2 u_bar " + sci(v[0]) + " vs u*_NM " + sci(v[1]) + "; err_H1 surrogate " + sci(v[2]) +
             " vs 6.000e-2 (factor 2), corrector-based " + sci(v[3]) + " (reference 9.799e-2)";
  return o;
}

// Property suite on a small problem.
Outcome criterion8() {
  using namespace bestmat::testing;
  std::vector<std::string> failed;
  const auto check = [&](bool ok, const std::string &name) {
    if (!ok) failed.push_back(name);
  };

  const Mesh mesh(32);
  const RhsBasis basis(3);
  const SolverOptions tight{SolverKind::multigrid_cg, 1e-13, 0};
  const auto means =
      empirical_mean_solutions(mesh, FieldFamily::deterministic(periodic_test_field(0.25)), basis, 3, 1, tight);
  const TensorBuild build = assemble_tensor_cache(mesh, basis, means, 3, FieldRetention::keep);
  const TensorCache &cache = build.cache;
  std::mt19937_64 rng(kSeed);

  // quadratic form vs direct evaluation, 20 probes
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const SymMatrix A = random_spd(rng);
    const Eigen::VectorXd c = random_unit(rng, 3);
    const double direct = phi_direct(mesh, basis, means, A, c);
    worst = std::max(worst, std::abs(c.dot(assemble_G(cache, A) * c) - direct) / direct);
  }
  check(worst <= 1e-8, "quadratic form");

  // gradient vs central differences where the top eigenvalue is simple
  double worst_grad = 0.0;
  for (int k = 0; k < 10; ++k) {
    const SymMatrix A = random_spd(rng);
    const GradientInfo g = objective_gradient(cache, A);
    if (g.eigengap < 1e-8) continue;
    const double h = 1e-6 * A.norm();
    double num = 0.0, den = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = i; j < 2; ++j) {
        SymMatrix E(2);
        E.set(i, j, h);
        const double fd = (objective(cache, A + E) - objective(cache, A - E)) / (2 * h);
        const double an = (i == j ? 1.0 : 2.0) * g.gradient(i, j);
        num += (fd - an) * (fd - an);
        den += an * an;
      }
    worst_grad = std::max(worst_grad, std::sqrt(num / den));
  }
  check(worst_grad <= 1e-6, "gradient");

  // constant coefficients are identified
  {
    const SymMatrix A = SymMatrix::from_sym2({1.6, -0.25, 0.8});
    const auto u = empirical_mean_solutions(mesh, FieldFamily::deterministic(constant_field(A)), basis, 3, 1, tight);
    const TensorCache c = assemble_tensor_cache(mesh, basis, u, 3).cache;
    const BestMatrixResult r = best_matrix(c, 0.5, SymMatrix::identity(2));
    check((r.A - A).voigt().lpNorm<Eigen::Infinity>() <= 1e-8, "constant identification");
  }

  // exact tensor symmetries
  bool sym = true;
  for (int p = 0; p < 3; ++p)
    for (int q = 0; q < 3; ++q) {
      sym = sym && cache.k2(p, q) == cache.k2(q, p);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          sym = sym && cache.k4(i, j, p, q) == cache.k4(j, i, p, q);
          for (int k = 0; k < 2; ++k)
            for (int l = 0; l < 2; ++l)
              sym = sym && cache.k6(i, j, k, l, p, q) == cache.k6(j, i, k, l, p, q) &&
                    cache.k6(i, j, k, l, p, q) == cache.k6(i, j, l, k, p, q) &&
                    cache.k6(i, j, k, l, p, q) == cache.k6(k, l, i, j, q, p);
        }
    }
  check(sym, "tensor symmetry");

  // z^{ij} = z^{ji}
  bool zsym = true;
  for (int p = 0; p < 3; ++p) {
    zsym = zsym && second_derivative_load(means[p], 0, 1) == second_derivative_load(means[p], 1, 0);
    zsym = zsym && build.fields->at(0, 1, p).values == build.fields->at(1, 0, p).values;
  }
  check(zsym, "z symmetry");

  // power method vs dense eigensolver
  double worst_eig = 0.0;
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int P = 1; P <= 16; ++P) {
    Eigen::MatrixXd X(P + 3, P);
    for (int a = 0; a < X.rows(); ++a)
      for (int b = 0; b < P; ++b) X(a, b) = gauss(rng);
    const Eigen::MatrixXd G = X.transpose() * X;
    const double dense = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(G).eigenvalues().maxCoeff();
    worst_eig = std::max(worst_eig, std::abs(power_method(G).lambda - dense) / dense);
  }
  check(worst_eig <= 1e-10, "power method");

  // sup over unit loads never beaten by random loads
  {
    const RhsBasis b4(4);
    const auto fine = empirical_mean_solutions(mesh, FieldFamily::deterministic(periodic_test_field(0.25)), b4, 4, 1);
    const EllipticSolver coarse(mesh, SymMatrix::from_sym2({1.98, -0.02, 0.98}));
    std::vector<FeFunction> cand;
    for (int q = 0; q < 4; ++q) cand.push_back(coarse.solve(b4.load(mesh, q)));
    const SupResult s = sup_L2_error(fine, cand);
    std::vector<FeFunction> diff;
    for (int q = 0; q < 4; ++q) {
      FeFunction e(mesh);
      for (std::size_t k = 0; k < e.values.size(); ++k) e.values[k] = fine[q].values[k] - cand[q].values[k];
      diff.push_back(std::move(e));
    }
    const Eigen::MatrixXd Ge = fine_l2_gram(diff);
    bool never = true;
    for (int k = 0; k < 10000; ++k) {
      const Eigen::VectorXd c = random_unit(rng, 4);
      never = never && c.dot(Ge * c) <= s.numerator * (1 + 1e-12);
    }
    check(never, "Gram sup bound");
  }

  // seeded studies reproduce bit for bit
  {
    const auto tiny = parse_config(
        "setting = \"stochastic\"\nN = [1, 2]\nratio = 8\nP = 4\nR = 3\nQ = 9\nM = 6\nseed = 11\n");
    const fs::path root = fs::temp_directory_path() / "bestmat_acceptance";
    fs::remove_all(root);
    run_stochastic_study(tiny, (root / "a").string());
    run_stochastic_study(tiny, (root / "b").string());
    bool same = true;
    for (const auto &e : fs::directory_iterator(root / "a")) {
      if (e.path().filename() == "manifest.json") continue;
      std::ifstream x(e.path(), std::ios::binary), y(root / "b" / e.path().filename(), std::ios::binary);
      std::stringstream sx, sy;
      sx << x.rdbuf();
      sy << y.rdbuf();
      same = same && sx.str() == sy.str();
    }
    fs::remove_all(root);
    check(same, "determinism");
  }

  Outcome o;
  o.pass = failed.empty();
  o.detail = "quadratic form " + sci(worst) + ", gradient " + sci(worst_grad) + ", power method " + sci(worst_eig);
  for (const auto &f : failed) o.detail += "; FAILED " + f;
  return o;
}

Outcome criterion9(Context &ctx) {
  ExperimentConfig c;
  c.setting = Setting::stochastic;
  c.field = FieldChoice::checkerboard;
  c.N = kCostN;
  c.ratio = 27;
  c.P = {3};
  c.R = {3};
  c.M = 100;
  c.base_seed = kSeed;
  c.threads = 1;
  c.profile = Profile::full;
  validate(c);
  std::vector<double> ratios;
  for (std::size_t k = 0; k < kCostN.size(); ++k)
    ratios.push_back(
        ctx.memo.get("cost N=" + std::to_string(kCostN[k]), [&] { return std::vector<double>{compare_cost_case(c, k).ratio}; })[0]);
  bool monotone = true;
  for (std::size_t k = 1; k < ratios.size(); ++k) monotone = monotone && ratios[k] >= ratios[k - 1];
  Outcome o;
  o.pass = ratios.front() < kCostRatioMax && monotone;
  o.detail = "time ratio ours / classical over N = 2, 4, 8, 16:";
  for (double r : ratios) o.detail += " " + fmt("%.3f", r);
  return o;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"acceptance criteria"};
  std::string only, cache;
  bool verbose = false;
  app.add_option("--criterion", only, "comma-separated subset, e.g. 1,3,8");
  app.add_option("--cache", cache, "JSON file memoizing expensive measurements");
  app.add_flag("--verbose", verbose);
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);

  std::set<int> selected;
  {
    std::stringstream ss(only);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) selected.insert(std::stoi(tok));
  }
  Context ctx{Memo(cache), std::nullopt};
  const std::vector<std::function<Outcome()>> criteria = {
      [&] { return criterion1(ctx); }, [&] { return criterion2(ctx); }, [&] { return criterion3(ctx); },
      [&] { return criterion4(ctx); }, [&] { return criterion5(ctx); }, [&] { return criterion6(ctx); },
      [&] { return criterion7(ctx); }, [] { return criterion8(); },     [&] { return criterion9(ctx); }};

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = int(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k]();
    } catch (const std::exception &e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d: %s  %s  [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
