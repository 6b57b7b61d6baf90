// Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion.
//
//   acceptance            run every criterion
//   acceptance 3 5        run only criteria 3 and 5
//
// Exit status is nonzero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "zoprox/bench.hpp"
#include "zoprox/zoprox.hpp"

using namespace zoprox;
using zoprox::testing::CubicPolynomial;
using zoprox::testing::grid_argmin;
using zoprox::testing::random_cubic;

namespace {

struct Outcome {
  enum class Status { pass, fail, skip } status = Status::pass;
  std::string detail;
};

Outcome pass(std::string d) { return {Outcome::Status::pass, std::move(d)}; }
Outcome fail(std::string d) { return {Outcome::Status::fail, std::move(d)}; }
Outcome skip(std::string d) { return {Outcome::Status::skip, std::move(d)}; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ObjectiveModel cubic_model(const CubicPolynomial& p) {
  ObjectiveModel m;
  m.dimension = p.n;
  m.blackbox = [p](std::span<const double> x) { return p.value(x); };
  return m;
}

std::size_t hardware_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

// ---------------------------------------------------------------------------

Outcome estimator_bounds() {
  Rng rng(101);
  double worst_g = -1.0, worst_h = -1.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.next_u64() % 20;
    const auto p = random_cubic(rng, n);
    const double delta = std::exp(rng.uniform(std::log(1e-3), 0.0));
    const Vector x = rng.normal_vector(n);
    Oracle oracle(cubic_model(p));
    const auto batch = oracle.sample_batch(x, delta);
    const Vector g = estimate_gradient(batch), h = estimate_hess_diag(batch);
    const Vector g_true = p.gradient(x), h_true = p.hess_diag(x);
    double herr = 0.0;
    for (std::size_t i = 0; i < n; ++i) herr = std::max(herr, std::abs(h[i] - h_true[i]));
    const double mf = p.hessian_lipschitz();
    const double gslack = distance(g, g_true) - (mf * delta * delta / 2 + 1e-9);
    const double hslack = herr - (mf * delta + 1e-9);
    worst_g = trial == 0 ? gslack : std::max(worst_g, gslack);
    worst_h = trial == 0 ? hslack : std::max(worst_h, hslack);
    if (gslack > 0 || hslack > 0)
      return fail(fmt("trial %d: n=%zu delta=%.3g gradient excess %.3g hessian excess %.3g", trial,
                      n, delta, gslack, hslack));
  }
  return pass(fmt("100 cubics, max excess over bound: gradient %.3g, hessian %.3g", worst_g,
                  worst_h));
}

Outcome quadratic_exactness() {
  Rng rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.next_u64() % 20;
    const auto p = random_cubic(rng, n, true);
    const double delta = rng.uniform(0.1, 1.0);
    const Vector x = rng.normal_vector(n);
    Oracle oracle(cubic_model(p));
    const auto batch = oracle.sample_batch(x, delta);
    const Vector g = estimate_gradient(batch), h = estimate_hess_diag(batch);
    const Vector g_true = p.gradient(x), h_true = p.hess_diag(x);
    const double rel = std::max(distance(g, g_true) / std::max(norm2(g_true), 1e-300),
                                distance(h, h_true) / std::max(norm2(h_true), 1e-300));
    worst = std::max(worst, rel);
  }
  if (worst > 1e-10) return fail(fmt("worst relative error %.3g > 1e-10", worst));
  return pass(fmt("100 quadratics, worst relative error %.3g", worst));
}

Outcome subproblem_equivalence() {
  Rng rng(303);
  double worst_grid = 0.0, worst_inexact = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.next_u64() % 4;
    const double mu = rng.uniform(0.0, 2.0);
    const Vector x = rng.normal_vector(n), g = rng.normal_vector(n);
    // min tau >= 2, where a model gap of 1e-8 implies a distance of at most 1e-4.
    Vector hd(n);
    for (auto& v : hd) v = rng.uniform(0.0, 4.0);
    const double sigma = 2.0;
    const LocalModel m = make_local_model(x, g, hd, sigma, 0.0, Regularizer::l1(mu));
    const auto exact = solve_separable(m);
    for (std::size_t i = 0; i < n; ++i) {
      const double tau = m.precond_diag[i], c = x[i] - g[i] / tau, w = mu / tau + 1.0;
      const double ref = grid_argmin(
          [&](double y) {
            const double d = y - x[i];
            return g[i] * d + 0.5 * tau * d * d + mu * std::abs(y);
          },
          c - w, c + w);
      worst_grid = std::max(worst_grid, std::abs(exact.point[i] - ref));
    }
    const auto inexact = solve_inexact(m, 1e-8);
    worst_inexact = std::max(worst_inexact, norm_inf(Vector([&] {
                                 Vector d(n);
                                 for (std::size_t i = 0; i < n; ++i)
                                   d[i] = inexact.point[i] - exact.point[i];
                                 return d;
                               }())));
  }
  const auto detail = fmt("200 instances, grid deviation %.3g, inexact deviation %.3g",
                          worst_grid, worst_inexact);
  return (worst_grid <= 1e-5 && worst_inexact <= 1e-4) ? pass(detail) : fail(detail);
}

struct QuadraticLasso {
  LassoInstance inst;
  double lf = 0.0;
  double lh = 0.0;
};

QuadraticLasso quadratic_lasso(std::uint64_t seed) {
  QuadraticLasso q{gen_lasso(50, 20, 0.1, seed)};
  q.lf = lasso_lipschitz(q.inst);
  const Vector d = lasso_hess_diag(q.inst);
  q.lh = *std::max_element(d.begin(), d.end());
  return q;
}

Outcome descent_inequality() {
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t checked = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto q = quadratic_lasso(seed);
    SolverConfig cfg;
    cfg.sigma = schedules::theoretical_sigma(q.lf, q.lh);
    cfg.seed = seed;
    const auto report = ipzopm(lasso_blackbox(q.inst), cfg, Rng(derive_seed(seed, 1)).normal_vector(50));
    if (report.reason == TerminationReason::error)
      return fail(fmt("seed %llu: %s", static_cast<unsigned long long>(seed), report.message.c_str()));
    for (std::size_t k = 0; k + 1 < report.records.size(); ++k) {
      const auto& r = report.records[k];
      const double excess = report.records[k + 1].h_value - r.h_value - r.epsilon;
      worst = std::max(worst, excess);
      ++checked;
      if (excess > 1e-8)
        return fail(fmt("seed %llu k=%zu: h increased by %.3g beyond epsilon_k",
                        static_cast<unsigned long long>(seed), k, excess));
    }
  }
  return pass(fmt("%zu steps over 5 seeds, max h(x+) - h(x) - eps_k = %.3g", checked, worst));
}

Outcome complexity_budget() {
  constexpr double eps = 0.1;
  constexpr std::size_t cap = 200000;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto q = quadratic_lasso(seed);
    const double base = 2.0 * (q.lf + q.lh);
    const double sigma = 1.01 * base, sigma_max = 1.02 * base;
    const double gamma = 0.99 / (sigma_max + q.lh);
    const ObjectiveModel model = lasso_blackbox(q.inst);
    const Vector x0 = Rng(derive_seed(seed, 1)).normal_vector(50);
    Oracle oracle(model);
    const double h0 = oracle.objective(x0);
    const double c = std::numbers::pi * std::numbers::pi / 6.0;
    const double budget = std::ceil(4.0 * (h0 + c) / (gamma * eps * eps));

    SolverConfig cfg;
    cfg.sigma = schedules::constant_sigma(sigma);
    cfg.gamma = gamma;
    cfg.termination_tol = 1e-12;
    cfg.max_iter = static_cast<std::size_t>(std::min<double>(budget, cap));
    cfg.record_iterates = true;
    cfg.record_timing = false;
    cfg.seed = seed;
    const auto report = ipzopm(model, cfg, x0);
    if (report.reason == TerminationReason::error)
      return fail(fmt("seed %llu: %s", static_cast<unsigned long long>(seed), report.message.c_str()));
    std::optional<std::size_t> hit;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < report.iterates.size(); ++k) {
      const Vector& x = report.iterates[k];
      const double s = norm2(prox_grad_mapping(model, x, gamma, lasso_gradient(q.inst, x)));
      best = std::min(best, s);
      if (s <= eps) {
        hit = k;
        break;
      }
    }
    if (!hit)
      return fail(fmt("seed %llu: min |P| = %.3g after %zu iterations (budget %.3g)",
                      static_cast<unsigned long long>(seed), best, report.iterates.size(), budget));
    detail += fmt("%sseed %llu: k=%zu <= N=%.3g", detail.empty() ? "" : ", ",
                  static_cast<unsigned long long>(seed), *hit, budget);
  }
  return pass(detail);
}

Outcome figure_shape() {
  bench::SpecMap map;
  for (const auto& [k, v] : std::vector<std::pair<std::string, std::string>>{
           {"problem", "lasso"}, {"n", "1000"}, {"m", "100"}, {"mu", "1e-3"}, {"seed", "1"},
           {"repeat", "5"}, {"solver", "ipzopm"}, {"solver", "zopg"}, {"no_timing", "true"}})
    map.set(k, v);
  const auto out = std::filesystem::temp_directory_path() / "zoprox_acceptance_figure";
  map.replace("out", out.string());
  map.replace("jobs", std::to_string(hardware_jobs()));
  const auto result = bench::run(bench::build_spec(map));

  std::size_t wins = 0;
  bool monotone = true;
  std::string detail;
  for (std::size_t r = 0; r < 5; ++r) {
    const bench::RunResult* ip = nullptr;
    const bench::RunResult* zo = nullptr;
    for (const auto& run : result.runs)
      if (run.repeat_index == r) (run.solver == "ipzopm" ? ip : zo) = &run;
    if (ip->report.reason != TerminationReason::error && zo->report.reason != TerminationReason::error &&
        ip->report.iterations() < zo->report.iterations())
      ++wins;
    auto rises = [](const bench::RunResult* run) {
      const auto& rec = run->report.records;
      std::size_t count = 0;
      for (std::size_t k = 5; k + 1 < rec.size(); ++k)
        if (rec[k + 1].h_value > rec[k].h_value) ++count;
      return count;
    };
    const std::size_t ip_rises = rises(ip), zo_rises = rises(zo);
    if (ip_rises + zo_rises) monotone = false;
    detail += fmt("%sseed %zu: ipzopm %zu it (h %.4g, %zu rises), zopg eta=%g %zu it (h %.4g, %zu rises)",
                  detail.empty() ? "" : "; ", r + 1, ip->report.iterations(), ip->report.h_value,
                  ip_rises, *zo->eta, zo->report.iterations(), zo->report.h_value, zo_rises);
  }
  detail = fmt("ipzopm faster on %zu/5, traces %s after k=5; ", wins,
               monotone ? "nonincreasing" : "NOT nonincreasing") + detail;
  return (wins >= 4 && monotone) ? pass(detail) : fail(detail);
}

Outcome parser() {
  Rng rng(707);
  for (int trial = 0; trial < 10000; ++trial) {
    SparseDataset ds;
    const std::size_t rows = rng.next_u64() % 8;
    std::uint32_t max_index = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      SparseRow row;
      row.label = rng.uniform() < 0.5 ? -1 : 1;
      std::uint32_t idx = 0;
      const std::size_t nnz = rng.next_u64() % 6;
      for (std::size_t k = 0; k < nnz; ++k) {
        idx += 1 + static_cast<std::uint32_t>(rng.next_u64() % 50);
        row.features.push_back({idx, rng.normal() * std::pow(10.0, rng.uniform(-12, 12))});
      }
      max_index = std::max(max_index, idx);
      ds.rows.push_back(std::move(row));
    }
    ds.n_features = max_index;
    if (!(parse_libsvm(serialize_libsvm(ds)) == ds))
      return fail(fmt("round trip mismatch on generated dataset %d", trial));
  }

  std::filesystem::path dir = ZOPROX_DATA_DIR_DEFAULT;
  if (const char* env = std::getenv("ZOPROX_DATA_DIR"); env && *env) dir = env;
  struct Expected {
    const char* name;
    std::size_t m, n;
  };
  std::string detail = "10000 round trips ok";
  bool any_missing = false;
  for (const Expected e : {Expected{"a4a", 4781, 122}, Expected{"w4a", 7366, 300}}) {
    std::ifstream in(dir / e.name);
    if (!in) {
      any_missing = true;
      detail += fmt("; %s absent", e.name);
      continue;
    }
    const auto ds = parse_libsvm(in);
    if (ds.n_samples() != e.m || ds.n_features > e.n)
      return fail(fmt("%s: %zu samples, %zu features, expected %zu x %zu", e.name, ds.n_samples(),
                      static_cast<std::size_t>(ds.n_features), e.m, e.n));
    detail += fmt("; %s %zu x %zu (max index %zu)", e.name, ds.n_samples(), e.n,
                  static_cast<std::size_t>(ds.n_features));
  }
  return any_missing ? skip(detail + " in " + dir.string()) : pass(detail);
}

bool l1_optimal(double u, double p, double lambda, double mu, double tol) {
  const double scale = std::max(1.0, std::abs(u));
  if (p == 0.0) return std::abs(u) <= lambda * mu + tol * scale;
  return std::abs((u - p) - lambda * mu * (p > 0 ? 1.0 : -1.0)) <= tol * scale;
}

bool box_optimal(double u, double p, double lo, double hi, double tol) {
  const double scale = std::max(1.0, std::abs(u));
  if (p < lo || p > hi) return false;
  if (p == lo) return u <= lo + tol * scale;
  if (p == hi) return u >= hi - tol * scale;
  return std::abs(u - p) <= tol * scale;
}

Outcome prox_properties() {
  constexpr double tol = 1e-12;
  Rng rng(808);
  const Regularizer l1 = Regularizer::l1(0.8);
  const Regularizer mixed = Regularizer::separable(
      {ScalarPiece::abs(0.3), ScalarPiece::box(-0.5, 0.5), ScalarPiece::zero(), ScalarPiece::abs(2.0)});
  for (int trial = 0; trial < 1000; ++trial) {
    const double lambda = std::exp(rng.uniform(std::log(1e-2), std::log(10.0)));
    for (const Regularizer* reg : {&l1, &mixed}) {
      const Vector u = rng.normal_vector(4), v = rng.normal_vector(4);
      const Vector pu = prox(*reg, u, lambda), pv = prox(*reg, v, lambda);
      double lhs = 0.0, rhs = 0.0;
      for (std::size_t i = 0; i < 4; ++i) {
        lhs += (pu[i] - pv[i]) * (pu[i] - pv[i]);
        rhs += (pu[i] - pv[i]) * (u[i] - v[i]);
      }
      if (lhs > rhs + tol)
        return fail(fmt("trial %d: firm nonexpansiveness violated by %.3g", trial, lhs - rhs));
      for (std::size_t i = 0; i < 4; ++i) {
        const ScalarPiece piece = reg->piece(i);
        bool ok = true;
        switch (piece.kind()) {
          case ScalarPiece::Kind::zero:
            ok = pu[i] == u[i];
            break;
          case ScalarPiece::Kind::abs:
            ok = l1_optimal(u[i], pu[i], lambda, piece.weight(), tol);
            break;
          case ScalarPiece::Kind::box:
            ok = box_optimal(u[i], pu[i], piece.lo(), piece.hi(), tol);
            break;
        }
        if (!ok) return fail(fmt("trial %d coordinate %zu: optimality condition violated", trial, i));
      }
    }
  }
  return pass("1000 pairs each for l1 and mixed separable regularizers");
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  bench::SpecMap map = bench::parse_spec_file(std::filesystem::path(ZOPROX_SAMPLES_DIR) / "lasso.spec");
  map.replace("no_timing", "true");
  map.replace("jobs", std::to_string(hardware_jobs()));
  const auto base = std::filesystem::temp_directory_path() / "zoprox_acceptance_determinism";
  std::vector<std::filesystem::path> files;
  for (const char* side : {"a", "b"}) {
    std::filesystem::remove_all(base / side);
    map.replace("out", (base / side).string());
    const auto result = bench::run(bench::build_spec(map));
    if (files.empty()) {
      for (const auto& r : result.runs) files.push_back(r.trace_path.filename());
      files.push_back("summary.csv");
    }
  }
  for (const auto& f : files)
    if (slurp(base / "a" / f) != slurp(base / "b" / f)) return fail(f.string() + " differs");
  return pass(fmt("%zu files byte-identical", files.size()));
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "estimator error bounds on cubics", 5, estimator_bounds},
      {2, "estimator exactness on quadratics", 5, quadratic_exactness},
      {3, "subproblem solvers match grid oracle", 60, subproblem_equivalence},
      {4, "descent inequality, theoretical sigma", 30, descent_inequality},
      {5, "stationarity within complexity budget", 60, complexity_budget},
      {6, "LASSO convergence comparison shape", 600, figure_shape},
      {7, "LIBSVM parser", 30, parser},
      {8, "prox firm nonexpansiveness and optimality", 5, prox_properties},
      {9, "bench determinism without timing", 120, determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (o.status != Outcome::Status::fail && secs > c.limit_s) {
      o.status = Outcome::Status::fail;
      o.detail += fmt(" (runtime limit %.0f s exceeded)", c.limit_s);
    }
    const char* tag = o.status == Outcome::Status::pass   ? "PASS"
                      : o.status == Outcome::Status::skip ? "SKIP"
                                                          : "FAIL";
    std::printf("[%s] %d %s (%.2f s): %s\n", tag, c.id, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
    if (o.status == Outcome::Status::fail) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
