#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "zoprox/error.hpp"
#include "zoprox/libsvm.hpp"
#include "zoprox/problems.hpp"
#include "zoprox/rng.hpp"
#include "zoprox/solvers.hpp"

namespace zoprox::bench {

/// Default ZOPG stepsize grid; the run with the lowest final h is kept.
inline const std::vector<double> kEtaGrid = {1.0, 0.1, 0.01, 0.001};

inline constexpr const char* kOutDirEnv = "ZOPROX_OUT_DIR";

/// Invalid experiment description. Carries every violation found.
class SpecError : public Error {
 public:
  explicit SpecError(std::vector<std::string> errors)
      : Error(join(errors)), errors_(std::move(errors)) {}
  const std::vector<std::string>& errors() const noexcept { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& errors) {
    std::string s;
    for (const auto& e : errors) s += (s.empty() ? "" : "; ") + e;
    return s;
  }
  std::vector<std::string> errors_;
};

/// Flat key -> value experiment description. `solver` accumulates a
/// comma-separated list; every other key keeps its last value.
class SpecMap {
 public:
  void set(const std::string& key, const std::string& value) {
    if (key == "solver" && values_.count("solver") && !values_["solver"].empty())
      values_["solver"] += "," + value;
    else
      values_[key] = value;
  }
  void replace(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string* get(const std::string& key) const {
    auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
  }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  /// Syntax problems found while reading (line-numbered).
  std::vector<std::string> syntax_errors;

 private:
  std::map<std::string, std::string> values_;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

/// Reads `key = value` lines; '#' starts a comment.
inline SpecMap parse_spec(std::istream& in) {
  SpecMap spec;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      spec.syntax_errors.push_back("line " + std::to_string(line_no) + ": expected 'key = value'");
      continue;
    }
    const std::string key = detail::trim(std::string_view(body).substr(0, eq));
    const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) {
      spec.syntax_errors.push_back("line " + std::to_string(line_no) + ": empty key");
      continue;
    }
    spec.set(key, value);
  }
  return spec;
}

inline SpecMap parse_spec_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read spec file '" + path.string() + "'");
  return parse_spec(in);
}

struct LassoProblem {
  std::size_t n = 1000;
  std::size_t m = 100;
  double mu = 1e-3;
};

struct ClassifyProblem {
  std::string path;
  double lambda = 1e-3;
  double mu = 1e-3;
  bool fold_l2 = false;
  std::optional<std::size_t> n_features;
};

enum class SigmaMode { heuristic, constant, theoretical };

struct ExperimentSpec {
  std::variant<LassoProblem, ClassifyProblem> problem;
  std::vector<std::string> solvers;
  std::uint64_t seed = 0;
  std::size_t repeat = 1;
  std::size_t jobs = 1;
  bool timing = true;
  std::filesystem::path out_dir;

  std::size_t max_iter = 1000;
  double termination_tol = 1e-3;
  bool delta_constant = false;
  double delta = 1.0;
  SigmaMode sigma_mode = SigmaMode::heuristic;
  double sigma_scale = 5000.0;
  double sigma0 = 1.0;
  double sigma = 1.0;
  double sigma_factor = 1.0;
  std::optional<double> lipschitz_grad;
  std::optional<double> hess_bound;
  bool epsilon_constant = false;
  double epsilon = 1.0;
  std::optional<double> gamma;
  std::vector<double> zopg_eta = kEtaGrid;
  double hess_cap = 1e8;
  double x0_scale = 1.0;
};

namespace detail {

class SpecReader {
 public:
  SpecReader(const SpecMap& map, std::vector<std::string>& errors) : map_(map), errors_(errors) {}

  template <class T>
  void number(const char* key, T& out, bool positive = false, bool nonnegative = false) {
    const std::string* v = map_.get(key);
    if (!v) return;
    T parsed{};
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), parsed);
    if (ec != std::errc() || ptr != v->data() + v->size()) {
      errors_.push_back(std::string(key) + ": '" + *v + "' is not a valid number");
      return;
    }
    if constexpr (std::is_floating_point_v<T>) {
      if (!std::isfinite(parsed)) {
        errors_.push_back(std::string(key) + ": must be finite");
        return;
      }
    }
    if (positive && !(parsed > T{0})) {
      errors_.push_back(std::string(key) + ": must be > 0 (got " + *v + ")");
      return;
    }
    if (nonnegative && !(parsed >= T{0})) {
      errors_.push_back(std::string(key) + ": must be >= 0 (got " + *v + ")");
      return;
    }
    out = parsed;
  }

  template <class T>
  void optional_number(const char* key, std::optional<T>& out, bool positive = false) {
    if (!map_.has(key)) return;
    T value{};
    const std::size_t before = errors_.size();
    number(key, value, positive, !positive);
    if (errors_.size() == before) out = value;
  }

  void boolean(const char* key, bool& out) {
    const std::string* v = map_.get(key);
    if (!v) return;
    if (*v == "true" || *v == "1" || *v == "yes")
      out = true;
    else if (*v == "false" || *v == "0" || *v == "no")
      out = false;
    else
      errors_.push_back(std::string(key) + ": '" + *v + "' is not a boolean");
  }

  std::string choice(const char* key, std::initializer_list<const char*> options,
                     const char* fallback) {
    const std::string* v = map_.get(key);
    if (!v) return fallback;
    for (const char* o : options)
      if (*v == o) return *v;
    std::string allowed;
    for (const char* o : options) allowed += (allowed.empty() ? "" : "|") + std::string(o);
    errors_.push_back(std::string(key) + ": '" + *v + "' is not one of " + allowed);
    return fallback;
  }

 private:
  const SpecMap& map_;
  std::vector<std::string>& errors_;
};

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "problem",        "n",          "m",           "mu",          "seed",
      "path",           "lambda",     "fold_l2",     "n_features",  "solver",
      "repeat",         "jobs",       "out",         "no_timing",   "max_iter",
      "termination_tol", "delta_mode", "delta",       "sigma_mode",  "sigma_scale",
      "sigma0",         "sigma",      "sigma_factor", "lipschitz_grad", "hess_bound",
      "epsilon_mode",   "epsilon",    "gamma",       "zopg_eta",    "hess_cap",
      "x0_scale"};
  return keys;
}

}  // namespace detail

/// Full static check of an experiment; returns the spec or the list of
/// every violation through SpecError.
inline ExperimentSpec build_spec(const SpecMap& map) {
  std::vector<std::string> errors = map.syntax_errors;
  for (const auto& [key, value] : map.values())
    if (std::find(detail::known_keys().begin(), detail::known_keys().end(), key) ==
        detail::known_keys().end())
      errors.push_back(key + ": unknown key");

  detail::SpecReader rd(map, errors);
  ExperimentSpec spec;

  const std::string problem = rd.choice("problem", {"lasso", "classify"}, "");
  if (!map.has("problem")) errors.push_back("problem: missing (lasso or classify)");
  if (problem == "classify") {
    ClassifyProblem c;
    if (const auto* p = map.get("path"); p && !p->empty())
      c.path = *p;
    else
      errors.push_back("path: missing dataset path for classify");
    rd.number("lambda", c.lambda, false, true);
    rd.number("mu", c.mu, false, true);
    rd.boolean("fold_l2", c.fold_l2);
    rd.optional_number("n_features", c.n_features, true);
    spec.problem = c;
  } else {
    LassoProblem l;
    rd.number("n", l.n, true);
    rd.number("m", l.m, true);
    rd.number("mu", l.mu, false, true);
    spec.problem = l;
  }

  if (const auto* s = map.get("solver")) spec.solvers = detail::split_list(*s);
  if (spec.solvers.empty()) errors.push_back("solver: at least one solver is required");
  for (const auto& s : spec.solvers)
    if (s != "ipzopm" && s != "zopg") errors.push_back("solver: unknown solver '" + s + "'");

  rd.number("seed", spec.seed);
  rd.number("repeat", spec.repeat, true);
  rd.number("jobs", spec.jobs, true);
  bool no_timing = false;
  rd.boolean("no_timing", no_timing);
  spec.timing = !no_timing;

  if (const auto* o = map.get("out"); o && !o->empty())
    spec.out_dir = *o;
  else if (const char* env = std::getenv(kOutDirEnv); env && *env)
    spec.out_dir = env;
  else
    spec.out_dir = "zoprox_out";

  rd.number("max_iter", spec.max_iter, true);
  rd.number("termination_tol", spec.termination_tol, false, true);
  spec.delta_constant = rd.choice("delta_mode", {"inv_sqrt", "constant"}, "inv_sqrt") == "constant";
  rd.number("delta", spec.delta, true);
  const std::string sigma_mode =
      rd.choice("sigma_mode", {"heuristic", "constant", "theoretical"}, "heuristic");
  spec.sigma_mode = sigma_mode == "constant"      ? SigmaMode::constant
                    : sigma_mode == "theoretical" ? SigmaMode::theoretical
                                                  : SigmaMode::heuristic;
  rd.number("sigma_scale", spec.sigma_scale, true);
  rd.number("sigma0", spec.sigma0, true);
  rd.number("sigma", spec.sigma, true);
  rd.number("sigma_factor", spec.sigma_factor, true);
  if (spec.sigma_factor < 1.0) errors.push_back("sigma_factor: must be >= 1");
  rd.optional_number("lipschitz_grad", spec.lipschitz_grad);
  rd.optional_number("hess_bound", spec.hess_bound);
  if (spec.sigma_mode == SigmaMode::theoretical && problem == "classify" &&
      (!spec.lipschitz_grad || !spec.hess_bound))
    errors.push_back("sigma_mode: theoretical mode on classify needs lipschitz_grad and hess_bound");
  spec.epsilon_constant =
      rd.choice("epsilon_mode", {"inv_square", "constant"}, "inv_square") == "constant";
  rd.number("epsilon", spec.epsilon, true);
  rd.optional_number("gamma", spec.gamma, true);
  if (const auto* eta = map.get("zopg_eta"); eta && *eta != "grid") {
    spec.zopg_eta.clear();
    for (const auto& item : detail::split_list(*eta)) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc() || ptr != item.data() + item.size() || !(v > 0.0) || !std::isfinite(v))
        errors.push_back("zopg_eta: '" + item + "' is not a positive number");
      else
        spec.zopg_eta.push_back(v);
    }
    if (spec.zopg_eta.empty()) errors.push_back("zopg_eta: empty stepsize list");
  }
  rd.number("hess_cap", spec.hess_cap, true);
  rd.number("x0_scale", spec.x0_scale, false, true);

  if (!errors.empty()) throw SpecError(std::move(errors));
  return spec;
}

/// Violations of a spec file without running anything; empty means valid.
inline std::vector<std::string> validate(const std::filesystem::path& spec_file) {
  const SpecMap map = parse_spec_file(spec_file);
  try {
    build_spec(map);
  } catch (const SpecError& e) {
    return e.errors();
  }
  return {};
}

// ---------------------------------------------------------------------------
// Output

inline std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline constexpr const char* kTraceHeader =
    "iter,h,evals,delta,sigma,epsilon,inner_iters,gap_bound,stationarity,step_norm,wall_ms";

inline void write_trace_csv(std::ostream& os, const SolverReport& report, bool timing = true) {
  os << kTraceHeader << '\n';
  for (const auto& r : report.records) {
    os << r.k << ',' << format_double(r.h_value) << ',' << r.blackbox_evals << ','
       << format_double(r.delta) << ',' << format_double(r.sigma) << ','
       << format_double(r.epsilon) << ',' << r.inner_iters << ',' << format_double(r.gap_bound)
       << ',' << format_double(r.stationarity) << ',' << format_double(r.step_norm) << ','
       << (timing ? format_double(r.wall_ms) : "0") << '\n';
  }
}

struct RunResult {
  std::size_t repeat_index = 0;
  std::uint64_t seed = 0;
  std::string solver;
  std::optional<double> eta;
  SolverReport report;
  std::filesystem::path trace_path;
};

struct ExperimentResult {
  std::vector<RunResult> runs;
  std::filesystem::path summary_path;

  std::size_t failures() const {
    return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const RunResult& r) {
      return r.report.reason == TerminationReason::error;
    }));
  }
  /// Process exit status: nonzero only when every run failed.
  int exit_status() const { return (!runs.empty() && failures() == runs.size()) ? 1 : 0; }
};

namespace detail {

struct Instance {
  ObjectiveModel model;
  Vector x0;
  std::optional<LassoInstance> lasso;
};

inline SolverConfig make_config(const ExperimentSpec& spec, const Instance& inst) {
  SolverConfig cfg;
  cfg.max_iter = spec.max_iter;
  cfg.termination_tol = spec.termination_tol;
  cfg.delta = spec.delta_constant ? schedules::constant(spec.delta) : schedules::inv_sqrt(spec.delta);
  cfg.epsilon = spec.epsilon_constant ? schedules::constant(spec.epsilon)
                                      : schedules::inv_square(spec.epsilon);
  switch (spec.sigma_mode) {
    case SigmaMode::heuristic:
      cfg.sigma = schedules::heuristic_sigma(spec.sigma_scale, spec.sigma0);
      break;
    case SigmaMode::constant:
      cfg.sigma = schedules::constant_sigma(spec.sigma);
      break;
    case SigmaMode::theoretical: {
      double lf = 0.0, lh = 0.0;
      if (inst.lasso) {
        lf = lasso_lipschitz(*inst.lasso);
        const Vector d = lasso_hess_diag(*inst.lasso);
        lh = *std::max_element(d.begin(), d.end());
      }
      if (spec.lipschitz_grad) lf = *spec.lipschitz_grad;
      if (spec.hess_bound) lh = *spec.hess_bound;
      cfg.sigma = schedules::theoretical_sigma(lf, lh, spec.sigma_factor);
      break;
    }
  }
  cfg.gamma = spec.gamma;
  cfg.hess_cap = spec.hess_cap;
  cfg.seed = spec.seed;
  cfg.record_timing = spec.timing;
  return cfg;
}

}  // namespace detail

/// Runs every (repeat, solver) pair of the experiment, writes one trace CSV
/// per pair plus summary.csv into spec.out_dir. Repeat r uses seed + r for
/// both the problem instance (LASSO) and x0. For ZOPG every stepsize in
/// spec.zopg_eta is run and the lowest finite final h is kept.
inline ExperimentResult run(const ExperimentSpec& spec, std::ostream* log = nullptr) {
  std::optional<SparseDataset> dataset;
  if (const auto* c = std::get_if<ClassifyProblem>(&spec.problem)) {
    std::ifstream in(c->path);
    if (!in) throw Error("cannot read dataset '" + c->path + "'");
    dataset = parse_libsvm(in, c->n_features);
    if (log)
      *log << "dataset " << c->path << ": " << dataset->n_samples() << " samples, "
           << dataset->n_features << " features\n";
  }

  auto make_instance = [&](std::uint64_t seed) {
    detail::Instance inst;
    std::size_t n = 0;
    if (const auto* l = std::get_if<LassoProblem>(&spec.problem)) {
      inst.lasso = gen_lasso(l->n, l->m, l->mu, seed);
      inst.model = lasso_blackbox(*inst.lasso);
      n = l->n;
    } else {
      const auto& c = std::get<ClassifyProblem>(spec.problem);
      inst.model = sigmoid_objective(ClassificationInstance{*dataset, c.lambda, c.mu}, c.fold_l2);
      n = dataset->n_features;
    }
    Rng rng(derive_seed(seed, 1));
    inst.x0 = rng.normal_vector(n);
    for (auto& v : inst.x0) v *= spec.x0_scale;
    return inst;
  };

  struct Task {
    std::size_t repeat_index;
    std::size_t solver_index;
    std::optional<double> eta;
  };
  std::vector<Task> tasks;
  for (std::size_t r = 0; r < spec.repeat; ++r)
    for (std::size_t s = 0; s < spec.solvers.size(); ++s) {
      if (spec.solvers[s] == "zopg")
        for (double eta : spec.zopg_eta) tasks.push_back({r, s, eta});
      else
        tasks.push_back({r, s, std::nullopt});
    }

  std::vector<SolverReport> reports(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      const Task& task = tasks[t];
      const std::uint64_t seed = spec.seed + task.repeat_index;
      const std::string& solver = spec.solvers[task.solver_index];
      try {
        const detail::Instance inst = make_instance(seed);
        SolverConfig cfg = detail::make_config(spec, inst);
        if (task.eta) {
          cfg.zopg_stepsize = schedules::constant(*task.eta);
          reports[t] = zopg(inst.model, cfg, inst.x0);
        } else {
          reports[t] = ipzopm(inst.model, cfg, inst.x0);
        }
      } catch (const std::exception& e) {
        reports[t].reason = TerminationReason::error;
        reports[t].message = e.what();
      }
      if (log) {
        std::lock_guard lock(log_mutex);
        *log << solver << " run " << task.repeat_index;
        if (task.eta) *log << " eta " << *task.eta;
        *log << ": " << to_string(reports[t].reason) << ", " << reports[t].iterations()
             << " iterations, h = " << reports[t].h_value << '\n';
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t workers = std::max<std::size_t>(1, std::min(spec.jobs, tasks.size()));
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }

  ExperimentResult result;
  std::filesystem::create_directories(spec.out_dir);
  for (std::size_t r = 0; r < spec.repeat; ++r)
    for (std::size_t s = 0; s < spec.solvers.size(); ++s) {
      std::optional<std::size_t> chosen;
      for (std::size_t t = 0; t < tasks.size(); ++t) {
        if (tasks[t].repeat_index != r || tasks[t].solver_index != s) continue;
        if (!chosen) {
          chosen = t;
          continue;
        }
        const double h = reports[t].h_value, best = reports[*chosen].h_value;
        if (std::isfinite(h) && (!std::isfinite(best) || h < best)) chosen = t;
      }
      RunResult run;
      run.repeat_index = r;
      run.seed = spec.seed + r;
      run.solver = spec.solvers[s];
      run.eta = tasks[*chosen].eta;
      run.report = std::move(reports[*chosen]);
      run.trace_path = spec.out_dir / (run.solver + "_run" + std::to_string(r) + ".csv");
      std::ofstream os(run.trace_path, std::ios::binary);
      if (!os) throw Error("cannot write '" + run.trace_path.string() + "'");
      write_trace_csv(os, run.report, spec.timing);
      result.runs.push_back(std::move(run));
    }

  result.summary_path = spec.out_dir / "summary.csv";
  std::ofstream sum(result.summary_path, std::ios::binary);
  if (!sum) throw Error("cannot write '" + result.summary_path.string() + "'");
  sum << "run,seed,solver,eta,iterations,final_h,total_evals,termination,message\n";
  for (const auto& run : result.runs) {
    std::string msg = run.report.message;
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    sum << run.repeat_index << ',' << run.seed << ',' << run.solver << ','
        << (run.eta ? format_double(*run.eta) : "") << ',' << run.report.iterations() << ','
        << format_double(run.report.h_value) << ',' << run.report.total_evals << ','
        << to_string(run.report.reason) << ',' << msg << '\n';
  }
  return result;
}

}  // namespace zoprox::bench
