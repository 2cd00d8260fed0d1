// Copyright 2026 The gavg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GAVG_EXPERIMENT_HPP
#define GAVG_EXPERIMENT_HPP

// Config-driven multi-trial runner. A run writes, under the output directory:
//
//   manifest.json              resolved config, its hash, seeds and stream ids
//   summary.csv                one row per method (diagnostics schema)
//   aggregates/<label>.csv     k,mean_gap,var_gap[,direction_var]
//   traces/<label>/trial_NNNN.csv
//
// Trial t of every method draws from RngStream(base_seed, t). Trials run on a
// thread pool but are reduced in stream-id order, so outputs do not depend on
// the thread count.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "gavg/core.hpp"
#include "gavg/diagnostics.hpp"
#include "gavg/objectives.hpp"
#include "gavg/optimizers.hpp"
#include "gavg/rng.hpp"
#include "gavg/schedules.hpp"
#include "gavg/trace.hpp"

namespace gavg {

/// Filesystem failure; the CLI exits with code 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A decaying schedule failed validation; carries the report.
class InvalidSchedule : public ConfigError {
 public:
  explicit InvalidSchedule(ValidityReport r)
      : ConfigError("invalid stepsize schedule:\n" + r.describe()), report(r) {}
  ValidityReport report;
};

struct NoiseConfig {
  std::string kind = "additive_gaussian";
  double sigma = 0.0;
  std::int64_t batch = 1;
};

struct ProblemConfig {
  std::string kind = "quadratic";  // quadratic | least_squares | logistic
  std::int64_t dim = 10;
  std::int64_t n = 200;            // finite-sum problems
  double l = 1.0;                  // quadratic spectrum
  double L = 4.0;
  double ridge = 0.5;
  NoiseConfig noise;
  std::uint64_t data_seed = 0;
};

struct ScheduleConfig {
  double s = 10.0;
  std::optional<double> sigma;
  std::optional<double> mg1_override;
};

struct MethodConfig {
  std::string method;  // accel | sg | sgm | gradavg | iteravg | svrg
  std::string label;
  double p = 20.0;
  double beta = 0.9;
  std::optional<double> alpha;
  std::optional<std::int64_t> svrg_m;
};

struct RunConfig {
  std::int64_t n_trials = 10;
  std::int64_t max_k = 10000;
  int checkpoints_per_decade = 20;
  std::uint64_t base_seed = 1;
  bool snapshots = false;
  std::int64_t fit_k_lo = 100;
  std::optional<std::int64_t> fit_k_hi;
  std::int64_t varm_k_lo = 100;
  std::optional<std::int64_t> varm_k_hi;
  std::int64_t kappa_j_lo = 100;
  std::optional<std::int64_t> kappa_j_hi;
};

struct ExperimentConfig {
  ProblemConfig problem;
  ScheduleConfig schedule;
  std::vector<MethodConfig> methods;
  RunConfig run;
  std::optional<std::string> output_dir;
};

inline const std::set<std::string>& known_methods() {
  static const std::set<std::string> m{"accel", "sg", "sgm", "gradavg", "iteravg", "svrg"};
  return m;
}

inline bool uses_decay_schedule(const std::string& method) {
  return method == "accel" || method == "sg" || method == "gradavg" || method == "iteravg";
}

// --- parsing --------------------------------------------------------------

namespace detail {

using nlohmann::json;

inline void allow_keys(const json& obj, const std::set<std::string>& keys, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, _] : obj.items())
    if (!keys.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <typename T>
std::optional<T> get_opt(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <typename T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::get_opt;
  using detail::get_or;
  ExperimentConfig c;
  detail::allow_keys(j, {"problem", "schedule", "methods", "run", "output"}, "config");
  if (!j.contains("problem")) throw ConfigError("config: missing 'problem' block");
  if (!j.contains("methods")) throw ConfigError("config: missing 'methods' list");

  const auto& pj = j.at("problem");
  detail::allow_keys(pj, {"kind", "dim", "n", "l", "L", "ridge", "noise", "data_seed"}, "problem");
  auto& p = c.problem;
  p.kind = get_or<std::string>(pj, "kind", p.kind, "problem");
  if (p.kind != "quadratic" && p.kind != "least_squares" && p.kind != "logistic")
    throw ConfigError("problem.kind: unknown kind '" + p.kind + "'");
  p.dim = get_or(pj, "dim", p.dim, "problem");
  p.n = get_or(pj, "n", p.n, "problem");
  p.l = get_or(pj, "l", p.l, "problem");
  p.L = get_or(pj, "L", p.L, "problem");
  p.ridge = get_or(pj, "ridge", p.ridge, "problem");
  p.data_seed = get_or(pj, "data_seed", p.data_seed, "problem");
  if (pj.contains("noise")) {
    const auto& nj = pj.at("noise");
    detail::allow_keys(nj, {"kind", "sigma", "batch"}, "problem.noise");
    p.noise.kind = get_or<std::string>(nj, "kind", p.noise.kind, "problem.noise");
    if (p.noise.kind != "additive_gaussian" && p.noise.kind != "subsample")
      throw ConfigError("problem.noise.kind: unknown kind '" + p.noise.kind + "'");
    p.noise.sigma = get_or(nj, "sigma", p.noise.sigma, "problem.noise");
    p.noise.batch = get_or(nj, "batch", p.noise.batch, "problem.noise");
  }

  if (j.contains("schedule")) {
    const auto& sj = j.at("schedule");
    detail::allow_keys(sj, {"s", "sigma", "mg1_override"}, "schedule");
    c.schedule.s = get_or(sj, "s", c.schedule.s, "schedule");
    c.schedule.sigma = get_opt<double>(sj, "sigma", "schedule");
    c.schedule.mg1_override = get_opt<double>(sj, "mg1_override", "schedule");
  }

  if (!j.at("methods").is_array() || j.at("methods").empty())
    throw ConfigError("methods: expected a non-empty list");
  std::set<std::string> labels;
  for (const auto& mj : j.at("methods")) {
    detail::allow_keys(mj, {"method", "label", "p", "beta", "alpha", "svrg_m"}, "methods[]");
    MethodConfig m;
    m.method = get_or<std::string>(mj, "method", "", "methods[]");
    if (!known_methods().count(m.method))
      throw ConfigError("methods[]: unknown method '" + m.method + "'");
    m.label = get_or<std::string>(mj, "label", m.method, "methods[]");
    m.p = get_or(mj, "p", m.p, "methods[]");
    m.beta = get_or(mj, "beta", m.beta, "methods[]");
    m.alpha = get_opt<double>(mj, "alpha", "methods[]");
    m.svrg_m = get_opt<std::int64_t>(mj, "svrg_m", "methods[]");
    if (m.label.empty() || m.label.find_first_of("/\\,. ") != std::string::npos)
      throw ConfigError("methods[]: label '" + m.label + "' must be a plain identifier");
    if (!labels.insert(m.label).second)
      throw ConfigError("methods[]: duplicate label '" + m.label + "'");
    c.methods.push_back(m);
  }

  if (j.contains("run")) {
    const auto& rj = j.at("run");
    detail::allow_keys(rj,
                       {"n_trials", "max_k", "checkpoints_per_decade", "base_seed", "snapshots",
                        "fit_k_lo", "fit_k_hi", "varm_k_lo", "varm_k_hi", "kappa_j_lo",
                        "kappa_j_hi"},
                       "run");
    auto& r = c.run;
    r.n_trials = get_or(rj, "n_trials", r.n_trials, "run");
    r.max_k = get_or(rj, "max_k", r.max_k, "run");
    r.checkpoints_per_decade = get_or(rj, "checkpoints_per_decade", r.checkpoints_per_decade, "run");
    r.base_seed = get_or(rj, "base_seed", r.base_seed, "run");
    r.snapshots = get_or(rj, "snapshots", r.snapshots, "run");
    r.fit_k_lo = get_or(rj, "fit_k_lo", r.fit_k_lo, "run");
    r.fit_k_hi = get_opt<std::int64_t>(rj, "fit_k_hi", "run");
    r.varm_k_lo = get_or(rj, "varm_k_lo", r.varm_k_lo, "run");
    r.varm_k_hi = get_opt<std::int64_t>(rj, "varm_k_hi", "run");
    r.kappa_j_lo = get_or(rj, "kappa_j_lo", r.kappa_j_lo, "run");
    r.kappa_j_hi = get_opt<std::int64_t>(rj, "kappa_j_hi", "run");
  }
  if (c.run.n_trials < 1) throw ConfigError("run.n_trials must be >= 1");
  if (c.run.max_k < 1) throw ConfigError("run.max_k must be >= 1");
  if (c.run.checkpoints_per_decade < 1) throw ConfigError("run.checkpoints_per_decade must be >= 1");

  if (j.contains("output")) {
    const auto& oj = j.at("output");
    if (oj.is_string()) c.output_dir = oj.get<std::string>();
    else if (!oj.is_null()) throw ConfigError("output: expected a directory path string");
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

/// Every semantic field, defaults filled in. The output directory is excluded.
inline nlohmann::json canonical_json(const ExperimentConfig& c) {
  using detail::opt_json;
  nlohmann::json j;
  const auto& p = c.problem;
  j["problem"] = {{"kind", p.kind},   {"dim", p.dim},
                  {"n", p.n},         {"l", p.l},
                  {"L", p.L},         {"ridge", p.ridge},
                  {"data_seed", p.data_seed},
                  {"noise", {{"kind", p.noise.kind}, {"sigma", p.noise.sigma}, {"batch", p.noise.batch}}}};
  j["schedule"] = {{"s", c.schedule.s},
                   {"sigma", opt_json(c.schedule.sigma)},
                   {"mg1_override", opt_json(c.schedule.mg1_override)}};
  j["methods"] = nlohmann::json::array();
  for (const auto& m : c.methods)
    j["methods"].push_back({{"method", m.method},
                            {"label", m.label},
                            {"p", m.p},
                            {"beta", m.beta},
                            {"alpha", opt_json(m.alpha)},
                            {"svrg_m", opt_json(m.svrg_m)}});
  const auto& r = c.run;
  j["run"] = {{"n_trials", r.n_trials},
              {"max_k", r.max_k},
              {"checkpoints_per_decade", r.checkpoints_per_decade},
              {"base_seed", r.base_seed},
              {"snapshots", r.snapshots},
              {"fit_k_lo", r.fit_k_lo},
              {"fit_k_hi", opt_json(r.fit_k_hi)},
              {"varm_k_lo", r.varm_k_lo},
              {"varm_k_hi", opt_json(r.varm_k_hi)},
              {"kappa_j_lo", r.kappa_j_lo},
              {"kappa_j_hi", opt_json(r.kappa_j_hi)}};
  return j;
}

/// 64-bit FNV-1a of the canonical config dump, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : canonical_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// --- problem and schedule resolution ---------------------------------------

inline NoiseModel to_noise_model(const NoiseConfig& n) {
  return n.kind == "subsample" ? NoiseModel::subsample(n.batch) : NoiseModel::additive(n.sigma);
}

inline Problem build_problem(const ProblemConfig& p) {
  const NoiseModel noise = to_noise_model(p.noise);
  try {
    if (p.kind == "quadratic") return Problem(make_quadratic(p.dim, p.l, p.L, noise, p.data_seed));
    if (p.kind == "least_squares")
      return Problem(make_least_squares(p.n, p.dim, p.ridge, noise, p.data_seed));
    if (p.kind == "logistic") return Problem(make_logistic(p.n, p.dim, p.ridge, noise, p.data_seed));
  } catch (const UsageError& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }
  throw ConfigError("problem.kind: unknown kind '" + p.kind + "'");
}

inline DecaySchedule resolve_schedule(const ScheduleConfig& s, const SmoothnessConstants& c) {
  try {
    return DecaySchedule::checked(s.s, s.sigma, c, s.mg1_override);
  } catch (const UsageError& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
}

/// Result of the dry-run checks `validate` performs.
struct ValidationResult {
  SmoothnessConstants constants;
  DecaySchedule schedule;
  bool needs_schedule = false;
  std::string problem_kind;
};

inline ValidationResult validate_config(const ExperimentConfig& c) {
  ValidationResult v;
  const Problem problem = build_problem(c.problem);
  v.problem_kind = problem.kind();
  v.constants = problem.constants();
  v.schedule = resolve_schedule(c.schedule, v.constants);
  for (const auto& m : c.methods) {
    if (uses_decay_schedule(m.method)) v.needs_schedule = true;
    if (m.method == "svrg" && !problem.n_components())
      throw ConfigError("method '" + m.label + "': svrg requires a finite-sum problem");
    if (m.method == "sgm" && !(m.beta >= 0.0 && m.beta < 1.0))
      throw ConfigError("method '" + m.label + "': sgm beta must lie in [0, 1)");
    if (m.method == "accel" && !(m.p >= 0.0))
      throw ConfigError("method '" + m.label + "': p must be nonnegative");
  }
  if (v.needs_schedule && !v.schedule.constraint_report->valid())
    throw InvalidSchedule(*v.schedule.constraint_report);
  return v;
}

// --- trials ----------------------------------------------------------------

using MethodState =
    std::variant<SgState, AcceleratedState, SgmState, GradAvgState, IterateAvgState, SvrgState>;

/// Method with every hyperparameter resolved against the problem.
struct ResolvedMethod {
  MethodConfig config;
  double alpha = 0.0;        // sgm / svrg
  std::int64_t svrg_m = 0;
  std::optional<double> svrg_rho;
  bool tuned = false;        // sgm alpha picked by the pilot grid
};

inline MethodState init_state(const ResolvedMethod& m, Eigen::Index dim) {
  Vector x1 = Vector::Zero(dim);
  const auto& name = m.config.method;
  if (name == "accel") return AcceleratedState::start(std::move(x1), m.config.p);
  if (name == "sg") return SgState::start(std::move(x1));
  if (name == "sgm") return SgmState::start(std::move(x1), m.alpha, m.config.beta);
  if (name == "gradavg") return GradAvgState::start(std::move(x1));
  if (name == "iteravg") return IterateAvgState::start(std::move(x1));
  if (name == "svrg") return SvrgState::start(std::move(x1), m.alpha, m.svrg_m);
  throw ConfigError("unknown method '" + name + "'");
}

namespace detail {

inline void step_any(MethodState& st, const Problem& problem, const Stepsize& stepsize,
                     RngStream& rng) {
  std::visit(
      [&](auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, SvrgState>) {
          std::visit(
              [&](const auto& p) {
                if constexpr (FiniteSumObjective<std::decay_t<decltype(p)>>) svrg_step(s, p, rng);
                else throw ConfigError("svrg requires a finite-sum problem");
              },
              problem.variant());
        } else {
          std::visit([&](const auto& p) { step(s, p, stepsize, rng); }, problem.variant());
        }
      },
      st);
}

}  // namespace detail

/// Runs one trial for `max_k` steps. At each checkpoint k the estimate x_k is
/// recorded before step k; with snapshots on, the direction used by step k is
/// stored alongside it.
inline Trace run_trial(const Problem& problem, const ResolvedMethod& method,
                       const Stepsize& stepsize, std::span<const std::int64_t> checkpoints,
                       std::int64_t max_k, std::uint64_t seed, std::uint64_t stream_id,
                       bool snapshots) {
  Trace trace;
  trace.seed = seed;
  trace.stream_id = stream_id;
  trace.method_id = method.config.label;
  trace.schedule_id = stepsize.id();
  trace.snapshots = snapshots ? SnapshotPolicy::iterate : SnapshotPolicy::none;
  RngStream rng(seed, stream_id);
  MethodState st = init_state(method, problem.dim());
  std::size_t next = 0;
  for (std::int64_t k = 1; k <= max_k; ++k) {
    const bool at_checkpoint = next < checkpoints.size() && checkpoints[next] == k;
    if (at_checkpoint) {
      std::visit([&](const auto& s) { record(trace, k, problem, s.estimate()); }, st);
      ++next;
    }
    detail::step_any(st, problem, stepsize, rng);
    if (at_checkpoint && snapshots)
      trace.entries.back().direction =
          std::visit([](const auto& s) -> Vector { return direction_of(s); }, st);
  }
  return trace;
}

/// Worker count: `requested` (0 = hardware concurrency), capped by GAVG_THREADS.
inline unsigned resolve_threads(unsigned requested) {
  unsigned n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("GAVG_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return std::max(1u, n);
}

/// Runs task(i) for i in [0, count) on `threads` workers. The first exception
/// by task index is rethrown after all workers finish.
template <typename Task>
void parallel_for(std::size_t count, unsigned threads, Task&& task) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> cursor{0};
  auto worker = [&] {
    for (std::size_t i = cursor++; i < count; i = cursor++) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Pilot streams live above 2^32 so they never coincide with trial streams.
inline constexpr std::uint64_t kPilotStreamBase = 1ull << 32;

/// SGM alpha grid, as multiples of 1/L.
inline constexpr double kSgmAlphaGrid[] = {0.02, 0.05, 0.1, 0.2, 0.5};

/// Picks the SGM alpha with the lowest mean final gap over a short pilot.
inline double tune_sgm_alpha(const Problem& problem, const MethodConfig& m, const RunConfig& run,
                             unsigned threads) {
  const double L = problem.constants().L;
  const std::int64_t pilot_k = std::min<std::int64_t>(run.max_k, 2000);
  const std::int64_t pilot_trials = std::min<std::int64_t>(run.n_trials, 5);
  const std::vector<std::int64_t> last{pilot_k};
  constexpr std::size_t n_grid = std::size(kSgmAlphaGrid);
  std::vector<double> score(n_grid * static_cast<std::size_t>(pilot_trials));
  parallel_for(score.size(), threads, [&](std::size_t i) {
    ResolvedMethod rm;
    rm.config = m;
    rm.alpha = kSgmAlphaGrid[i / pilot_trials] / L;
    const auto t = static_cast<std::uint64_t>(i % pilot_trials);
    const Trace tr = run_trial(problem, rm, Stepsize::fixed(rm.alpha), last, pilot_k,
                               run.base_seed, kPilotStreamBase + t, false);
    score[i] = tr.entries.back().f_gap;
  });
  double best_alpha = kSgmAlphaGrid[0] / L;
  double best = INFINITY;
  for (std::size_t g = 0; g < n_grid; ++g) {
    double sum = 0.0;
    for (std::int64_t t = 0; t < pilot_trials; ++t) sum += score[g * pilot_trials + t];
    if (std::isfinite(sum) && sum < best) {
      best = sum;
      best_alpha = kSgmAlphaGrid[g] / L;
    }
  }
  return best_alpha;
}

inline ResolvedMethod resolve_method(const MethodConfig& m, const Problem& problem,
                                     const RunConfig& run, unsigned threads) {
  ResolvedMethod r;
  r.config = m;
  if (m.method == "sgm") {
    if (m.alpha) {
      r.alpha = *m.alpha;
    } else {
      r.alpha = tune_sgm_alpha(problem, m, run, threads);
      r.tuned = true;
    }
  } else if (m.method == "svrg") {
    const auto c = problem.constants();
    const double lmax = std::visit(
        [](const auto& p) -> double {
          if constexpr (FiniteSumObjective<std::decay_t<decltype(p)>>) return p.max_component_L();
          else throw ConfigError("svrg requires a finite-sum problem");
        },
        problem.variant());
    r.alpha = m.alpha.value_or(0.1 / lmax);
    r.svrg_m = m.svrg_m.value_or(
        static_cast<std::int64_t>(std::ceil(4.0 / (r.alpha * c.l))));
    if (2.0 * r.alpha * lmax < 1.0) r.svrg_rho = svrg_rho(r.alpha, r.svrg_m, c.l, lmax);
  }
  return r;
}

// --- running ---------------------------------------------------------------

struct MethodResult {
  ResolvedMethod method;
  std::vector<Trace> traces;  // ascending stream id
  TrialAggregate aggregate;
  SummaryRow summary;
  std::optional<RateFit> rate_fit;
  std::optional<RateFit> varm_fit;
  std::optional<KappaEstimate> kappa;
};

struct ExperimentResult {
  ExperimentConfig config;
  SmoothnessConstants constants;
  DecaySchedule schedule;
  std::vector<std::int64_t> checkpoints;
  std::vector<MethodResult> methods;
  std::string hash;
};

inline SummaryRow summarize(MethodResult& r, const ExperimentConfig& c,
                            const DecaySchedule& schedule) {
  SummaryRow row;
  row.method = r.method.config.label;
  row.n_trials = r.aggregate.n_trials;
  if (r.method.config.method == "accel") row.p = r.method.config.p;
  if (uses_decay_schedule(r.method.config.method)) {
    row.s = schedule.s;
    row.sigma = schedule.sigma;
  }
  const auto& run = c.run;
  const auto& agg = r.aggregate;
  try {
    r.rate_fit = fit_rate(agg, run.fit_k_lo, run.fit_k_hi.value_or(run.max_k));
    row.rate_slope = r.rate_fit->slope;
    row.rate_r2 = r.rate_fit->r_squared;
  } catch (const UsageError&) {
  } catch (const DataError&) {
  }
  if (!agg.direction_var.empty()) {
    try {
      r.varm_fit = fit_direction_variance(agg.ks, agg.direction_var, run.varm_k_lo,
                                          run.varm_k_hi.value_or(run.max_k));
      row.varm_slope = r.varm_fit->slope;
    } catch (const UsageError&) {
    } catch (const DataError&) {
    }
  }
  if (agg.moments && agg.n_trials >= 50) {
    const std::int64_t K = agg.moments->reference_k;
    try {
      r.kappa = estimate_kappa(*agg.moments, K, run.kappa_j_lo, run.kappa_j_hi.value_or(K / 10));
      row.kappa_hat = r.kappa->kappa_hat;
    } catch (const UsageError&) {
    } catch (const DataError&) {
    }
  }
  return row;
}

/// Runs every method over every trial and aggregates. No files are written.
inline ExperimentResult run_experiment(const ExperimentConfig& config, unsigned threads = 1) {
  const ValidationResult v = validate_config(config);
  const Problem problem = build_problem(config.problem);
  ExperimentResult res;
  res.config = config;
  res.constants = v.constants;
  res.schedule = v.schedule;
  res.hash = config_hash(config);
  res.checkpoints = log_checkpoints(config.run.max_k, config.run.checkpoints_per_decade);
  const Stepsize decay = Stepsize::decay(v.schedule);

  for (const auto& m : config.methods) {
    MethodResult mr;
    mr.method = resolve_method(m, problem, config.run, threads);
    const Stepsize stepsize = uses_decay_schedule(m.method)
                                  ? decay
                                  : Stepsize::fixed(mr.method.alpha);
    mr.traces.resize(static_cast<std::size_t>(config.run.n_trials));
    parallel_for(mr.traces.size(), threads, [&](std::size_t t) {
      mr.traces[t] = run_trial(problem, mr.method, stepsize, res.checkpoints, config.run.max_k,
                               config.run.base_seed, static_cast<std::uint64_t>(t),
                               config.run.snapshots);
    });
    mr.aggregate = aggregate(mr.traces, res.checkpoints);
    mr.summary = summarize(mr, config, v.schedule);
    res.methods.push_back(std::move(mr));
  }
  return res;
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed for " + path.string());
}

inline std::string trial_name(std::uint64_t stream_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "trial_%04llu.csv", static_cast<unsigned long long>(stream_id));
  return buf;
}

}  // namespace detail

inline nlohmann::json manifest_json(const ExperimentResult& r) {
  nlohmann::json j;
  j["config"] = canonical_json(r.config);
  j["config_hash"] = r.hash;
  j["versions"] = {{"gavg", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)}};
  j["rng"] = {{"generator", "philox4x32-10"},
              {"key", "base_seed"},
              {"counter", "stream_id (high 64 bits) : block index (low 64 bits)"},
              {"data_stream", kDataStream},
              {"base_seed", r.config.run.base_seed},
              {"data_seed", r.config.problem.data_seed}};
  std::vector<std::uint64_t> streams;
  for (std::int64_t t = 0; t < r.config.run.n_trials; ++t) streams.push_back(static_cast<std::uint64_t>(t));
  j["stream_ids"] = streams;
  j["constants"] = {{"l", r.constants.l}, {"L", r.constants.L}, {"M", r.constants.M},
                    {"M_V", r.constants.M_V}};
  const auto& rep = *r.schedule.constraint_report;
  j["schedule"] = {{"s", r.schedule.s},
                   {"sigma", r.schedule.sigma},
                   {"alpha1", rep.alpha1},
                   {"alpha1_bound", rep.bound_used},
                   {"mg1", rep.assumed_MG1},
                   {"valid", rep.valid()}};
  j["methods"] = nlohmann::json::array();
  for (const auto& m : r.methods) {
    nlohmann::json mj = {{"label", m.method.config.label}, {"method", m.method.config.method}};
    if (m.method.config.method == "sgm") {
      mj["alpha"] = m.method.alpha;
      mj["alpha_tuned"] = m.method.tuned;
      if (m.method.tuned) {
        const std::int64_t pilot_trials = std::min<std::int64_t>(r.config.run.n_trials, 5);
        std::vector<std::uint64_t> pilot;
        for (std::int64_t t = 0; t < pilot_trials; ++t) pilot.push_back(kPilotStreamBase + t);
        mj["pilot_stream_ids"] = pilot;
      }
    }
    if (m.method.config.method == "svrg") {
      mj["alpha"] = m.method.alpha;
      mj["svrg_m"] = m.method.svrg_m;
      mj["rho"] = m.method.svrg_rho ? nlohmann::json(*m.method.svrg_rho) : nlohmann::json(nullptr);
    }
    j["methods"].push_back(mj);
  }
  return j;
}

/// Writes manifest, summary, aggregates and per-trial traces under `out`.
inline void write_outputs(const ExperimentResult& r, const std::filesystem::path& out) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out / "traces", ec);
  if (ec) throw IoError("cannot create " + (out / "traces").string() + ": " + ec.message());
  fs::create_directories(out / "aggregates", ec);
  if (ec) throw IoError("cannot create " + (out / "aggregates").string() + ": " + ec.message());

  detail::write_file(out / "manifest.json", manifest_json(r).dump(2) + "\n");
  std::vector<SummaryRow> rows;
  for (const auto& m : r.methods) {
    rows.push_back(m.summary);
    const fs::path tdir = out / "traces" / m.method.config.label;
    fs::create_directories(tdir, ec);
    if (ec) throw IoError("cannot create " + tdir.string() + ": " + ec.message());
    for (const auto& t : m.traces) {
      std::ostringstream os;
      write_trace_csv(os, t);
      detail::write_file(tdir / detail::trial_name(t.stream_id), os.str());
    }
    std::ostringstream os;
    write_aggregate_csv(os, m.aggregate);
    detail::write_file(out / "aggregates" / (m.method.config.label + ".csv"), os.str());
  }
  std::ostringstream os;
  write_summary_csv(os, rows);
  detail::write_file(out / "summary.csv", os.str());
}

// --- plot data ---------------------------------------------------------------

/// Re-derives log10-log10 series from stored aggregates; no trials are rerun.
/// Writes <out>/<label>_loglog.csv per aggregate and returns the labels.
inline std::vector<std::string> plotdata(const std::filesystem::path& in,
                                         const std::filesystem::path& out) {
  namespace fs = std::filesystem;
  const fs::path agg_dir = in / "aggregates";
  if (!fs::is_directory(in)) throw IoError("no such run directory: " + in.string());
  if (!fs::is_directory(agg_dir)) throw IoError("no aggregates under " + in.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(agg_dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());

  auto log10_or_nan = [](double v) { return v > 0.0 ? std::log10(v) : NAN; };
  std::vector<std::string> labels;
  for (const auto& f : files) {
    std::ifstream is(f);
    if (!is) throw IoError("cannot read " + f.string());
    std::string header;
    std::getline(is, header);
    const bool dir = header == "k,mean_gap,var_gap,direction_var";
    if (!dir && header != "k,mean_gap,var_gap")
      throw DataError("unexpected aggregate header in " + f.string());
    std::ostringstream os;
    os << "log10_k,log10_mean_gap" << (dir ? ",log10_direction_var" : "") << '\n';
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::vector<std::string> cells;
      std::stringstream ss(line);
      for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
      if (cells.size() < (dir ? 4u : 3u)) throw DataError("malformed row in " + f.string());
      const double k = std::strtod(cells[0].c_str(), nullptr);
      const double gap = std::strtod(cells[1].c_str(), nullptr);
      os << csv_real(std::log10(k)) << ',' << csv_real(log10_or_nan(gap));
      if (dir) os << ',' << csv_real(log10_or_nan(std::strtod(cells[3].c_str(), nullptr)));
      os << '\n';
    }
    const std::string label = f.stem().string();
    detail::write_file(out / (label + "_loglog.csv"), os.str());
    labels.push_back(label);
  }
  return labels;
}

}  // namespace gavg

#endif  // GAVG_EXPERIMENT_HPP
