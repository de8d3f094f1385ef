#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "qmnewt/config.hpp"
#include "qmnewt/diagnostics.hpp"
#include "qmnewt/fd_newton.hpp"
#include "qmnewt/problems.hpp"
#include "qmnewt/solver.hpp"
#include "qmnewt/table.hpp"

namespace qmnewt {

enum class OutputFormat { csv, json };

inline OutputFormat parse_output_format(std::string_view s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  throw ConfigError(fmt::format("unknown output format '{}'", s));
}

/// `model` is the model-based method, `fd-newton` the finite-difference baseline.
enum class MethodVariant { model, fd_newton };

inline MethodVariant parse_method_variant(std::string_view s) {
  if (s == "model") return MethodVariant::model;
  if (s == "fd-newton") return MethodVariant::fd_newton;
  throw ConfigError(fmt::format("unknown variant '{}'", s));
}

struct BenchSpec {
  std::vector<std::string> problems;
  ProblemOptions problem_options;
  std::vector<InitialGuess> igs{InitialGuess::IG1};
  std::vector<MethodVariant> variants{MethodVariant::model};
  SolverConfig cfg;
  /// Unset: backtrack for nonsmooth problems, pure for smooth ones.
  std::optional<Safeguard> safeguard;
  int repetitions = 1;
  int jobs = 1;
  OutputFormat format = OutputFormat::csv;
  std::string out_path;

  void validate() const {
    if (problems.empty()) throw ConfigError("at least one problem is required");
    if (igs.empty()) throw ConfigError("at least one initial guess is required");
    if (variants.empty()) throw ConfigError("at least one variant is required");
    if (repetitions < 1) throw ConfigError("repetitions must be at least 1");
    if (jobs < 1) throw ConfigError("jobs must be at least 1");
    cfg.validate();
  }
};

struct BenchCell {
  std::string problem;
  InitialGuess ig = InitialGuess::IG1;
  MethodVariant variant = MethodVariant::model;
  int rep = 0;
};

struct CellResult {
  BenchCell cell;
  Problem problem;
  SolverConfig cfg;
  RunReport report;
  std::string error;  ///< set when the run threw before producing a report
};

inline bool cell_failed(const CellResult& r) {
  return !r.error.empty() || (r.report.status != RunStatus::converged &&
                              r.report.status != RunStatus::max_iter);
}

inline std::vector<BenchCell> expand_cells(const BenchSpec& spec) {
  std::vector<BenchCell> cells;
  for (const auto& p : spec.problems)
    for (auto ig : spec.igs)
      for (auto v : spec.variants)
        for (int r = 0; r < spec.repetitions; ++r) cells.push_back({p, ig, v, r});
  return cells;
}

/// Runs fn(i) for i in [0, count) on up to `jobs` threads; results keep index order.
template <class T>
std::vector<T> parallel_map(std::size_t count, int jobs, const std::function<T(std::size_t)>& fn) {
  std::vector<T> results(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        results[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = static_cast<int>(std::min<std::size_t>(std::max(jobs, 1), std::max<std::size_t>(count, 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

inline SolverConfig cell_config(const BenchSpec& spec, const Problem& p, int rep) {
  SolverConfig cfg = spec.cfg;
  cfg.safeguard = spec.safeguard.value_or(p.smoothness == Smoothness::nonsmooth ? Safeguard::backtrack
                                                                               : Safeguard::pure);
  cfg.seed = spec.cfg.seed + static_cast<std::uint64_t>(rep);
  return cfg;
}

inline std::string variant_label(MethodVariant v, const SolverConfig& cfg) {
  if (v == MethodVariant::fd_newton) return "fd-newton";
  return fmt::format("{}-{}-{}", to_string(cfg.model_variant), to_string(cfg.step_variant),
                     to_string(cfg.safeguard));
}

inline CellResult run_cell(const BenchSpec& spec, const BenchCell& cell) {
  CellResult r;
  r.cell = cell;
  r.problem = make_problem(cell.problem, spec.problem_options);
  r.cfg = cell_config(spec, r.problem, cell.rep);
  const Point x0 = initial_guess(cell.ig, r.problem.dim);
  try {
    r.report = cell.variant == MethodVariant::fd_newton ? run_fd_newton(r.problem, x0, r.cfg)
                                                        : run(r.problem, x0, r.cfg);
  } catch (const Error& e) {
    r.error = e.what();
  }
  return r;
}

inline std::vector<CellResult> run_cells(const BenchSpec& spec) {
  const auto cells = expand_cells(spec);
  return parallel_map<CellResult>(cells.size(), spec.jobs,
                                  [&](std::size_t i) { return run_cell(spec, cells[i]); });
}

inline Cell optional_real(const std::optional<double>& v) {
  return v ? Cell{*v} : Cell{std::monostate{}};
}

/// One row per cell with the three error candidates labelled explicitly.
inline Table run_table(const std::vector<CellResult>& results) {
  Table t;
  t.columns = {"problem",         "ig",      "variant",       "rep",          "seed",
               "status",          "iters",   "f_final",       "grad_norm_final", "true_grad_inf",
               "err_x",           "err_f",   "e1_inf_final",  "e2_inf_final", "x_inf"};
  for (const auto& r : results) {
    const auto& rep = r.report;
    const bool ok = r.error.empty() && rep.x_star.size() > 0;
    std::optional<double> true_grad, err_x, err_f, e1, e2, x_inf, f_final, gnorm;
    if (ok) {
      f_final = rep.f_star;
      x_inf = rep.x_star.cwiseAbs().maxCoeff();
      if (!rep.iterations.empty()) {
        gnorm = rep.final_grad_norm();
        if (r.cell.variant == MethodVariant::model) {
          e1 = rep.iterations.back().e1_inf;
          e2 = rep.iterations.back().e2_inf;
        }
      }
      if (r.problem.analytic_grad) true_grad = r.problem.analytic_grad(rep.x_star).cwiseAbs().maxCoeff();
      if (r.problem.known_xstar) err_x = (rep.x_star - *r.problem.known_xstar).cwiseAbs().maxCoeff();
      if (r.problem.known_fstar) err_f = std::abs(rep.f_star - *r.problem.known_fstar);
    }
    t.add_row({r.problem.name, std::string(to_string(r.cell.ig)), variant_label(r.cell.variant, r.cfg),
               std::int64_t{r.cell.rep}, static_cast<std::int64_t>(r.cfg.seed),
               r.error.empty() ? std::string(to_string(rep.status)) : std::string("error"),
               static_cast<std::int64_t>(rep.iterations.size()), optional_real(f_final),
               optional_real(gnorm), optional_real(true_grad), optional_real(err_x),
               optional_real(err_f), optional_real(e1), optional_real(e2), optional_real(x_inf)});
  }
  return t;
}

inline constexpr std::string_view kNotReached = "not-reached";

/// ℰ(1), ℰ(2) at each checkpoint iteration; `not-reached` when the run ended earlier.
inline Table residual_table(const std::vector<CellResult>& results,
                            const std::vector<long>& checkpoints) {
  Table t;
  t.columns = {"problem", "ig", "variant", "status", "iters"};
  for (long c : checkpoints) {
    t.columns.push_back(fmt::format("e1_at_{}", c));
    t.columns.push_back(fmt::format("e2_at_{}", c));
  }
  for (const auto& r : results) {
    const auto& its = r.report.iterations;
    std::vector<Cell> row{r.problem.name, std::string(to_string(r.cell.ig)),
                          variant_label(r.cell.variant, r.cfg),
                          r.error.empty() ? std::string(to_string(r.report.status))
                                          : std::string("error"),
                          static_cast<std::int64_t>(its.size())};
    for (long c : checkpoints) {
      if (c >= 0 && static_cast<std::size_t>(c) < its.size()) {
        row.emplace_back(its[c].e1_inf);
        row.emplace_back(its[c].e2_inf);
      } else {
        row.emplace_back(std::string(kNotReached));
        row.emplace_back(std::string(kNotReached));
      }
    }
    t.add_row(std::move(row));
  }
  return t;
}

inline Table probe_table(const ProbeReport& report) {
  Table t;
  t.columns = {"radius", "grad_error", "hess_error"};
  for (const auto& s : report.samples) t.add_row({s.radius, s.grad_error, s.hess_error});
  return t;
}

struct MuSweepRow {
  double mu = 0.0;
  RunReport report;
};

struct MuSweepResult {
  std::vector<MuSweepRow> rows;
  bool monotone = true;
};

/// Runs the relaxed cardinality problem per μ and checks that ‖x*‖∞ strictly
/// decreases along the (descending) μ list.
inline MuSweepResult mu_sweep(const std::vector<double>& mus, double lambda, InitialGuess ig,
                              const SolverConfig& cfg, int jobs = 1) {
  if (mus.empty()) throw ConfigError("mu list is empty");
  for (std::size_t i = 0; i < mus.size(); ++i) {
    if (!(mus[i] > 0.0)) throw ConfigError("mu values must be positive");
    if (i > 0 && !(mus[i] < mus[i - 1])) throw ConfigError("mu values must be strictly descending");
  }
  MuSweepResult out;
  out.rows = parallel_map<MuSweepRow>(mus.size(), jobs, [&](std::size_t i) {
    ProblemOptions opts;
    opts.lambda = lambda;
    opts.mu = mus[i];
    const Problem p = make_problem("p4-relaxed", opts);
    return MuSweepRow{mus[i], run(p, initial_guess(ig, p.dim), cfg)};
  });
  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    const double prev = out.rows[i - 1].report.x_star.cwiseAbs().maxCoeff();
    const double cur = out.rows[i].report.x_star.cwiseAbs().maxCoeff();
    if (!(cur < prev)) out.monotone = false;
  }
  return out;
}

inline Table mu_sweep_table(const MuSweepResult& r) {
  Table t;
  t.columns = {"mu", "status", "iters", "x_inf", "f_final"};
  for (const auto& row : r.rows) {
    t.add_row({row.mu, std::string(to_string(row.report.status)),
               static_cast<std::int64_t>(row.report.iterations.size()),
               row.report.x_star.cwiseAbs().maxCoeff(), row.report.f_star});
  }
  return t;
}

inline nlohmann::ordered_json config_json(const SolverConfig& cfg) {
  nlohmann::ordered_json j;
  j["epsilon"] = cfg.epsilon;
  j["max_iter"] = cfg.max_iter;
  j["model"] = to_string(cfg.model_variant);
  j["step"] = to_string(cfg.step_variant);
  j["safeguard"] = to_string(cfg.safeguard);
  j["init_spread"] = cfg.init_spread ? nlohmann::ordered_json(*cfg.init_spread) : nullptr;
  j["seed"] = cfg.seed;
  j["kkt_coupling"] = to_string(cfg.kkt_coupling);
  j["newton"] = to_string(cfg.newton);
  j["gmres_tol"] = cfg.gmres_tol;
  return j;
}

}  // namespace qmnewt
