#pragma once

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "qmnewt/bench.hpp"

namespace qmnewt {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int io_failure = 1;
inline constexpr int usage = 2;
inline constexpr int failed_cells = 3;
inline constexpr int assertion = 4;
}  // namespace exit_code

namespace detail {

/// Seed from QMNEWT_SEED when set and parseable, else 0.
inline std::uint64_t env_seed() {
  if (const char* s = std::getenv("QMNEWT_SEED")) {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      return 0;
    }
  }
  return 0;
}

inline bool write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) return false;
  f << text;
  f.flush();
  return static_cast<bool>(f);
}

struct CommonOptions {
  std::vector<std::string> problems;
  std::optional<int> dim;
  std::vector<std::string> igs{"IG1"};
  std::vector<std::string> variants{"model"};
  std::string model = "simplified";
  std::string step = "newton";
  std::optional<std::string> safeguard;
  std::string kkt = "printed";
  std::string newton = "damped";
  double eps = 1e-8;
  int max_iter = 2000;
  std::optional<std::uint64_t> seed;
  std::optional<double> spread;
  double lambda = 1.0;
  double mu = 1e-2;
  int jobs = 1;
  int repetitions = 1;
  std::string out;
  std::string format = "csv";
};

inline void add_common(CLI::App* cmd, CommonOptions& o, bool with_problem) {
  if (with_problem) {
    cmd->add_option("--problem", o.problems, "problem name(s), comma separated")
        ->delimiter(',')
        ->required();
    cmd->add_option("--dim", o.dim, "dimension for scalable problems");
    cmd->add_option("--lambda", o.lambda, "P4 penalty weight");
    cmd->add_option("--mu", o.mu, "P4-relaxed smoothing parameter");
  }
  cmd->add_option("--ig", o.igs, "initial guess tag(s): IG1, IG2, IG3")->delimiter(',');
  cmd->add_option("--variant", o.variants, "method variant(s): model, fd-newton")->delimiter(',');
  cmd->add_option("--model", o.model, "full | simplified");
  cmd->add_option("--step", o.step, "newton | sr1 | bfgs");
  cmd->add_option("--safeguard", o.safeguard, "pure | backtrack");
  cmd->add_option("--kkt", o.kkt, "printed | full");
  cmd->add_option("--newton", o.newton, "damped | pure");
  cmd->add_option("--eps", o.eps, "gradient-norm tolerance");
  cmd->add_option("--max-iter", o.max_iter, "iteration cap");
  cmd->add_option("--seed", o.seed, "RNG seed (default QMNEWT_SEED or 0)");
  cmd->add_option("--spread", o.spread, "initial point spread");
  cmd->add_option("--jobs", o.jobs, "concurrent cells");
  cmd->add_option("--repetitions", o.repetitions, "runs per cell (seed + rep)");
  cmd->add_option("--out", o.out, "output file (stdout when omitted)");
  cmd->add_option("--format", o.format, "csv | json");
}

inline BenchSpec build_spec(const CommonOptions& o) {
  BenchSpec spec;
  spec.problems = o.problems;
  spec.problem_options.dim = o.dim;
  spec.problem_options.lambda = o.lambda;
  spec.problem_options.mu = o.mu;
  spec.igs.clear();
  for (const auto& tag : o.igs) spec.igs.push_back(parse_initial_guess(tag));
  spec.variants.clear();
  for (const auto& v : o.variants) spec.variants.push_back(parse_method_variant(v));
  spec.cfg.epsilon = o.eps;
  spec.cfg.max_iter = o.max_iter;
  spec.cfg.model_variant = parse_model_variant(o.model);
  spec.cfg.step_variant = parse_step_variant(o.step);
  spec.cfg.kkt_coupling = parse_kkt_coupling(o.kkt);
  spec.cfg.newton = parse_newton_mode(o.newton);
  spec.cfg.seed = o.seed.value_or(env_seed());
  spec.cfg.init_spread = o.spread;
  if (o.safeguard) spec.safeguard = parse_safeguard(*o.safeguard);
  spec.repetitions = o.repetitions;
  spec.jobs = o.jobs;
  spec.format = parse_output_format(o.format);
  spec.out_path = o.out;
  spec.validate();
  return spec;
}

inline nlohmann::ordered_json spec_meta(std::string_view command, const BenchSpec& spec) {
  nlohmann::ordered_json m;
  m["command"] = command;
  m["problems"] = spec.problems;
  std::vector<std::string> igs;
  for (auto ig : spec.igs) igs.emplace_back(to_string(ig));
  m["igs"] = igs;
  m["dim"] = spec.problem_options.dim ? nlohmann::ordered_json(*spec.problem_options.dim) : nullptr;
  m["lambda"] = spec.problem_options.lambda;
  m["mu"] = spec.problem_options.mu;
  m["repetitions"] = spec.repetitions;
  m["safeguard_override"] =
      spec.safeguard ? nlohmann::ordered_json(to_string(*spec.safeguard)) : nullptr;
  m["config"] = config_json(spec.cfg);
  return m;
}

/// Writes the payload to --out (plus a wall-time sidecar) or to `out`.
inline int emit(const Table& table, const nlohmann::ordered_json& meta, OutputFormat format,
                const std::string& path, const std::vector<double>& wall_times, std::ostream& out,
                std::ostream& err) {
  const std::string payload = format == OutputFormat::csv ? to_csv(table) : to_json(table, meta);
  if (path.empty()) {
    out << payload;
    return exit_code::ok;
  }
  if (!write_file(path, payload)) {
    err << fmt::format("error: cannot write {}\n", path);
    return exit_code::io_failure;
  }
  nlohmann::ordered_json side;
  side["meta"] = meta;
  side["wall_time"] = wall_times;
  if (!write_file(path + ".meta.json", side.dump(2) + "\n")) {
    err << fmt::format("error: cannot write {}.meta.json\n", path);
    return exit_code::io_failure;
  }
  return exit_code::ok;
}

inline void print_summary(const Table& t, std::ostream& out) {
  for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "  " : "") << t.columns[i];
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << "  ";
      if (const double* v = std::get_if<double>(&row[i])) {
        out << format_short(*v);
      } else if (std::holds_alternative<std::monostate>(row[i])) {
        out << '-';
      } else {
        out << csv_field(row[i]);
      }
    }
    out << '\n';
  }
}

inline int check_problems(const std::vector<std::string>& names, std::ostream& err) {
  for (const auto& n : names) {
    if (!is_known_problem(n)) {
      err << fmt::format("error: unknown problem '{}'\n", n);
      return exit_code::usage;
    }
  }
  return exit_code::ok;
}

inline std::vector<double> wall_times(const std::vector<CellResult>& results) {
  std::vector<double> w;
  for (const auto& r : results) w.push_back(r.report.wall_time);
  return w;
}

}  // namespace detail

/// Entry point of the benchmark CLI; returns the process exit status.
inline int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Model-based Newton benchmark harness"};
  app.require_subcommand(1);

  detail::CommonOptions run_opts, table_opts, probe_opts, sweep_opts;
  std::vector<long> checkpoints{200, 300, 400, 500};
  std::vector<double> radii;
  std::optional<int> probe_updates;
  std::vector<double> mus{1e-1, 1e-2, 1e-3};

  auto* run_cmd = app.add_subcommand("run", "run solver x problem x initial-guess grids");
  detail::add_common(run_cmd, run_opts, true);

  auto* table_cmd = app.add_subcommand("residual-table", "residual norms at fixed checkpoints");
  detail::add_common(table_cmd, table_opts, true);
  table_cmd->add_option("--checkpoints", checkpoints, "ascending iteration checkpoints")
      ->delimiter(',');

  auto* probe_cmd = app.add_subcommand("probe", "gradient/Hessian error order probe");
  detail::add_common(probe_cmd, probe_opts, true);
  probe_cmd->add_option("--radii", radii, "strictly decreasing radii")->delimiter(',')->required();
  probe_cmd->add_option("--updates", probe_updates, "model updates per radius (default: dim)");

  auto* sweep_cmd = app.add_subcommand("mu-sweep", "P4-relaxed solutions across mu");
  detail::add_common(sweep_cmd, sweep_opts, false);
  sweep_cmd->add_option("--mus", mus, "strictly descending mu values")->delimiter(',');
  sweep_cmd->add_option("--lambda", sweep_opts.lambda, "penalty weight");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_code::ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::usage;
  }

  try {
    if (*run_cmd) {
      if (int rc = detail::check_problems(run_opts.problems, err)) return rc;
      const BenchSpec spec = detail::build_spec(run_opts);
      const auto results = run_cells(spec);
      const Table t = run_table(results);
      const int rc = detail::emit(t, detail::spec_meta("run", spec), spec.format, spec.out_path,
                                  detail::wall_times(results), out, err);
      if (rc) return rc;
      if (!spec.out_path.empty()) detail::print_summary(t, out);
      for (const auto& r : results) {
        if (cell_failed(r)) return exit_code::failed_cells;
      }
      return exit_code::ok;
    }
    if (*table_cmd) {
      if (int rc = detail::check_problems(table_opts.problems, err)) return rc;
      for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        if (checkpoints[i] < 0 || (i > 0 && checkpoints[i] <= checkpoints[i - 1])) {
          err << "error: checkpoints must be non-negative and ascending\n";
          return exit_code::usage;
        }
      }
      const BenchSpec spec = detail::build_spec(table_opts);
      const auto results = run_cells(spec);
      const Table t = residual_table(results, checkpoints);
      auto meta = detail::spec_meta("residual-table", spec);
      meta["checkpoints"] = checkpoints;
      const int rc = detail::emit(t, meta, spec.format, spec.out_path,
                                  detail::wall_times(results), out, err);
      if (rc) return rc;
      if (!spec.out_path.empty()) detail::print_summary(t, out);
      for (const auto& r : results) {
        if (cell_failed(r)) return exit_code::failed_cells;
      }
      return exit_code::ok;
    }
    if (*probe_cmd) {
      if (int rc = detail::check_problems(probe_opts.problems, err)) return rc;
      if (probe_opts.problems.size() != 1) {
        err << "error: probe takes exactly one problem\n";
        return exit_code::usage;
      }
      if (radii.empty()) {
        err << "error: radii list is empty\n";
        return exit_code::usage;
      }
      const BenchSpec spec = detail::build_spec(probe_opts);
      const Problem p = make_problem(spec.problems.front(), spec.problem_options);
      if (!p.has_derivatives()) {
        err << fmt::format("error: {} has no analytic derivatives\n", p.name);
        return exit_code::usage;
      }
      ProbeOptions popts;
      popts.updates = probe_updates;
      const Point center = initial_guess(spec.igs.front(), p.dim);
      const ProbeReport rep = approximation_scaling_probe(p, center, radii, spec.cfg, popts);
      const Table t = probe_table(rep);
      auto meta = detail::spec_meta("probe", spec);
      auto slope_json = [](double s) {
        return std::isnan(s) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(s);
      };
      meta["grad_slope"] = slope_json(rep.grad_slope);
      meta["hess_slope"] = slope_json(rep.hess_slope);
      meta["grad_floor"] = rep.grad_floor;
      meta["hess_floor"] = rep.hess_floor;
      meta["updates"] = popts.updates.value_or(p.dim);
      const int rc = detail::emit(t, meta, spec.format, spec.out_path, {}, out, err);
      if (rc) return rc;
      if (!spec.out_path.empty()) detail::print_summary(t, out);
      if (spec.out_path.empty() && spec.format == OutputFormat::json) return exit_code::ok;
      if (rep.floor_detected()) {
        out << "floor-detected: model errors are at rounding level, slopes undefined\n";
      } else {
        out << fmt::format("grad_slope {}  hess_slope {}{}{}\n", format_short(rep.grad_slope),
                           format_short(rep.hess_slope), rep.grad_floor ? "  (gradient floor)" : "",
                           rep.hess_floor ? "  (Hessian floor)" : "");
      }
      return exit_code::ok;
    }
    if (*sweep_cmd) {
      for (std::size_t i = 0; i < mus.size(); ++i) {
        if (!(mus[i] > 0.0) || (i > 0 && !(mus[i] < mus[i - 1]))) {
          err << "error: mu values must be positive and strictly descending\n";
          return exit_code::usage;
        }
      }
      if (mus.empty()) {
        err << "error: mu list is empty\n";
        return exit_code::usage;
      }
      sweep_opts.problems = {"p4-relaxed"};
      BenchSpec spec = detail::build_spec(sweep_opts);
      SolverConfig cfg = spec.cfg;
      cfg.safeguard = spec.safeguard.value_or(Safeguard::backtrack);
      const auto result = mu_sweep(mus, sweep_opts.lambda, spec.igs.front(), cfg, spec.jobs);
      const Table t = mu_sweep_table(result);
      auto meta = detail::spec_meta("mu-sweep", spec);
      meta["config"] = config_json(cfg);
      meta["mus"] = mus;
      meta["monotone"] = result.monotone;
      std::vector<double> walls;
      for (const auto& r : result.rows) walls.push_back(r.report.wall_time);
      const int rc = detail::emit(t, meta, spec.format, spec.out_path, walls, out, err);
      if (rc) return rc;
      if (!spec.out_path.empty()) detail::print_summary(t, out);
      if (!result.monotone) {
        err << "assertion failed: ||x*||_inf is not strictly decreasing across mu\n";
        return exit_code::assertion;
      }
      return exit_code::ok;
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::usage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::failed_cells;
  }
  return exit_code::usage;
}

}  // namespace qmnewt
