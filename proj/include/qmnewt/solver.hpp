#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "qmnewt/config.hpp"
#include "qmnewt/core_state.hpp"
#include "qmnewt/diagnostics.hpp"
#include "qmnewt/linalg.hpp"
#include "qmnewt/model_update.hpp"
#include "qmnewt/problems.hpp"

namespace qmnewt {

enum class RunStatus { converged, max_iter, degenerate_geometry, numerical_failure };

inline std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::converged: return "converged";
    case RunStatus::max_iter: return "max_iter";
    case RunStatus::degenerate_geometry: return "degenerate_geometry";
    case RunStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

struct IterationRecord {
  long k = 0;
  double f = 0.0;          ///< f(x_k)
  double f_next = 0.0;     ///< f at the point pushed this iteration
  double grad_norm = 0.0;  ///< ‖g‖₂ of the updated model
  double step_norm = 0.0;  ///< ‖x_{k+1} − x_k‖₂
  double nu = 1.0;
  double e1_inf = 0.0;
  double e2_inf = 0.0;
  double lambda_used = 0.0;
  int backtracks = 0;
  /// f did not increase (always true in pure mode).
  bool accepted = true;
  /// A point had to be re-drawn because of degenerate geometry.
  bool resampled = false;
  double relaxed_residual = 0.0;
  ResidualRecord residuals;
};

struct RunReport {
  std::vector<IterationRecord> iterations;
  RunStatus status = RunStatus::max_iter;
  /// x_k at convergence, otherwise the lowest-f point visited.
  Point x_star;
  double f_star = 0.0;
  Point x_last;
  double f_last = 0.0;
  double wall_time = 0.0;
  std::string message;

  double final_grad_norm() const {
    return iterations.empty() ? std::numeric_limits<double>::quiet_NaN()
                              : iterations.back().grad_norm;
  }
};

/// Model state plus the inverse-Hessian approximation used by SR1/BFGS steps.
struct SolverState {
  ModelState model;
  Matrix inverse_approx;
  long qn_steps = 0;
};

namespace detail {

inline Vector random_unit(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> normal;
  Vector u(n);
  do {
    for (Eigen::Index i = 0; i < n; ++i) u(i) = normal(rng);
  } while (u.norm() == 0.0);
  return u.normalized();
}

/// Reflects coordinates that leave the box back inside, then clamps.
inline Vector reflect_into(const Box& box, Vector x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x(i) < box.lower(i)) x(i) = 2.0 * box.lower(i) - x(i);
    if (x(i) > box.upper(i)) x(i) = 2.0 * box.upper(i) - x(i);
  }
  return box.project(x);
}

inline std::mt19937_64 iteration_rng(std::uint64_t seed, long k, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(salt)};
  return std::mt19937_64(seq);
}

/// Draws x_k + spread·u (box-reflected) until f is finite, at most 11 draws.
inline std::pair<Point, double> sample_near(const Problem& problem, const Point& center,
                                            double spread, std::mt19937_64& rng) {
  for (int attempt = 0; attempt <= 10; ++attempt) {
    Point p = center + spread * random_unit(rng, center.size());
    if (problem.box) p = reflect_into(*problem.box, p);
    const double f = problem(p);
    if (std::isfinite(f)) return {p, f};
  }
  throw InitializationError(fmt::format("{}: no finite value near the given point", problem.name));
}

}  // namespace detail

/**
 * Builds the initial window {x0 + spread·u_i}, i = 1..n, followed by x0, with
 * G = I, ν = 1 and g the minimum-norm simplex gradient at x0. The model is
 * then transported to window[n−1] so that it serves as the previous model of
 * the first update.
 */
inline ModelState initialize(const Problem& problem, Point x0, const SolverConfig& cfg) {
  cfg.validate();
  if (x0.size() != problem.dim) {
    throw ShapeError(fmt::format("{} has dimension {}, initial point {}", problem.name, problem.dim,
                                 x0.size()));
  }
  if (problem.box) x0 = problem.box->project(x0);
  const double f0 = x0.allFinite() ? problem(x0) : std::numeric_limits<double>::quiet_NaN();
  if (!std::isfinite(f0)) {
    throw InitializationError(fmt::format("{}: objective is not finite at x0", problem.name));
  }
  const int n = problem.dim;
  const double spread = cfg.spread_for(x0);
  std::mt19937_64 rng(cfg.seed);

  ModelState s;
  for (int i = 0; i < n; ++i) {
    auto [p, f] = detail::sample_near(problem, x0, spread, rng);
    s.window.push_back(std::move(p));
    s.fvals.push_back(f);
  }
  s.window.push_back(x0);
  s.fvals.push_back(f0);

  s.model.G = Matrix::Identity(n, n);
  s.model.nu = 1.0;
  s.model.g = simplex_gradient(s) + s.model.G * (s.second_newest() - s.newest());
  s.prev_model = s.model;
  s.iter_index = 0;
  return s;
}

inline SolverState initial_solver_state(const Problem& problem, const Point& x0,
                                        const SolverConfig& cfg) {
  SolverState st;
  st.model = initialize(problem, x0, cfg);
  st.inverse_approx = Matrix::Identity(problem.dim, problem.dim);
  return st;
}

inline constexpr int kMaxBacktracks = 30;
inline constexpr double kMinRelativeStep = 1.4901161193847656e-08;  // √ε

struct StepOutcome {
  SolverState state;
  IterationRecord record;
  bool converged = false;
};

/**
 * One iteration: model update, stopping test on the updated ‖g‖, step
 * x_{k+1} = x_k − t·d with d from the configured step variant, optional
 * halving of t while f increases, then push_point. When halving finds no
 * decrease, or the step vanishes, a point at the initial spread around x_k is
 * drawn instead.
 */
inline StepOutcome step(SolverState st, const Problem& problem, const SolverConfig& cfg) {
  IterationRecord rec;
  rec.k = st.model.iter_index;
  const double spread = cfg.spread_for(st.model.newest());
  auto rng = detail::iteration_rng(cfg.seed, rec.k, 0x5eed);

  std::optional<UpdateOutcome> upd;
  for (int attempt = 0; !upd; ++attempt) {
    try {
      upd = advance_model(st.model, cfg);
    } catch (const DegenerateGeometry& e) {
      const int pos = e.position() - 1;
      if (attempt >= 10 || pos < 0 || pos >= st.model.steps()) throw;
      auto [p, f] = detail::sample_near(problem, st.model.newest(), spread, rng);
      st.model.window[pos] = std::move(p);
      st.model.fvals[pos] = f;
      rec.resampled = true;
    }
  }
  const ModelUpdate delta = upd->update;
  ModelState ms = std::move(upd->state);
  rec.relaxed_residual = upd->relaxed_residual;
  rec.residuals = constraint_residuals(ms, delta.delta_g, delta.delta_G);
  rec.e1_inf = rec.residuals.e1_inf;
  rec.e2_inf = rec.residuals.e2_inf;
  rec.grad_norm = ms.model.g.norm();
  rec.nu = ms.model.nu;
  rec.f = ms.fvals.back();
  rec.f_next = rec.f;

  StepOutcome out;
  if (rec.grad_norm < cfg.epsilon) {
    st.model = std::move(ms);
    out.state = std::move(st);
    out.record = std::move(rec);
    out.converged = true;
    return out;
  }

  const Point xk = ms.newest();
  const double fk = ms.fvals.back();
  Vector d;
  if (cfg.step_variant == StepVariant::newton_direct) {
    if (cfg.newton == NewtonMode::damped) {
      auto ds = solve_damped(ms.model.G, ms.model.g, default_damping(ms.model.G));
      d = std::move(ds.step);
      rec.lambda_used = ds.lambda_used;
    } else {
      d = solve_pure(ms.model.G, ms.model.g);
    }
  } else {
    if (st.qn_steps > 0) {
      try {
        st.inverse_approx = cfg.step_variant == StepVariant::sr1
                                ? sr1_inverse_update(st.inverse_approx, sigma(ms, ms.steps()),
                                                     delta.delta_g)
                                : bfgs_inverse_update(st.inverse_approx, sigma(ms, ms.steps()),
                                                      delta.delta_g);
      } catch (const UpdateRejected&) {
        // keep the previous inverse approximation
      }
    }
    ++st.qn_steps;
    d = st.inverse_approx * ms.model.g;
  }
  if (!d.allFinite()) {
    throw NumericalFailure("step direction is not finite", std::numeric_limits<double>::infinity());
  }

  auto trial_at = [&](double t) {
    Point x = xk - t * d;
    if (problem.box) x = problem.box->project(x);
    return x;
  };
  double t = 1.0;
  Point x_next = trial_at(t);
  double f_next = problem(x_next);
  bool exhausted = false;
  if (cfg.safeguard == Safeguard::backtrack) {
    while ((!std::isfinite(f_next) || f_next > fk) && rec.backtracks < kMaxBacktracks) {
      t *= 0.5;
      ++rec.backtracks;
      x_next = trial_at(t);
      f_next = problem(x_next);
    }
    exhausted = !std::isfinite(f_next) || f_next > fk;
  }
  if (!exhausted && !std::isfinite(f_next)) {
    throw NumericalFailure(fmt::format("objective not finite at trial point (k = {})", rec.k),
                           std::numeric_limits<double>::infinity());
  }
  // Below √ε relative, Δf along σ_k is rounding noise and ΔG ∝ Δf/‖σ_k‖² blows up.
  if (exhausted || (x_next - xk).norm() <= kMinRelativeStep * std::max(1.0, xk.norm())) {
    auto [p, f] = detail::sample_near(problem, xk, spread, rng);
    x_next = std::move(p);
    f_next = f;
    rec.resampled = true;
  }
  rec.accepted = cfg.safeguard == Safeguard::pure || f_next <= fk;
  rec.step_norm = (x_next - xk).norm();
  rec.f_next = f_next;

  st.model = push_point(std::move(ms), x_next, f_next);
  out.state = std::move(st);
  out.record = std::move(rec);
  return out;
}

/// Iterates `step` until convergence, max_iter, or an unrecoverable error.
inline RunReport run(const Problem& problem, const Point& x0, const SolverConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  RunReport report;
  auto finish = [&]() {
    report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
  };

  SolverState st = initial_solver_state(problem, x0, cfg);
  auto track_best = [&](const Point& x, double f) {
    if (report.x_star.size() == 0 || f < report.f_star) {
      report.x_star = x;
      report.f_star = f;
    }
  };
  for (std::size_t i = 0; i < st.model.window.size(); ++i) {
    track_best(st.model.window[i], st.model.fvals[i]);
  }
  report.x_last = st.model.newest();
  report.f_last = st.model.fvals.back();

  report.status = RunStatus::max_iter;
  for (int it = 0; it < cfg.max_iter; ++it) {
    try {
      StepOutcome out = step(std::move(st), problem, cfg);
      st = std::move(out.state);
      report.iterations.push_back(std::move(out.record));
      report.x_last = st.model.newest();
      report.f_last = st.model.fvals.back();
      if (out.converged) {
        report.status = RunStatus::converged;
        report.x_star = report.x_last;
        report.f_star = report.f_last;
        return finish();
      }
      track_best(report.x_last, report.f_last);
    } catch (const DegenerateGeometry& e) {
      report.status = RunStatus::degenerate_geometry;
      report.message = e.what();
      return finish();
    } catch (const NumericalFailure& e) {
      report.status = RunStatus::numerical_failure;
      report.message = e.what();
      return finish();
    }
  }
  return finish();
}

}  // namespace qmnewt
