#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "qmnewt/config.hpp"
#include "qmnewt/linalg.hpp"
#include "qmnewt/problems.hpp"
#include "qmnewt/solver.hpp"

namespace qmnewt {

/// Central-difference gradient with h_i = rel·max(1, |x_i|).
inline Vector fd_gradient(const Problem& p, const Point& x, double rel = 1e-6) {
  Vector g(x.size());
  Point y = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = rel * std::max(1.0, std::abs(x(i)));
    y(i) = x(i) + h;
    const double fp = p(y);
    y(i) = x(i) - h;
    const double fm = p(y);
    y(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Symmetrized central differences of the FD gradient.
inline Matrix fd_hessian(const Problem& p, const Point& x, double rel = 1e-4) {
  const Eigen::Index n = x.size();
  Matrix H(n, n);
  Point y = x;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double h = rel * std::max(1.0, std::abs(x(j)));
    y(j) = x(j) + h;
    const Vector gp = fd_gradient(p, y);
    y(j) = x(j) - h;
    const Vector gm = fd_gradient(p, y);
    y(j) = x(j);
    H.col(j) = (gp - gm) / (2.0 * h);
  }
  return symmetrized(H);
}

/**
 * Finite-difference Newton baseline: central-difference gradient (step
 * 1e−6·max(1, |x_i|)), FD Hessian, damped solve and step halving while f
 * increases. Residual fields of the records stay zero.
 */
inline RunReport run_fd_newton(const Problem& problem, Point x0, const SolverConfig& cfg) {
  cfg.validate();
  if (x0.size() != problem.dim) throw ShapeError("fd-newton: initial point has the wrong dimension");
  const auto t0 = std::chrono::steady_clock::now();
  RunReport report;
  if (problem.box) x0 = problem.box->project(x0);
  Point x = x0;
  double f = problem(x);
  if (!std::isfinite(f)) throw InitializationError("fd-newton: objective not finite at x0");
  report.x_star = x;
  report.f_star = f;
  report.status = RunStatus::max_iter;
  for (int k = 0; k < cfg.max_iter; ++k) {
    IterationRecord rec;
    rec.k = k;
    rec.f = f;
    const Vector g = fd_gradient(problem, x);
    rec.grad_norm = g.norm();
    if (!g.allFinite()) {
      report.status = RunStatus::numerical_failure;
      report.message = "finite-difference gradient is not finite";
      break;
    }
    if (rec.grad_norm < cfg.epsilon) {
      rec.f_next = f;
      report.iterations.push_back(rec);
      report.status = RunStatus::converged;
      report.x_star = x;
      report.f_star = f;
      break;
    }
    try {
      const Matrix H = fd_hessian(problem, x);
      const auto ds = solve_damped(H, g, default_damping(H));
      rec.lambda_used = ds.lambda_used;
      double t = 1.0;
      Point xt = x - ds.step;
      if (problem.box) xt = problem.box->project(xt);
      double ft = problem(xt);
      while ((!std::isfinite(ft) || ft > f) && rec.backtracks < 30) {
        t *= 0.5;
        ++rec.backtracks;
        xt = x - t * ds.step;
        if (problem.box) xt = problem.box->project(xt);
        ft = problem(xt);
      }
      if (!std::isfinite(ft)) throw NumericalFailure("fd-newton: non-finite trial value", ft);
      rec.accepted = ft <= f;
      rec.step_norm = (xt - x).norm();
      rec.f_next = ft;
      x = xt;
      f = ft;
    } catch (const NumericalFailure& e) {
      report.iterations.push_back(rec);
      report.status = RunStatus::numerical_failure;
      report.message = e.what();
      break;
    }
    report.iterations.push_back(rec);
    if (f < report.f_star) {
      report.x_star = x;
      report.f_star = f;
    }
  }
  report.x_last = x;
  report.f_last = f;
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace qmnewt
