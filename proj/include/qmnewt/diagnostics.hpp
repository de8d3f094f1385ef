#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "qmnewt/config.hpp"
#include "qmnewt/core_state.hpp"
#include "qmnewt/linalg.hpp"
#include "qmnewt/model_full.hpp"
#include "qmnewt/model_update.hpp"
#include "qmnewt/problems.hpp"

namespace qmnewt {

/// Residuals of the full constraint families over the older steps 1..n−1.
struct ResidualRecord {
  Vector e1;
  Vector e2;
  double e1_inf = 0.0;
  double e2_inf = 0.0;
  /// ‖σ_j‖ for the same steps.
  Vector sigma_norms;
};

namespace detail {

inline ResidualRecord finish_record(Vector e1, Vector e2, Vector norms) {
  ResidualRecord r;
  r.e1_inf = e1.size() ? e1.cwiseAbs().maxCoeff() : 0.0;
  r.e2_inf = e2.size() ? e2.cwiseAbs().maxCoeff() : 0.0;
  r.e1 = std::move(e1);
  r.e2 = std::move(e2);
  r.sigma_norms = std::move(norms);
  return r;
}

}  // namespace detail

/**
 * E1_j = σ_jᵀΔGσ_j − ρ̂_j and E2_j = σ_jᵀΔg − σ_jᵀΔG(x_k − x_j) − ε_j for
 * j = 1..n−1, evaluated from the definitions with `prev_model` as the model
 * before the update.
 */
inline ResidualRecord constraint_residuals(const ModelState& s, const Vector& delta_g,
                                           const Matrix& delta_G) {
  const int n = s.steps();
  if (delta_g.size() != s.dim() || delta_G.rows() != s.dim() || delta_G.cols() != s.dim()) {
    throw ShapeError("constraint_residuals: update dimension mismatch");
  }
  const Vector eps = compute_epsilon(s);
  const Vector rho = compute_rho_hat(s);
  Vector e1(n - 1), e2(n - 1), norms(n - 1);
  for (int j = 1; j < n; ++j) {
    const Vector step = sigma(s, j);
    e1(j - 1) = step.dot(delta_G * step) - rho(j - 1);
    e2(j - 1) = step.dot(delta_g) - step.dot(delta_G * tau_gap(s, j)) - eps(j - 1);
    norms(j - 1) = step.norm();
  }
  return detail::finish_record(std::move(e1), std::move(e2), std::move(norms));
}

/**
 * The same residuals for the closed-form relaxed update, written in expanded
 * form:
 *   E1_j = −c(σ_jᵀσ_k)²/‖σ_k‖⁴ − 2σ_jᵀ(g'_{j−1} − g') + 2Δf_j + σ_jᵀG'σ_j
 *   E2_j = σ_jᵀ(g' − (σ_kᵀg')σ_k/‖σ_k‖² − (ησ_kσ_kᵀ/(2ν) + G')Σ_{i>j}σ_i)
 * with c = 2Δf_k + σ_kᵀG'σ_k and η the relaxed multiplier.
 */
inline ResidualRecord expanded_relaxed_residuals(const ModelState& s) {
  const int n = s.steps();
  const auto& prev = s.prev_model;
  const Vector sk = sigma(s, n);
  const double sk2 = sk.squaredNorm();
  const double c = 2.0 * delta_f(s, n) + sk.dot(prev.G * sk);
  const double eta = simplified_multipliers(s).eta;
  const Matrix hess_term = eta * (sk * sk.transpose()) / (2.0 * s.model.nu) + prev.G;
  const Vector g_proj = prev.g - (sk.dot(prev.g) / sk2) * sk;
  Vector e1(n - 1), e2(n - 1), norms(n - 1);
  for (int j = 1; j < n; ++j) {
    const Vector sj = sigma(s, j);
    const Vector g_before = model_gradient_at(prev, s.second_newest(), s.window[j - 1]);
    const double overlap = sj.dot(sk);
    e1(j - 1) = -c * overlap * overlap / (sk2 * sk2) - 2.0 * sj.dot(g_before - prev.g) +
                2.0 * delta_f(s, j) + sj.dot(prev.G * sj);
    Vector later = Vector::Zero(s.dim());
    for (int i = j + 1; i <= n; ++i) later += sigma(s, i);
    e2(j - 1) = sj.dot(g_proj - hess_term * later);
    norms(j - 1) = sj.norm();
  }
  return detail::finish_record(std::move(e1), std::move(e2), std::move(norms));
}

/// Per-iteration max_j |E_j| / ‖σ_j‖ for both residual families.
struct DecayReport {
  std::vector<double> e1_ratio;
  std::vector<double> e2_ratio;

  /// Largest ratio over iterations [first, last] divided by the median there.
  double spread(std::size_t first, std::size_t last) const {
    std::vector<double> window;
    for (std::size_t i = first; i <= last && i < e1_ratio.size(); ++i) {
      window.push_back(std::max(e1_ratio[i], e2_ratio[i]));
    }
    if (window.empty()) return 0.0;
    std::vector<double> sorted = window;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    const double peak = sorted.back();
    if (peak == 0.0) return 0.0;
    return median > 0.0 ? peak / median : std::numeric_limits<double>::infinity();
  }

  /// No ratio in [first, last] exceeds `factor` times the median there.
  bool bounded(std::size_t first, std::size_t last, double factor = 10.0) const {
    return spread(first, last) <= factor;
  }
};

namespace detail {

inline double max_ratio(const Vector& e, const Vector& norms) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < e.size(); ++j) {
    const double num = std::abs(e(j));
    if (num == 0.0) continue;
    worst = std::max(worst, norms(j) > 0.0 ? num / norms(j)
                                           : std::numeric_limits<double>::infinity());
  }
  return worst;
}

}  // namespace detail

/// `sigma_norms[t]` holds ‖σ_j‖ for the residual entries of `trace[t]`.
inline DecayReport residual_decay_check(const std::vector<ResidualRecord>& trace,
                                        const std::vector<Vector>& sigma_norms) {
  if (trace.size() < 2) throw ConfigError("residual_decay_check needs at least two records");
  if (sigma_norms.size() != trace.size()) {
    throw ShapeError("residual_decay_check: one step-norm vector per record required");
  }
  DecayReport r;
  for (std::size_t t = 0; t < trace.size(); ++t) {
    if (sigma_norms[t].size() != trace[t].e1.size() || trace[t].e2.size() != trace[t].e1.size()) {
      throw ShapeError("residual_decay_check: residual and step-norm lengths differ");
    }
    r.e1_ratio.push_back(detail::max_ratio(trace[t].e1, sigma_norms[t]));
    r.e2_ratio.push_back(detail::max_ratio(trace[t].e2, sigma_norms[t]));
  }
  return r;
}

/// Uses the step norms stored in each record.
inline DecayReport residual_decay_check(const std::vector<ResidualRecord>& trace) {
  std::vector<Vector> norms;
  norms.reserve(trace.size());
  for (const auto& rec : trace) norms.push_back(rec.sigma_norms);
  return residual_decay_check(trace, norms);
}

struct ProbeSample {
  double radius = 0.0;
  double grad_error = 0.0;
  double hess_error = 0.0;
};

struct ProbeReport {
  std::vector<ProbeSample> samples;
  double grad_slope = std::numeric_limits<double>::quiet_NaN();
  double hess_slope = std::numeric_limits<double>::quiet_NaN();
  bool grad_floor = false;
  bool hess_floor = false;

  bool floor_detected() const { return grad_floor && hess_floor; }
};

struct ProbeOptions {
  /// Model updates applied after the initial fit; defaults to the dimension.
  std::optional<int> updates;
  /// Errors at or below this (relative to max(1, ‖exact‖)) count as the floor.
  double floor = 1e-9;
};

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t m = x.size();
  if (m < 2 || y.size() != m) throw ConfigError("loglog_slope needs two or more paired samples");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= m;
  my /= m;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

/**
 * Builds a model from points at radius δ around `center` for each radius,
 * applies a fixed number of model updates and measures the gradient and
 * Hessian error at the center. The sample geometry is drawn once from
 * cfg.seed and rescaled per radius.
 */
inline ProbeReport approximation_scaling_probe(const Problem& problem, const Point& center,
                                               const std::vector<double>& radii,
                                               const SolverConfig& cfg,
                                               const ProbeOptions& opts = {}) {
  if (!problem.has_derivatives()) {
    throw ConfigError(fmt::format("{} has no analytic derivatives", problem.name));
  }
  if (center.size() != problem.dim) throw ShapeError("probe center has the wrong dimension");
  if (radii.size() < 5) throw ConfigError("probe needs at least five radii");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0)) throw ConfigError("probe radii must be positive");
    if (i > 0 && !(radii[i] < radii[i - 1])) {
      throw ConfigError("probe radii must be strictly decreasing");
    }
  }
  const int n = problem.dim;
  const int updates = opts.updates.value_or(n);
  if (updates < 0) throw ConfigError("probe updates must be non-negative");

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> scale(0.3, 1.0);
  std::vector<Vector> dirs;
  bool ok = false;
  for (int attempt = 0; attempt <= 10 && !ok; ++attempt) {
    dirs.clear();
    for (int i = 0; i < n + 1 + updates; ++i) {
      Vector u(n);
      for (int c = 0; c < n; ++c) u(c) = normal(rng);
      dirs.push_back(u.normalized() * scale(rng));
    }
    Matrix S(n, n);
    for (int j = 1; j <= n; ++j) S.col(j - 1) = dirs[j] - dirs[j - 1];
    const Vector sv = S.jacobiSvd().singularValues();
    ok = sv(n - 1) > 1e-6 * sv(0);
    for (int i = n + 1; ok && i < n + 1 + updates; ++i) {
      ok = (dirs[i] - dirs[i - 1]).norm() > 1e-6;
    }
  }
  if (!ok) throw DegenerateGeometry("probe sample geometry is degenerate after resampling", 0);

  const Vector grad_exact = problem.analytic_grad(center);
  const Matrix hess_exact = problem.analytic_hess(center);
  ProbeReport report;
  for (double delta : radii) {
    ModelState s;
    for (int i = 0; i <= n; ++i) {
      s.window.push_back(center + delta * dirs[i]);
      s.fvals.push_back(problem(s.window.back()));
    }
    s.model.G = Matrix::Identity(n, n);
    s.model.nu = 1.0;
    s.model.g = curvature_aware_gradient(s, s.model.G) +
                s.model.G * (s.second_newest() - s.newest());
    s.prev_model = s.model;
    for (int j = 0; j < updates; ++j) {
      s = advance_model(std::move(s), cfg).state;
      const Point& next = dirs[n + 1 + j];
      const Point x = center + delta * next;
      s = push_point(std::move(s), x, problem(x));
    }
    const Vector g_center = model_gradient_at(s.model, s.second_newest(), center);
    report.samples.push_back(
        {delta, (g_center - grad_exact).norm(), spectral_norm(s.model.G - hess_exact)});
  }

  std::vector<double> r, ge, he;
  for (const auto& smp : report.samples) {
    r.push_back(smp.radius);
    ge.push_back(smp.grad_error);
    he.push_back(smp.hess_error);
  }
  const double gfloor = opts.floor * std::max(1.0, grad_exact.norm());
  const double hfloor = opts.floor * std::max(1.0, hess_exact.norm());
  report.grad_floor = *std::max_element(ge.begin(), ge.end()) <= gfloor;
  report.hess_floor = *std::max_element(he.begin(), he.end()) <= hfloor;
  auto positive = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double e) { return e > 0.0; });
  };
  if (!report.grad_floor && positive(ge)) report.grad_slope = loglog_slope(r, ge);
  if (!report.hess_floor && positive(he)) report.hess_slope = loglog_slope(r, he);
  return report;
}

}  // namespace qmnewt
