#pragma once

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "qmnewt/core_state.hpp"
#include "qmnewt/errors.hpp"

namespace qmnewt {

/// Right-hand sides of the two relaxed constraints on the newest step:
/// ½σᵀΔGσ = rho_check and σᵀΔg = eps_hat.
struct SimplifiedRhs {
  double rho_check = 0.0;
  double eps_hat = 0.0;
};

struct SimplifiedMultipliers {
  double eta = 0.0;
  double theta = 0.0;
};

inline constexpr double kNuMin = 1e-6;
inline constexpr double kNuMax = 1e6;

namespace detail {

inline void require_prev_model(const ModelState& s) {
  const auto n = s.dim();
  const auto& m = s.prev_model;
  if (m.g.size() != n || m.G.rows() != n || m.G.cols() != n) {
    throw ShapeError(fmt::format("previous model has dimension {} but window points have {}",
                                 m.g.size(), n));
  }
}

/// Newest step σ_k, rejected when ‖σ_k‖ ≤ 1e−12·max(1, ‖x_k‖).
inline Vector newest_step(const ModelState& s) {
  const int n = s.steps();
  Vector step = sigma(s, n);
  if (!(step.norm() > 1e-12 * std::max(1.0, s.newest().norm()))) {
    throw DegenerateGeometry(fmt::format("newest step has length {:.3e}", step.norm()), n);
  }
  return step;
}

}  // namespace detail

inline SimplifiedRhs simplified_rhs(const ModelState& s) {
  require_fvals(s);
  detail::require_prev_model(s);
  const int n = s.steps();
  const Vector step = sigma(s, n);
  const double df = delta_f(s, n);
  return {-df - 0.5 * step.dot(s.prev_model.G * step), -step.dot(s.prev_model.g)};
}

/**
 * Lagrange multipliers of the relaxed problem:
 * η = −ν(4Δf + 2σᵀG'σ)/‖σ‖⁴ and θ = −σᵀg'/‖σ‖², with (g', G') the previous
 * model and σ, Δf the newest step.
 */
inline SimplifiedMultipliers simplified_multipliers(const ModelState& s) {
  require_fvals(s);
  detail::require_prev_model(s);
  const int n = s.steps();
  const Vector step = detail::newest_step(s);
  const double ss = step.squaredNorm();
  const double df = delta_f(s, n);
  const double curvature = step.dot(s.prev_model.G * step);
  return {-s.model.nu * (4.0 * df + 2.0 * curvature) / (ss * ss),
          -step.dot(s.prev_model.g) / ss};
}

/**
 * Closed-form least-norm update under the two relaxed constraints:
 * Δg = −(σᵀg')σ/‖σ‖² and ΔG = −(2Δf + σᵀG'σ)σσᵀ/‖σ‖⁴.
 */
inline ModelUpdate simplified_update(const ModelState& s) {
  require_fvals(s);
  detail::require_prev_model(s);
  const int n = s.steps();
  const Vector step = detail::newest_step(s);
  const double ss = step.squaredNorm();
  const double df = delta_f(s, n);
  const double curvature = step.dot(s.prev_model.G * step);
  ModelUpdate u;
  u.delta_g = (-step.dot(s.prev_model.g) / ss) * step;
  const Matrix outer = step * step.transpose();
  u.delta_G = (-(2.0 * df + curvature) / (ss * ss)) * outer;
  return u;
}

/**
 * Three-branch balance rule: 1.1ν when ‖Δg‖² ≥ 1.1‖ΔG‖²_F, ν when
 * ‖Δg‖² ≥ 0.9‖ΔG‖²_F, 0.9ν otherwise.
 */
inline double update_nu(double nu, const Vector& delta_g, const Matrix& delta_G) {
  if (!(nu > 0.0)) throw ConfigError("update_nu: nu must be positive");
  const double a = delta_g.squaredNorm();
  const double b = delta_G.squaredNorm();
  if (a >= 1.1 * b) return 1.1 * nu;
  if (a >= 0.9 * b) return nu;
  return 0.9 * nu;
}

inline double clamp_nu(double nu) { return std::clamp(nu, kNuMin, kNuMax); }

}  // namespace qmnewt
