#pragma once

#include <algorithm>
#include <cmath>
#include <string_view>

#include <fmt/format.h>

#include "qmnewt/core_state.hpp"
#include "qmnewt/errors.hpp"
#include "qmnewt/linalg.hpp"
#include "qmnewt/model_simplified.hpp"

namespace qmnewt {

/// `printed`: diagonal H1/H2 blocks. `full`: the dense coupling of the exact
/// least-norm problem with symmetric ΔG.
enum class KktCoupling { printed, full };

inline std::string_view to_string(KktCoupling c) {
  return c == KktCoupling::printed ? "printed" : "full";
}

struct ConstraintData {
  Vector eps;
  Vector rho_hat;
};

/**
 * Block system [[upper_left, −2B], [−lower_left, 2D]] [η; θ] = rhs.
 *
 * With the printed coupling upper_left = diag(row sums of A) and
 * lower_left = diag(row sums of B). With the full coupling they are the dense
 * matrices A and C, and D carries the symmetrization cross term.
 */
struct KktSystem {
  Matrix upper_left;
  Matrix lower_left;
  Matrix B;
  Matrix D;
  Vector rhs;
  KktCoupling coupling = KktCoupling::printed;

  Eigen::Index steps() const { return B.rows(); }

  Matrix matrix() const {
    const Eigen::Index n = steps();
    Matrix K(2 * n, 2 * n);
    K << upper_left, -2.0 * B, -lower_left, 2.0 * D;
    return K;
  }
};

struct MultiplierSolution {
  Vector eta;
  Vector theta;
  GmresStatus gmres_status = GmresStatus::converged;
  bool used_fallback = false;
  double relative_residual = 0.0;
};

struct FullUpdate {
  ModelUpdate update;
  /// ‖ΔG − ΔGᵀ‖_F before symmetrization.
  double asymmetry = 0.0;
};

/// ε_j = σ_jᵀG'(x_k − x_j) − σ_jᵀg' for j = 1..n.
inline Vector compute_epsilon(const ModelState& s) {
  require_window(s);
  detail::require_prev_model(s);
  const int n = s.steps();
  const auto& prev = s.prev_model;
  Vector eps(n);
  for (int j = 1; j <= n; ++j) {
    const Vector step = sigma(s, j);
    eps(j - 1) = step.dot(prev.G * tau_gap(s, j)) - step.dot(prev.g);
  }
  return eps;
}

/**
 * ρ̂_j = 2σ_jᵀg'_{j−1} − 2σ_jᵀg' − 2Δf_j − σ_jᵀG'σ_j, where g'_{j−1} is the
 * previous model gradient transported from x_{k−1} to x_{j−1}.
 */
inline Vector compute_rho_hat(const ModelState& s) {
  require_window(s);
  require_fvals(s);
  detail::require_prev_model(s);
  const int n = s.steps();
  const auto& prev = s.prev_model;
  const Point& anchor = s.second_newest();
  Vector rho(n);
  for (int j = 1; j <= n; ++j) {
    const Vector step = sigma(s, j);
    const Vector g_before = model_gradient_at(prev, anchor, s.window[j - 1]);
    rho(j - 1) = 2.0 * step.dot(g_before) - 2.0 * step.dot(prev.g) - 2.0 * delta_f(s, j) -
                 step.dot(prev.G * step);
  }
  return rho;
}

inline ConstraintData compute_constraints(const ModelState& s) {
  return {compute_epsilon(s), compute_rho_hat(s)};
}

namespace detail {

inline void require_nondegenerate_steps(const Matrix& S) {
  const Eigen::VectorXd norms = S.colwise().norm().transpose();
  const double largest = norms.maxCoeff();
  for (Eigen::Index j = 0; j < norms.size(); ++j) {
    if (!(norms(j) > 0.0) || norms(j) <= 1e-12 * largest) {
      throw DegenerateGeometry(fmt::format("step {} has length {:.3e}", j + 1, norms(j)),
                               static_cast<int>(j + 1));
    }
  }
}

/// Steps as columns, S(:, j−1) = σ_j, and gaps W(:, j−1) = x_k − x_j.
inline std::pair<Matrix, Matrix> steps_and_gaps(const ModelState& s) {
  const int n = s.steps();
  Matrix S(s.dim(), n), W(s.dim(), n);
  for (int j = 1; j <= n; ++j) {
    S.col(j - 1) = sigma(s, j);
    W.col(j - 1) = tau_gap(s, j);
  }
  return {std::move(S), std::move(W)};
}

}  // namespace detail

/**
 * Assembles the multiplier system with weight ν = state.model.nu and
 * right-hand side [2νρ̂; 2νε]. With Gram matrix P = SᵀS:
 * A_ij = P_ij², B_ij = P_ij (w_jᵀσ_i), D_ij = νP_ij + P_ij (w_iᵀw_j) for the
 * printed coupling.
 */
inline KktSystem assemble_kkt(const ModelState& s, const Vector& eps, const Vector& rho_hat,
                              KktCoupling coupling = KktCoupling::printed) {
  require_window(s);
  const int n = s.steps();
  if (eps.size() != n || rho_hat.size() != n) {
    throw ShapeError(fmt::format("constraint data of length {}/{} for {} steps", eps.size(),
                                 rho_hat.size(), n));
  }
  const double nu = s.model.nu;
  if (!(nu > 0.0)) throw ConfigError("assemble_kkt: nu must be positive");
  const auto [S, W] = detail::steps_and_gaps(s);
  detail::require_nondegenerate_steps(S);

  const Matrix P = S.transpose() * S;   // σ_iᵀσ_j
  const Matrix SW = S.transpose() * W;  // σ_iᵀw_j
  const Matrix WW = W.transpose() * W;  // w_iᵀw_j
  const Matrix A = P.cwiseProduct(P);

  KktSystem k;
  k.coupling = coupling;
  k.B = P.cwiseProduct(SW);
  if (coupling == KktCoupling::printed) {
    k.upper_left = A.rowwise().sum().asDiagonal();
    k.lower_left = k.B.rowwise().sum().asDiagonal();
    k.D = nu * P + P.cwiseProduct(WW);
  } else {
    k.upper_left = A;
    k.lower_left = P.cwiseProduct(SW.transpose());  // P_ij (σ_jᵀw_i)
    k.D = nu * P + 0.5 * (P.cwiseProduct(WW) + SW.cwiseProduct(SW.transpose()));
  }
  k.rhs.resize(2 * n);
  k.rhs << 2.0 * nu * rho_hat, 2.0 * nu * eps;
  if (!k.matrix().allFinite() || !k.rhs.allFinite()) {
    throw NumericalFailure("multiplier system has non-finite entries",
                           std::numeric_limits<double>::quiet_NaN());
  }
  return k;
}

/// GMRES with restart min(2n, 30) by default, dense LU when it does not converge.
inline MultiplierSolution solve_multipliers(const KktSystem& k, double tol = 1e-10,
                                            int max_iter = 200) {
  if (!(tol > 0.0)) throw ConfigError("solve_multipliers: tol must be positive");
  const Eigen::Index n = k.steps();
  GmresOptions opts;
  opts.tol = tol;
  opts.max_iter = max_iter;
  opts.restart = static_cast<int>(std::min<Eigen::Index>(2 * n, 30));
  const auto solved = solve_with_fallback(k.matrix(), k.rhs, opts);
  MultiplierSolution m;
  m.eta = solved.x.head(n);
  m.theta = solved.x.tail(n);
  m.gmres_status = solved.gmres_status;
  m.used_fallback = solved.used_fallback;
  m.relative_residual = solved.relative_residual;
  return m;
}

/**
 * Δg = Σθ_jσ_j and ΔG = (Σ η_jσ_jσ_jᵀ − 2Σ θ_jσ_jw_jᵀ)/(2ν), symmetrized by
 * averaging with its transpose.
 */
inline FullUpdate apply_full_update(const ModelState& s, const MultiplierSolution& mult) {
  require_window(s);
  const int n = s.steps();
  if (mult.eta.size() != n || mult.theta.size() != n) {
    throw ShapeError(fmt::format("multipliers of length {}/{} for {} steps", mult.eta.size(),
                                 mult.theta.size(), n));
  }
  const double nu = s.model.nu;
  if (!(nu > 0.0)) throw ConfigError("apply_full_update: nu must be positive");
  const auto [S, W] = detail::steps_and_gaps(s);
  const Matrix raw = (S * mult.eta.asDiagonal() * S.transpose() -
                      2.0 * S * mult.theta.asDiagonal() * W.transpose()) /
                     (2.0 * nu);
  FullUpdate out;
  out.asymmetry = (raw - raw.transpose()).norm();
  out.update.delta_g = S * mult.theta;
  out.update.delta_G = symmetrized(raw);
  return out;
}

/// ½‖Δg‖² + (ν/2)‖ΔG‖²_F.
inline double phi_objective(const Vector& delta_g, const Matrix& delta_G, double nu) {
  if (!(nu > 0.0)) throw ConfigError("phi_objective: nu must be positive");
  return 0.5 * delta_g.squaredNorm() + 0.5 * nu * delta_G.squaredNorm();
}

struct FullModelResult {
  ConstraintData constraints;
  KktSystem system;
  MultiplierSolution multipliers;
  FullUpdate update;
};

inline FullModelResult full_update(const ModelState& s, KktCoupling coupling = KktCoupling::printed,
                                   double tol = 1e-10, int max_iter = 200) {
  FullModelResult r;
  r.constraints = compute_constraints(s);
  r.system = assemble_kkt(s, r.constraints.eps, r.constraints.rho_hat, coupling);
  r.multipliers = solve_multipliers(r.system, tol, max_iter);
  r.update = apply_full_update(s, r.multipliers);
  return r;
}

}  // namespace qmnewt
