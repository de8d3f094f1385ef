#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "qmnewt/config.hpp"
#include "qmnewt/core_state.hpp"
#include "qmnewt/model_full.hpp"
#include "qmnewt/model_simplified.hpp"

namespace qmnewt {

/// Result of one model update; `state` carries the new model (anchored at the
/// newest point) and `prev_model` (anchored at the second newest).
struct UpdateOutcome {
  ModelState state;
  ModelUpdate update;
  /// max of the relative residuals of the two relaxed constraints.
  double relaxed_residual = 0.0;
  std::optional<FullModelResult> full;
};

/// Relative residuals of ½σᵀΔGσ = ρ̌ and σᵀΔg = ε̂ for the newest step.
inline double relaxed_constraint_residual(const ModelState& s, const ModelUpdate& u) {
  const SimplifiedRhs rhs = simplified_rhs(s);
  const Vector step = sigma(s, s.steps());
  const double r1 = std::abs(0.5 * step.dot(u.delta_G * step) - rhs.rho_check) /
                    std::max(1.0, std::abs(rhs.rho_check));
  const double r2 =
      std::abs(step.dot(u.delta_g) - rhs.eps_hat) / std::max(1.0, std::abs(rhs.eps_hat));
  return std::max(r1, r2);
}

/**
 * Moves `model` to `prev_model`, computes (Δg, ΔG) with the configured variant
 * and forms g ← g' + Δg, G ← sym(G' + ΔG) and the adapted, clamped ν.
 */
inline UpdateOutcome advance_model(ModelState s, const SolverConfig& cfg) {
  s.prev_model = s.model;
  UpdateOutcome out;
  if (cfg.model_variant == ModelVariant::simplified) {
    out.update = simplified_update(s);
  } else {
    out.full = full_update(s, cfg.kkt_coupling, cfg.gmres_tol, cfg.gmres_max_iter);
    out.update = out.full->update.update;
  }
  const auto& prev = s.prev_model;
  s.model.g = prev.g + out.update.delta_g;
  s.model.G = symmetrized(prev.G + out.update.delta_G);
  s.model.nu = clamp_nu(update_nu(prev.nu, out.update.delta_g, out.update.delta_G));
  out.relaxed_residual = relaxed_constraint_residual(s, out.update);
  out.state = std::move(s);
  return out;
}

/// Minimum-norm solution of σ_jᵀg = Δf_j over the window steps.
inline Vector simplex_gradient(const ModelState& s) {
  require_window(s);
  require_fvals(s);
  const int n = s.steps();
  Matrix rows(n, s.dim());
  Vector rhs(n);
  for (int j = 1; j <= n; ++j) {
    rows.row(j - 1) = sigma(s, j).transpose();
    rhs(j - 1) = delta_f(s, j);
  }
  return rows.completeOrthogonalDecomposition().solve(rhs);
}

/**
 * Minimum-norm gradient at the newest point given a fixed Hessian G:
 * solves (x_j − x_k)ᵀg = f_j − f_k − ½(x_j − x_k)ᵀG(x_j − x_k). Exact for
 * quadratics whose Hessian is G.
 */
inline Vector curvature_aware_gradient(const ModelState& s, const Matrix& G) {
  require_window(s);
  require_fvals(s);
  const int n = s.steps();
  Matrix rows(n, s.dim());
  Vector rhs(n);
  for (int j = 0; j < n; ++j) {
    const Vector d = s.window[j] - s.newest();
    rows.row(j) = d.transpose();
    rhs(j) = s.fvals[j] - s.fvals.back() - 0.5 * d.dot(G * d);
  }
  return rows.completeOrthogonalDecomposition().solve(rhs);
}

}  // namespace qmnewt
