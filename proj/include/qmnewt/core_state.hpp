#pragma once

#include <cmath>
#include <algorithm>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "qmnewt/errors.hpp"

namespace qmnewt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Point = Eigen::VectorXd;

inline bool all_finite(const Vector& v) { return v.allFinite(); }

/// ‖A − Aᵀ‖_F / max(1, ‖A‖_F).
inline double relative_asymmetry(const Matrix& A) {
  return (A - A.transpose()).norm() / std::max(1.0, A.norm());
}

inline Matrix symmetrized(const Matrix& A) { return 0.5 * (A + A.transpose()); }

/**
 * Quadratic surrogate Q(x) = c + gᵀ(x − x_k) + ½(x − x_k)ᵀG(x − x_k) anchored at
 * the newest model point x_k. The constant c is never needed.
 */
struct QuadraticModel {
  Vector g;        ///< model gradient at the anchor point
  Matrix G;        ///< symmetric model Hessian
  double nu = 1.0; ///< gradient/Hessian balance weight, > 0

  static QuadraticModel identity(Eigen::Index n) {
    return {Vector::Zero(n), Matrix::Identity(n, n), 1.0};
  }
};

/// Additive change (Δg, ΔG) applied to a QuadraticModel.
struct ModelUpdate {
  Vector delta_g;
  Matrix delta_G;
};

/**
 * Sliding window of n+1 model points (oldest first) with cached objective
 * values and the current and previous quadratic models.
 *
 * Window position j ∈ [0, n] corresponds to iterate x_{k−n+j}; position n is
 * the newest point x_k. Step j ∈ [1, n] is σ = window[j] − window[j−1].
 *
 * Between iterations `model` is anchored at window[n−1], the point the last
 * Newton step started from. During an update `prev_model` holds that model
 * (anchored at x_{k−1}) and the new `model` is anchored at x_k.
 */
struct ModelState {
  std::vector<Point> window;
  std::vector<double> fvals;
  QuadraticModel model;
  QuadraticModel prev_model;
  long iter_index = 0;

  /// Number of steps n (window holds n+1 points).
  int steps() const { return static_cast<int>(window.size()) - 1; }
  Eigen::Index dim() const { return window.empty() ? 0 : window.front().size(); }
  const Point& newest() const { return window.back(); }
  const Point& second_newest() const { return window[window.size() - 2]; }
};

inline void require_window(const ModelState& s) {
  if (s.window.size() < 2) {
    throw StateError("model window needs at least two points");
  }
}

inline void require_fvals(const ModelState& s) {
  if (s.fvals.size() != s.window.size()) {
    throw StateError(fmt::format("cached f-values ({}) do not match window size ({})",
                                 s.fvals.size(), s.window.size()));
  }
}

/// σ_j = x_j − x_{j−1} for window position j ∈ [1, n].
inline Vector sigma(const ModelState& s, int j) {
  require_window(s);
  if (j < 1 || j > s.steps()) {
    throw RangeError(fmt::format("step position {} outside [1, {}]", j, s.steps()));
  }
  return s.window[j] - s.window[j - 1];
}

/// τ_k − τ_j = x_k − x_j for window position j ∈ [0, n]. The base point of τ
/// cancels, so it is never stored.
inline Vector tau_gap(const ModelState& s, int j) {
  require_window(s);
  if (j < 0 || j > s.steps()) {
    throw RangeError(fmt::format("point position {} outside [0, {}]", j, s.steps()));
  }
  return s.newest() - s.window[j];
}

/// Δf_j = f(x_j) − f(x_{j−1}).
inline double delta_f(const ModelState& s, int j) {
  require_fvals(s);
  if (j < 1 || j > s.steps()) {
    throw RangeError(fmt::format("step position {} outside [1, {}]", j, s.steps()));
  }
  return s.fvals[j] - s.fvals[j - 1];
}

/// Model gradient at x, transported from the anchor: g + G(x − anchor).
inline Vector model_gradient_at(const QuadraticModel& m, const Point& anchor, const Point& x) {
  if (anchor.size() != x.size() || m.g.size() != x.size() || m.G.rows() != x.size() ||
      m.G.cols() != x.size()) {
    throw ShapeError(fmt::format("model of dimension {} evaluated at points of dimension {}/{}",
                                 m.g.size(), anchor.size(), x.size()));
  }
  return m.g + m.G * (x - anchor);
}

/// Drops the oldest point, appends (x_new, f_new) and advances the iteration
/// counter.
inline ModelState push_point(ModelState s, const Point& x_new, double f_new) {
  if (!x_new.allFinite() || !std::isfinite(f_new)) {
    throw EvaluationError("push_point: non-finite point or function value");
  }
  if (!s.window.empty() && x_new.size() != s.dim()) {
    throw ShapeError("push_point: dimension mismatch");
  }
  require_fvals(s);
  if (!s.window.empty()) {
    s.window.erase(s.window.begin());
    s.fvals.erase(s.fvals.begin());
  }
  s.window.push_back(x_new);
  s.fvals.push_back(f_new);
  ++s.iter_index;
  return s;
}

}  // namespace qmnewt
