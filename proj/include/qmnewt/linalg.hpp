#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "qmnewt/core_state.hpp"
#include "qmnewt/errors.hpp"

namespace qmnewt {

enum class GmresStatus { converged, breakdown, stagnated, max_iter };

inline std::string_view to_string(GmresStatus s) {
  switch (s) {
    case GmresStatus::converged: return "converged";
    case GmresStatus::breakdown: return "breakdown";
    case GmresStatus::stagnated: return "stagnated";
    case GmresStatus::max_iter: return "max_iter";
  }
  return "unknown";
}

struct GmresOptions {
  double tol = 1e-10;
  int restart = 30;
  int max_iter = 200;
};

struct GmresResult {
  Vector x;
  GmresStatus status = GmresStatus::max_iter;
  double relative_residual = 0.0;
  int iterations = 0;
};

/**
 * Restarted GMRES with modified Gram-Schmidt Arnoldi and Givens rotations,
 * starting from x = 0.
 *
 * `apply` maps a vector to the operator applied to it. A restart cycle that
 * reduces the residual by less than 10x ends the solve as `stagnated`; a zero
 * Arnoldi norm that does not meet the tolerance is `breakdown`.
 */
template <class Op>
GmresResult gmres(Op&& apply, const Vector& b, GmresOptions opts = {}) {
  if (!(opts.tol > 0.0)) throw ConfigError("gmres: tol must be positive");
  if (opts.restart < 1 || opts.max_iter < 1) {
    throw ConfigError("gmres: restart and max_iter must be at least 1");
  }
  const Eigen::Index n = b.size();
  GmresResult out;
  out.x = Vector::Zero(n);
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    out.status = GmresStatus::converged;
    return out;
  }

  const int m = static_cast<int>(std::min<Eigen::Index>(opts.restart, std::max<Eigen::Index>(n, 1)));
  Matrix V(n, m + 1);
  Matrix H = Matrix::Zero(m + 1, m);
  Vector cs(m), sn(m), s(m + 1);

  Vector r = b;
  double rnorm = bnorm;
  int total = 0;
  while (true) {
    const double cycle_start = rnorm;
    V.col(0) = r / rnorm;
    s.setZero();
    s(0) = rnorm;
    H.setZero();
    int j = 0;
    bool broke_down = false;
    for (; j < m && total < opts.max_iter; ++j, ++total) {
      Vector w = apply(Vector(V.col(j)));
      if (w.size() != n) throw ShapeError("gmres: operator changed dimension");
      for (int i = 0; i <= j; ++i) {
        H(i, j) = V.col(i).dot(w);
        w -= H(i, j) * V.col(i);
      }
      H(j + 1, j) = w.norm();
      const bool happy = H(j + 1, j) <= 1e-14 * std::max(1.0, H.col(j).head(j + 1).norm());
      if (!happy) V.col(j + 1) = w / H(j + 1, j);

      for (int i = 0; i < j; ++i) {
        const double t = cs(i) * H(i, j) + sn(i) * H(i + 1, j);
        H(i + 1, j) = -sn(i) * H(i, j) + cs(i) * H(i + 1, j);
        H(i, j) = t;
      }
      const double denom = std::hypot(H(j, j), H(j + 1, j));
      cs(j) = denom == 0.0 ? 1.0 : H(j, j) / denom;
      sn(j) = denom == 0.0 ? 0.0 : H(j + 1, j) / denom;
      H(j, j) = denom;
      H(j + 1, j) = 0.0;
      s(j + 1) = -sn(j) * s(j);
      s(j) = cs(j) * s(j);

      if (happy) {
        ++j;
        ++total;
        broke_down = true;
        break;
      }
      if (std::abs(s(j + 1)) / bnorm <= opts.tol) {
        ++j;
        ++total;
        break;
      }
    }

    if (j > 0) {
      Vector y = H.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(s.head(j));
      out.x += V.leftCols(j) * y;
    }
    r = b - apply(out.x);
    rnorm = r.norm();
    out.relative_residual = rnorm / bnorm;
    out.iterations = total;

    if (!std::isfinite(rnorm)) {
      out.status = GmresStatus::breakdown;
      return out;
    }
    if (out.relative_residual <= opts.tol) {
      out.status = GmresStatus::converged;
      return out;
    }
    if (broke_down) {
      out.status = GmresStatus::breakdown;
      return out;
    }
    if (total >= opts.max_iter) {
      out.status = GmresStatus::max_iter;
      return out;
    }
    if (rnorm > 0.1 * cycle_start) {
      out.status = GmresStatus::stagnated;
      return out;
    }
  }
}

/// GMRES on a dense matrix with a partial-pivoting LU fallback. Throws
/// NumericalFailure when neither reaches `fallback_tol`.
struct DenseSolve {
  Vector x;
  GmresStatus gmres_status = GmresStatus::converged;
  bool used_fallback = false;
  double relative_residual = 0.0;
};

inline DenseSolve solve_with_fallback(const Matrix& A, const Vector& b, GmresOptions opts = {},
                                      double fallback_tol = 1e-6) {
  if (A.rows() != A.cols() || A.rows() != b.size()) {
    throw ShapeError(fmt::format("linear system {}x{} with rhs of length {}", A.rows(), A.cols(),
                                 b.size()));
  }
  if (!A.allFinite() || !b.allFinite()) {
    throw NumericalFailure("linear system has non-finite entries",
                           std::numeric_limits<double>::quiet_NaN());
  }
  DenseSolve out;
  auto res = gmres([&A](const Vector& v) { return Vector(A * v); }, b, opts);
  out.gmres_status = res.status;
  if (res.status == GmresStatus::converged) {
    out.x = std::move(res.x);
    out.relative_residual = res.relative_residual;
    return out;
  }
  out.used_fallback = true;
  out.x = A.partialPivLu().solve(b);
  const double bnorm = b.norm();
  out.relative_residual = bnorm == 0.0 ? (A * out.x).norm() : (A * out.x - b).norm() / bnorm;
  if (!out.x.allFinite() || !(out.relative_residual <= fallback_tol)) {
    const double best = std::min(res.relative_residual, out.relative_residual);
    throw NumericalFailure(
        fmt::format("linear solve failed (gmres {}, LU residual {:.3e})", to_string(res.status),
                    out.relative_residual),
        std::isfinite(best) ? best : res.relative_residual);
  }
  return out;
}

struct DampedStep {
  Vector step;
  double lambda_used = 0.0;
};

/// 1e−8 · Σ|G_ii| / n, or 1e−8 when the diagonal is zero.
inline double default_damping(const Matrix& G) {
  const double n = static_cast<double>(std::max<Eigen::Index>(G.rows(), 1));
  const double t = 1e-8 * G.diagonal().cwiseAbs().sum() / n;
  return t > 0.0 ? t : 1e-8;
}

/**
 * Solves (G + λI)d = g for the smallest λ in {0, λ0, 2λ0, 4λ0, …} at which the
 * Cholesky factorization succeeds and d is finite. The ladder stops once
 * λ exceeds 1e8.
 */
inline DampedStep solve_damped(const Matrix& G, const Vector& g, double lambda0) {
  if (G.rows() != G.cols() || G.rows() != g.size()) {
    throw ShapeError(fmt::format("solve_damped: {}x{} matrix with vector of length {}", G.rows(),
                                 G.cols(), g.size()));
  }
  if (!(lambda0 > 0.0)) throw ConfigError("solve_damped: lambda0 must be positive");
  if (!g.allFinite() || !G.allFinite()) {
    throw NumericalFailure("solve_damped: non-finite input", std::numeric_limits<double>::infinity());
  }
  const Matrix sym = symmetrized(G);
  const Eigen::Index n = G.rows();
  double lambda = 0.0;
  while (lambda <= 1e8) {
    Eigen::LLT<Matrix> llt(sym + lambda * Matrix::Identity(n, n));
    if (llt.info() == Eigen::Success) {
      Vector d = llt.solve(g);
      if (d.allFinite()) return {std::move(d), lambda};
    }
    lambda = lambda == 0.0 ? lambda0 : 2.0 * lambda;
  }
  throw NumericalFailure(fmt::format("damping ladder exhausted (lambda > 1e8)"), lambda);
}

/// Plain partial-pivoting LU solve of G d = g.
inline Vector solve_pure(const Matrix& G, const Vector& g) {
  if (G.rows() != G.cols() || G.rows() != g.size()) {
    throw ShapeError("solve_pure: dimension mismatch");
  }
  Vector d = G.partialPivLu().solve(g);
  if (!d.allFinite()) {
    throw NumericalFailure("Newton system is singular", std::numeric_limits<double>::infinity());
  }
  return d;
}

/// Inverse of (B⁻¹ + uvᵀ) given B: B − Buvᵀ B / (1 + vᵀBu).
inline Matrix sherman_morrison(const Matrix& B, const Vector& u, const Vector& v) {
  if (B.rows() != B.cols() || u.size() != B.rows() || v.size() != B.rows()) {
    throw ShapeError("sherman_morrison: dimension mismatch");
  }
  const Vector Bu = B * u;
  const double denom = 1.0 + v.dot(Bu);
  if (!(std::abs(denom) > 1e-12)) {
    throw UpdateRejected(fmt::format("sherman_morrison: denominator {:.3e}", denom));
  }
  const Eigen::RowVectorXd vB = v.transpose() * B;
  return B - (Bu * vB) / denom;
}

/// Rank-one inverse update B + (p − Bq)pᵀB / (pᵀBq); the result satisfies Bq = p.
inline Matrix sr1_inverse_update(const Matrix& B, const Vector& p, const Vector& q) {
  if (B.rows() != B.cols() || p.size() != B.rows() || q.size() != B.rows()) {
    throw ShapeError("sr1_inverse_update: dimension mismatch");
  }
  const Vector Bq = B * q;
  const double denom = p.dot(Bq);
  if (!(std::abs(denom) > 1e-12 * p.norm() * B.norm() * q.norm())) {
    throw UpdateRejected(fmt::format("sr1_inverse_update: denominator {:.3e}", denom));
  }
  const Eigen::RowVectorXd pB = p.transpose() * B;
  return B + ((p - Bq) * pB) / denom;
}

/// BFGS inverse update (I − ρpqᵀ)B(I − ρqpᵀ) + ρppᵀ with ρ = 1/(qᵀp).
inline Matrix bfgs_inverse_update(const Matrix& B, const Vector& p, const Vector& q) {
  if (B.rows() != B.cols() || p.size() != B.rows() || q.size() != B.rows()) {
    throw ShapeError("bfgs_inverse_update: dimension mismatch");
  }
  const double curvature = q.dot(p);
  if (!(curvature > 1e-12)) {
    throw UpdateRejected(fmt::format("bfgs_inverse_update: curvature {:.3e}", curvature));
  }
  const double rho = 1.0 / curvature;
  const Eigen::Index n = B.rows();
  const Matrix L = Matrix::Identity(n, n) - rho * p * q.transpose();
  return L * B * L.transpose() + rho * p * p.transpose();
}

/// Spectral norm estimate from power iteration on AᵀA.
inline double spectral_norm(const Matrix& A, int steps = 50) {
  if (A.size() == 0) return 0.0;
  Vector v = Vector::Ones(A.cols()) / std::sqrt(static_cast<double>(A.cols()));
  double estimate = 0.0;
  for (int i = 0; i < steps; ++i) {
    Vector w = A.transpose() * (A * v);
    const double nw = w.norm();
    if (nw == 0.0) {
      // Started in the null space; restart from a different direction.
      if (i == 0 && A.norm() > 0.0) {
        v = Vector::LinSpaced(A.cols(), 1.0, 2.0).normalized();
        continue;
      }
      return 0.0;
    }
    const double next = std::sqrt(nw);
    v = w / nw;
    if (std::abs(next - estimate) <= 1e-6 * next) {
      estimate = next;
      break;
    }
    estimate = next;
  }
  return (A * v).norm();
}

}  // namespace qmnewt
