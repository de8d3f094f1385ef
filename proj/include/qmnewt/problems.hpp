#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "qmnewt/core_state.hpp"
#include "qmnewt/errors.hpp"

namespace qmnewt {

enum class Smoothness { smooth, nonsmooth };

inline std::string_view to_string(Smoothness s) {
  return s == Smoothness::smooth ? "smooth" : "nonsmooth";
}

using Objective = std::function<double(const Vector&)>;
using GradientFn = std::function<Vector(const Vector&)>;
using HessianFn = std::function<Matrix(const Vector&)>;

struct Box {
  Vector lower;
  Vector upper;

  Vector project(const Vector& x) const { return x.cwiseMax(lower).cwiseMin(upper); }
};

/// A benchmark objective with its metadata. Immutable once built.
struct Problem {
  std::string name;
  int dim = 0;
  Objective eval;
  GradientFn analytic_grad;  ///< empty when not provided
  HessianFn analytic_hess;   ///< empty when not provided
  std::optional<Point> known_xstar;
  std::optional<double> known_fstar;
  /// known_xstar is the published minimizer but eval(known_xstar) does not
  /// reproduce the published optimal value.
  bool claimed_only = false;
  Smoothness smoothness = Smoothness::smooth;
  std::map<std::string, double> params;
  std::optional<Box> box;

  double operator()(const Vector& x) const {
    if (x.size() != dim) {
      throw ShapeError(fmt::format("{} expects dimension {}, got {}", name, dim, x.size()));
    }
    return eval(x);
  }
  bool has_derivatives() const { return static_cast<bool>(analytic_grad) && static_cast<bool>(analytic_hess); }
};

enum class InitialGuess { IG1, IG2, IG3 };

inline std::string_view to_string(InitialGuess ig) {
  switch (ig) {
    case InitialGuess::IG1: return "IG1";
    case InitialGuess::IG2: return "IG2";
    case InitialGuess::IG3: return "IG3";
  }
  return "IG?";
}

inline InitialGuess parse_initial_guess(std::string_view tag) {
  if (tag == "IG1") return InitialGuess::IG1;
  if (tag == "IG2") return InitialGuess::IG2;
  if (tag == "IG3") return InitialGuess::IG3;
  throw ConfigError(fmt::format("unknown initial guess '{}'", tag));
}

/// IG1 = ones, IG2 = sin(ones), IG3 = exp(ones).
inline Point initial_guess(InitialGuess tag, int n) {
  if (n < 1) throw ConfigError("initial_guess: dimension must be positive");
  switch (tag) {
    case InitialGuess::IG1: return Point::Ones(n);
    case InitialGuess::IG2: return Point::Constant(n, std::sin(1.0));
    case InitialGuess::IG3: return Point::Constant(n, std::exp(1.0));
  }
  return Point::Ones(n);
}

namespace problems {

inline Problem woods() {
  Problem p;
  p.name = "woods";
  p.dim = 4;
  p.eval = [](const Vector& x) {
    const double a = x(1) - x(0) * x(0), b = x(3) - x(2) * x(2);
    return 100.0 * a * a + (1.0 - x(0)) * (1.0 - x(0)) + 90.0 * b * b +
           (1.0 - x(2)) * (1.0 - x(2)) +
           10.1 * ((x(1) - 1.0) * (x(1) - 1.0) + (x(3) - 1.0) * (x(3) - 1.0)) +
           19.8 * (x(1) - 1.0) * (x(3) - 1.0);
  };
  p.analytic_grad = [](const Vector& x) {
    const double a = x(1) - x(0) * x(0), b = x(3) - x(2) * x(2);
    Vector g(4);
    g(0) = -400.0 * x(0) * a - 2.0 * (1.0 - x(0));
    g(1) = 200.0 * a + 20.2 * (x(1) - 1.0) + 19.8 * (x(3) - 1.0);
    g(2) = -360.0 * x(2) * b - 2.0 * (1.0 - x(2));
    g(3) = 180.0 * b + 20.2 * (x(3) - 1.0) + 19.8 * (x(1) - 1.0);
    return g;
  };
  p.known_xstar = Point::Ones(4);
  p.known_fstar = 0.0;
  return p;
}

/// Σ_{i<n} [100(x_{i+1} − x_i²)² + (1 − x_i)²].
inline Problem rosenbrock(int n) {
  if (n < 2) throw ConfigError("rosenbrock needs dimension >= 2");
  Problem p;
  p.name = "rosenbrock";
  p.dim = n;
  p.eval = [](const Vector& x) {
    double f = 0.0;
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
      const double a = x(i + 1) - x(i) * x(i);
      f += 100.0 * a * a + (1.0 - x(i)) * (1.0 - x(i));
    }
    return f;
  };
  p.analytic_grad = [](const Vector& x) {
    Vector g = Vector::Zero(x.size());
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
      const double a = x(i + 1) - x(i) * x(i);
      g(i) += -400.0 * x(i) * a - 2.0 * (1.0 - x(i));
      g(i + 1) += 200.0 * a;
    }
    return g;
  };
  p.analytic_hess = [](const Vector& x) {
    const Eigen::Index n = x.size();
    Matrix H = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      H(i, i) += 1200.0 * x(i) * x(i) - 400.0 * x(i + 1) + 2.0;
      H(i, i + 1) += -400.0 * x(i);
      H(i + 1, i) += -400.0 * x(i);
      H(i + 1, i + 1) += 200.0;
    }
    return H;
  };
  p.known_xstar = Point::Ones(n);
  p.known_fstar = 0.0;
  return p;
}

/// Extended Powell singular function over ⌊n/4⌋ blocks.
inline Problem powell(int n) {
  if (n < 4) throw ConfigError("powell needs dimension >= 4");
  const int d = 4 * (n / 4);
  Problem p;
  p.name = "powell";
  p.dim = d;
  p.eval = [](const Vector& x) {
    double f = 0.0;
    for (Eigen::Index j = 0; j + 3 < x.size(); j += 4) {
      const double a = x(j) + 10.0 * x(j + 1), b = x(j + 2) - x(j + 3);
      const double c = x(j + 1) - 2.0 * x(j + 2), e = x(j) - x(j + 3);
      f += a * a + 5.0 * b * b + c * c * c * c + 10.0 * e * e * e * e;
    }
    return f;
  };
  p.analytic_grad = [](const Vector& x) {
    Vector g = Vector::Zero(x.size());
    for (Eigen::Index j = 0; j + 3 < x.size(); j += 4) {
      const double a = x(j) + 10.0 * x(j + 1), b = x(j + 2) - x(j + 3);
      const double c = x(j + 1) - 2.0 * x(j + 2), e = x(j) - x(j + 3);
      g(j) = 2.0 * a + 40.0 * e * e * e;
      g(j + 1) = 20.0 * a + 4.0 * c * c * c;
      g(j + 2) = 10.0 * b - 8.0 * c * c * c;
      g(j + 3) = -10.0 * b - 40.0 * e * e * e;
    }
    return g;
  };
  p.known_xstar = Point::Zero(d);
  p.known_fstar = 0.0;
  return p;
}

/// Σ_i i·(x_i² + x_{(2i mod n)+1}² + x_{(3i mod n)+1}²)² with 1-based i.
inline Problem sparse_quartic(int n) {
  if (n < 1) throw ConfigError("sparse needs dimension >= 1");
  Problem p;
  p.name = "sparse";
  p.dim = n;
  auto partner = [n](int i, int mult) { return (mult * i) % n; };  // 0-based of (mult·i mod n)+1
  p.eval = [n, partner](const Vector& x) {
    double f = 0.0;
    for (int i = 1; i <= n; ++i) {
      const double a = x(i - 1), b = x(partner(i, 2)), c = x(partner(i, 3));
      const double s = a * a + b * b + c * c;
      f += i * s * s;
    }
    return f;
  };
  p.analytic_grad = [n, partner](const Vector& x) {
    Vector g = Vector::Zero(n);
    for (int i = 1; i <= n; ++i) {
      const int ia = i - 1, ib = partner(i, 2), ic = partner(i, 3);
      const double s = x(ia) * x(ia) + x(ib) * x(ib) + x(ic) * x(ic);
      const double coef = 4.0 * i * s;
      g(ia) += coef * x(ia);
      g(ib) += coef * x(ib);
      g(ic) += coef * x(ic);
    }
    return g;
  };
  p.known_xstar = Point::Zero(n);
  p.known_fstar = 0.0;
  return p;
}

/// DIXMAAN variant A on 3⌊n/3⌋ variables.
inline Problem dixmaan_a(int n) {
  if (n < 3) throw ConfigError("dixmaan needs dimension >= 3");
  const int d = 3 * (n / 3);
  const int m = d / 3;
  constexpr double alpha = 1.0, beta = 0.0, gamma = 0.125, delta = 0.125;
  Problem p;
  p.name = "dixmaan";
  p.dim = d;
  p.params = {{"alpha", alpha}, {"beta", beta}, {"gamma", gamma}, {"delta", delta}};
  p.eval = [d, m](const Vector& x) {
    double f = 1.0;
    for (int i = 0; i < d; ++i) f += alpha * x(i) * x(i);
    for (int i = 0; i + 1 < d; ++i) {
      const double t = x(i + 1) + x(i + 1) * x(i + 1);
      f += beta * x(i) * x(i) * t * t;
    }
    for (int i = 0; i < 2 * m; ++i) f += gamma * x(i) * x(i) * std::pow(x(i + m), 4);
    for (int i = 0; i < m; ++i) f += delta * x(i) * x(i + 2 * m);
    return f;
  };
  p.analytic_grad = [d, m](const Vector& x) {
    Vector g = 2.0 * alpha * x;
    for (int i = 0; i + 1 < d; ++i) {
      const double t = x(i + 1) + x(i + 1) * x(i + 1);
      g(i) += 2.0 * beta * x(i) * t * t;
      g(i + 1) += 2.0 * beta * x(i) * x(i) * t * (1.0 + 2.0 * x(i + 1));
    }
    for (int i = 0; i < 2 * m; ++i) {
      g(i) += 2.0 * gamma * x(i) * std::pow(x(i + m), 4);
      g(i + m) += 4.0 * gamma * x(i) * x(i) * std::pow(x(i + m), 3);
    }
    for (int i = 0; i < m; ++i) {
      g(i) += delta * x(i + 2 * m);
      g(i + 2 * m) += delta * x(i);
    }
    return g;
  };
  p.known_xstar = Point::Zero(d);
  p.known_fstar = 1.0;
  return p;
}

/// Scaled Woods plus Σx², n = 5.
inline Problem blast1() {
  Problem p;
  p.name = "blast1";
  p.dim = 5;
  p.eval = [](const Vector& x) {
    const double a = 1000.0 * (x(1) - x(0) * x(0)), b = x(3) - x(2) * x(2);
    return a * a + 1000.0 * (1.0 - x(0)) * (1.0 - x(0)) + 90000.0 * b * b +
           1000.0 * (1.0 - x(2)) * (1.0 - x(2)) +
           10100.0 * ((x(1) - 1.0) * (x(1) - 1.0) + 1000.0 * (x(3) - 1.0) * (x(3) - 1.0)) +
           19800.0 * (x(1) - 1.0) * (x(3) - 1.0) + x.squaredNorm();
  };
  p.analytic_grad = [](const Vector& x) {
    const double a = x(1) - x(0) * x(0), b = x(3) - x(2) * x(2);
    Vector g = 2.0 * x;
    g(0) += -4e6 * x(0) * a - 2000.0 * (1.0 - x(0));
    g(1) += 2e6 * a + 20200.0 * (x(1) - 1.0) + 19800.0 * (x(3) - 1.0);
    g(2) += -360000.0 * x(2) * b - 2000.0 * (1.0 - x(2));
    g(3) += 180000.0 * b + 20200000.0 * (x(3) - 1.0) + 19800.0 * (x(1) - 1.0);
    return g;
  };
  p.known_xstar = Point::Ones(5);
  p.claimed_only = true;
  return p;
}

/// 1000 × chained Rosenbrock, n = 101.
inline Problem blast2() {
  Problem base = rosenbrock(101);
  Problem p;
  p.name = "blast2";
  p.dim = 101;
  p.eval = [f = base.eval](const Vector& x) { return 1000.0 * f(x); };
  p.analytic_grad = [g = base.analytic_grad](const Vector& x) { return Vector(1000.0 * g(x)); };
  p.known_xstar = Point::Ones(101);
  p.known_fstar = 0.0;
  return p;
}

/// 1e5 Σcos(5πx_i) − 1e3 Σx_i², n = 100.
inline Problem blast3() {
  Problem p;
  p.name = "blast3";
  p.dim = 100;
  constexpr double w = 5.0 * std::numbers::pi;
  p.eval = [](const Vector& x) {
    double f = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) f += 1e5 * std::cos(w * x(i)) - 1e3 * x(i) * x(i);
    return f;
  };
  p.analytic_grad = [](const Vector& x) {
    Vector g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) g(i) = -1e5 * w * std::sin(w * x(i)) - 2e3 * x(i);
    return g;
  };
  p.known_xstar = Point::Ones(100);
  p.claimed_only = true;
  return p;
}

/// H_ij = 1/(i + j − 1), 1-based.
inline Matrix hilbert(int n) {
  Matrix H(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) H(i, j) = 1.0 / (i + j + 1);
  return H;
}

inline Problem p1() {
  Problem p;
  p.name = "p1";
  p.dim = 50;
  p.smoothness = Smoothness::nonsmooth;
  p.eval = [H = hilbert(50)](const Vector& x) { return (H * x).cwiseAbs().maxCoeff(); };
  p.known_xstar = Point::Zero(50);
  p.known_fstar = 0.0;
  return p;
}

inline Problem p2() {
  Problem p;
  p.name = "p2";
  p.dim = 50;
  p.smoothness = Smoothness::nonsmooth;
  p.eval = [H = hilbert(50)](const Vector& x) { return (H * x).cwiseAbs().sum(); };
  p.known_xstar = Point::Zero(50);
  p.known_fstar = 0.0;
  return p;
}

inline Problem p3() {
  Problem p;
  p.name = "p3";
  p.dim = 2;
  p.smoothness = Smoothness::nonsmooth;
  p.eval = [](const Vector& x) {
    const double q = x(0) * x(0) + (x(1) - 1.0) * (x(1) - 1.0);
    return std::max(q + x(1) - 1.0, -q + x(1) + 1.0);
  };
  p.known_xstar = Point::Zero(2);
  p.known_fstar = 0.0;
  return p;
}

/// φ(t) = min{1, |t|/μ}.
inline double capped_l1(double t, double mu) { return std::min(1.0, std::abs(t) / mu); }

/// Count of entries with |x_i| > 1e−12.
inline double cardinality(const Vector& x) {
  return static_cast<double>((x.array().abs() > 1e-12).count());
}

/// Smallest value of f over a uniform grid on the problem's box (dim ≤ 3).
inline double grid_minimum(const Problem& p, int per_axis = 201) {
  if (!p.box || p.dim > 3) throw ConfigError("grid_minimum needs a box problem with dim <= 3");
  const int d = p.dim;
  long total = 1;
  for (int i = 0; i < d; ++i) total *= per_axis;
  double best = std::numeric_limits<double>::infinity();
  Vector x(d);
  for (long idx = 0; idx < total; ++idx) {
    long r = idx;
    for (int i = 0; i < d; ++i) {
      const double t = static_cast<double>(r % per_axis) / (per_axis - 1);
      x(i) = p.box->lower(i) + t * (p.box->upper(i) - p.box->lower(i));
      r /= per_axis;
    }
    best = std::min(best, p.eval(x));
  }
  return best;
}

/// ‖Ax − b‖₁ + λ‖x‖₀ with A = (1, 1), b = 1 on [0, 1]².
inline Problem p4(double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("p4: lambda must be positive");
  Problem p;
  p.name = "p4";
  p.dim = 2;
  p.smoothness = Smoothness::nonsmooth;
  p.params = {{"lambda", lambda}};
  p.eval = [lambda](const Vector& x) { return std::abs(x.sum() - 1.0) + lambda * cardinality(x); };
  p.box = Box{Vector::Zero(2), Vector::Ones(2)};
  p.known_fstar = grid_minimum(p);
  return p;
}

/// ‖Ax − b‖₁ + λΣφ(x_i) with A = (1, 1), b = 1 on [0, 1]².
inline Problem p4_relaxed(double lambda, double mu) {
  if (!(lambda > 0.0) || !(mu > 0.0)) throw ConfigError("p4-relaxed: lambda and mu must be positive");
  Problem p;
  p.name = "p4-relaxed";
  p.dim = 2;
  p.smoothness = Smoothness::nonsmooth;
  p.params = {{"lambda", lambda}, {"mu", mu}};
  p.eval = [lambda, mu](const Vector& x) {
    double pen = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) pen += capped_l1(x(i), mu);
    return std::abs(x.sum() - 1.0) + lambda * pen;
  };
  p.box = Box{Vector::Zero(2), Vector::Ones(2)};
  p.known_fstar = grid_minimum(p);
  return p;
}

/// exp(x₁) + sin(x₂).
inline Problem expsin() {
  Problem p;
  p.name = "expsin";
  p.dim = 2;
  p.eval = [](const Vector& x) { return std::exp(x(0)) + std::sin(x(1)); };
  p.analytic_grad = [](const Vector& x) {
    Vector g(2);
    g << std::exp(x(0)), std::cos(x(1));
    return g;
  };
  p.analytic_hess = [](const Vector& x) {
    Matrix H = Matrix::Zero(2, 2);
    H(0, 0) = std::exp(x(0));
    H(1, 1) = -std::sin(x(1));
    return H;
  };
  return p;
}

/// ½‖x − c‖² with c_i = 0.5.
inline Problem quadratic(int n) {
  if (n < 1) throw ConfigError("quadratic needs dimension >= 1");
  Problem p;
  p.name = "quadratic";
  p.dim = n;
  p.eval = [](const Vector& x) { return 0.5 * (x.array() - 0.5).matrix().squaredNorm(); };
  p.analytic_grad = [](const Vector& x) { return Vector((x.array() - 0.5).matrix()); };
  p.analytic_hess = [n](const Vector&) { return Matrix(Matrix::Identity(n, n)); };
  p.known_xstar = Point::Constant(n, 0.5);
  p.known_fstar = 0.0;
  return p;
}

/// 1 + Σ i·x_i.
inline Problem affine(int n) {
  if (n < 1) throw ConfigError("affine needs dimension >= 1");
  Problem p;
  p.name = "affine";
  p.dim = n;
  const Vector c = Vector::LinSpaced(n, 1.0, static_cast<double>(n));
  p.eval = [c](const Vector& x) { return 1.0 + c.dot(x); };
  p.analytic_grad = [c](const Vector&) { return c; };
  p.analytic_hess = [n](const Vector&) { return Matrix(Matrix::Zero(n, n)); };
  return p;
}

}  // namespace problems

/// Woods, chained Rosenbrock, extended Powell, sparse quartic and DIXMAAN A.
inline std::vector<Problem> make_smooth_suite(int n) {
  if (n < 4) throw ConfigError("smooth suite needs n >= 4");
  return {problems::woods(), problems::rosenbrock(n), problems::powell(n),
          problems::sparse_quartic(n), problems::dixmaan_a(n)};
}

inline std::vector<Problem> make_blasting_suite() {
  return {problems::blast1(), problems::blast2(), problems::blast3()};
}

inline std::vector<Problem> make_nonsmooth_suite(double lambda = 1.0, double mu = 1e-2) {
  return {problems::p1(), problems::p2(), problems::p3(), problems::p4(lambda),
          problems::p4_relaxed(lambda, mu)};
}

inline const std::vector<std::string>& problem_names() {
  static const std::vector<std::string> names = {
      "woods", "rosenbrock", "powell", "sparse", "dixmaan", "blast1", "blast2", "blast3",
      "p1",    "p2",         "p3",     "p4",     "p4-relaxed", "expsin", "quadratic", "affine"};
  return names;
}

struct ProblemOptions {
  std::optional<int> dim;
  double lambda = 1.0;
  double mu = 1e-2;
};

inline bool is_known_problem(std::string_view name) {
  for (const auto& n : problem_names())
    if (n == name) return true;
  return false;
}

/// Throws ConfigError when eval(known_xstar) misses known_fstar by more than 1e−12.
inline void verify_known_optimum(const Problem& p) {
  if (!p.known_xstar || !p.known_fstar) return;
  const double f = p.eval(*p.known_xstar);
  if (!(std::abs(f - *p.known_fstar) <= 1e-12)) {
    throw ConfigError(fmt::format("{}: f(x*) = {} but f* = {}", p.name, f, *p.known_fstar));
  }
}

namespace detail {

inline Problem lookup_problem(std::string_view name, const ProblemOptions& opts) {
  const int n = opts.dim.value_or(50);
  auto fixed = [&](Problem p) {
    if (opts.dim && *opts.dim != p.dim) {
      throw ConfigError(fmt::format("{} has fixed dimension {}", p.name, p.dim));
    }
    return p;
  };
  if (name == "woods") return fixed(problems::woods());
  if (name == "rosenbrock") return problems::rosenbrock(n);
  if (name == "powell") return problems::powell(n);
  if (name == "sparse") return problems::sparse_quartic(n);
  if (name == "dixmaan") return problems::dixmaan_a(n);
  if (name == "blast1") return fixed(problems::blast1());
  if (name == "blast2") return fixed(problems::blast2());
  if (name == "blast3") return fixed(problems::blast3());
  if (name == "p1") return fixed(problems::p1());
  if (name == "p2") return fixed(problems::p2());
  if (name == "p3") return fixed(problems::p3());
  if (name == "p4") return fixed(problems::p4(opts.lambda));
  if (name == "p4-relaxed") return fixed(problems::p4_relaxed(opts.lambda, opts.mu));
  if (name == "expsin") return fixed(problems::expsin());
  if (name == "quadratic") return problems::quadratic(opts.dim.value_or(2));
  if (name == "affine") return problems::affine(opts.dim.value_or(2));
  throw ConfigError(fmt::format("unknown problem '{}'", name));
}

}  // namespace detail

/// Registry lookup. Scalable families default to n = 50; fixed-size problems
/// reject a conflicting dimension.
inline Problem make_problem(std::string_view name, const ProblemOptions& opts = {}) {
  Problem p = detail::lookup_problem(name, opts);
  verify_known_optimum(p);
  return p;
}

}  // namespace qmnewt
