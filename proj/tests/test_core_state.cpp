#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "oracles.hpp"
#include "qmnewt/core_state.hpp"

using namespace qmnewt;

namespace {

Point pt(std::initializer_list<double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p(i++) = x;
  return p;
}

ModelState window_of(std::vector<Point> pts) {
  ModelState s;
  s.window = std::move(pts);
  s.fvals.assign(s.window.size(), 0.0);
  return s;
}

}  // namespace

TEST(Sigma, NewestStep) {
  const auto s = window_of({pt({0, 0}), pt({1, 0}), pt({1, 2})});
  EXPECT_EQ(sigma(s, 2), pt({0, 2}));
}

TEST(Sigma, RepeatedPointGivesZero) {
  const auto s = window_of({pt({0, 0}), pt({0, 0}), pt({0, 0})});
  EXPECT_EQ(sigma(s, 1), pt({0, 0}));
  EXPECT_EQ(sigma(s, 2), pt({0, 0}));
}

TEST(Sigma, TwoPointWindow) {
  const auto s = window_of({pt({1, 1}), pt({2, 3})});
  EXPECT_EQ(sigma(s, 1), pt({1, 2}));
}

TEST(Sigma, OutOfWindowIsRangeError) {
  const auto s = window_of({pt({0, 0}), pt({1, 0}), pt({1, 2})});
  EXPECT_THROW(sigma(s, 0), RangeError);
  EXPECT_THROW(sigma(s, 3), RangeError);
  EXPECT_THROW(sigma(s, -1), RangeError);
}

TEST(Sigma, ShortWindowIsStateError) {
  const auto s = window_of({pt({0, 0})});
  EXPECT_THROW(sigma(s, 1), StateError);
}

TEST(TauGap, NewestIsZero) {
  const auto s = window_of({pt({0, 0}), pt({1, 0}), pt({1, 2})});
  EXPECT_EQ(tau_gap(s, 2), pt({0, 0}));
}

TEST(TauGap, OldestPoint) {
  const auto s = window_of({pt({0, 0}), pt({1, 0}), pt({1, 2})});
  EXPECT_EQ(tau_gap(s, 0), pt({1, 2}));
}

TEST(TauGap, OneDimensional) {
  const auto s = window_of({pt({3}), pt({5})});
  EXPECT_EQ(tau_gap(s, 0), pt({2}));
}

TEST(TauGap, OutOfWindowIsRangeError) {
  const auto s = window_of({pt({3}), pt({5})});
  EXPECT_THROW(tau_gap(s, 2), RangeError);
  EXPECT_THROW(tau_gap(s, -1), RangeError);
}

TEST(TauGap, TelescopesWithSigma) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 6;
    const auto s = oracle::random_state(rng, n);
    for (int j = 1; j <= n; ++j) {
      EXPECT_LE((sigma(s, j) - (tau_gap(s, j - 1) - tau_gap(s, j))).norm(), 1e-14);
    }
  }
}

TEST(DeltaF, DifferenceOfCachedValues) {
  auto s = window_of({pt({0}), pt({1}), pt({2})});
  s.fvals = {4.0, 1.5, -2.0};
  EXPECT_DOUBLE_EQ(delta_f(s, 1), -2.5);
  EXPECT_DOUBLE_EQ(delta_f(s, 2), -3.5);
  EXPECT_THROW(delta_f(s, 0), RangeError);
  s.fvals.pop_back();
  EXPECT_THROW(delta_f(s, 1), StateError);
}

TEST(ModelGradientAt, AtAnchorReturnsG) {
  QuadraticModel m{pt({1, -2}), Matrix::Identity(2, 2) * 3.0, 1.0};
  EXPECT_EQ(model_gradient_at(m, pt({4, 5}), pt({4, 5})), pt({1, -2}));
}

TEST(ModelGradientAt, IdentityHessian) {
  QuadraticModel m{pt({0, 0}), Matrix::Identity(2, 2), 1.0};
  EXPECT_EQ(model_gradient_at(m, pt({0, 0}), pt({1, 2})), pt({1, 2}));
}

TEST(ModelGradientAt, MatchesFiniteDifferencesOfQ) {
  Matrix G(2, 2);
  G << 2, 0, 0, 0;
  QuadraticModel m{pt({1, 0}), G, 1.0};
  const Point anchor = pt({0.5, -0.5});
  const Point x = anchor + pt({1, 1});
  EXPECT_EQ(model_gradient_at(m, anchor, x), pt({3, 0}));

  auto q = [&](const Point& y) {
    const Vector d = y - anchor;
    return m.g.dot(d) + 0.5 * d.dot(G * d);
  };
  const double h = 1e-5;
  for (int i = 0; i < 2; ++i) {
    Point e = Point::Zero(2);
    e(i) = h;
    const double fd = (q(x + e) - q(x - e)) / (2 * h);
    EXPECT_NEAR(fd, model_gradient_at(m, anchor, x)(i), 1e-8);
  }
}

TEST(ModelGradientAt, AffineInX) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 5;
    QuadraticModel m{oracle::random_vector(rng, n), oracle::random_symmetric(rng, n), 1.0};
    const Point a = oracle::random_vector(rng, n);
    const Point x = oracle::random_vector(rng, n), y = oracle::random_vector(rng, n);
    const Vector mid = model_gradient_at(m, a, 0.5 * (x + y));
    const Vector avg = 0.5 * (model_gradient_at(m, a, x) + model_gradient_at(m, a, y));
    EXPECT_LE((mid - avg).norm(), 1e-13 * std::max(1.0, avg.norm()));
  }
}

TEST(ModelGradientAt, DimensionMismatchIsShapeError) {
  QuadraticModel m{pt({0, 0}), Matrix::Identity(2, 2), 1.0};
  EXPECT_THROW(model_gradient_at(m, pt({0, 0}), pt({1, 2, 3})), ShapeError);
  EXPECT_THROW(model_gradient_at(m, pt({0}), pt({1})), ShapeError);
}

TEST(PushPoint, FifoSemantics) {
  auto s = window_of({pt({1}), pt({2}), pt({3})});
  s.fvals = {10, 20, 30};
  const auto t = push_point(s, pt({4}), 40);
  ASSERT_EQ(t.window.size(), 3u);
  EXPECT_EQ(t.window[0], pt({2}));
  EXPECT_EQ(t.window[1], pt({3}));
  EXPECT_EQ(t.window[2], pt({4}));
  EXPECT_EQ(t.fvals, (std::vector<double>{20, 30, 40}));
  EXPECT_EQ(t.iter_index, s.iter_index + 1);
}

TEST(PushPoint, SamePointTwiceKeepsLength) {
  auto s = window_of({pt({1, 1}), pt({2, 2}), pt({3, 3})});
  s = push_point(s, pt({4, 4}), 1.0);
  s = push_point(s, pt({4, 4}), 1.0);
  EXPECT_EQ(s.window.size(), 3u);
  EXPECT_EQ(s.fvals.size(), 3u);
  EXPECT_EQ(s.iter_index, 2);
}

TEST(PushPoint, RandomSequencesKeepInvariants) {
  std::mt19937_64 rng(7);
  auto s = oracle::random_state(rng, 4);
  const Matrix G0 = s.model.G;
  for (int i = 0; i < 100; ++i) {
    const Point x = oracle::random_vector(rng, 4);
    const double f = x.squaredNorm();
    s = push_point(s, x, f);
    ASSERT_EQ(s.window.size(), 5u);
    ASSERT_EQ(s.fvals.size(), 5u);
    EXPECT_EQ(s.window.back(), x);
    EXPECT_EQ(s.fvals.back(), f);
  }
  EXPECT_LE(relative_asymmetry(s.model.G), 1e-14);
  EXPECT_EQ(s.model.G, G0);
}

TEST(PushPoint, NonFiniteInputIsEvaluationError) {
  auto s = window_of({pt({1}), pt({2})});
  EXPECT_THROW(push_point(s, pt({std::numeric_limits<double>::quiet_NaN()}), 1.0), EvaluationError);
  EXPECT_THROW(push_point(s, pt({1.0}), std::numeric_limits<double>::infinity()), EvaluationError);
}

TEST(PushPoint, DimensionMismatchIsShapeError) {
  auto s = window_of({pt({1}), pt({2})});
  EXPECT_THROW(push_point(s, pt({1, 2}), 1.0), ShapeError);
}

TEST(Symmetry, Helpers) {
  Matrix A(2, 2);
  A << 1, 2, 0, 1;
  EXPECT_GT(relative_asymmetry(A), 0.0);
  EXPECT_EQ(relative_asymmetry(symmetrized(A)), 0.0);
  EXPECT_EQ(symmetrized(A)(0, 1), 1.0);
}

TEST(QuadraticModel, IdentityFactory) {
  const auto m = QuadraticModel::identity(3);
  EXPECT_EQ(m.g, Vector::Zero(3));
  EXPECT_EQ(m.G, Matrix::Identity(3, 3));
  EXPECT_EQ(m.nu, 1.0);
}
