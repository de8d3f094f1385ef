#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "qmnewt/model_simplified.hpp"

using namespace qmnewt;

namespace {

Point pt(double a, double b) {
  Point p(2);
  p << a, b;
  return p;
}

/// σ_k = (1, 0), g' = (2, 3), G' = I, Δf_k = df.
ModelState unit_state(double df) {
  ModelState s;
  s.window = {pt(0, -1), pt(0, 0), pt(1, 0)};
  s.fvals = {0.0, 0.0, df};
  s.prev_model = {pt(2, 3), Matrix::Identity(2, 2), 1.0};
  s.model = s.prev_model;
  return s;
}

}  // namespace

TEST(SimplifiedMultipliers, HandExample) {
  const auto m = simplified_multipliers(unit_state(-0.5));
  EXPECT_DOUBLE_EQ(m.eta, 0.0);
  EXPECT_DOUBLE_EQ(m.theta, -2.0);
}

TEST(SimplifiedMultipliers, OrthogonalGradientGivesZeroTheta) {
  auto s = unit_state(1.0);
  s.prev_model.g = pt(0, 7);
  EXPECT_EQ(simplified_multipliers(s).theta, 0.0);
}

TEST(SimplifiedMultipliers, VanishingHessianCondition) {
  auto s = unit_state(0.0);
  s.prev_model.G = Matrix::Identity(2, 2) * 3.0;
  s.fvals.back() = -1.5;  // 2Δf + σᵀG'σ = 0
  EXPECT_EQ(simplified_multipliers(s).eta, 0.0);
}

TEST(SimplifiedMultipliers, ConsistentWithUpdate) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = oracle::random_state(rng, 2 + trial % 5);
    s.model.nu = 0.25 + trial * 0.03;
    const auto m = simplified_multipliers(s);
    const auto u = simplified_update(s);
    const Vector sk = oracle::step(s, s.steps());
    EXPECT_LE((u.delta_g - m.theta * sk).norm(), 1e-12 * std::max(1.0, u.delta_g.norm()));
    const Matrix from_eta = m.eta * sk * sk.transpose() / (2.0 * s.model.nu);
    EXPECT_LE((u.delta_G - from_eta).norm(), 1e-12 * std::max(1.0, u.delta_G.norm()));
  }
}

TEST(SimplifiedMultipliers, DegenerateStep) {
  auto s = unit_state(0.0);
  s.window.back() = s.window[1];
  try {
    simplified_multipliers(s);
    FAIL() << "expected DegenerateGeometry";
  } catch (const DegenerateGeometry& e) {
    EXPECT_EQ(e.position(), 2);
  }
  EXPECT_THROW(simplified_update(s), DegenerateGeometry);
}

TEST(SimplifiedMultipliers, DegeneracyThresholdScalesWithPosition) {
  auto s = unit_state(0.0);
  s.window = {pt(1e6, 0), pt(1e6, 1), pt(1e6, 1 + 1e-7)};
  EXPECT_THROW(simplified_update(s), DegenerateGeometry);
  s.window = {pt(0, 0), pt(0, 1), pt(0, 1 + 1e-7)};
  EXPECT_NO_THROW(simplified_update(s));
}

TEST(SimplifiedUpdate, HandExample) {
  const auto u = simplified_update(unit_state(-0.5));
  EXPECT_EQ(u.delta_g, pt(-2, 0));
  EXPECT_EQ(u.delta_G, Matrix::Zero(2, 2));
}

TEST(SimplifiedUpdate, HandExampleMatchesQpOracle) {
  const auto s = unit_state(-0.5);
  Matrix A;
  Vector b, dg;
  Matrix dG;
  oracle::relaxed_constraints(s, A, b);
  oracle::least_norm_update(s, A, b, dg, dG);
  EXPECT_LE((dg - pt(-2, 0)).norm(), 1e-12);
  EXPECT_LE(dG.norm(), 1e-12);
}

TEST(SimplifiedUpdate, SpecialCases) {
  auto s = unit_state(-0.5);  // Δf = −½σᵀG'σ
  EXPECT_EQ(simplified_update(s).delta_G, Matrix::Zero(2, 2));
  s.prev_model.g = pt(0, 5);  // σᵀg' = 0
  EXPECT_EQ(simplified_update(s).delta_g, Vector::Zero(2));
}

TEST(SimplifiedUpdate, ExactRelaxedConstraints) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 500; ++trial) {
    auto s = oracle::random_state(rng, 2 + trial % 7);
    s.model.nu = std::exp(std::uniform_real_distribution<double>(-3, 3)(rng));
    const auto u = simplified_update(s);
    Matrix A;
    Vector b;
    oracle::relaxed_constraints(s, A, b);
    const int n = static_cast<int>(s.dim());
    Vector z(n + n * n);
    z << u.delta_g, Eigen::Map<const Vector>(u.delta_G.data(), n * n);
    const Vector r = A * z - b;
    EXPECT_LE(std::abs(r(0)), 1e-12 * std::max(1.0, std::abs(b(0))));
    EXPECT_LE(std::abs(r(1)), 1e-12 * std::max(1.0, std::abs(b(1))));
  }
}

TEST(SimplifiedUpdate, MatchesQpOracle) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = oracle::random_state(rng, 1 + trial % 5);
    s.model.nu = std::exp(std::uniform_real_distribution<double>(-2, 2)(rng));
    const auto u = simplified_update(s);
    Matrix A, dG;
    Vector b, dg;
    oracle::relaxed_constraints(s, A, b);
    oracle::least_norm_update(s, A, b, dg, dG);
    EXPECT_LE((u.delta_g - dg).norm(), 1e-8 * std::max(1.0, dg.norm()));
    EXPECT_LE((u.delta_G - dG).norm(), 1e-8 * std::max(1.0, dG.norm()));
  }
}

TEST(SimplifiedUpdate, RankOneAndParallel) {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = oracle::random_state(rng, 2 + trial % 6);
    const auto u = simplified_update(s);
    const Vector sk = oracle::step(s, s.steps());
    const auto sv = u.delta_G.jacobiSvd().singularValues();
    for (Eigen::Index i = 1; i < sv.size(); ++i) EXPECT_LE(sv(i), 1e-12 * std::max(1.0, sv(0)));
    const double cross = (u.delta_g - (u.delta_g.dot(sk) / sk.squaredNorm()) * sk).norm();
    EXPECT_LE(cross, 1e-12 * std::max(1.0, u.delta_g.norm()));
    EXPECT_EQ(u.delta_G, u.delta_G.transpose());
  }
}

TEST(SimplifiedRhs, Definitions) {
  const auto r = simplified_rhs(unit_state(0.25));
  EXPECT_DOUBLE_EQ(r.rho_check, -0.25 - 0.5);
  EXPECT_DOUBLE_EQ(r.eps_hat, -2.0);
}

TEST(SimplifiedUpdate, ErrorPaths) {
  auto s = unit_state(0.0);
  s.prev_model.g = Vector::Zero(3);
  EXPECT_THROW(simplified_update(s), ShapeError);
  s = unit_state(0.0);
  s.fvals.pop_back();
  EXPECT_THROW(simplified_update(s), StateError);
}

TEST(UpdateNu, Branches) {
  Vector g2(1), g1(1), g05(1);
  g2 << 2.0;
  g1 << 1.0;
  g05 << std::sqrt(0.5);
  const Matrix G1 = Matrix::Identity(1, 1);
  EXPECT_DOUBLE_EQ(update_nu(3.0, g2, G1), 3.3);
  EXPECT_DOUBLE_EQ(update_nu(3.0, g1, G1), 3.0);
  EXPECT_DOUBLE_EQ(update_nu(3.0, g05, G1), 2.7);
}

TEST(UpdateNu, BandEdges) {
  Matrix G = Matrix::Zero(2, 2);
  G(0, 0) = 3.0;
  G(0, 1) = 1.0;  // ‖ΔG‖²_F = 10
  Vector g(3);
  g << 3, 1, 1;  // ‖Δg‖² = 11
  EXPECT_DOUBLE_EQ(update_nu(1.0, g, G), 1.1);
  EXPECT_DOUBLE_EQ(update_nu(1.0, Vector::Constant(1, 3.0), G), 1.0);  // 9 = 0.9·10
}

TEST(UpdateNu, StaysPositive) {
  std::mt19937_64 rng(35);
  double nu = 1.0;
  for (int i = 0; i < 10000; ++i) {
    nu = clamp_nu(update_nu(nu, oracle::random_vector(rng, 2, 0.1), oracle::random_symmetric(rng, 2)));
    ASSERT_GT(nu, 0.0);
    ASSERT_GE(nu, kNuMin);
    ASSERT_LE(nu, kNuMax);
  }
  EXPECT_GT(update_nu(1e-300, Vector::Zero(2), Matrix::Identity(2, 2)), 0.0);
}

TEST(UpdateNu, RejectsNonPositive) {
  EXPECT_THROW(update_nu(0.0, Vector::Ones(1), Matrix::Ones(1, 1)), ConfigError);
  EXPECT_THROW(update_nu(-1.0, Vector::Ones(1), Matrix::Ones(1, 1)), ConfigError);
}

TEST(ClampNu, Bounds) {
  EXPECT_EQ(clamp_nu(1e-9), kNuMin);
  EXPECT_EQ(clamp_nu(1e9), kNuMax);
  EXPECT_EQ(clamp_nu(2.0), 2.0);
}
