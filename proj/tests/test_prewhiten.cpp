#include <gtest/gtest.h>

#include "glmh/prewhiten.hpp"
#include "glmh/rng.hpp"
#include "glmh/simulate.hpp"

using namespace glmh;

TEST(WhitenForBeta, HandLagPolynomial) {
  VectorXd y(3);
  y << 1, 2, 3;
  const MatrixXd X = MatrixXd::Ones(3, 1);
  const MatrixXd Z = MatrixXd::Ones(3, 1);
  const auto w = whiten_for_beta(y, X, Z, VectorXd::Zero(1), VectorXd::Constant(1, 0.5));
  ASSERT_EQ(w.response.size(), 2);
  EXPECT_DOUBLE_EQ(w.response(0), 1.5);
  EXPECT_DOUBLE_EQ(w.response(1), 2.0);
  EXPECT_DOUBLE_EQ(w.design(0, 0), 0.5);
  EXPECT_EQ(w.log_jacobian, 0.0);
}

TEST(WhitenForBeta, IdentityWhenRhoAndGammaZero) {
  Random rng(1);
  const Index T = 12;
  VectorXd y(T);
  MatrixXd X(T, 2), Z(T, 2);
  for (Index t = 0; t < T; ++t) {
    y(t) = rng.gaussian();
    X(t, 0) = rng.gaussian();
    X(t, 1) = rng.gaussian();
    Z(t, 0) = 1.0;
    Z(t, 1) = rng.gaussian();
  }
  const auto w = whiten_for_beta(y, X, Z, VectorXd::Zero(2), VectorXd::Zero(3));
  EXPECT_EQ(w.response, y.tail(T - 3));
  EXPECT_EQ(w.design, X.bottomRows(T - 3));
}

TEST(WhitenForBeta, JacobianIndependentOfRho) {
  Random rng(2);
  const Index T = 30;
  VectorXd y(T);
  MatrixXd X = MatrixXd::Ones(T, 1), Z(T, 2);
  for (Index t = 0; t < T; ++t) {
    y(t) = rng.gaussian();
    Z(t, 0) = 1.0;
    Z(t, 1) = rng.gaussian();
  }
  VectorXd gamma(2);
  gamma << 0.3, -0.7;
  VectorXd r1(2), r2(2);
  r1 << 0.2, 0.1;
  r2 << -0.5, 0.3;
  const auto a = whiten_for_beta(y, X, Z, gamma, r1);
  const auto b = whiten_for_beta(y, X, Z, gamma, r2);
  EXPECT_EQ(a.log_jacobian, b.log_jacobian);
  EXPECT_NEAR(a.log_jacobian, 0.5 * (Z.bottomRows(T - 2) * gamma).sum(), 1e-12);
}

TEST(WhitenForBeta, SimulateThenWhitenHasUnitVariance) {
  Random rng(3);
  const Index T = 40;
  MatrixXd X(T, 2), Z(T, 2);
  for (Index t = 0; t < T; ++t) {
    X(t, 0) = 1.0;
    X(t, 1) = rng.gaussian();
    Z(t, 0) = 1.0;
    Z(t, 1) = rng.gaussian();
  }
  VectorXd beta(2), gamma(2), rho(2);
  beta << 10.0, 2.0;
  gamma << 0.5, 0.6;
  rho << 0.5, 0.2;
  // Average over replicates so the check is not at the mercy of one series.
  double var = 0.0;
  const int reps = 50;
  for (int r = 0; r < reps; ++r) {
    const VectorXd y = simulate_voxel(X, Z, beta, gamma, rho, rng);
    const auto w = whiten_for_beta(y, X, Z, gamma, rho);
    const VectorXd e = w.response - w.design * beta;
    var += e.squaredNorm() / static_cast<double>(e.size()) / reps;
  }
  EXPECT_GT(var, 0.85);
  EXPECT_LT(var, 1.15);
}

TEST(WhitenForBeta, OverflowNamesTimeIndex) {
  const Index T = 10;
  MatrixXd Z = MatrixXd::Ones(T, 2);
  Z.col(1).setZero();
  Z(6, 1) = 1000.0;
  VectorXd gamma(2);
  gamma << 0.0, 1.0;
  try {
    whiten_for_beta(VectorXd::Zero(T), MatrixXd::Ones(T, 1), Z, gamma, VectorXd::Constant(1, 0.1));
    FAIL() << "expected overflow";
  } catch (const OverflowError& e) {
    EXPECT_EQ(e.time_index(), 6);
    EXPECT_NE(std::string(e.what()).find("t = 6"), std::string::npos);
  }
}

TEST(WhitenForBeta, RejectsNonStationaryRho) {
  EXPECT_THROW(whiten_for_beta(VectorXd::Zero(10), MatrixXd::Ones(10, 1), MatrixXd::Ones(10, 1), VectorXd::Zero(1),
                               VectorXd::Constant(1, 1.0)),
               InputError);
}

TEST(WhitenForRho, LagConstruction) {
  VectorXd u(4);
  u << 1, 2, 3, 4;
  const MatrixXd Z = MatrixXd::Ones(4, 1);
  const auto w1 = whiten_for_rho(u, Z, VectorXd::Zero(1), 1);
  EXPECT_EQ(w1.response, (VectorXd(3) << 2, 3, 4).finished());
  EXPECT_EQ(w1.design.col(0), (VectorXd(3) << 1, 2, 3).finished());
  const auto w2 = whiten_for_rho(u, Z, VectorXd::Zero(1), 2);
  MatrixXd want(2, 2);
  want << 2, 1, 3, 2;
  EXPECT_EQ(w2.design, want);
  EXPECT_EQ(w2.response, (VectorXd(2) << 3, 4).finished());
}

TEST(WhitenForRho, ScaleEquivariance) {
  Random rng(4);
  VectorXd u(50);
  for (Index t = 0; t < 50; ++t) u(t) = rng.gaussian();
  MatrixXd Z(50, 2);
  for (Index t = 0; t < 50; ++t) {
    Z(t, 0) = 1.0;
    Z(t, 1) = rng.gaussian();
  }
  VectorXd gamma(2);
  gamma << 0.2, 0.4;
  const auto a = whiten_for_rho(u, Z, gamma, 2);
  const auto b = whiten_for_rho(3.5 * u, Z, gamma, 2);
  const VectorXd ra = a.design.colPivHouseholderQr().solve(a.response);
  const VectorXd rb = b.design.colPivHouseholderQr().solve(b.response);
  EXPECT_LT((ra - rb).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(WhitenForRho, RecoversArCoefficients) {
  // Regressing the whitened problem recovers rho within 3 standard errors.
  Random rng(5);
  const Index T = 2000;
  const MatrixXd Z = MatrixXd::Ones(T, 1);
  VectorXd rho(2);
  rho << 0.5, -0.2;
  const VectorXd u = simulate_voxel(MatrixXd::Zero(T, 1), Z, VectorXd::Zero(1), VectorXd::Zero(1), rho, rng);
  const auto w = whiten_for_rho(u, Z, VectorXd::Zero(1), 2);
  const MatrixXd xtx = w.design.transpose() * w.design;
  const VectorXd est = xtx.ldlt().solve(w.design.transpose() * w.response);
  const VectorXd se = xtx.inverse().diagonal().cwiseSqrt();
  for (Index j = 0; j < 2; ++j) EXPECT_LT(std::abs(est(j) - rho(j)), 3 * se(j));
}
