#include <gtest/gtest.h>

#include <cmath>

#include "glmh/newton_gamma.hpp"
#include "oracles.hpp"

using namespace glmh;

namespace {

struct Fixture {
  MatrixXd Z;
  VectorXd e;
};

// Residuals drawn with log variance g0 + g1 * z1.
Fixture make_data(Index n, double g0, double g1, std::uint64_t seed) {
  Random rng(seed);
  Fixture f;
  f.Z.resize(n, 2);
  f.e.resize(n);
  for (Index t = 0; t < n; ++t) {
    f.Z(t, 0) = 1.0;
    f.Z(t, 1) = rng.gaussian();
    f.e(t) = std::exp(0.5 * (g0 + g1 * f.Z(t, 1))) * rng.gaussian();
  }
  return f;
}

GammaPosteriorContext make_ctx(const Fixture& f, double prior_var, double pi) {
  const Index q = f.Z.cols();
  Indicators forced = Indicators::Constant(q, false);
  forced(0) = true;
  GammaPosteriorContext ctx(f.Z, VectorXd::Zero(q), VectorXd::Constant(q, prior_var), VectorXd::Constant(q, pi), forced);
  ctx.set_residuals(f.e);
  return ctx;
}

Indicators both() { return Indicators::Constant(2, true); }

Indicators intercept_only() {
  Indicators ind(2);
  ind << true, false;
  return ind;
}

}  // namespace

TEST(GammaDerivatives, MatchFiniteDifferences) {
  const auto f = make_data(60, 0.5, 0.8, 1);
  const auto ctx = make_ctx(f, 10.0, 0.5);
  VectorXd g(2);
  g << 0.3, 0.4;
  auto lp = [&](const VectorXd& x) { return log_posterior_gamma(ctx, x, both()); };
  const auto d = grad_hess_gamma(ctx, g, both(), true);
  const VectorXd fd = oracle::fd_gradient(lp, g, 1e-5);
  const MatrixXd fh = oracle::fd_hessian(lp, g, 1e-4);
  EXPECT_LT((d.gradient - fd).cwiseAbs().maxCoeff(), 1e-5 * (1.0 + fd.cwiseAbs().maxCoeff()));
  EXPECT_LT((d.hessian - fh).cwiseAbs().maxCoeff(), 1e-4 * (1.0 + fh.cwiseAbs().maxCoeff()));
  const MatrixXd want_expected = -0.5 * f.Z.transpose() * f.Z - MatrixXd::Identity(2, 2) / 10.0;
  EXPECT_LT((d.expected_hessian - want_expected).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(GammaDerivatives, InterceptOnlyMaximizerIsMeanSquare) {
  const auto f = make_data(80, 1.2, 0.0, 2);
  auto ctx = make_ctx(f, 1e12, 0.5);
  ctx.tuning.newton_steps = 50;
  const auto prop = tailor_proposal(ctx, VectorXd::Zero(1), intercept_only());
  ASSERT_TRUE(prop.ok);
  EXPECT_NEAR(std::exp(prop.mean(0)), f.e.squaredNorm() / 80.0, 1e-8);
}

TEST(TailorProposal, ManyStepsReachTheMode) {
  const auto f = make_data(100, 0.0, 1.0, 3);
  auto ctx = make_ctx(f, 10.0, 0.5);
  ctx.tuning.newton_steps = 100;
  ctx.tuning.use_expected_hessian = false;
  const auto prop = tailor_proposal(ctx, VectorXd::Zero(2), both());
  ASSERT_TRUE(prop.ok);
  EXPECT_LT(grad_hess_gamma(ctx, prop.mean, both()).gradient.cwiseAbs().maxCoeff(), 1e-8);

  // Expected-Hessian (scoring) steps converge to the same point.
  ctx.tuning.use_expected_hessian = true;
  const auto scoring = tailor_proposal(ctx, VectorXd::Zero(2), both());
  EXPECT_LT((scoring.mean - prop.mean).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(TailorProposal, StepsNeverDecreaseThePosterior) {
  const auto f = make_data(50, 2.0, -1.5, 4);
  auto ctx = make_ctx(f, 10.0, 0.5);
  VectorXd start(2);
  start << -3.0, 2.0;
  double prev = log_posterior_gamma(ctx, start, both());
  for (int steps = 1; steps <= 6; ++steps) {
    ctx.tuning.newton_steps = steps;
    const auto prop = tailor_proposal(ctx, start, both());
    const double now = log_posterior_gamma(ctx, prop.mean, both());
    EXPECT_GE(now, prev - 1e-12) << steps;
    prev = now;
  }
}

TEST(TailorProposal, DensityMatchesMultivariateT) {
  const auto f = make_data(40, 0.2, 0.5, 5);
  const auto ctx = make_ctx(f, 10.0, 0.5);
  const auto prop = tailor_proposal(ctx, VectorXd::Zero(2), both());
  ASSERT_TRUE(prop.ok);
  EXPECT_EQ(prop.df, 10.0);
  const MatrixXd scale = prop.precision.inverse();
  Random rng(6);
  for (int i = 0; i < 20; ++i) {
    const VectorXd x = prop.sample(rng);
    EXPECT_NEAR(prop.log_density(x), oracle::mvt_logpdf(x, prop.mean, scale, 10.0), 1e-9);
  }
}

TEST(TailorProposal, SampleMomentsMatchT) {
  const auto f = make_data(40, 0.2, 0.5, 7);
  const auto ctx = make_ctx(f, 10.0, 0.5);
  const auto prop = tailor_proposal(ctx, VectorXd::Zero(2), both());
  Random rng(8);
  const int n = 200000;
  VectorXd sum = VectorXd::Zero(2);
  MatrixXd sq = MatrixXd::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    const VectorXd x = prop.sample(rng) - prop.mean;
    sum += x;
    sq += x * x.transpose();
  }
  // Covariance of a t with df nu is nu / (nu - 2) times the scale matrix.
  const MatrixXd want = 10.0 / 8.0 * prop.precision.inverse();
  const MatrixXd got = sq / n;
  for (Index a = 0; a < 2; ++a) {
    EXPECT_NEAR(sum(a) / n, 0.0, 4.0 * std::sqrt(want(a, a) / n));
    for (Index b = 0; b < 2; ++b) EXPECT_NEAR(got(a, b), want(a, b), 0.03 * std::sqrt(want(a, a) * want(b, b)));
  }
}

TEST(FlipIndicators, RespectsForcedAndSubsetSize) {
  Indicators ind(5), forced(5);
  ind << true, false, true, false, false;
  forced << true, false, false, false, true;
  Random rng(9);
  for (int i = 0; i < 200; ++i) {
    const Indicators out = flip_indicators(ind, forced, 2, rng);
    EXPECT_TRUE(out(0));
    EXPECT_FALSE(out(4));
    EXPECT_EQ((out.array() != ind.array()).count(), 2);
  }
  EXPECT_TRUE((flip_indicators(ind, forced, 0, rng) == ind).all());
  EXPECT_EQ((flip_indicators(ind, forced, 9, rng).array() != ind.array()).count(), 3);
}

TEST(ProposeGamma, ZeroFlipKeepsIndicators) {
  const auto f = make_data(40, 0.0, 0.0, 10);
  const auto ctx = make_ctx(f, 10.0, 0.5);
  Random rng(11);
  VectorXd g(2);
  g << 0.1, 0.0;
  const auto prop = propose_gamma(ctx, g, intercept_only(), rng, 0);
  ASSERT_TRUE(prop.ok);
  EXPECT_TRUE((prop.ind == intercept_only()).all());
  EXPECT_EQ(prop.gamma(1), 0.0);
}

TEST(ProposeGamma, OverflowStartIsReportedNotThrown) {
  Fixture f = make_data(20, 0.0, 0.0, 12);
  f.Z(3, 1) = 1e6;
  const auto ctx = make_ctx(f, 10.0, 0.5);
  Random rng(13);
  VectorXd g(2);
  g << 0.0, 1.0;
  const auto res = mh_step_gamma(ctx, g, both(), rng, false);
  EXPECT_FALSE(res.accepted);
  EXPECT_EQ(res.gamma, g);
}

TEST(MhStepGamma, FixedIndicatorChainMatchesQuadrature) {
  // One free coefficient: intercept only, posterior of gamma0 on a grid.
  const auto f = make_data(30, 0.7, 0.0, 14);
  const auto ctx = make_ctx(f, 10.0, 0.5);
  auto lp = [&](double g) { return log_posterior_gamma(ctx, VectorXd::Constant(1, g), intercept_only()); };
  const double ref = lp(std::log(f.e.squaredNorm() / 30.0));
  const double z = oracle::simpson([&](double g) { return std::exp(lp(g) - ref); }, -5.0, 6.0, 4000);
  const double mean = oracle::simpson([&](double g) { return g * std::exp(lp(g) - ref); }, -5.0, 6.0, 4000) / z;
  const double m2 = oracle::simpson([&](double g) { return g * g * std::exp(lp(g) - ref); }, -5.0, 6.0, 4000) / z;
  const double sd = std::sqrt(m2 - mean * mean);

  Random rng(15);
  VectorXd g = VectorXd::Zero(2);
  Indicators ind = intercept_only();
  const int n = 40000;
  double s = 0.0, s2 = 0.0;
  int acc = 0;
  for (int i = 0; i < n; ++i) {
    const auto r = mh_step_gamma(ctx, g, ind, rng, false);
    g = r.gamma;
    acc += r.accepted ? 1 : 0;
    s += g(0);
    s2 += g(0) * g(0);
  }
  const double m_hat = s / n;
  const double sd_hat = std::sqrt(s2 / n - m_hat * m_hat);
  EXPECT_GT(static_cast<double>(acc) / n, 0.8);
  EXPECT_NEAR(m_hat, mean, 0.03 * sd + 4.0 * sd / std::sqrt(n / 2.0));
  EXPECT_NEAR(sd_hat, sd, 0.03 * sd);
}

TEST(MhStepGamma, IndicatorPosteriorMatchesQuadrature) {
  // Unit prior variance keeps the Bayes factor moderate so both models get
  // visited; exact Pr(I1 = 1) from 1-D and 2-D Simpson integrals.
  const auto f = make_data(40, 0.3, 0.35, 16);
  const auto ctx = make_ctx(f, 1.0, 0.5);
  auto lp1 = [&](double a) { return log_posterior_gamma(ctx, VectorXd::Constant(1, a), intercept_only()); };
  auto lp2 = [&](double a, double b) {
    VectorXd v(2);
    v << a, b;
    return log_posterior_gamma(ctx, v, both());
  };
  const double ref = lp1(std::log(f.e.squaredNorm() / 40.0));
  const double z0 = oracle::simpson([&](double a) { return std::exp(lp1(a) - ref); }, -4.0, 5.0, 2000);
  const double z1 = oracle::simpson(
      [&](double a) { return oracle::simpson([&](double b) { return std::exp(lp2(a, b) - ref); }, -4.0, 4.0, 400); },
      -4.0, 5.0, 400);
  const double p_exact = z1 / (z0 + z1);
  ASSERT_GT(p_exact, 0.1);
  ASSERT_LT(p_exact, 0.9);

  Random rng(17);
  VectorXd g = VectorXd::Zero(2);
  Indicators ind = intercept_only();
  const int n = 60000;
  int on = 0;
  for (int i = 0; i < n; ++i) {
    const auto r = mh_step_gamma(ctx, g, ind, rng, i % 2 == 0);
    g = r.gamma;
    ind = r.ind;
    on += ind(1) ? 1 : 0;
    if (!ind(1)) {
      ASSERT_EQ(g(1), 0.0);
    }
  }
  EXPECT_NEAR(static_cast<double>(on) / n, p_exact, 0.02);
}
