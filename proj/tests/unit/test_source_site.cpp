#include "fedm/source_site.hpp"

#include "helpers.hpp"

#include <gtest/gtest.h>

using namespace fedm;

namespace {

TargetSummary broadcast_around(const Vector& theta_hat, Index count, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 0.1);
  TargetSummary t;
  t.n_target = 100;
  t.theta_hat = theta_hat;
  t.a_hat = Matrix::Identity(theta_hat.size(), theta_hat.size());
  t.sigma_s_hat = t.a_hat;
  t.broadcast_draws.resize(count, theta_hat.size());
  for (Index j = 0; j < count; ++j) {
    for (Index u = 0; u < theta_hat.size(); ++u) {
      t.broadcast_draws(j, u) = theta_hat(u) + normal(rng);
    }
  }
  return t;
}

}  // namespace

TEST(SourceSite, RecoversQuadraticScoreAndHessianExactly) {
  const Index d = 3;
  const Vector mu = test::random_vector(d, 1, 0.5);
  const Matrix a = test::random_pd(d, 2);
  QuadraticProblem problem(mu, a, 50.0);
  const Vector theta_hat = test::random_vector(d, 3, 0.5);
  const auto broadcast = broadcast_around(theta_hat, 30, 4);

  PerturbConfig config;
  config.replicates = 20;
  const auto s = build_source_summary(problem, placeholder_dataset(50, "src"), broadcast, config);
  EXPECT_EQ(s.site, "src");
  EXPECT_EQ(s.n, 50);
  EXPECT_LT((s.score - a * (theta_hat - mu)).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((s.a - a).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_TRUE(s.a_is_pd);
  // multinomial weights sum to n, so the perturbed differences never vary
  EXPECT_LT(s.sigma.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SourceSite, RegressionSplitsScoreAndHessian) {
  Matrix deltas(6, 2);
  deltas << 1, 0, 0, 1, 1, 1, -1, 2, 0.5, -0.5, 2, 1;
  Vector g(2);
  g << 0.3, -0.7;
  Matrix h(2, 2);
  h << 2.0, 0.4, 0.4, 1.0;
  Matrix features(6, 3);
  Vector diffs(6);
  for (Index j = 0; j < 6; ++j) {
    const Vector dl = deltas.row(j).transpose();
    features.row(j) << dl(0) * dl(0), dl(0) * dl(1), dl(1) * dl(1);
    diffs(j) = g.dot(dl) + 0.5 * dl.dot(h * dl);
  }
  const auto out = regress_score_hessian(diffs, deltas, features);
  EXPECT_LT((out.score - g).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((out.a - h).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SourceSite, PositiveDefiniteCheck) {
  EXPECT_TRUE(is_positive_definite(Matrix::Identity(3, 3)));
  Matrix m(2, 2);
  m << 1.0, 0.0, 0.0, -1e-3;
  EXPECT_FALSE(is_positive_definite(m));
  m(1, 1) = 1e-12;
  EXPECT_FALSE(is_positive_definite(m));
  m(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(is_positive_definite(m));
  EXPECT_FALSE(is_positive_definite(Matrix()));
}

TEST(SourceSite, RejectsTooFewRows) {
  QuadraticProblem problem(Vector::Zero(3), Matrix::Identity(3, 3), 10.0);
  const auto broadcast = broadcast_around(Vector::Zero(3), 20, 5);
  PerturbConfig config;
  config.replicates = 5;
  // d + d(d+1)/2 = 9
  EXPECT_THROW(build_source_summary(problem, placeholder_dataset(8), broadcast, config),
               ConfigError);
  EXPECT_NO_THROW(build_source_summary(problem, placeholder_dataset(9), broadcast, config));
}

TEST(SourceSite, RejectsBroadcastOfWrongDimension) {
  QuadraticProblem problem(Vector::Zero(2), Matrix::Identity(2, 2), 10.0);
  const auto broadcast = broadcast_around(Vector::Zero(3), 20, 6);
  EXPECT_THROW(build_source_summary(problem, placeholder_dataset(30), broadcast, PerturbConfig{}),
               ConfigError);
}

TEST(SourceSite, NonConvexSourceFlagsIndefiniteHessian) {
  Matrix a(2, 2);
  a << 1.0, 0.0, 0.0, -1.0;
  QuadraticProblem problem(Vector::Zero(2), a, 10.0);
  const auto broadcast = broadcast_around(Vector::Zero(2), 15, 7);
  PerturbConfig config;
  config.replicates = 5;
  const auto s = build_source_summary(problem, placeholder_dataset(30), broadcast, config);
  EXPECT_FALSE(s.a_is_pd);
}
